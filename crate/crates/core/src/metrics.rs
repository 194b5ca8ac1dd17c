//! Session-level playback and profit metrics, and their aggregation over runs.
//!
//! A session's wall-clock duration is the played content plus the stalls,
//! `T * T_seg + sum(rebuffer)`; the buffering ratio and the per-second
//! rates below are all taken against it.

use crate::economics::settle_stage;
use crate::error::{Error, Result};
use crate::model::{Action, SystemState};
use crate::scalar::Scalar;
use crate::sim::{Arm, Scenario, SessionTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct UserSummary<T> {
    pub avg_bitrate_kbps: T,
    pub buffering_ratio: T,
    /// Segments that stalled, per second of wall clock.
    pub stall_events_per_s: T,
    /// Stalled frames per second of wall clock.
    pub stall_frames_per_s: T,
    /// Consecutive switches of at least the variation threshold, counting
    /// the switch away from the initial rate.
    pub significant_variations: usize,
    pub rebuffer_s: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary<T> {
    pub arm: Arm,
    pub run_index: usize,
    pub users: Vec<UserSummary<T>>,
    pub profit: T,
    pub overloaded_epochs: usize,
}

impl<T: Scalar> SessionSummary<T> {
    /// Flattened `(column, value)` pairs in a stable order.
    pub fn fields(&self) -> Vec<(String, T)> {
        let count = |c: usize| T::from_usize(c).unwrap();
        let mut out = vec![
            ("profit".to_string(), self.profit),
            (
                "overloaded_epochs".to_string(),
                count(self.overloaded_epochs),
            ),
        ];
        for (i, u) in self.users.iter().enumerate() {
            let p = format!("u{}_", i + 1);
            out.push((format!("{p}avg_bitrate_kbps"), u.avg_bitrate_kbps));
            out.push((format!("{p}buffering_ratio"), u.buffering_ratio));
            out.push((format!("{p}stall_events_per_s"), u.stall_events_per_s));
            out.push((format!("{p}stall_frames_per_s"), u.stall_frames_per_s));
            out.push((
                format!("{p}significant_variations"),
                count(u.significant_variations),
            ));
            out.push((format!("{p}rebuffer_s"), u.rebuffer_s));
        }
        out
    }
}

pub fn summarize<T: Scalar>(
    trace: &SessionTrace<T>,
    scenario: &Scenario<T>,
) -> Result<SessionSummary<T>> {
    let records = &trace.records;
    if records.is_empty() {
        return Err(Error::InvalidSession(
            "cannot summarize an empty trace".into(),
        ));
    }
    let session = &scenario.session;
    let params = &scenario.model.params;
    let ladder = &scenario.model.ladder;
    let segments = T::from_usize(records.len()).unwrap();
    let content_s = segments * session.segment_seconds;

    let users = (0..records[0].users.len())
        .map(|i| {
            let rows = records.iter().map(|r| &r.users[i]);
            let avg = rows.clone().map(|u| u.rate_kbps).sum::<T>() / segments;
            let rebuffer: T = rows.clone().map(|u| u.rebuffer_s).sum();
            let stalls = rows.clone().filter(|u| u.rebuffer_s > T::zero()).count();
            let wall = content_s + rebuffer;
            let mut prev = ladder.rate(session.initial_rate_index);
            let mut variations = 0;
            for u in rows {
                if (u.rate_kbps - prev).abs() >= params.delta_kbps {
                    variations += 1;
                }
                prev = u.rate_kbps;
            }
            UserSummary {
                avg_bitrate_kbps: avg,
                buffering_ratio: rebuffer / wall,
                stall_events_per_s: T::from_usize(stalls).unwrap() / wall,
                stall_frames_per_s: rebuffer * session.frames_per_second / wall,
                significant_variations: variations,
                rebuffer_s: rebuffer,
            }
        })
        .collect();

    Ok(SessionSummary {
        arm: trace.arm,
        run_index: trace.run_index,
        users,
        profit: records.iter().map(|r| r.stage_profit).sum(),
        overloaded_epochs: records.iter().filter(|r| r.overloaded).count(),
    })
}

/// Re-prices every row of a trace through the profit model.
pub fn recompute_profit<T: Scalar>(trace: &SessionTrace<T>, scenario: &Scenario<T>) -> T {
    let n = scenario.session.num_users;
    let mut rates = vec![scenario.session.initial_rate_index; n];
    let mut total = T::zero();
    for r in &trace.records {
        let chans: Vec<usize> = r.users.iter().map(|u| u.channel_state).collect();
        let action = Action::new(r.users.iter().map(|u| u.rate_index).collect());
        let state = SystemState::from_parts(&rates, &chans);
        let next = SystemState::from_parts(action.rates(), &chans);
        total = total + settle_stage(&state, &action, &next, &scenario.model).profit;
        rates = action.rates().to_vec();
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow<T> {
    pub metric: String,
    pub mean: T,
    /// Sample standard deviation; zero for a single run.
    pub stddev: T,
    pub runs: usize,
}

/// Mean and sample standard deviation of every summary field.
pub fn aggregate_runs<T: Scalar>(summaries: &[SessionSummary<T>]) -> Vec<AggregateRow<T>> {
    let Some(first) = summaries.first() else {
        return Vec::new();
    };
    let columns: Vec<Vec<(String, T)>> = summaries.iter().map(|s| s.fields()).collect();
    let n = T::from_usize(summaries.len()).unwrap();
    first
        .fields()
        .into_iter()
        .enumerate()
        .map(|(j, (metric, _))| {
            let values: Vec<T> = columns.iter().map(|c| c[j].1).collect();
            let mean = values.iter().copied().sum::<T>() / n;
            let stddev = if summaries.len() > 1 {
                let ss: T = values.iter().map(|v| (*v - mean) * (*v - mean)).sum();
                (ss / (n - T::one())).sqrt()
            } else {
                T::zero()
            };
            AggregateRow {
                metric,
                mean,
                stddev,
                runs: summaries.len(),
            }
        })
        .collect()
}
