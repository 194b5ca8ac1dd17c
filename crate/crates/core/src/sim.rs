//! Seeded discrete-time session simulator.
//!
//! Each run evolves one Markov channel per user on the segment grid, asks a
//! policy for the joint rate at every switching point, shares the bottleneck
//! between users, and plays the downloaded segments through a fluid buffer.
//! Profit is booked per stage with the representative bandwidth of the
//! channel state in effect during the download.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::economics::{settle_stage, ProfitModel};
use crate::error::{Error, Result};
use crate::mdp::PolicyTable;
use crate::model::{
    map_bandwidth_to_state, Action, ChannelModel, SystemState, DEFAULT_STATE_SPACE_CAP,
};
use crate::policies::{
    decide_myopic, decide_proposed, solve_ideal, Ewma, LastSample, Policy, ThroughputEstimator,
};
use crate::scalar::Scalar;

/// How the bottleneck capacity is split when the users' demand exceeds it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SharingMode {
    /// Capacity shared in proportion to the streamed rates.
    #[default]
    Proportional,
    /// No shared bottleneck; each user gets its own link bandwidth.
    None,
}

impl FromStr for SharingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "proportional" => Ok(Self::Proportional),
            "none" => Ok(Self::None),
            other => Err(format!("unknown sharing mode `{other}`")),
        }
    }
}

/// Where each user's channel starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialChannel {
    /// Drawn from the stationary distribution of the transition matrix.
    #[default]
    Stationary,
    Fixed(usize),
}

/// One arm of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Proposed,
    Myopic,
    Ideal,
    /// Conventional client-driven system: myopic clients contending under
    /// `client_centric_sharing`.
    ClientCentric,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Proposed, Arm::Myopic, Arm::Ideal, Arm::ClientCentric];

    pub fn label(&self) -> &'static str {
        match self {
            Arm::Proposed => "proposed",
            Arm::Myopic => "myopic",
            Arm::Ideal => "ideal",
            Arm::ClientCentric => "client_centric",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Arm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| format!("unknown arm `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig<T> {
    pub num_users: usize,
    /// Number of segments (decision epochs) per session.
    pub horizon: usize,
    pub segment_seconds: T,
    pub frames_per_second: T,
    pub initial_buffer_frames: T,
    /// Player buffer capacity; a full buffer makes the client wait before the
    /// next request. `None` means unbounded.
    pub max_buffer_frames: Option<T>,
    pub initial_rate_index: usize,
    pub initial_channel: InitialChannel,
    pub num_runs: usize,
    pub rng_seed: u64,
    /// Sharing rule of the network-assisted arms (proposed, ideal, myopic).
    pub sharing_mode: SharingMode,
    pub client_centric_sharing: SharingMode,
    /// Newest-sample weight of an EWMA throughput estimate for the myopic
    /// clients; `None` uses the last segment's throughput.
    pub myopic_ewma_weight: Option<T>,
    pub state_space_cap: u64,
}

impl<T: Scalar> SessionConfig<T> {
    pub fn initial_buffer_seconds(&self) -> T {
        self.initial_buffer_frames / self.frames_per_second
    }

    pub fn max_buffer_seconds(&self) -> Option<T> {
        self.max_buffer_frames.map(|f| f / self.frames_per_second)
    }

    /// Defaults for everything but the user count and horizon.
    pub fn new(num_users: usize, horizon: usize) -> Self {
        Self {
            num_users,
            horizon,
            segment_seconds: T::one(),
            frames_per_second: T::lit(24.0),
            initial_buffer_frames: T::lit(80.0),
            max_buffer_frames: None,
            initial_rate_index: 0,
            initial_channel: InitialChannel::Stationary,
            num_runs: 1,
            rng_seed: 0,
            sharing_mode: SharingMode::Proportional,
            client_centric_sharing: SharingMode::Proportional,
            myopic_ewma_weight: None,
            state_space_cap: DEFAULT_STATE_SPACE_CAP,
        }
    }
}

/// A complete, validated experiment scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub name: String,
    pub model: ProfitModel<T>,
    pub session: SessionConfig<T>,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        name: impl Into<String>,
        model: ProfitModel<T>,
        session: SessionConfig<T>,
    ) -> Result<Self> {
        let s = &session;
        let bad = |m: String| Err(Error::InvalidSession(m));
        if s.num_users != model.num_users() {
            return bad(format!(
                "{} users but {} priority coefficients",
                s.num_users,
                model.num_users()
            ));
        }
        if s.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if s.num_runs == 0 {
            return bad("num_runs must be at least 1".into());
        }
        if !(s.segment_seconds > T::zero()) {
            return bad("segment_seconds must be positive".into());
        }
        if !(s.frames_per_second > T::zero()) {
            return bad("frames_per_second must be positive".into());
        }
        if !(s.initial_buffer_frames >= T::zero()) {
            return bad("initial_buffer_frames must be nonnegative".into());
        }
        if let Some(cap) = s.max_buffer_seconds() {
            if cap < s.segment_seconds || cap < s.initial_buffer_seconds() {
                return bad(
                    "max_buffer_frames must hold one segment and the initial buffer".into(),
                );
            }
        }
        if s.initial_rate_index >= model.ladder.len() {
            return bad(format!(
                "initial_rate_index {} outside the ladder",
                s.initial_rate_index
            ));
        }
        if let InitialChannel::Fixed(k) = s.initial_channel {
            if k >= model.channel.num_states() {
                return bad(format!("initial channel state {k} out of range"));
            }
        }
        if let Some(w) = s.myopic_ewma_weight {
            if !(w > T::zero() && w <= T::one()) {
                return bad("myopic_ewma_weight must lie in (0, 1]".into());
            }
        }
        Ok(Self {
            name: name.into(),
            model,
            session,
        })
    }

    pub fn sharing_for(&self, arm: Arm) -> SharingMode {
        match arm {
            Arm::ClientCentric => self.session.client_centric_sharing,
            _ => self.session.sharing_mode,
        }
    }
}

/// Channel state sequence of length `horizon + 1` starting at `initial_state`.
pub fn sample_channel_path<T: Scalar, R: Rng + ?Sized>(
    channel: &ChannelModel<T>,
    initial_state: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut path = Vec::with_capacity(horizon + 1);
    let mut state = initial_state;
    path.push(state);
    for _ in 0..horizon {
        state = draw_categorical(&channel.transition()[state], rng);
        path.push(state);
    }
    path
}

fn draw_categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        let w = w.as_f64();
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Random stream of one user in one run; distinct `(run, user)` pairs never share a stream.
pub fn user_rng(seed: u64, run_index: usize, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((run_index as u64) << 24) | user as u64);
    rng
}

/// Realised channel states `paths[t][user]` for `t` in `0..=horizon`.
pub fn sample_session_paths<T: Scalar>(
    scenario: &Scenario<T>,
    run_index: usize,
) -> Vec<Vec<usize>> {
    let s = &scenario.session;
    let channel = &scenario.model.channel;
    let stationary = channel.stationary_distribution();
    let per_user: Vec<Vec<usize>> = (0..s.num_users)
        .map(|user| {
            let mut rng = user_rng(s.rng_seed, run_index, user);
            let start = match s.initial_channel {
                InitialChannel::Stationary => draw_categorical(&stationary, &mut rng),
                InitialChannel::Fixed(k) => k,
            };
            sample_channel_path(channel, start, s.horizon, &mut rng)
        })
        .collect();
    (0..=s.horizon)
        .map(|t| per_user.iter().map(|p| p[t]).collect())
        .collect()
}

/// Per-user throughput for one segment.
///
/// Under proportional sharing, if the users' usable demand `sum(min(raw_i, rate_i))`
/// exceeds `r_th_kbps`, user `i` receives `min(raw_i, r_th * rate_i / sum(rates))`.
pub fn effective_bandwidth<T: Scalar>(
    chosen_rates_kbps: &[T],
    raw_bw_kbps: &[T],
    r_th_kbps: T,
    mode: SharingMode,
) -> Vec<T> {
    match mode {
        SharingMode::None => raw_bw_kbps.to_vec(),
        SharingMode::Proportional => {
            let demand: T = chosen_rates_kbps
                .iter()
                .zip(raw_bw_kbps)
                .map(|(r, b)| r.min(*b))
                .sum();
            if demand <= r_th_kbps {
                return raw_bw_kbps.to_vec();
            }
            let total: T = chosen_rates_kbps.iter().copied().sum();
            chosen_rates_kbps
                .iter()
                .zip(raw_bw_kbps)
                .map(|(r, b)| b.min(r_th_kbps * *r / total))
                .collect()
        }
    }
}

/// Fluid buffer update for one segment download.
///
/// Playback drains the buffer in real time while downloading; once empty it
/// stalls. Returns `(new_buffer_seconds, rebuffer_seconds)`.
pub fn step_buffer<T: Scalar>(
    buffer_seconds: T,
    segment_seconds: T,
    download_seconds: T,
) -> (T, T) {
    let rebuffer = (download_seconds - buffer_seconds).max(T::zero());
    let drained = (buffer_seconds - download_seconds).max(T::zero());
    (drained + segment_seconds, rebuffer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSegment<T> {
    pub rate_index: usize,
    pub rate_kbps: T,
    /// Channel state during this segment's download.
    pub channel_state: usize,
    pub effective_bw_kbps: T,
    pub download_s: T,
    pub rebuffer_s: T,
    /// Time spent waiting for room in a full buffer.
    pub idle_s: T,
    /// Buffer level after the segment arrived (and any idle wait).
    pub buffer_s: T,
    pub income: T,
    pub buffering_cost: T,
    pub variation_cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord<T> {
    pub epoch: usize,
    pub users: Vec<UserSegment<T>>,
    pub bottleneck_cost: T,
    pub overloaded: bool,
    pub stage_profit: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace<T> {
    pub arm: Arm,
    pub run_index: usize,
    pub records: Vec<SegmentRecord<T>>,
    /// Running profit total accumulated by the simulator.
    pub profit: T,
}

/// Plays one session of `scenario` under `policy`.
pub fn run_session<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &Policy<'_, T>,
    sharing: SharingMode,
    run_index: usize,
) -> Result<Vec<SegmentRecord<T>>> {
    let paths = sample_session_paths(scenario, run_index);
    simulate(scenario, policy, sharing, &paths).map(|(records, _)| records)
}

fn simulate<T: Scalar>(
    scenario: &Scenario<T>,
    policy: &Policy<'_, T>,
    sharing: SharingMode,
    paths: &[Vec<usize>],
) -> Result<(Vec<SegmentRecord<T>>, T)> {
    let s = &scenario.session;
    let model = &scenario.model;
    let n = s.num_users;
    let seg = s.segment_seconds;
    let cap = s.max_buffer_seconds();
    if let Policy::Ideal(plan) = policy {
        if plan.len() != s.horizon {
            return Err(Error::InvalidSession(format!(
                "ideal plan covers {} epochs, horizon is {}",
                plan.len(),
                s.horizon
            )));
        }
    }

    let mut estimators: Vec<Box<dyn ThroughputEstimator<T>>> = (0..n)
        .map(|_| -> Box<dyn ThroughputEstimator<T>> {
            match s.myopic_ewma_weight {
                Some(w) => Box::new(Ewma::new(w)),
                None => Box::new(LastSample::default()),
            }
        })
        .collect();
    let mut rates = vec![s.initial_rate_index; n];
    let mut buffers = vec![s.initial_buffer_seconds(); n];
    let mut records = Vec::with_capacity(s.horizon);
    let mut total = T::zero();

    for t in 0..s.horizon {
        let observed: Vec<usize> = paths[t]
            .iter()
            .map(|&c| map_bandwidth_to_state(model.channel.bandwidth(c), &model.channel))
            .collect();
        let state = SystemState::from_parts(&rates, &observed);
        let action = match policy {
            Policy::Proposed { table, stationary } => {
                decide_proposed(table, t, &state, *stationary)?
            }
            Policy::Ideal(plan) => plan[t].clone(),
            Policy::Myopic => {
                let estimates: Option<Vec<T>> = estimators.iter().map(|e| e.estimate()).collect();
                match estimates {
                    Some(bw) => decide_myopic(&bw, &model.ladder),
                    None => Action::new(vec![0; n]),
                }
            }
        };

        let next_chans = &paths[t + 1];
        let rates_kbps = action.rates_kbps(&model.ladder);
        let raw: Vec<T> = next_chans
            .iter()
            .map(|&c| model.channel.bandwidth(c))
            .collect();
        let effective = effective_bandwidth(&rates_kbps, &raw, model.params.r_th_kbps, sharing);
        let next_state = SystemState::from_parts(action.rates(), next_chans);
        let settled = settle_stage(&state, &action, &next_state, model);

        let mut users = Vec::with_capacity(n);
        for i in 0..n {
            let download = rates_kbps[i] * seg / effective[i];
            let (mut buffer, rebuffer) = step_buffer(buffers[i], seg, download);
            let mut idle = T::zero();
            if let Some(cap) = cap {
                if buffer > cap {
                    idle = buffer - cap;
                    buffer = cap;
                }
            }
            buffers[i] = buffer;
            estimators[i].observe(effective[i]);
            let terms = settled.users[i];
            users.push(UserSegment {
                rate_index: action.rates()[i],
                rate_kbps: rates_kbps[i],
                channel_state: next_chans[i],
                effective_bw_kbps: effective[i],
                download_s: download,
                rebuffer_s: rebuffer,
                idle_s: idle,
                buffer_s: buffer,
                income: terms.income,
                buffering_cost: terms.buffering,
                variation_cost: terms.variation,
            });
        }
        total = total + settled.profit;
        records.push(SegmentRecord {
            epoch: t,
            users,
            bottleneck_cost: settled.bottleneck,
            overloaded: settled.overloaded,
            stage_profit: settled.profit,
        });
        rates = action.rates().to_vec();
    }
    Ok((records, total))
}

/// Runs one arm for one run index, deriving the policy the arm prescribes.
///
/// `table` is required for [`Arm::Proposed`].
pub fn run_arm<T: Scalar>(
    scenario: &Scenario<T>,
    arm: Arm,
    table: Option<&PolicyTable<T>>,
    stationary: bool,
    run_index: usize,
) -> Result<SessionTrace<T>> {
    let paths = sample_session_paths(scenario, run_index);
    let ideal;
    let policy = match arm {
        Arm::Proposed => Policy::Proposed {
            table: table
                .ok_or_else(|| Error::InvalidSession("proposed arm needs a policy table".into()))?,
            stationary,
        },
        Arm::Ideal => {
            let initial = vec![scenario.session.initial_rate_index; scenario.session.num_users];
            ideal = solve_ideal(&paths, &initial, &scenario.model)?;
            Policy::Ideal(ideal.actions)
        }
        Arm::Myopic | Arm::ClientCentric => Policy::Myopic,
    };
    let (records, profit) = simulate(scenario, &policy, scenario.sharing_for(arm), &paths)?;
    Ok(SessionTrace {
        arm,
        run_index,
        records,
        profit,
    })
}

/// Largest per-row violation of the fluid bookkeeping
/// `buffer_before + segment = buffer_after + played`, where
/// `played = (download - rebuffer) + idle`.
pub fn buffer_conservation_residual<T: Scalar>(
    records: &[SegmentRecord<T>],
    initial_buffer_s: T,
    segment_seconds: T,
) -> T {
    let n = records.first().map_or(0, |r| r.users.len());
    let mut worst = T::zero();
    for i in 0..n {
        let mut before = initial_buffer_s;
        for r in records {
            let u = &r.users[i];
            let played = (u.download_s - u.rebuffer_s) + u.idle_s;
            worst = worst.max((before + segment_seconds - (u.buffer_s + played)).abs());
            before = u.buffer_s;
        }
    }
    worst
}
