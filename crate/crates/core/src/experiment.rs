//! Batch experiments: solving, running arms over sweeps and runs, and writing
//! the CSV outputs.
//!
//! An experiment spec is a TOML file:
//!
//! ```toml
//! scenario = "fair.cfg"          # relative to the spec file
//! arms = ["proposed", "myopic", "ideal"]
//! seed = 11                      # optional, overrides the scenario seed
//! stationary = false             # optional, reuse the epoch-0 decisions
//! policy_table = "fair.policy"   # optional, only without a sweep
//!
//! [sweep]                        # optional
//! axis = "r_th"                  # "none", "r_th" or "horizon"
//! values = [600.0, 850.0, 1100.0]
//! ```
//!
//! `cmd_run` writes into the output directory:
//!
//! * `summary.csv`: one row per (arm, sweep value, run) with columns
//!   `arm,sweep_axis,sweep_value,run` followed by [`SessionSummary::fields`];
//! * `aggregate.csv`: `arm,sweep_axis,sweep_value,metric,mean,stddev,runs`;
//! * `traces/<arm>[_<axis>-<value>]_run<NN>.csv`: one row per segment, columns
//!   `epoch,stage_profit,bottleneck_cost,overloaded` then, per user `i`,
//!   `u<i>_rate_index,u<i>_rate_kbps,u<i>_channel_state,u<i>_effective_bw_kbps,
//!   u<i>_download_s,u<i>_rebuffer_s,u<i>_idle_s,u<i>_buffer_s,u<i>_income,
//!   u<i>_buffering_cost,u<i>_variation_cost`.
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{diagnose, load_scenario, Diagnostics};
use crate::economics::ProfitModel;
use crate::error::{Error, Result};
use crate::mdp::{model_fingerprint, PolicyTable, Solver};
use crate::metrics::{aggregate_runs, summarize, SessionSummary};
use crate::scalar::Scalar;
use crate::sim::{run_arm, Arm, Scenario, SessionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepAxis {
    #[default]
    None,
    RTh,
    Horizon,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::RTh => "r_th",
            SweepAxis::Horizon => "horizon",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Resolved scenario path.
    pub scenario: PathBuf,
    pub arms: Vec<Arm>,
    pub axis: SweepAxis,
    /// Ascending, positive; empty when `axis` is `None`.
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub policy_table: Option<PathBuf>,
    pub stationary: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    scenario: PathBuf,
    arms: Vec<String>,
    seed: Option<u64>,
    policy_table: Option<PathBuf>,
    #[serde(default)]
    stationary: bool,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    #[serde(default)]
    values: Vec<f64>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let bad = |message: String| Error::Config {
            path: path.to_path_buf(),
            message,
        };
        let raw: RawSpec = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let arms = raw
            .arms
            .iter()
            .map(|a| a.parse::<Arm>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(bad)?;
        let (axis, values) = match raw.sweep {
            None => (SweepAxis::None, Vec::new()),
            Some(s) => {
                let axis = match s.axis.as_str() {
                    "none" => SweepAxis::None,
                    "r_th" => SweepAxis::RTh,
                    "horizon" => SweepAxis::Horizon,
                    other => return Err(bad(format!("unknown sweep axis `{other}`"))),
                };
                (axis, s.values)
            }
        };
        let spec = Self {
            scenario: base.join(raw.scenario),
            arms,
            axis,
            values,
            seed: raw.seed,
            policy_table: raw.policy_table.map(|p| base.join(p)),
            stationary: raw.stationary,
        };
        spec.check().map_err(bad)?;
        Ok(spec)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.arms.is_empty() {
            return Err("at least one arm is required".into());
        }
        let mut seen = self.arms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.arms.len() {
            return Err("arms are listed twice".into());
        }
        match self.axis {
            SweepAxis::None if !self.values.is_empty() => {
                return Err("sweep axis `none` takes no values".into())
            }
            SweepAxis::None => {}
            _ if self.values.is_empty() => return Err("sweep has no values".into()),
            _ => {}
        }
        if self.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err("sweep values must be positive".into());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err("sweep values must be strictly ascending".into());
        }
        if self.axis == SweepAxis::Horizon && self.values.iter().any(|v| v.fract() != 0.0) {
            return Err("horizon sweep values must be integers".into());
        }
        if self.policy_table.is_some() && self.axis != SweepAxis::None {
            return Err("a stored policy table cannot be combined with a sweep".into());
        }
        Ok(())
    }

    /// Sweep points, with a single `None` when there is no sweep.
    fn points(&self) -> Vec<Option<f64>> {
        if self.axis == SweepAxis::None {
            vec![None]
        } else {
            self.values.iter().map(|v| Some(*v)).collect()
        }
    }
}

/// Command-line overrides for `cmd_run`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub stationary: bool,
}

/// The scenario at one sweep point.
pub fn apply_sweep<T: Scalar>(
    base: &Scenario<T>,
    axis: SweepAxis,
    value: Option<f64>,
) -> Result<Scenario<T>> {
    let Some(v) = value else {
        return Ok(base.clone());
    };
    let mut model = base.model.clone();
    let mut session = base.session.clone();
    match axis {
        SweepAxis::None => {}
        SweepAxis::RTh => {
            let mut params = model.params.clone();
            params.r_th_kbps = T::lit(v);
            model = ProfitModel::new(model.ladder, model.channel, params)?;
        }
        SweepAxis::Horizon => session.horizon = v as usize,
    }
    Scenario::new(base.name.clone(), model, session)
}

pub fn solve_scenario<T: Scalar>(scenario: &Scenario<T>) -> Result<PolicyTable<T>> {
    Solver::with_cap(&scenario.model, scenario.session.state_space_cap)?
        .solve(scenario.session.horizon)
}

/// Solves the scenario at `config` and writes its policy table to `out`.
pub fn cmd_solve<T: Scalar>(config: &Path, out: &Path) -> Result<PolicyTable<T>> {
    let scenario = load_scenario::<T>(config)?;
    let table = solve_scenario(&scenario)?;
    let mut bytes = Vec::new();
    table.write_to(&mut bytes)?;
    write_atomic(out, &bytes)?;
    Ok(table)
}

pub fn cmd_validate<T: Scalar>(config: &Path) -> Result<Diagnostics> {
    diagnose::<T>(config)
}

pub fn load_policy_table<T: Scalar>(path: &Path, scenario: &Scenario<T>) -> Result<PolicyTable<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let table = PolicyTable::read_from(BufReader::new(fs::File::open(path)?))?;
    let expected = model_fingerprint(&scenario.model);
    if table.fingerprint() != expected {
        return Err(Error::PolicyMismatch(format!(
            "{} was solved for model {}, the scenario is {expected}",
            path.display(),
            table.fingerprint()
        )));
    }
    if table.horizon() < scenario.session.horizon {
        return Err(Error::PolicyMismatch(format!(
            "{} covers {} epochs, the session needs {}",
            path.display(),
            table.horizon(),
            scenario.session.horizon
        )));
    }
    Ok(table)
}

/// One simulated session with its summary.
#[derive(Debug, Clone)]
pub struct Cell<T> {
    pub sweep_value: Option<f64>,
    pub trace: SessionTrace<T>,
    pub summary: SessionSummary<T>,
}

#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub axis: SweepAxis,
    pub cells: Vec<Cell<T>>,
}

impl<T: Scalar> RunReport<T> {
    /// Summaries of one (arm, sweep value) group, in run order.
    pub fn summaries(&self, arm: Arm, sweep_value: Option<f64>) -> Vec<SessionSummary<T>> {
        self.cells
            .iter()
            .filter(|c| c.trace.arm == arm && c.sweep_value == sweep_value)
            .map(|c| c.summary.clone())
            .collect()
    }
}

type SweepPoint<T> = (Option<f64>, Scenario<T>, Option<PolicyTable<T>>);

/// Simulates every (sweep value, arm, run) cell without touching the disk.
pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec, opts: RunOptions) -> Result<RunReport<T>> {
    let mut base = load_scenario::<T>(&spec.scenario)?;
    if let Some(seed) = opts.seed.or(spec.seed) {
        base.session.rng_seed = seed;
    }
    let stationary = opts.stationary || spec.stationary;
    let needs_table = spec.arms.contains(&Arm::Proposed);

    let points: Vec<SweepPoint<T>> = spec
        .points()
        .into_par_iter()
        .map(|v| {
            let scenario = apply_sweep(&base, spec.axis, v)?;
            let table = match (&spec.policy_table, needs_table) {
                (_, false) => None,
                (Some(path), true) => Some(load_policy_table(path, &scenario)?),
                (None, true) => Some(solve_scenario(&scenario)?),
            };
            Ok((v, scenario, table))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, Arm, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, (_, s, _))| {
            spec.arms
                .iter()
                .flat_map(move |&arm| (0..s.session.num_runs).map(move |run| (p, arm, run)))
        })
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(p, arm, run)| {
            let (value, scenario, table) = &points[p];
            let trace = run_arm(scenario, arm, table.as_ref(), stationary, run)?;
            let summary = summarize(&trace, scenario)?;
            Ok(Cell {
                sweep_value: *value,
                trace,
                summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        axis: spec.axis,
        cells,
    })
}

/// Runs the experiment and writes traces, `summary.csv` and `aggregate.csv`.
pub fn cmd_run<T: Scalar>(
    spec_path: &Path,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<RunReport<T>> {
    let spec = ExperimentSpec::load(spec_path)?;
    let report = run_experiment::<T>(&spec, opts)?;
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces)?;

    report.cells.par_iter().try_for_each(|c| -> Result<()> {
        let name = trace_file_name(c.trace.arm, report.axis, c.sweep_value, c.trace.run_index);
        write_atomic(&traces.join(name), &trace_csv(&c.trace)?)
    })?;
    write_atomic(&out_dir.join("summary.csv"), &summary_csv(&report)?)?;
    write_atomic(
        &out_dir.join("aggregate.csv"),
        &aggregate_csv(&spec, &report)?,
    )?;
    Ok(report)
}

fn sweep_label(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn trace_file_name(arm: Arm, axis: SweepAxis, value: Option<f64>, run: usize) -> String {
    match value {
        Some(v) => format!("{arm}_{axis}-{v}_run{run:02}.csv"),
        None => format!("{arm}_run{run:02}.csv"),
    }
}

pub fn trace_csv<T: Scalar>(trace: &SessionTrace<T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = trace.records.first().map_or(0, |r| r.users.len());
    let mut header: Vec<String> = ["epoch", "stage_profit", "bottleneck_cost", "overloaded"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=n {
        for col in [
            "rate_index",
            "rate_kbps",
            "channel_state",
            "effective_bw_kbps",
            "download_s",
            "rebuffer_s",
            "idle_s",
            "buffer_s",
            "income",
            "buffering_cost",
            "variation_cost",
        ] {
            header.push(format!("u{i}_{col}"));
        }
    }
    w.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![
            r.epoch.to_string(),
            r.stage_profit.to_string(),
            r.bottleneck_cost.to_string(),
            u8::from(r.overloaded).to_string(),
        ];
        for u in &r.users {
            row.extend([
                u.rate_index.to_string(),
                u.rate_kbps.to_string(),
                u.channel_state.to_string(),
                u.effective_bw_kbps.to_string(),
                u.download_s.to_string(),
                u.rebuffer_s.to_string(),
                u.idle_s.to_string(),
                u.buffer_s.to_string(),
                u.income.to_string(),
                u.buffering_cost.to_string(),
                u.variation_cost.to_string(),
            ]);
        }
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn summary_csv<T: Scalar>(report: &RunReport<T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = report.cells.first() {
        let mut header: Vec<String> = ["arm", "sweep_axis", "sweep_value", "run"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(first.summary.fields().into_iter().map(|(k, _)| k));
        w.write_record(&header)?;
    }
    for c in &report.cells {
        let mut row = vec![
            c.trace.arm.to_string(),
            report.axis.to_string(),
            sweep_label(c.sweep_value),
            c.trace.run_index.to_string(),
        ];
        row.extend(c.summary.fields().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

fn aggregate_csv<T: Scalar>(spec: &ExperimentSpec, report: &RunReport<T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "arm",
        "sweep_axis",
        "sweep_value",
        "metric",
        "mean",
        "stddev",
        "runs",
    ])?;
    for v in spec.points() {
        for &arm in &spec.arms {
            for row in aggregate_runs(&report.summaries(arm, v)) {
                w.write_record([
                    arm.to_string(),
                    report.axis.to_string(),
                    sweep_label(v),
                    row.metric,
                    row.mean.to_string(),
                    row.stddev.to_string(),
                    row.runs.to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
