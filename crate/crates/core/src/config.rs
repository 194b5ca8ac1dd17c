//! Scenario files.
//!
//! A scenario is a TOML document with four tables:
//!
//! ```toml
//! name = "fair"
//!
//! [ladder]
//! rates_kbps = [95.11, 183.53, 364.63, 493.02, 798.09]
//!
//! [channel]
//! transition = [[0.5, 0.5], [0.2, 0.8]]
//! state_bandwidth_kbps = [95.0, 256.0]
//! boundaries_kbps = [256.0]
//!
//! [profit]
//! alpha = 0.3
//! beta = 0.5
//! gamma = 0.2
//! delta_kbps = 350.0
//! theta = "inf"            # or a number, cost per exceeded Kbps
//! r_th_kbps = 850.0
//! lambdas = [0.5, 0.5]     # one per user
//! variation_penalty = "symmetric"   # or "downward_only"
//!
//! [session]
//! horizon = 200
//! ```
//!
//! Every `[session]` key except `horizon` is optional; see [`SessionConfig::new`]
//! for the defaults.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::economics::{DerivedConstants, ProfitModel, ProfitParams, Theta, VariationPenalty};
use crate::error::{Error, Result};
use crate::mdp::feasible_actions;
use crate::model::{ChannelModel, QualityLadder, StateSpace};
use crate::scalar::Scalar;
use crate::sim::{InitialChannel, Scenario, SessionConfig, SharingMode};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    ladder: RawLadder,
    channel: RawChannel,
    profit: RawProfit,
    session: RawSession,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    rates_kbps: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    transition: Vec<Vec<f64>>,
    state_bandwidth_kbps: Vec<f64>,
    boundaries_kbps: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawTheta {
    Number(f64),
    Word(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfit {
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta_kbps: f64,
    theta: RawTheta,
    r_th_kbps: f64,
    lambdas: Vec<f64>,
    #[serde(default)]
    variation_penalty: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawInitialChannel {
    Fixed(usize),
    Word(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    horizon: usize,
    segment_seconds: Option<f64>,
    frames_per_second: Option<f64>,
    initial_buffer_frames: Option<f64>,
    max_buffer_frames: Option<f64>,
    initial_rate_index: Option<usize>,
    initial_channel: Option<RawInitialChannel>,
    num_runs: Option<usize>,
    seed: Option<u64>,
    sharing_mode: Option<String>,
    client_centric_sharing: Option<String>,
    myopic_ewma_weight: Option<f64>,
    state_space_cap: Option<u64>,
}

fn parse_raw(text: &str, path: &Path) -> Result<RawScenario> {
    toml::from_str(text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn lit<T: Scalar>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::lit(x)).collect()
}

impl RawScenario {
    fn ladder<T: Scalar>(&self) -> Result<QualityLadder<T>> {
        QualityLadder::new(lit(&self.ladder.rates_kbps))
    }

    fn channel<T: Scalar>(&self) -> Result<ChannelModel<T>> {
        let c = &self.channel;
        ChannelModel::new(
            c.transition.iter().map(|row| lit(row)).collect(),
            lit(&c.state_bandwidth_kbps),
            lit(&c.boundaries_kbps),
        )
    }

    fn params<T: Scalar>(&self) -> Result<ProfitParams<T>> {
        let p = &self.profit;
        let theta = match &p.theta {
            RawTheta::Number(x) if x.is_infinite() && *x > 0.0 => Theta::Infinite,
            RawTheta::Number(x) => Theta::Finite(T::lit(*x)),
            RawTheta::Word(w) if matches!(w.as_str(), "inf" | "infinity" | "forbidden") => {
                Theta::Infinite
            }
            RawTheta::Word(w) => {
                return Err(Error::InvalidParams(format!(
                    "theta `{w}` is neither a number nor \"inf\""
                )))
            }
        };
        let variation_penalty = match p.variation_penalty.as_deref() {
            None | Some("symmetric") => VariationPenalty::Symmetric,
            Some("downward_only") => VariationPenalty::DownwardOnly,
            Some(other) => {
                return Err(Error::InvalidParams(format!(
                    "unknown variation_penalty `{other}`"
                )))
            }
        };
        let params = ProfitParams {
            alpha: T::lit(p.alpha),
            beta: T::lit(p.beta),
            gamma: T::lit(p.gamma),
            delta_kbps: T::lit(p.delta_kbps),
            theta,
            r_th_kbps: T::lit(p.r_th_kbps),
            lambdas: lit(&p.lambdas),
            variation_penalty,
        };
        params.validate()?;
        Ok(params)
    }

    fn session<T: Scalar>(&self) -> Result<SessionConfig<T>> {
        let s = &self.session;
        let sharing = |v: &Option<String>| -> Result<SharingMode> {
            v.as_deref().map_or(Ok(SharingMode::default()), |m| {
                m.parse().map_err(Error::InvalidSession)
            })
        };
        let mut out = SessionConfig::new(self.profit.lambdas.len(), s.horizon);
        if let Some(x) = s.segment_seconds {
            out.segment_seconds = T::lit(x);
        }
        if let Some(x) = s.frames_per_second {
            out.frames_per_second = T::lit(x);
        }
        if let Some(x) = s.initial_buffer_frames {
            out.initial_buffer_frames = T::lit(x);
        }
        out.max_buffer_frames = s.max_buffer_frames.map(T::lit);
        if let Some(x) = s.initial_rate_index {
            out.initial_rate_index = x;
        }
        out.initial_channel = match &s.initial_channel {
            None => InitialChannel::Stationary,
            Some(RawInitialChannel::Fixed(k)) => InitialChannel::Fixed(*k),
            Some(RawInitialChannel::Word(w)) if w == "stationary" => InitialChannel::Stationary,
            Some(RawInitialChannel::Word(w)) => {
                return Err(Error::InvalidSession(format!(
                    "initial_channel `{w}` is neither an index nor \"stationary\""
                )))
            }
        };
        if let Some(x) = s.num_runs {
            out.num_runs = x;
        }
        if let Some(x) = s.seed {
            out.rng_seed = x;
        }
        out.sharing_mode = sharing(&s.sharing_mode)?;
        out.client_centric_sharing = sharing(&s.client_centric_sharing)?;
        out.myopic_ewma_weight = s.myopic_ewma_weight.map(T::lit);
        if let Some(x) = s.state_space_cap {
            out.state_space_cap = x;
        }
        Ok(out)
    }

    fn name(&self, path: &Path) -> String {
        self.name.clone().unwrap_or_else(|| {
            path.file_stem().map_or_else(
                || "scenario".to_string(),
                |s| s.to_string_lossy().into_owned(),
            )
        })
    }

    fn scenario<T: Scalar>(&self, path: &Path) -> Result<Scenario<T>> {
        let model = ProfitModel::new(self.ladder()?, self.channel()?, self.params()?)?;
        Scenario::new(self.name(path), model, self.session()?)
    }
}

/// Parses a scenario from TOML text; `path` is only used in messages and as
/// the fallback name.
pub fn parse_scenario<T: Scalar>(text: &str, path: &Path) -> Result<Scenario<T>> {
    parse_raw(text, path)?.scenario(path)
}

pub fn load_scenario<T: Scalar>(path: &Path) -> Result<Scenario<T>> {
    parse_scenario(&read(path)?, path)
}

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Everything `validate` reports about a scenario file.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub path: String,
    pub checks: Vec<Check>,
    /// Derived quantities, printed when the model could be built.
    pub derived: Vec<(String, String)>,
    infeasible: bool,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passes, 2 when the only failure is an empty
    /// feasible action set, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else if self.infeasible && self.checks.iter().filter(|c| !c.passed).count() == 1 {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.path)?;
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "  [{mark}] {}: {}", c.name, c.detail)?;
        }
        if !self.derived.is_empty() {
            writeln!(f, "derived constants")?;
            for (k, v) in &self.derived {
                writeln!(f, "  {k} = {v}")?;
            }
        }
        Ok(())
    }
}

fn check<V>(name: &'static str, r: &Result<V>, ok: impl FnOnce(&V) -> String) -> Check {
    match r {
        Ok(v) => Check {
            name,
            passed: true,
            detail: ok(v),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn fmt_vec<T: Scalar>(xs: &[T]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{:.6}", x.as_f64())).collect();
    format!("[{}]", parts.join(", "))
}

/// Runs every check that applies to the file, continuing past failures.
///
/// Only an unreadable or syntactically malformed file is returned as an error.
pub fn diagnose<T: Scalar>(path: &Path) -> Result<Diagnostics> {
    let raw = parse_raw(&read(path)?, path)?;
    let mut checks = Vec::new();
    let mut derived = Vec::new();

    let ladder = raw.ladder::<T>();
    checks.push(check("ladder", &ladder, |l: &QualityLadder<T>| {
        format!("{} versions, strictly increasing", l.len())
    }));
    let channel = raw.channel::<T>();
    checks.push(check("channel", &channel, |c: &ChannelModel<T>| {
        format!(
            "{} states, rows stochastic, bandwidths match regions",
            c.num_states()
        )
    }));
    let params = raw.params::<T>();
    checks.push(check("profit weights", &params, |p: &ProfitParams<T>| {
        format!(
            "alpha+beta+gamma = 1, {} priority coefficients sum to 1",
            p.num_users()
        )
    }));
    let session = raw.session::<T>();
    checks.push(check("session", &session, |s: &SessionConfig<T>| {
        format!(
            "horizon {}, {} runs, seed {}",
            s.horizon, s.num_runs, s.rng_seed
        )
    }));

    let mut infeasible = false;
    if let (Ok(ladder), Ok(channel), Ok(params), Ok(session)) =
        (&ladder, &channel, &params, &session)
    {
        let scenario = ProfitModel::new(ladder.clone(), channel.clone(), params.clone())
            .and_then(|m| Scenario::new(raw.name(path), m, session.clone()));
        checks.push(check("scenario", &scenario, |_| {
            "session agrees with the model".into()
        }));

        let space = StateSpace::new(
            ladder.len(),
            channel.num_states(),
            params.num_users(),
            session.state_space_cap,
        );
        checks.push(check("state space", &space, |s: &StateSpace| {
            format!("{} states", s.size())
        }));

        let actions = feasible_actions(params.num_users(), ladder, params);
        infeasible = actions.is_err();
        checks.push(check("feasible actions", &actions, |a| {
            format!("{} actions", a.len())
        }));

        let consts = DerivedConstants::new(ladder, channel, params);
        derived.push((
            "eta_play".into(),
            format!("{:.12}", consts.eta_play.as_f64()),
        ));
        derived.push(("eta_buf".into(), format!("{:.12}", consts.eta_buf.as_f64())));
        derived.push(("eta_var".into(), format!("{:.12}", consts.eta_var.as_f64())));
        derived.push((
            "delta_min_kbps".into(),
            format!("{:.6}", consts.delta_min_kbps.as_f64()),
        ));
        derived.push((
            "bw_min_kbps".into(),
            format!("{:.6}", channel.bw_min().as_f64()),
        ));
        derived.push((
            "stationary_distribution".into(),
            fmt_vec(&channel.stationary_distribution()),
        ));
        derived.push((
            "initial_buffer_s".into(),
            format!("{:.6}", session.initial_buffer_seconds().as_f64()),
        ));
    }

    Ok(Diagnostics {
        path: path.display().to_string(),
        checks,
        derived,
        infeasible,
    })
}
