//! Network-assisted rate adaptation for HTTP streaming clients that share a
//! cellular bottleneck.
//!
//! An operator-side controller picks the bitrate of every client jointly by
//! solving a finite-horizon Markov decision process whose reward is the
//! operator's profit: playback income minus rebuffering, smoothness and
//! congestion costs. The crate contains the profit model, the backward
//! induction solver, the baseline policies it is compared with, a seeded
//! session simulator and the metrics/CSV layer used by the `mdp-abr` CLI.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`, which is what the CLI uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod economics;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod scalar;
pub mod sim;

pub use config::{diagnose, load_scenario, parse_scenario, Check, Diagnostics};
pub use economics::{
    bottleneck_cost, buffering_cost, playback_income, settle_stage, smoothness_cost, stage_profit,
    DerivedConstants, Payoff, ProfitModel, ProfitParams, StageSettlement, Theta, UserProfit,
    VariationPenalty,
};
pub use error::{Error, Result};
pub use experiment::{
    cmd_run, cmd_solve, cmd_validate, run_experiment, ExperimentSpec, RunOptions, RunReport,
    SweepAxis,
};
pub use mdp::{
    backward_induction, channel_transition_prob, extract_policy, feasible_actions, transition_prob,
    PolicyTable, Solver,
};
pub use metrics::{aggregate_runs, summarize, AggregateRow, SessionSummary, UserSummary};
pub use model::{
    enumerate_states, map_bandwidth_to_state, Action, ChannelModel, QualityLadder, StateSpace,
    SystemState, UserState,
};
pub use policies::{decide_myopic, decide_proposed, solve_ideal, IdealPlan, Policy};
pub use scalar::Scalar;
pub use sim::{
    effective_bandwidth, run_arm, run_session, step_buffer, Arm, InitialChannel, Scenario,
    SegmentRecord, SessionConfig, SessionTrace, SharingMode, UserSegment,
};

pub type QualityLadder64 = QualityLadder<f64>;
pub type ChannelModel64 = ChannelModel<f64>;
pub type ProfitParams64 = ProfitParams<f64>;
pub type ProfitModel64 = ProfitModel<f64>;
pub type PolicyTable64 = PolicyTable<f64>;
pub type Scenario64 = Scenario<f64>;
pub type SessionConfig64 = SessionConfig<f64>;
