//! Transition model, finite-horizon backward induction and the resulting
//! time-indexed policy table.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::economics::{Payoff, ProfitModel, ProfitParams, Theta};
use crate::error::{Error, Result};
use crate::model::{
    mixed_radix_digits, mixed_radix_index, Action, ChannelModel, QualityLadder, StateSpace,
    SystemState, DEFAULT_STATE_SPACE_CAP,
};
use crate::scalar::Scalar;

const TABLE_MAGIC: &str = "mdp-abr-policy-table v1";
const TABLE_ORDERING: &str = "ordering user-major/rate/channel";

/// Probability that independent per-user links move from `from` to `to`.
pub fn channel_transition_prob<T: Scalar>(
    from: &[usize],
    to: &[usize],
    channel: &ChannelModel<T>,
) -> T {
    assert_eq!(from.len(), to.len(), "channel vectors differ in length");
    from.iter()
        .zip(to)
        .fold(T::one(), |acc, (&i, &j)| acc * channel.prob(i, j))
}

/// `P_a(s, s')`: the rate component is deterministic, the channel component
/// follows the per-user Markov chains.
pub fn transition_prob<T: Scalar>(
    state: &SystemState,
    action: &Action,
    next_state: &SystemState,
    channel: &ChannelModel<T>,
) -> T {
    if next_state.rate_indices() != action.rates() {
        return T::zero();
    }
    channel_transition_prob(
        &state.channel_indices(),
        &next_state.channel_indices(),
        channel,
    )
}

/// All joint actions allowed by the bottleneck price, in canonical
/// (lexicographic, user 0 most significant) order.
pub fn feasible_actions<T: Scalar>(
    num_users: usize,
    ladder: &QualityLadder<T>,
    params: &ProfitParams<T>,
) -> Result<Vec<Action>> {
    let m = ladder.len();
    let count = m
        .checked_pow(num_users as u32)
        .filter(|c| (*c as u64) <= DEFAULT_STATE_SPACE_CAP)
        .ok_or(Error::StateSpaceTooLarge {
            size: (m as u128).saturating_pow(num_users as u32),
            cap: DEFAULT_STATE_SPACE_CAP,
        })?;
    let actions: Vec<Action> = (0..count)
        .map(|i| Action::new(mixed_radix_digits(i, m, num_users)))
        .filter(|a| {
            !matches!(params.theta, Theta::Infinite) || a.total_kbps(ladder) <= params.r_th_kbps
        })
        .collect();
    if actions.is_empty() {
        return Err(Error::NoFeasibleAction {
            num_users,
            min_total_kbps: (ladder.r_min() * T::from_usize(num_users).unwrap()).as_f64(),
            r_th_kbps: params.r_th_kbps.as_f64(),
        });
    }
    Ok(actions)
}

/// Sorts actions into tie-breaking preference: smallest total rate first,
/// then lexicographically smallest rate vector.
pub fn sort_by_preference<T: Scalar>(actions: &mut [Action], ladder: &QualityLadder<T>) {
    actions.sort_by(|a, b| {
        a.total_kbps(ladder)
            .partial_cmp(&b.total_kbps(ladder))
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.rates().cmp(b.rates()))
    });
}

/// Picks the best `(value, position)` from candidates given in preference
/// order; a later candidate must beat the incumbent by more than the tie
/// tolerance to replace it.
pub(crate) fn argmax_with_ties<T: Scalar>(
    candidates: impl Iterator<Item = (usize, T)>,
) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (pos, value) in candidates {
        match best {
            Some((_, incumbent)) if value <= incumbent + T::tie_tolerance(incumbent) => {}
            _ => best = Some((pos, value)),
        }
    }
    best
}

struct CandidateAction<T> {
    rates: Vec<usize>,
    bottleneck: T,
}

/// Backward-induction solver with the per-stage pricing tables precomputed.
pub struct Solver<'a, T> {
    model: &'a ProfitModel<T>,
    space: StateSpace,
    actions: Vec<CandidateAction<T>>,
    income: Vec<Vec<T>>,
    buffering: Vec<Vec<T>>,
    variation: Vec<Vec<T>>,
    /// Nonzero-probability joint channel successors, ascending, per joint channel index.
    successors: Vec<Vec<(usize, T)>>,
    joint_channels: Vec<Vec<usize>>,
}

impl<'a, T: Scalar> Solver<'a, T> {
    pub fn new(model: &'a ProfitModel<T>) -> Result<Self> {
        Self::with_cap(model, DEFAULT_STATE_SPACE_CAP)
    }

    pub fn with_cap(model: &'a ProfitModel<T>, cap: u64) -> Result<Self> {
        let n = model.num_users();
        let (m, k) = (model.ladder.len(), model.channel.num_states());
        let space = StateSpace::new(m, k, n, cap)?;
        let mut feasible = feasible_actions(n, &model.ladder, &model.params)?;
        sort_by_preference(&mut feasible, &model.ladder);
        let actions = feasible
            .into_iter()
            .map(|a| {
                let bottleneck = match model.bottleneck(&a) {
                    Payoff::Finite(c) => c,
                    Payoff::Infeasible => unreachable!("infeasible actions are filtered"),
                };
                CandidateAction {
                    rates: a.rates().to_vec(),
                    bottleneck,
                }
            })
            .collect();

        let income = (0..m)
            .map(|r| (0..k).map(|c| model.income(r, c)).collect())
            .collect();
        let buffering = (0..m)
            .map(|r| (0..k).map(|c| model.buffering(r, c)).collect())
            .collect();
        let variation = (0..m)
            .map(|p| (0..m).map(|r| model.variation(p, r)).collect())
            .collect();

        let joint_channels: Vec<Vec<usize>> = (0..space.num_joint_channels())
            .map(|j| mixed_radix_digits(j, k, n))
            .collect();
        let successors = joint_channels
            .iter()
            .map(|from| {
                (0..space.num_joint_channels())
                    .filter_map(|j| {
                        let p = channel_transition_prob(from, &joint_channels[j], &model.channel);
                        (p > T::zero()).then_some((j, p))
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            model,
            space,
            actions,
            income,
            buffering,
            variation,
            successors,
            joint_channels,
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    /// Feasible actions in tie-breaking preference order.
    pub fn actions(&self) -> Vec<Action> {
        self.actions
            .iter()
            .map(|a| Action::new(a.rates.clone()))
            .collect()
    }

    /// Expected profit-to-go of taking action `action_pos` in state `state`,
    /// given the next epoch's values.
    pub fn q_value(&self, state: usize, action_pos: usize, next_values: &[T]) -> T {
        let current = self.space.state_at(state);
        let rates = current.rate_indices();
        let chans = current.channel_indices();
        let joint = mixed_radix_index(&chans, self.space.num_channel_states());
        self.q_value_parts(&rates, joint, &self.actions[action_pos], next_values)
    }

    fn q_value_parts(
        &self,
        rates: &[usize],
        joint: usize,
        action: &CandidateAction<T>,
        next_values: &[T],
    ) -> T {
        let lambdas = &self.model.params.lambdas;
        let mut expected = T::zero();
        for &(next_joint, p) in &self.successors[joint] {
            let next_chans = &self.joint_channels[next_joint];
            let mut weighted = T::zero();
            for (i, (&a, &c)) in action.rates.iter().zip(next_chans).enumerate() {
                let net = self.income[a][c] - self.buffering[a][c] - self.variation[rates[i]][a];
                weighted = weighted + lambdas[i] * net;
            }
            let profit = weighted - action.bottleneck;
            let next = self.space.index_from_parts(&action.rates, next_chans);
            expected = expected + p * (profit + next_values[next]);
        }
        expected
    }

    /// One backward sweep: every state reads only `next_values`.
    /// Returns the new values and the chosen action position per state.
    pub fn sweep(&self, next_values: &[T]) -> (Vec<T>, Vec<usize>) {
        assert_eq!(next_values.len(), self.space.size());
        let k = self.space.num_channel_states();
        let results: Vec<(T, usize)> =
            (0..self.space.size())
                .into_par_iter()
                .map(|s| {
                    let state = self.space.state_at(s);
                    let rates = state.rate_indices();
                    let joint = mixed_radix_index(&state.channel_indices(), k);
                    let (pos, value) =
                        argmax_with_ties(self.actions.iter().enumerate().map(|(pos, a)| {
                            (pos, self.q_value_parts(&rates, joint, a, next_values))
                        }))
                        .expect("feasible action set is nonempty");
                    (value, pos)
                })
                .collect();
        results.into_iter().unzip()
    }

    pub fn solve(&self, horizon: usize) -> Result<PolicyTable<T>> {
        if horizon == 0 {
            return Err(Error::InvalidSession("horizon must be at least 1".into()));
        }
        let size = self.space.size();
        let n = self.space.num_users();
        let mut values = vec![T::zero(); (horizon + 1) * size];
        let mut actions = vec![0u16; horizon * size * n];
        for t in (0..horizon).rev() {
            let (head, tail) = values.split_at_mut((t + 1) * size);
            let (epoch_values, choice) = self.sweep(&tail[..size]);
            head[t * size..].copy_from_slice(&epoch_values);
            for (s, pos) in choice.into_iter().enumerate() {
                let base = (t * size + s) * n;
                for (slot, &r) in actions[base..base + n]
                    .iter_mut()
                    .zip(&self.actions[pos].rates)
                {
                    *slot = r as u16;
                }
            }
        }
        Ok(PolicyTable {
            space: self.space,
            horizon,
            actions,
            values,
            fingerprint: model_fingerprint(self.model),
        })
    }
}

/// Solves the finite-horizon problem with `v(s_T) = 0`.
pub fn backward_induction<T: Scalar>(
    model: &ProfitModel<T>,
    horizon: usize,
) -> Result<PolicyTable<T>> {
    Solver::new(model)?.solve(horizon)
}

/// Time-indexed optimal actions and values-to-go for every joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable<T> {
    space: StateSpace,
    horizon: usize,
    /// Rate indices, laid out `[t][state][user]`.
    actions: Vec<u16>,
    /// Values laid out `[t][state]` for `t` in `0..=horizon`.
    values: Vec<T>,
    fingerprint: String,
}

impl<T: Scalar> PolicyTable<T> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn value(&self, t: usize, state_index: usize) -> T {
        self.values[t * self.space.size() + state_index]
    }

    pub fn values_at(&self, t: usize) -> &[T] {
        let size = self.space.size();
        &self.values[t * size..(t + 1) * size]
    }

    pub fn action_at(&self, t: usize, state_index: usize) -> Action {
        let n = self.space.num_users();
        let base = (t * self.space.size() + state_index) * n;
        Action::new(
            self.actions[base..base + n]
                .iter()
                .map(|&r| r as usize)
                .collect(),
        )
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.space.num_users();
        writeln!(out, "{TABLE_MAGIC}")?;
        writeln!(out, "{TABLE_ORDERING}")?;
        writeln!(out, "M {}", self.space.num_rates())?;
        writeln!(out, "K {}", self.space.num_channel_states())?;
        writeln!(out, "N {n}")?;
        writeln!(out, "T {}", self.horizon)?;
        writeln!(out, "fingerprint {}", self.fingerprint)?;
        let mut header = String::from("t,state");
        for i in 1..=n {
            write!(header, ",rate_{i}").unwrap();
        }
        writeln!(out, "{header},value")?;
        let mut line = String::new();
        for t in 0..self.horizon {
            for s in 0..self.space.size() {
                line.clear();
                write!(line, "{t},{s}").unwrap();
                for r in self.action_at(t, s).rates() {
                    write!(line, ",{r}").unwrap();
                }
                writeln!(out, "{line},{}", self.value(t, s))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: String| Error::PolicyTable(msg);
        let mut lines = input.lines();
        let mut next_line = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))?
                .map_err(Error::from)
        };
        if next_line("header")?.trim() != TABLE_MAGIC {
            return Err(bad("not a policy table file".into()));
        }
        if next_line("ordering")?.trim() != TABLE_ORDERING {
            return Err(bad("unsupported state ordering".into()));
        }
        let mut dim = |key: &str| -> Result<usize> {
            let line = next_line(key)?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next().map(str::parse::<usize>)) {
                (Some(k), Some(Ok(v))) if k == key => Ok(v),
                _ => Err(bad(format!("expected `{key} <integer>`, found `{line}`"))),
            }
        };
        let (m, k, n, horizon) = (dim("M")?, dim("K")?, dim("N")?, dim("T")?);
        if horizon == 0 || m == 0 || k == 0 || m > u16::MAX as usize {
            return Err(bad("degenerate dimensions".into()));
        }
        let fingerprint = next_line("fingerprint")?
            .strip_prefix("fingerprint ")
            .map(|f| f.trim().to_string())
            .ok_or_else(|| bad("missing fingerprint".into()))?;
        let space = StateSpace::new(m, k, n, DEFAULT_STATE_SPACE_CAP)?;
        next_line("column header")?;

        let size = space.size();
        let mut values = vec![T::zero(); (horizon + 1) * size];
        let mut actions = vec![0u16; horizon * size * n];
        for t in 0..horizon {
            for s in 0..size {
                let line = next_line("record")?;
                let fields: Vec<&str> = line.trim().split(',').collect();
                if fields.len() != n + 3 {
                    return Err(bad(format!("record `{line}` has {} fields", fields.len())));
                }
                let int = |f: &str| {
                    f.parse::<usize>()
                        .map_err(|_| bad(format!("bad integer `{f}`")))
                };
                if int(fields[0])? != t || int(fields[1])? != s {
                    return Err(bad(format!(
                        "record `{line}` out of order, expected t={t} state={s}"
                    )));
                }
                let base = (t * size + s) * n;
                for (u, f) in fields[2..2 + n].iter().enumerate() {
                    let r = int(f)?;
                    if r >= m {
                        return Err(bad(format!("rate index {r} out of range in `{line}`")));
                    }
                    actions[base + u] = r as u16;
                }
                values[t * size + s] = fields[n + 2]
                    .parse::<T>()
                    .map_err(|_| bad(format!("bad value in `{line}`")))?;
            }
        }
        Ok(Self {
            space,
            horizon,
            actions,
            values,
            fingerprint,
        })
    }
}

/// Optimal action stored for epoch `t` and joint state `state`.
pub fn extract_policy<T: Scalar>(
    table: &PolicyTable<T>,
    t: usize,
    state: &SystemState,
) -> Result<Action> {
    if t >= table.horizon {
        return Err(Error::OutOfRange(format!(
            "epoch {t} outside [0, {})",
            table.horizon
        )));
    }
    let s = table.space.index_of(state)?;
    Ok(table.action_at(t, s))
}

/// Digest of everything the solver reads, so a stored table can be matched
/// to the scenario it was solved for.
pub fn model_fingerprint<T: Scalar>(model: &ProfitModel<T>) -> String {
    let p = &model.params;
    let theta = match p.theta {
        Theta::Finite(x) => format!("{x:?}"),
        Theta::Infinite => "inf".into(),
    };
    let canonical = format!(
        "rates={:?};transition={:?};bw={:?};boundaries={:?};alpha={:?};beta={:?};gamma={:?};\
         delta={:?};theta={theta};r_th={:?};lambdas={:?};variation={:?}",
        model.ladder.rates(),
        model.channel.transition(),
        model.channel.state_bandwidth(),
        model.channel.boundaries(),
        p.alpha,
        p.beta,
        p.gamma,
        p.delta_kbps,
        p.r_th_kbps,
        p.lambdas,
        p.variation_penalty,
    );
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..16].iter().fold(String::new(), |mut acc, b| {
        write!(acc, "{b:02x}").unwrap();
        acc
    })
}
