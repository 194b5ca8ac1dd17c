//! Decision policies compared in the experiments: the MDP table lookup, the
//! client-side throughput rule and the clairvoyant upper bound.

use crate::economics::{stage_profit, Payoff, ProfitModel};
use crate::error::{Error, Result};
use crate::mdp::{
    argmax_with_ties, extract_policy, feasible_actions, sort_by_preference, PolicyTable,
};
use crate::model::{mixed_radix_index, Action, QualityLadder, SystemState};
use crate::scalar::Scalar;

/// A policy as the simulator queries it at each switching point.
#[derive(Debug, Clone)]
pub enum Policy<'a, T> {
    /// Lookup in a solved table; `stationary` reuses the epoch-0 decisions.
    Proposed {
        table: &'a PolicyTable<T>,
        stationary: bool,
    },
    /// Each client picks from its own throughput estimate.
    Myopic,
    /// Decisions precomputed from the realised channel path, one per epoch.
    Ideal(Vec<Action>),
}

/// Table lookup for the network-assisted controller.
pub fn decide_proposed<T: Scalar>(
    table: &PolicyTable<T>,
    t: usize,
    state: &SystemState,
    stationary: bool,
) -> Result<Action> {
    let epoch = if stationary { 0 } else { t };
    extract_policy(table, epoch, state)
}

/// Per user, the highest ladder rate not above that user's measured
/// throughput (the lowest rate when nothing fits).
pub fn decide_myopic<T: Scalar>(last_measured_bw_kbps: &[T], ladder: &QualityLadder<T>) -> Action {
    Action::new(
        last_measured_bw_kbps
            .iter()
            .map(|&bw| ladder.highest_at_most(bw))
            .collect(),
    )
}

/// Client-side throughput estimate feeding the myopic rule.
pub trait ThroughputEstimator<T> {
    fn observe(&mut self, kbps: T);
    fn estimate(&self) -> Option<T>;
}

/// Uses the last segment's throughput as is.
#[derive(Debug, Clone)]
pub struct LastSample<T> {
    last: Option<T>,
}

impl<T> Default for LastSample<T> {
    fn default() -> Self {
        Self { last: None }
    }
}

impl<T: Scalar> ThroughputEstimator<T> for LastSample<T> {
    fn observe(&mut self, kbps: T) {
        self.last = Some(kbps);
    }

    fn estimate(&self) -> Option<T> {
        self.last
    }
}

/// Exponentially weighted moving average; `weight` is the share of the newest sample.
#[derive(Debug, Clone)]
pub struct Ewma<T> {
    weight: T,
    value: Option<T>,
}

impl<T: Scalar> Ewma<T> {
    pub fn new(weight: T) -> Self {
        Self {
            weight,
            value: None,
        }
    }
}

impl<T: Scalar> ThroughputEstimator<T> for Ewma<T> {
    fn observe(&mut self, kbps: T) {
        self.value = Some(match self.value {
            None => kbps,
            Some(v) => self.weight * kbps + (T::one() - self.weight) * v,
        });
    }

    fn estimate(&self) -> Option<T> {
        self.value
    }
}

/// Decisions of the clairvoyant controller and the profit they realise.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealPlan<T> {
    pub actions: Vec<Action>,
    pub profit: T,
}

/// Deterministic DP over a fully known channel path.
///
/// `path[t][i]` is user `i`'s channel state at epoch `t`, for `t` in `0..=T`.
/// The state of the DP is only the current rate vector; stage `t` is priced
/// with the channel states of `path[t + 1]`.
pub fn solve_ideal<T: Scalar>(
    path: &[Vec<usize>],
    initial_rates: &[usize],
    model: &ProfitModel<T>,
) -> Result<IdealPlan<T>> {
    let n = model.num_users();
    let m = model.ladder.len();
    if path.len() < 2 {
        return Err(Error::InvalidSession(
            "channel path must cover at least one epoch".into(),
        ));
    }
    if initial_rates.len() != n || path.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidSession(
            "path or initial rates have the wrong number of users".into(),
        ));
    }
    let horizon = path.len() - 1;
    let mut actions = feasible_actions(n, &model.ladder, &model.params)?;
    sort_by_preference(&mut actions, &model.ladder);
    let action_index: Vec<usize> = actions
        .iter()
        .map(|a| mixed_radix_index(a.rates(), m))
        .collect();
    let num_rate_vectors = m.pow(n as u32);

    let mut next_values = vec![T::zero(); num_rate_vectors];
    let mut choice = vec![vec![0usize; num_rate_vectors]; horizon];
    for t in (0..horizon).rev() {
        let mut values = vec![T::zero(); num_rate_vectors];
        for (rv, value) in values.iter_mut().enumerate() {
            let rates = crate::model::mixed_radix_digits(rv, m, n);
            let state = SystemState::from_parts(&rates, &path[t]);
            let (pos, best) = argmax_with_ties(actions.iter().enumerate().map(|(pos, a)| {
                let next_state = SystemState::from_parts(a.rates(), &path[t + 1]);
                let profit = match stage_profit(&state, a, &next_state, model) {
                    Payoff::Finite(p) => p,
                    Payoff::Infeasible => unreachable!("infeasible actions are filtered"),
                };
                (pos, profit + next_values[action_index[pos]])
            }))
            .expect("feasible action set is nonempty");
            *value = best;
            choice[t][rv] = pos;
        }
        next_values = values;
    }

    let mut rv = mixed_radix_index(initial_rates, m);
    let profit = next_values[rv];
    let mut plan = Vec::with_capacity(horizon);
    for step in &choice {
        let a = &actions[step[rv]];
        rv = action_index[step[rv]];
        plan.push(a.clone());
    }
    Ok(IdealPlan {
        actions: plan,
        profit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::{ProfitParams, Theta, VariationPenalty};
    use crate::mdp::backward_induction;
    use crate::model::ChannelModel;

    const RATES: [f64; 5] = [95.11, 183.53, 364.63, 493.02, 798.09];

    fn ladder() -> QualityLadder<f64> {
        QualityLadder::new(RATES.to_vec()).unwrap()
    }

    fn single_user_model(
        transition: Vec<Vec<f64>>,
        bw: Vec<f64>,
        bounds: Vec<f64>,
    ) -> ProfitModel<f64> {
        ProfitModel::new(
            ladder(),
            ChannelModel::new(transition, bw, bounds).unwrap(),
            ProfitParams {
                alpha: 0.3,
                beta: 0.5,
                gamma: 0.2,
                delta_kbps: 350.0,
                theta: Theta::Infinite,
                r_th_kbps: 5000.0,
                lambdas: vec![1.0],
                variation_penalty: VariationPenalty::Symmetric,
            },
        )
        .unwrap()
    }

    #[test]
    fn myopic_examples() {
        let l = ladder();
        assert_eq!(decide_myopic(&[520.0], &l).rates(), &[3]);
        assert_eq!(decide_myopic(&[50.0], &l).rates(), &[0]);
        assert_eq!(decide_myopic(&[10_000.0], &l).rates(), &[4]);
        assert_eq!(decide_myopic(&[520.0, 50.0], &l).rates(), &[3, 0]);
    }

    #[test]
    fn estimators() {
        let mut last = LastSample::default();
        assert_eq!(last.estimate(), None);
        last.observe(300.0);
        last.observe(500.0);
        assert_eq!(last.estimate(), Some(500.0));
        let mut ewma = Ewma::new(0.25);
        ewma.observe(400.0);
        ewma.observe(800.0);
        assert_eq!(ewma.estimate(), Some(500.0));
    }

    /// Brute force over every action sequence on a known path.
    fn best_sequence(model: &ProfitModel<f64>, path: &[Vec<usize>], initial: &[usize]) -> f64 {
        let actions = feasible_actions(model.num_users(), &model.ladder, &model.params).unwrap();
        let horizon = path.len() - 1;
        let mut best = f64::NEG_INFINITY;
        let total = actions.len().pow(horizon as u32);
        for code in 0..total {
            let seq = crate::model::mixed_radix_digits(code, actions.len(), horizon);
            let mut rates = initial.to_vec();
            let mut sum = 0.0;
            for (t, &ai) in seq.iter().enumerate() {
                let a = &actions[ai];
                let s = SystemState::from_parts(&rates, &path[t]);
                let s2 = SystemState::from_parts(a.rates(), &path[t + 1]);
                sum += stage_profit(&s, a, &s2, model).finite().unwrap();
                rates = a.rates().to_vec();
            }
            best = best.max(sum);
        }
        best
    }

    #[test]
    fn ideal_matches_sequence_enumeration_on_constant_best_channel() {
        let model = single_user_model(vec![vec![1.0]], vec![896.0], vec![]);
        let path = vec![vec![0]; 4];
        let plan = solve_ideal(&path, &[0], &model).unwrap();
        let oracle = best_sequence(&model, &path, &[0]);
        assert!((plan.profit - oracle).abs() < 1e-12);
        // 95.11 -> 493.02 pays a small variation penalty, 493.02 -> 798.09 is below the
        // threshold, which beats jumping straight to R_max.
        let rates: Vec<usize> = plan.actions.iter().map(|a| a.rates()[0]).collect();
        assert_eq!(rates, vec![3, 4, 4]);
    }

    #[test]
    fn ideal_matches_enumeration_on_varying_two_user_path() {
        let model = ProfitModel::new(
            ladder(),
            ChannelModel::new(
                vec![
                    vec![0.5, 0.5, 0.0, 0.0],
                    vec![0.2, 0.6, 0.2, 0.0],
                    vec![0.0, 0.1, 0.7, 0.2],
                    vec![0.0, 0.0, 0.2, 0.8],
                ],
                vec![95.0, 256.0, 512.0, 896.0],
                vec![256.0, 512.0, 896.0],
            )
            .unwrap(),
            ProfitParams {
                alpha: 0.3,
                beta: 0.5,
                gamma: 0.2,
                delta_kbps: 350.0,
                theta: Theta::Infinite,
                r_th_kbps: 850.0,
                lambdas: vec![0.7, 0.3],
                variation_penalty: VariationPenalty::Symmetric,
            },
        )
        .unwrap();
        let path = vec![vec![2, 1], vec![3, 0], vec![2, 1], vec![1, 2]];
        let plan = solve_ideal(&path, &[0, 0], &model).unwrap();
        assert_eq!(plan.actions.len(), 3);
        let oracle = best_sequence(&model, &path, &[0, 0]);
        assert!((plan.profit - oracle).abs() < 1e-12);
    }

    #[test]
    fn ideal_equals_proposed_without_channel_uncertainty() {
        let model = single_user_model(vec![vec![1.0]], vec![400.0], vec![]);
        let table = backward_induction(&model, 5).unwrap();
        let path = vec![vec![0]; 6];
        let plan = solve_ideal(&path, &[0], &model).unwrap();
        let mut state = SystemState::from_parts(&[0], &[0]);
        for (t, ideal) in plan.actions.iter().enumerate() {
            let a = decide_proposed(&table, t, &state, false).unwrap();
            assert_eq!(&a, ideal);
            state = SystemState::from_parts(a.rates(), &[0]);
        }
        let s0 = table
            .space()
            .index_of(&SystemState::from_parts(&[0], &[0]))
            .unwrap();
        assert!((table.value(0, s0) - plan.profit).abs() < 1e-12);
    }

    #[test]
    fn stationary_lookup_uses_epoch_zero() {
        let model = single_user_model(vec![vec![1.0]], vec![400.0], vec![]);
        let table = backward_induction(&model, 5).unwrap();
        let s = SystemState::from_parts(&[2], &[0]);
        let at0 = decide_proposed(&table, 0, &s, false).unwrap();
        for t in 0..5 {
            assert_eq!(decide_proposed(&table, t, &s, true).unwrap(), at0);
        }
    }

    #[test]
    fn ideal_rejects_bad_input() {
        let model = single_user_model(vec![vec![1.0]], vec![400.0], vec![]);
        assert!(solve_ideal(&[vec![0]], &[0], &model).is_err());
        assert!(solve_ideal(&[vec![0], vec![0]], &[0, 0], &model).is_err());
    }
}
