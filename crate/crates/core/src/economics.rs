//! Operator profit model: playback income, rebuffering, smoothness and
//! bottleneck costs, combined into the per-stage profit of a joint decision.
//!
//! Every income/cost term is a ratio of logarithms, so the log base does not
//! matter; natural logs are used throughout.

use crate::error::{Error, Result};
use crate::model::{Action, ChannelModel, QualityLadder, SystemState};
use crate::scalar::Scalar;

/// Cost per Kbps above the service rate constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta<T> {
    Finite(T),
    /// Exceeding the constraint is forbidden outright.
    Infinite,
}

impl<T: Scalar> Theta<T> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Theta::Infinite)
    }
}

/// Which rate switches can trigger the smoothness penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariationPenalty {
    /// `|R_t - R_{t+1}| >= delta`.
    #[default]
    Symmetric,
    /// Only downward switches `R_t - R_{t+1} >= delta`.
    DownwardOnly,
}

/// A money amount, or the marker for a decision forbidden by an infinite
/// bottleneck price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff<T> {
    Finite(T),
    Infeasible,
}

impl<T: Scalar> Payoff<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Payoff::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Payoff::Finite(x) => Some(x),
            Payoff::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfitParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub delta_kbps: T,
    pub theta: Theta<T>,
    pub r_th_kbps: T,
    /// Service priority per user; its length fixes the number of users.
    pub lambdas: Vec<T>,
    pub variation_penalty: VariationPenalty,
}

impl<T: Scalar> ProfitParams<T> {
    pub fn validate(&self) -> Result<()> {
        let tol = T::unit_tolerance();
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(w >= T::zero() && w <= T::one()) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {w} is outside [0, 1]"
                )));
            }
        }
        let weights = self.alpha + self.beta + self.gamma;
        if (weights - T::one()).abs() > tol {
            return Err(Error::InvalidParams(format!(
                "alpha+beta+gamma = {weights} \u{2260} 1"
            )));
        }
        if self.lambdas.is_empty() {
            return Err(Error::InvalidParams("no priority coefficients".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= T::zero())) {
            return Err(Error::InvalidParams(format!(
                "priority coefficient {l} is negative"
            )));
        }
        let total: T = self.lambdas.iter().copied().sum();
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidParams(format!(
                "priority coefficients sum to {total} \u{2260} 1"
            )));
        }
        if !(self.delta_kbps > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "variation threshold {} must be positive",
                self.delta_kbps
            )));
        }
        if !(self.r_th_kbps > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "service rate constraint {} must be positive",
                self.r_th_kbps
            )));
        }
        if let Theta::Finite(theta) = self.theta {
            if !(theta >= T::zero() && theta.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "theta = {theta} must be nonnegative"
                )));
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.lambdas.len()
    }
}

/// Normalisation constants derived from the ladder, channel and threshold.
///
/// A normaliser that degenerates to zero (single-rate ladder, no possible
/// shortfall, ...) makes the matching term identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants<T> {
    pub eta_play: T,
    pub eta_buf: T,
    pub eta_var: T,
    /// Smallest positive shortfall `r_j - bw_k`; infinite if every rate fits every state.
    pub delta_min_kbps: T,
    pub r_min_kbps: T,
}

impl<T: Scalar> DerivedConstants<T> {
    pub fn new(
        ladder: &QualityLadder<T>,
        channel: &ChannelModel<T>,
        params: &ProfitParams<T>,
    ) -> Self {
        let (r_min, r_max) = (ladder.r_min(), ladder.r_max());
        let mut delta_min = T::infinity();
        for &r in ladder.rates() {
            for &bw in channel.state_bandwidth() {
                let gap = r - bw;
                if gap > T::zero() && gap < delta_min {
                    delta_min = gap;
                }
            }
        }
        let eta_buf = if delta_min.is_finite() {
            ((r_max - channel.bw_min()) / delta_min).ln()
        } else {
            T::zero()
        };
        Self {
            eta_play: (r_max / r_min).ln(),
            eta_buf,
            eta_var: ((r_max - r_min) / params.delta_kbps).ln(),
            delta_min_kbps: delta_min,
            r_min_kbps: r_min,
        }
    }
}

fn normalized_log<T: Scalar>(ratio: T, eta: T) -> T {
    if eta > T::zero() {
        (ratio.ln() / eta).max(T::zero())
    } else {
        T::zero()
    }
}

/// Income for streaming `rate_kbps` when the next period offers `next_bw_kbps`.
pub fn playback_income<T: Scalar>(
    rate_kbps: T,
    next_bw_kbps: T,
    params: &ProfitParams<T>,
    consts: &DerivedConstants<T>,
) -> T {
    if rate_kbps <= next_bw_kbps {
        params.alpha * normalized_log(rate_kbps / consts.r_min_kbps, consts.eta_play)
    } else {
        T::zero()
    }
}

/// Penalty when the chosen rate exceeds the next-period bandwidth.
pub fn buffering_cost<T: Scalar>(
    rate_kbps: T,
    next_bw_kbps: T,
    params: &ProfitParams<T>,
    consts: &DerivedConstants<T>,
) -> T {
    if rate_kbps > next_bw_kbps {
        params.beta
            * normalized_log(
                (rate_kbps - next_bw_kbps) / consts.delta_min_kbps,
                consts.eta_buf,
            )
    } else {
        T::zero()
    }
}

/// Penalty for a rate switch of at least the variation threshold.
pub fn smoothness_cost<T: Scalar>(
    prev_rate_kbps: T,
    next_rate_kbps: T,
    params: &ProfitParams<T>,
    consts: &DerivedConstants<T>,
) -> T {
    let jump = (prev_rate_kbps - next_rate_kbps).abs();
    let triggered = match params.variation_penalty {
        VariationPenalty::Symmetric => jump >= params.delta_kbps,
        VariationPenalty::DownwardOnly => prev_rate_kbps - next_rate_kbps >= params.delta_kbps,
    };
    if triggered {
        params.gamma * normalized_log(jump / params.delta_kbps, consts.eta_var)
    } else {
        T::zero()
    }
}

/// Congestion cost of the joint rate vector.
pub fn bottleneck_cost<T: Scalar>(action_rates_kbps: &[T], params: &ProfitParams<T>) -> Payoff<T> {
    let total: T = action_rates_kbps.iter().copied().sum();
    if total <= params.r_th_kbps {
        return Payoff::Finite(T::zero());
    }
    match params.theta {
        Theta::Finite(theta) => Payoff::Finite(theta * (total - params.r_th_kbps)),
        Theta::Infinite => Payoff::Infeasible,
    }
}

/// Everything needed to price a transition: ladder, channel, parameters and
/// the constants derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitModel<T> {
    pub ladder: QualityLadder<T>,
    pub channel: ChannelModel<T>,
    pub params: ProfitParams<T>,
    pub consts: DerivedConstants<T>,
}

impl<T: Scalar> ProfitModel<T> {
    pub fn new(
        ladder: QualityLadder<T>,
        channel: ChannelModel<T>,
        params: ProfitParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        let consts = DerivedConstants::new(&ladder, &channel, &params);
        Ok(Self {
            ladder,
            channel,
            params,
            consts,
        })
    }

    pub fn num_users(&self) -> usize {
        self.params.num_users()
    }

    /// Income for ladder index `rate` when the next channel state is `channel`.
    pub fn income(&self, rate: usize, channel: usize) -> T {
        playback_income(
            self.ladder.rate(rate),
            self.channel.bandwidth(channel),
            &self.params,
            &self.consts,
        )
    }

    pub fn buffering(&self, rate: usize, channel: usize) -> T {
        buffering_cost(
            self.ladder.rate(rate),
            self.channel.bandwidth(channel),
            &self.params,
            &self.consts,
        )
    }

    pub fn variation(&self, prev_rate: usize, next_rate: usize) -> T {
        smoothness_cost(
            self.ladder.rate(prev_rate),
            self.ladder.rate(next_rate),
            &self.params,
            &self.consts,
        )
    }

    pub fn bottleneck(&self, action: &Action) -> Payoff<T> {
        bottleneck_cost(&action.rates_kbps(&self.ladder), &self.params)
    }
}

/// Profit of moving from `state` to `next_state` under `action`.
///
/// # Panics
/// If the action's rates differ from `next_state`'s rates.
pub fn stage_profit<T: Scalar>(
    state: &SystemState,
    action: &Action,
    next_state: &SystemState,
    model: &ProfitModel<T>,
) -> Payoff<T> {
    assert_consistent(action, next_state);
    let bottleneck = match model.bottleneck(action) {
        Payoff::Finite(c) => c,
        Payoff::Infeasible => return Payoff::Infeasible,
    };
    let weighted = weighted_user_sum(state, next_state, model, |_, _| {});
    Payoff::Finite(weighted - bottleneck)
}

fn assert_consistent(action: &Action, next_state: &SystemState) {
    assert!(
        next_state
            .users()
            .iter()
            .map(|u| u.rate)
            .eq(action.rates().iter().copied()),
        "next state rates {:?} disagree with action {:?}",
        next_state.rate_indices(),
        action.rates()
    );
}

fn weighted_user_sum<T: Scalar>(
    state: &SystemState,
    next_state: &SystemState,
    model: &ProfitModel<T>,
    mut visit: impl FnMut(usize, UserProfit<T>),
) -> T {
    let mut total = T::zero();
    for (i, (cur, next)) in state.users().iter().zip(next_state.users()).enumerate() {
        let user = UserProfit {
            income: model.income(next.rate, next.channel),
            buffering: model.buffering(next.rate, next.channel),
            variation: model.variation(cur.rate, next.rate),
        };
        total = total + model.params.lambdas[i] * user.net();
        visit(i, user);
    }
    total
}

/// Unweighted income and cost terms of one user for one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfit<T> {
    pub income: T,
    pub buffering: T,
    pub variation: T,
}

impl<T: Scalar> UserProfit<T> {
    pub fn net(&self) -> T {
        self.income - self.buffering - self.variation
    }
}

/// Realised accounting of one stage as the simulator books it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSettlement<T> {
    pub users: Vec<UserProfit<T>>,
    pub bottleneck: T,
    /// The joint rate exceeded the constraint while its price is infinite.
    pub overloaded: bool,
    pub profit: T,
}

/// Books a stage with finite money even when the decision was forbidden.
///
/// For feasible decisions the profit equals [`stage_profit`] exactly. When the
/// constraint is violated under an infinite price, the stage forfeits its
/// weighted playback income (booked as the bottleneck cost) while the
/// buffering and smoothness costs still apply.
pub fn settle_stage<T: Scalar>(
    state: &SystemState,
    action: &Action,
    next_state: &SystemState,
    model: &ProfitModel<T>,
) -> StageSettlement<T> {
    assert_consistent(action, next_state);
    let mut users = Vec::with_capacity(state.num_users());
    let weighted = weighted_user_sum(state, next_state, model, |_, u| users.push(u));
    let (bottleneck, overloaded) = match model.bottleneck(action) {
        Payoff::Finite(c) => (c, false),
        Payoff::Infeasible => {
            let forfeited = users
                .iter()
                .zip(&model.params.lambdas)
                .fold(T::zero(), |acc, (u, l)| acc + *l * u.income);
            (forfeited, true)
        }
    };
    StageSettlement {
        users,
        bottleneck,
        overloaded,
        profit: weighted - bottleneck,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const RATES: [f64; 5] = [95.11, 183.53, 364.63, 493.02, 798.09];

    fn params(lambdas: Vec<f64>, theta: Theta<f64>) -> ProfitParams<f64> {
        ProfitParams {
            alpha: 0.3,
            beta: 0.5,
            gamma: 0.2,
            delta_kbps: 350.0,
            theta,
            r_th_kbps: 850.0,
            lambdas,
            variation_penalty: VariationPenalty::Symmetric,
        }
    }

    fn model(lambdas: Vec<f64>, theta: Theta<f64>) -> ProfitModel<f64> {
        let ladder = QualityLadder::new(RATES.to_vec()).unwrap();
        let channel = ChannelModel::new(
            vec![
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.2, 0.6, 0.2, 0.0],
                vec![0.0, 0.1, 0.7, 0.2],
                vec![0.0, 0.0, 0.2, 0.8],
            ],
            vec![95.0, 256.0, 512.0, 896.0],
            vec![256.0, 512.0, 896.0],
        )
        .unwrap();
        ProfitModel::new(ladder, channel, params(lambdas, theta)).unwrap()
    }

    #[test]
    fn derived_constants_from_pair_scan() {
        let m = model(vec![0.5, 0.5], Theta::Infinite);
        // Exhaustive pair scan: smallest positive r_j - bw_k is 95.11 - 95.
        let mut best = f64::INFINITY;
        for r in RATES {
            for bw in [95.0, 256.0, 512.0, 896.0] {
                if r > bw {
                    best = best.min(r - bw);
                }
            }
        }
        assert_eq!(m.consts.delta_min_kbps, best);
        assert_relative_eq!(m.consts.delta_min_kbps, 0.11, epsilon = 1e-12);
        assert_relative_eq!(m.consts.eta_play, (798.09f64 / 95.11).ln(), epsilon = 1e-15);
        assert_relative_eq!(m.consts.eta_var, (702.98f64 / 350.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn income_examples() {
        let m = model(vec![1.0], Theta::Infinite);
        assert_eq!(m.income(4, 3), 0.3);
        assert_eq!(m.income(0, 3), 0.0);
        // 0.3 * ln(364.63 / 95.11) / ln(798.09 / 95.11), evaluated independently.
        assert_relative_eq!(m.income(2, 2), 0.189_524_784_926_131_84, epsilon = 1e-12);
        assert_eq!(m.income(4, 2), 0.0);
    }

    #[test]
    fn income_at_equal_rate_and_bandwidth_counts_as_playback() {
        let p = params(vec![1.0], Theta::Infinite);
        let m = model(vec![1.0], Theta::Infinite);
        assert!(playback_income(512.0, 512.0, &p, &m.consts) > 0.0);
        assert_eq!(buffering_cost(512.0, 512.0, &p, &m.consts), 0.0);
    }

    #[test]
    fn buffering_examples() {
        let m = model(vec![1.0], Theta::Infinite);
        assert_eq!(m.buffering(1, 2), 0.0);
        assert_eq!(m.buffering(4, 0), 0.5);
        // 95.11 against 95 is exactly the smallest shortfall.
        assert_eq!(m.buffering(0, 0), 0.0);
    }

    #[test]
    fn smoothness_examples() {
        let m = model(vec![1.0], Theta::Infinite);
        assert_eq!(m.variation(0, 1), 0.0);
        assert_eq!(m.variation(0, 4), 0.2);
        assert_eq!(m.variation(4, 0), m.variation(0, 4));
    }

    #[test]
    fn downward_only_ignores_upswitches() {
        let mut m = model(vec![1.0], Theta::Infinite);
        m.params.variation_penalty = VariationPenalty::DownwardOnly;
        assert_eq!(m.variation(0, 4), 0.0);
        assert_eq!(m.variation(4, 0), 0.2);
    }

    #[test]
    fn bottleneck_examples() {
        let p = params(vec![0.5, 0.5], Theta::Infinite);
        assert_eq!(bottleneck_cost(&[364.63, 364.63], &p), Payoff::Finite(0.0));
        assert_eq!(bottleneck_cost(&[493.02, 493.02], &p), Payoff::Infeasible);
        let p = params(vec![0.5, 0.5], Theta::Finite(0.001));
        match bottleneck_cost(&[493.02, 493.02], &p) {
            Payoff::Finite(c) => assert_relative_eq!(c, 0.001 * 136.04, epsilon = 1e-12),
            Payoff::Infeasible => panic!("finite theta is never infeasible"),
        }
    }

    #[test]
    fn stage_profit_examples() {
        let m = model(vec![1.0], Theta::Infinite);
        for k in 0..4 {
            let s = SystemState::from_parts(&[0], &[k]);
            let s2 = SystemState::from_parts(&[0], &[k]);
            assert_eq!(
                stage_profit(&s, &Action::new(vec![0]), &s2, &m),
                Payoff::Finite(0.0)
            );
        }

        let m = model(vec![0.5, 0.5], Theta::Infinite);
        let s = SystemState::from_parts(&[2, 2], &[2, 2]);
        let a = Action::new(vec![2, 2]);
        let s2 = SystemState::from_parts(&[2, 2], &[3, 3]);
        let settled = settle_stage(&s, &a, &s2, &m);
        assert_eq!(settled.users[0], settled.users[1]);

        // User 1 at R_max playing, user 2 buffering on the lowest state, finite theta.
        let m = model(vec![0.7, 0.3], Theta::Finite(0.001));
        let s = SystemState::from_parts(&[4, 0], &[3, 0]);
        let a = Action::new(vec![4, 0]);
        let s2 = SystemState::from_parts(&[4, 0], &[3, 0]);
        let c_buf = 0.5 * ((95.11f64 - 95.0) / 0.11).ln() / m.consts.eta_buf;
        let c_bw = 0.001 * (798.09 + 95.11 - 850.0);
        let expected = 0.7 * 0.3 - 0.3 * c_buf - c_bw;
        let got = stage_profit(&s, &a, &s2, &m).finite().unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);

        let s2 = SystemState::from_parts(&[1, 1], &[3, 0]);
        let a = Action::new(vec![1, 1]);
        let c_buf2 = 0.5 * ((183.53f64 - 95.0) / (95.11 - 95.0)).ln()
            / ((798.09f64 - 95.0) / (95.11 - 95.0)).ln();
        let inc1 = 0.3 * (183.53f64 / 95.11).ln() / (798.09f64 / 95.11).ln();
        let var1 = 0.2 * (614.56f64 / 350.0).ln() / (702.98f64 / 350.0).ln();
        let expected = 0.7 * (inc1 - var1) - 0.3 * c_buf2;
        let got = stage_profit(&s, &a, &s2, &m).finite().unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "disagree")]
    fn stage_profit_rejects_inconsistent_next_state() {
        let m = model(vec![1.0], Theta::Infinite);
        let s = SystemState::from_parts(&[0], &[0]);
        stage_profit(&s, &Action::new(vec![1]), &s, &m);
    }

    #[test]
    fn settlement_forfeits_income_when_overloaded() {
        let m = model(vec![0.5, 0.5], Theta::Infinite);
        let s = SystemState::from_parts(&[3, 3], &[2, 2]);
        let a = Action::new(vec![3, 3]);
        let s2 = SystemState::from_parts(&[3, 3], &[2, 2]);
        let settled = settle_stage(&s, &a, &s2, &m);
        assert!(settled.overloaded);
        assert_eq!(
            settled.bottleneck,
            0.5 * settled.users[0].income + 0.5 * settled.users[1].income
        );
        assert!(settled.profit.abs() < 1e-15);

        let a = Action::new(vec![2, 2]);
        let s2 = SystemState::from_parts(&[2, 2], &[2, 2]);
        let settled = settle_stage(&s, &a, &s2, &m);
        assert!(!settled.overloaded);
        assert_eq!(
            Payoff::Finite(settled.profit),
            stage_profit(&s, &a, &s2, &m)
        );
    }

    #[test]
    fn parameter_validation() {
        let mut p = params(vec![0.5, 0.5], Theta::Infinite);
        p.gamma = 0.3;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("alpha+beta+gamma"), "{err}");
        let p = params(vec![0.6, 0.6], Theta::Infinite);
        assert!(p.validate().is_err());
        let p = params(vec![1.2, -0.2], Theta::Infinite);
        assert!(p.validate().is_err());
        let mut p = params(vec![1.0], Theta::Infinite);
        p.delta_kbps = 0.0;
        assert!(p.validate().is_err());
    }

    fn grid() -> impl Strategy<Value = (usize, usize)> {
        (0usize..5, 0usize..4)
    }

    proptest! {
        #[test]
        fn log_base_invariance(r in 0usize..5, k in 0usize..4, prev in 0usize..5) {
            let m = model(vec![1.0], Theta::Infinite);
            let (rate, bw) = (RATES[r], m.channel.bandwidth(k));
            let log2 = |x: f64| x.log2();
            let inc2 = if rate <= bw { 0.3 * log2(rate / 95.11) / log2(798.09 / 95.11) } else { 0.0 };
            let buf2 = if rate > bw {
                0.5 * log2((rate - bw) / 0.11) / log2((798.09 - 95.0) / 0.11)
            } else { 0.0 };
            let jump = (RATES[prev] - rate).abs();
            let var2 = if jump >= 350.0 { 0.2 * log2(jump / 350.0) / log2(702.98 / 350.0) } else { 0.0 };
            prop_assert!((m.income(r, k) - inc2).abs() < 1e-9);
            prop_assert!((m.buffering(r, k) - buf2).abs() < 1e-9);
            prop_assert!((m.variation(prev, r) - var2).abs() < 1e-9);
        }

        #[test]
        fn terms_are_bounded_and_exclusive((r, k) in grid(), prev in 0usize..5) {
            let m = model(vec![1.0], Theta::Infinite);
            let (inc, buf, var) = (m.income(r, k), m.buffering(r, k), m.variation(prev, r));
            prop_assert!((0.0..=0.3).contains(&inc));
            prop_assert!((0.0..=0.5).contains(&buf));
            prop_assert!((0.0..=0.2).contains(&var));
            prop_assert!(inc == 0.0 || buf == 0.0);
        }

        #[test]
        fn terms_are_monotone((r, k) in grid(), (r2, k2) in grid(), a in 0usize..5, b in 0usize..5) {
            let m = model(vec![1.0], Theta::Infinite);
            let bw = m.channel.bandwidth(k);
            if RATES[r] <= RATES[r2] && RATES[r2] <= bw {
                prop_assert!(m.income(r, k) <= m.income(r2, k));
            }
            let (s1, s2) = (RATES[r] - bw, RATES[r2] - m.channel.bandwidth(k2));
            if s1 > 0.0 && s1 <= s2 {
                prop_assert!(m.buffering(r, k) <= m.buffering(r2, k2));
            }
            if (RATES[a] - RATES[b]).abs() <= (RATES[r] - RATES[r2]).abs() {
                prop_assert!(m.variation(a, b) <= m.variation(r, r2));
            }
        }

        #[test]
        fn stage_profit_upper_bound(rates in proptest::collection::vec(0usize..5, 2),
                                    prev in proptest::collection::vec(0usize..5, 2),
                                    chans in proptest::collection::vec(0usize..4, 2)) {
            let m = model(vec![0.7, 0.3], Theta::Finite(0.01));
            let s = SystemState::from_parts(&prev, &chans);
            let s2 = SystemState::from_parts(&rates, &chans);
            let p = stage_profit(&s, &Action::new(rates.clone()), &s2, &m).finite().unwrap();
            prop_assert!(p <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn stage_profit_bound_is_attained_only_at_max_rate() {
        let mut m = model(vec![0.5, 0.5], Theta::Finite(0.0));
        m.params.r_th_kbps = 2000.0;
        let s = SystemState::from_parts(&[4, 4], &[3, 3]);
        let a = Action::new(vec![4, 4]);
        assert_eq!(stage_profit(&s, &a, &s, &m), Payoff::Finite(0.3));
        let s_prev = SystemState::from_parts(&[0, 4], &[3, 3]);
        assert!(stage_profit(&s_prev, &a, &s, &m).finite().unwrap() < 0.3);
    }
}
