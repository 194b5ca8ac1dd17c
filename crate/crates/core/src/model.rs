//! Domain types: the quality ladder, the finite-state Markov last-hop channel,
//! and the joint system state / action of all users sharing the cell.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default upper bound on `(M * K)^N` before state enumeration is refused.
pub const DEFAULT_STATE_SPACE_CAP: u64 = 10_000_000;

/// Ordered set of encoded bitrates (Kbps), strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityLadder<T> {
    rates: Vec<T>,
}

impl<T: Scalar> QualityLadder<T> {
    pub fn new(rates: Vec<T>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidLadder("ladder is empty".into()));
        }
        for (j, r) in rates.iter().enumerate() {
            if !r.is_finite() || *r <= T::zero() {
                return Err(Error::InvalidLadder(format!(
                    "rate #{j} = {r} is not positive"
                )));
            }
        }
        if let Some(j) = rates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLadder(format!(
                "rates not strictly increasing at #{} ({} then {})",
                j + 1,
                rates[j],
                rates[j + 1]
            )));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rate(&self, index: usize) -> T {
        self.rates[index]
    }

    pub fn r_min(&self) -> T {
        self.rates[0]
    }

    pub fn r_max(&self) -> T {
        self.rates[self.rates.len() - 1]
    }

    /// Highest rate not exceeding `kbps`, or the lowest rate if none fits.
    pub fn highest_at_most(&self, kbps: T) -> usize {
        self.rates.partition_point(|r| *r <= kbps).saturating_sub(1)
    }
}

/// K-state Markov model of one user's last-hop bandwidth.
///
/// `state_bandwidth[k]` is the representative bandwidth of region `k`; the
/// `K - 1` boundaries split `[0, inf)` into half-open regions, a value equal
/// to a boundary belonging to the upper region.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel<T> {
    transition: Vec<Vec<T>>,
    state_bandwidth: Vec<T>,
    boundaries: Vec<T>,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn new(
        transition: Vec<Vec<T>>,
        state_bandwidth: Vec<T>,
        boundaries: Vec<T>,
    ) -> Result<Self> {
        check_channel(&transition, &state_bandwidth, &boundaries)?;
        Ok(Self {
            transition,
            state_bandwidth,
            boundaries,
        })
    }

    pub fn num_states(&self) -> usize {
        self.state_bandwidth.len()
    }

    pub fn transition(&self) -> &[Vec<T>] {
        &self.transition
    }

    pub fn prob(&self, from: usize, to: usize) -> T {
        self.transition[from][to]
    }

    pub fn state_bandwidth(&self) -> &[T] {
        &self.state_bandwidth
    }

    pub fn bandwidth(&self, state: usize) -> T {
        self.state_bandwidth[state]
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn bw_min(&self) -> T {
        self.state_bandwidth[0]
    }

    /// Successor states with nonzero probability, ascending.
    pub fn successors(&self, from: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.transition[from]
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > T::zero())
    }

    /// Stationary distribution, by power iteration on the lazy chain `(P + I) / 2`,
    /// which has the same fixed points as `P` but is aperiodic.
    pub fn stationary_distribution(&self) -> Vec<T> {
        let k = self.num_states();
        let half = T::lit(0.5);
        let mut pi = vec![T::one() / T::from_usize(k).unwrap(); k];
        for _ in 0..1_000_000 {
            let mut next = vec![T::zero(); k];
            for (i, row) in self.transition.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] = next[j] + pi[i] * *p * half;
                }
                next[i] = next[i] + pi[i] * half;
            }
            let total: T = next.iter().copied().sum();
            next.iter_mut().for_each(|x| *x = *x / total);
            let moved = pi
                .iter()
                .zip(&next)
                .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
            pi = next;
            if moved <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        pi
    }
}

pub(crate) fn check_channel<T: Scalar>(
    transition: &[Vec<T>],
    state_bandwidth: &[T],
    boundaries: &[T],
) -> Result<()> {
    let k = state_bandwidth.len();
    if k == 0 {
        return Err(Error::InvalidChannel("no channel states".into()));
    }
    if transition.len() != k {
        return Err(Error::InvalidChannel(format!(
            "transition matrix has {} rows for {k} states",
            transition.len()
        )));
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != k {
            return Err(Error::InvalidChannel(format!(
                "row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        if let Some(p) = row.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
            return Err(Error::InvalidChannel(format!(
                "row {i} has entry {p} outside [0, 1]"
            )));
        }
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > T::unit_tolerance() {
            return Err(Error::InvalidChannel(format!(
                "row {i} sums to {sum}, not 1"
            )));
        }
    }
    if let Some(b) = state_bandwidth
        .iter()
        .find(|b| !(**b > T::zero() && b.is_finite()))
    {
        return Err(Error::InvalidChannel(format!(
            "state bandwidth {b} is not positive"
        )));
    }
    if state_bandwidth.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidChannel(
            "state bandwidths not strictly increasing".into(),
        ));
    }
    if boundaries.len() + 1 != k {
        return Err(Error::InvalidChannel(format!(
            "{} region boundaries for {k} states, expected {}",
            boundaries.len(),
            k - 1
        )));
    }
    if boundaries.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidChannel(
            "region boundaries not strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Maps a measured bandwidth to the index of the region containing it.
pub fn map_bandwidth_to_state<T: Scalar>(measured_kbps: T, channel: &ChannelModel<T>) -> usize {
    channel.boundaries.partition_point(|b| *b <= measured_kbps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserState {
    pub rate: usize,
    pub channel: usize,
}

/// Joint state of all users: current rate index and channel state per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    users: Vec<UserState>,
}

impl SystemState {
    pub fn new(users: Vec<UserState>) -> Self {
        Self { users }
    }

    pub fn from_parts(rates: &[usize], channels: &[usize]) -> Self {
        assert_eq!(
            rates.len(),
            channels.len(),
            "rate and channel vectors differ in length"
        );
        Self {
            users: rates
                .iter()
                .zip(channels)
                .map(|(&rate, &channel)| UserState { rate, channel })
                .collect(),
        }
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn rate_indices(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.rate).collect()
    }

    pub fn channel_indices(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.channel).collect()
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, u) in self.users.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(r{}, c{})", u.rate, u.channel)?;
        }
        write!(f, "]")
    }
}

/// Joint rate decision: the ladder index each user streams next.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    rates: Vec<usize>,
}

impl Action {
    pub fn new(rates: Vec<usize>) -> Self {
        Self { rates }
    }

    pub fn rates(&self) -> &[usize] {
        &self.rates
    }

    pub fn num_users(&self) -> usize {
        self.rates.len()
    }

    pub fn rates_kbps<T: Scalar>(&self, ladder: &QualityLadder<T>) -> Vec<T> {
        self.rates.iter().map(|&j| ladder.rate(j)).collect()
    }

    pub fn total_kbps<T: Scalar>(&self, ladder: &QualityLadder<T>) -> T {
        self.rates.iter().map(|&j| ladder.rate(j)).sum()
    }
}

/// Dimensions of the joint state space `(ladder x channel)^N` and its
/// canonical ordering: lexicographic over users, and per user over
/// (rate index, channel index). User 0 is the most significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    num_rates: usize,
    num_channel_states: usize,
    num_users: usize,
    size: usize,
}

impl StateSpace {
    pub fn new(
        num_rates: usize,
        num_channel_states: usize,
        num_users: usize,
        cap: u64,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::InvalidSession(
                "at least one user is required".into(),
            ));
        }
        let per_user = (num_rates as u128) * (num_channel_states as u128);
        let size = (0..num_users).try_fold(1u128, |acc, _| acc.checked_mul(per_user));
        match size {
            Some(s) if s <= cap as u128 => Ok(Self {
                num_rates,
                num_channel_states,
                num_users,
                size: s as usize,
            }),
            Some(s) => Err(Error::StateSpaceTooLarge { size: s, cap }),
            None => Err(Error::StateSpaceTooLarge {
                size: u128::MAX,
                cap,
            }),
        }
    }

    pub fn num_rates(&self) -> usize {
        self.num_rates
    }

    pub fn num_channel_states(&self) -> usize {
        self.num_channel_states
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of joint channel vectors, `K^N`.
    pub fn num_joint_channels(&self) -> usize {
        self.num_channel_states.pow(self.num_users as u32)
    }

    pub fn index_of(&self, state: &SystemState) -> Result<usize> {
        if state.num_users() != self.num_users {
            return Err(Error::OutOfRange(format!(
                "state has {} users, expected {}",
                state.num_users(),
                self.num_users
            )));
        }
        let mut idx = 0usize;
        for u in state.users() {
            if u.rate >= self.num_rates || u.channel >= self.num_channel_states {
                return Err(Error::OutOfRange(format!(
                    "state {state} has an index out of range"
                )));
            }
            idx = idx * self.num_rates * self.num_channel_states
                + u.rate * self.num_channel_states
                + u.channel;
        }
        Ok(idx)
    }

    /// Index from already validated rate and channel vectors.
    pub(crate) fn index_from_parts(&self, rates: &[usize], channels: &[usize]) -> usize {
        rates.iter().zip(channels).fold(0, |acc, (&r, &c)| {
            acc * self.num_rates * self.num_channel_states + r * self.num_channel_states + c
        })
    }

    pub fn state_at(&self, mut index: usize) -> SystemState {
        debug_assert!(index < self.size);
        let per_user = self.num_rates * self.num_channel_states;
        let mut users = vec![
            UserState {
                rate: 0,
                channel: 0
            };
            self.num_users
        ];
        for u in users.iter_mut().rev() {
            let digit = index % per_user;
            index /= per_user;
            *u = UserState {
                rate: digit / self.num_channel_states,
                channel: digit % self.num_channel_states,
            };
        }
        SystemState::new(users)
    }

    pub fn iter(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.size).map(move |i| self.state_at(i))
    }
}

/// Every joint state in canonical order, refusing spaces above the default cap.
pub fn enumerate_states<T: Scalar>(
    ladder: &QualityLadder<T>,
    channel: &ChannelModel<T>,
    num_users: usize,
) -> Result<Vec<SystemState>> {
    enumerate_states_capped(ladder, channel, num_users, DEFAULT_STATE_SPACE_CAP)
}

pub fn enumerate_states_capped<T: Scalar>(
    ladder: &QualityLadder<T>,
    channel: &ChannelModel<T>,
    num_users: usize,
    cap: u64,
) -> Result<Vec<SystemState>> {
    let space = StateSpace::new(ladder.len(), channel.num_states(), num_users, cap)?;
    Ok(space.iter().collect())
}

/// Decodes `index` as a base-`radix` number with `digits` digits, most significant first.
pub(crate) fn mixed_radix_digits(mut index: usize, radix: usize, digits: usize) -> Vec<usize> {
    let mut out = vec![0; digits];
    for d in out.iter_mut().rev() {
        *d = index % radix;
        index /= radix;
    }
    out
}

pub(crate) fn mixed_radix_index(digits: &[usize], radix: usize) -> usize {
    digits.iter().fold(0, |acc, d| acc * radix + d)
}
