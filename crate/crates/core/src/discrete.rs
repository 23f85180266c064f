//! The finite-population chain.
//!
//! Thresholds are compiled to integer comparisons once per `(profile, N, tie)` so that
//! sampling and graph construction never touch floating point: an agent compares
//! `count * den` against `num * N`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelError, PopulationProfile, Preference, Rational, Role, TieRule};

pub const DEFAULT_STATE_CAP: u64 = 1_000_000;
const EXACT_MEASURE_LIMIT: usize = 2000;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiscreteError {
    #[error("InvalidSize: N = {0} does not make every N*rho an integer")]
    InvalidSize(u64),
    #[error("StateOutOfSpace: counts {counts:?} do not fit capacities {capacities:?}")]
    StateOutOfSpace { counts: Vec<u64>, capacities: Vec<u64> },
    #[error("StateSpaceTooLarge: {size} states exceed the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Number of `A`-players in each flat subpopulation for population size `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteState {
    pub n: u64,
    pub counts: Vec<u64>,
}

impl DiscreteState {
    pub fn new(n: u64, counts: Vec<u64>) -> Self {
        Self { n, counts }
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_x(&self) -> Rational {
        Rational::new(self.total_count() as i64, self.n as i64)
    }

    /// Per-subpopulation proportions `counts / N`.
    pub fn proportions(&self) -> Vec<Rational> {
        self.counts.iter().map(|c| Rational::new(*c as i64, self.n as i64)).collect()
    }

    pub fn proportions_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDistribution {
    pub entries: Vec<(DiscreteState, Rational)>,
}

impl TransitionDistribution {
    pub fn total_probability(&self) -> Rational {
        self.entries.iter().map(|(_, p)| *p).sum()
    }

    pub fn probability_of(&self, target: &DiscreteState) -> Rational {
        self.entries.iter().filter(|(s, _)| s == target).map(|(_, p)| *p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryStats {
    pub visited_min_total: Rational,
    pub visited_max_total: Rational,
    pub amplitude: Rational,
    pub final_state: DiscreteState,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

/// One-step move of a single subpopulation, with probability `weight / (2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub index: usize,
    pub up: bool,
    pub weight: u64,
}

#[derive(Debug, Clone)]
struct CompiledThreshold {
    role: Role,
    num: i128,
    den: i128,
}

/// Transition rule of the chain for a fixed profile, size and tie rule.
#[derive(Debug, Clone)]
pub struct Kernel {
    n: u64,
    tie: TieRule,
    capacities: Vec<u64>,
    thresholds: Vec<CompiledThreshold>,
    rho: Vec<Rational>,
}

impl Kernel {
    pub fn new(profile: &PopulationProfile, n: u64, tie: TieRule) -> Result<Self, DiscreteError> {
        let capacities = profile.capacities(n).ok_or(DiscreteError::InvalidSize(n))?;
        let thresholds = profile
            .flat()
            .into_iter()
            .map(|s| CompiledThreshold {
                role: s.role,
                num: *s.tau.numer() as i128,
                den: *s.tau.denom() as i128,
            })
            .collect();
        Ok(Self { n, tie, capacities, thresholds, rho: profile.flat_rho() })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn tie(&self) -> TieRule {
        self.tie
    }

    pub fn capacities(&self) -> &[u64] {
        &self.capacities
    }

    pub fn dim(&self) -> usize {
        self.capacities.len()
    }

    pub fn check(&self, state: &DiscreteState) -> Result<(), DiscreteError> {
        let fits = state.n == self.n
            && state.counts.len() == self.capacities.len()
            && state.counts.iter().zip(&self.capacities).all(|(c, cap)| c <= cap);
        if fits {
            Ok(())
        } else {
            Err(DiscreteError::StateOutOfSpace {
                counts: state.counts.clone(),
                capacities: self.capacities.clone(),
            })
        }
    }

    /// Preference of an agent in subpopulation `index` when `total` agents (self included)
    /// play `A` and the agent currently plays `A` iff `plays_a`.
    pub fn preference(&self, index: usize, total: u64, plays_a: bool) -> Preference {
        let th = &self.thresholds[index];
        let seen = if plays_a && self.tie != TieRule::SelfInclusivePreferA {
            total as i128 - 1
        } else {
            total as i128
        };
        let ord = (seen * th.den).cmp(&(th.num * self.n as i128));
        match (th.role, ord) {
            (_, Ordering::Equal) => match self.tie {
                TieRule::PreferA | TieRule::SelfInclusivePreferA => Preference::A,
                TieRule::PreferB => Preference::B,
                TieRule::UniformRandom => Preference::Coin,
            },
            (Role::Anticoordinator, Ordering::Less) | (Role::Coordinator, Ordering::Greater) => Preference::A,
            _ => Preference::B,
        }
    }

    /// Every move with positive probability out of `counts` (self-loop excluded).
    pub fn moves(&self, counts: &[u64]) -> Vec<Move> {
        let total: u64 = counts.iter().sum();
        let mut out = Vec::with_capacity(2 * counts.len());
        for (index, (&c, &cap)) in counts.iter().zip(&self.capacities).enumerate() {
            if c > 0 {
                let w = match self.preference(index, total, true) {
                    Preference::B => 2,
                    Preference::Coin => 1,
                    Preference::A => 0,
                };
                if w > 0 {
                    out.push(Move { index, up: false, weight: w * c });
                }
            }
            if c < cap {
                let w = match self.preference(index, total, false) {
                    Preference::A => 2,
                    Preference::Coin => 1,
                    Preference::B => 0,
                };
                if w > 0 {
                    out.push(Move { index, up: true, weight: w * (cap - c) });
                }
            }
        }
        out
    }

    pub fn transition_distribution(&self, state: &DiscreteState) -> Result<TransitionDistribution, DiscreteError> {
        self.check(state)?;
        let denom = 2 * self.n as i64;
        let mut entries = Vec::new();
        let mut moved = 0i64;
        for m in self.moves(&state.counts) {
            let mut next = state.clone();
            apply(&mut next.counts, m);
            moved += m.weight as i64;
            entries.push((next, Rational::new(m.weight as i64, denom)));
        }
        if moved < denom {
            entries.push((state.clone(), Rational::new(denom - moved, denom)));
        }
        Ok(TransitionDistribution { entries })
    }

    /// Samples one step: a uniformly drawn agent revises, ties resolved by a fair coin if needed.
    pub fn step<R: Rng + ?Sized>(&self, counts: &mut [u64], total: &mut u64, rng: &mut R) {
        let mut agent = rng.gen_range(0..self.n);
        let mut index = 0;
        while agent >= self.capacities[index] {
            agent -= self.capacities[index];
            index += 1;
        }
        let plays_a = agent < counts[index];
        let prefers_a = match self.preference(index, *total, plays_a) {
            Preference::A => true,
            Preference::B => false,
            Preference::Coin => rng.gen::<bool>(),
        };
        if prefers_a && !plays_a {
            counts[index] += 1;
            *total += 1;
        } else if !prefers_a && plays_a {
            counts[index] -= 1;
            *total -= 1;
        }
    }

    /// `N * E[X_{k+1} - X_k]`, exact.
    pub fn expected_drift(&self, state: &DiscreteState) -> Result<Vec<Rational>, DiscreteError> {
        self.check(state)?;
        let denom = 2 * self.n as i64;
        let mut drift = vec![Rational::zero(); self.dim()];
        for m in self.moves(&state.counts) {
            let r = Rational::new(m.weight as i64, denom);
            if m.up {
                drift[m.index] += r;
            } else {
                drift[m.index] -= r;
            }
        }
        Ok(drift)
    }

    pub fn rho(&self) -> &[Rational] {
        &self.rho
    }

    fn radices(&self) -> Vec<u64> {
        self.capacities.iter().map(|c| c + 1).collect()
    }

    pub fn state_space_size(&self) -> u128 {
        self.radices().iter().map(|r| *r as u128).product()
    }
}

fn apply(counts: &mut [u64], m: Move) {
    if m.up {
        counts[m.index] += 1;
    } else {
        counts[m.index] -= 1;
    }
}

pub fn transition_distribution(
    profile: &PopulationProfile,
    state: &DiscreteState,
    tie: TieRule,
) -> Result<TransitionDistribution, DiscreteError> {
    Kernel::new(profile, state.n, tie)?.transition_distribution(state)
}

pub fn step<R: Rng + ?Sized>(
    profile: &PopulationProfile,
    state: &DiscreteState,
    rng: &mut R,
    tie: TieRule,
) -> Result<DiscreteState, DiscreteError> {
    let kernel = Kernel::new(profile, state.n, tie)?;
    kernel.check(state)?;
    let mut next = state.clone();
    let mut total = next.total_count();
    kernel.step(&mut next.counts, &mut total, rng);
    Ok(next)
}

pub fn expected_drift(
    profile: &PopulationProfile,
    state: &DiscreteState,
    tie: TieRule,
) -> Result<Vec<Rational>, DiscreteError> {
    Kernel::new(profile, state.n, tie)?.expected_drift(state)
}

/// `sqrt(sum (1 + rho_l)^2)`, the uniform bound on the martingale increment.
pub fn noise_bound(profile: &PopulationProfile) -> f64 {
    profile
        .flat_rho()
        .iter()
        .map(|r| {
            let v = 1.0 + crate::model::to_f64(r);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the product of per-subpopulation ranges `0..=cap`.
pub fn random_state<R: Rng + ?Sized>(kernel: &Kernel, rng: &mut R) -> DiscreteState {
    let counts = kernel.capacities().iter().map(|cap| rng.gen_range(0..=*cap)).collect();
    DiscreteState::new(kernel.n(), counts)
}

/// Runs `steps` transitions and records the range of the total over steps `>= burn_in`.
///
/// `observer` sees every state, including the initial one at step 0.
pub fn simulate_with<F>(
    kernel: &Kernel,
    state0: &DiscreteState,
    steps: u64,
    burn_in: u64,
    rng: &mut ChaCha8Rng,
    seed: u64,
    mut observer: F,
) -> Result<TrajectoryStats, DiscreteError>
where
    F: FnMut(u64, &[u64], u64),
{
    kernel.check(state0)?;
    let mut counts = state0.counts.clone();
    let mut total = state0.total_count();
    let (mut lo, mut hi) = (u64::MAX, 0u64);
    observer(0, &counts, total);
    if burn_in == 0 {
        lo = total;
        hi = total;
    }
    for k in 1..=steps {
        kernel.step(&mut counts, &mut total, rng);
        observer(k, &counts, total);
        if k >= burn_in {
            lo = lo.min(total);
            hi = hi.max(total);
        }
    }
    if lo > hi {
        lo = total;
        hi = total;
    }
    let n = kernel.n() as i64;
    let min = Rational::new(lo as i64, n);
    let max = Rational::new(hi as i64, n);
    Ok(TrajectoryStats {
        visited_min_total: min,
        visited_max_total: max,
        amplitude: max - min,
        final_state: DiscreteState::new(kernel.n(), counts),
        steps,
        burn_in,
        seed,
    })
}

pub fn simulate(
    profile: &PopulationProfile,
    state0: &DiscreteState,
    steps: u64,
    burn_in: u64,
    seed: u64,
    tie: TieRule,
) -> Result<TrajectoryStats, DiscreteError> {
    let kernel = Kernel::new(profile, state0.n, tie)?;
    let mut rng = rng_from_seed(seed);
    simulate_with(&kernel, state0, steps, burn_in, &mut rng, seed, |_, _, _| {})
}

/// A closed communicating class with its invariant probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedClass {
    /// States sorted by their mixed-radix index.
    pub states: Vec<DiscreteState>,
    pub is_singleton: bool,
    pub abstract_range: (Rational, Rational),
    /// Probability of `states[k]`, summing to one.
    pub invariant_measure: Vec<BigRational>,
    /// False when the measure came from floating-point power iteration.
    pub measure_exact: bool,
}

impl ClosedClass {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Mixed-radix bijection between states and `0..size`.
struct Indexer {
    radices: Vec<u64>,
}

impl Indexer {
    fn decode(&self, mut idx: usize, out: &mut [u64]) {
        for k in (0..self.radices.len()).rev() {
            let r = self.radices[k] as usize;
            out[k] = (idx % r) as u64;
            idx /= r;
        }
    }

    fn stride(&self, k: usize) -> usize {
        self.radices[k + 1..].iter().map(|r| *r as usize).product()
    }
}

/// Closed classes of the chain, found as the sink components of the transition graph.
pub fn closed_classes(
    profile: &PopulationProfile,
    n: u64,
    tie: TieRule,
    cap: u64,
) -> Result<Vec<ClosedClass>, DiscreteError> {
    let kernel = Kernel::new(profile, n, tie)?;
    let size = kernel.state_space_size();
    if size > cap as u128 {
        return Err(DiscreteError::StateSpaceTooLarge { size, cap });
    }
    let size = size as usize;
    let indexer = Indexer { radices: kernel.radices() };
    let strides: Vec<usize> = (0..kernel.dim()).map(|k| indexer.stride(k)).collect();
    let mut scratch = vec![0u64; kernel.dim()];
    let successors = |v: usize, scratch: &mut Vec<u64>| -> Vec<(usize, u64)> {
        indexer.decode(v, scratch);
        kernel
            .moves(scratch)
            .into_iter()
            .map(|m| {
                let target = if m.up { v + strides[m.index] } else { v - strides[m.index] };
                (target, m.weight)
            })
            .collect()
    };

    let comp = tarjan(size, |v| successors(v, &mut scratch).into_iter().map(|(t, _)| t).collect());

    let num_comps = comp.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut leaves = vec![true; num_comps];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_comps];
    for v in 0..size {
        let c = comp[v] as usize;
        members[c].push(v);
        if leaves[c] && successors(v, &mut scratch).iter().any(|(t, _)| comp[*t] as usize != c) {
            leaves[c] = false;
        }
    }

    let denom = 2 * n;
    let mut classes = Vec::new();
    for (c, states) in members.into_iter().enumerate() {
        if !leaves[c] || states.is_empty() {
            continue;
        }
        let local: std::collections::HashMap<usize, usize> =
            states.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let rows: Vec<Vec<(usize, u64)>> = states
            .iter()
            .map(|v| successors(*v, &mut scratch).into_iter().map(|(t, w)| (local[&t], w)).collect())
            .collect();
        let (measure, exact) = invariant_measure(&rows, denom);
        let decoded: Vec<DiscreteState> = states
            .iter()
            .map(|v| {
                let mut counts = vec![0u64; kernel.dim()];
                indexer.decode(*v, &mut counts);
                DiscreteState::new(n, counts)
            })
            .collect();
        let totals = decoded.iter().map(|s| s.total_x());
        let lo = totals.clone().min().expect("nonempty class");
        let hi = totals.max().expect("nonempty class");
        classes.push(ClosedClass {
            is_singleton: decoded.len() == 1,
            states: decoded,
            abstract_range: (lo, hi),
            invariant_measure: measure,
            measure_exact: exact,
        });
    }
    classes.sort_by(|a, b| a.abstract_range.cmp(&b.abstract_range).then_with(|| a.states.cmp(&b.states)));
    Ok(classes)
}

/// Strongly connected components (iterative Tarjan). Returns the component id of each vertex.
fn tarjan<F>(size: usize, mut succ: F) -> Vec<u32>
where
    F: FnMut(usize) -> Vec<usize>,
{
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; size];
    let mut low = vec![0u32; size];
    let mut comp = vec![UNSEEN; size];
    let mut on_stack = vec![false; size];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut next_comp = 0u32;

    for root in 0..size {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, succ(root), 0));

        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let ws = succ(w);
                    call.push((w, ws, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(parent) = call.last() {
                let p = parent.0;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// Solves `mu = mu P` on an irreducible class. `rows[k]` lists `(target, weight)` with
/// transition probability `weight / denom`; the self-loop is implied.
fn invariant_measure(rows: &[Vec<(usize, u64)>], denom: u64) -> (Vec<BigRational>, bool) {
    let n = rows.len();
    if n == 1 {
        return (vec![BigRational::one()], true);
    }
    if n <= EXACT_MEASURE_LIMIT {
        (exact_measure(rows), true)
    } else {
        (power_measure(rows, denom), false)
    }
}

/// Balance equations `sum_k mu_k q_{kl} = mu_l sum_m q_{lm}` in integer weights, with the last
/// one replaced by normalisation, solved by sparse elimination in state order.
fn exact_measure(rows: &[Vec<(usize, u64)>]) -> Vec<BigRational> {
    use std::collections::BTreeMap;
    let n = rows.len();
    // eq[l][k] is the coefficient of mu_k in the balance equation of state l.
    let mut eq: Vec<BTreeMap<usize, BigRational>> = vec![BTreeMap::new(); n];
    for (k, row) in rows.iter().enumerate() {
        let out: u64 = row.iter().map(|(_, w)| *w).sum();
        *eq[k].entry(k).or_insert_with(BigRational::zero) -= BigRational::from_integer(BigInt::from(out));
        for (l, w) in row {
            *eq[*l].entry(k).or_insert_with(BigRational::zero) += BigRational::from_integer(BigInt::from(*w));
        }
    }
    let mut rhs: Vec<BigRational> = vec![BigRational::zero(); n];
    eq[n - 1] = (0..n).map(|k| (k, BigRational::one())).collect();
    rhs[n - 1] = BigRational::one();

    for col in 0..n {
        let pivot_row = (col..n)
            .find(|r| eq[*r].get(&col).is_some_and(|v| !v.is_zero()))
            .expect("irreducible class has a unique invariant measure");
        eq.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let pivot_eq = std::mem::take(&mut eq[col]);
        let pivot_val = pivot_eq[&col].clone();
        let pivot_rhs = rhs[col].clone();
        for r in col + 1..n {
            let factor = match eq[r].get(&col) {
                Some(v) if !v.is_zero() => v / &pivot_val,
                _ => continue,
            };
            for (c, v) in &pivot_eq {
                let entry = eq[r].entry(*c).or_insert_with(BigRational::zero);
                *entry -= &factor * v;
                if entry.is_zero() {
                    eq[r].remove(c);
                }
            }
            rhs[r] -= &factor * &pivot_rhs;
        }
        eq[col] = pivot_eq;
    }
    let mut mu = vec![BigRational::zero(); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for (c, v) in eq[r].range(r + 1..) {
            acc -= v * &mu[*c];
        }
        mu[r] = acc / &eq[r][&r];
    }
    mu
}

/// Power iteration on the lazy chain `(P + I) / 2`, converted to exact binary fractions.
fn power_measure(rows: &[Vec<(usize, u64)>], denom: u64) -> Vec<BigRational> {
    let n = rows.len();
    let d = denom as f64;
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITER {
        let mut next = vec![0.0; n];
        for (k, row) in rows.iter().enumerate() {
            let out: u64 = row.iter().map(|(_, w)| *w).sum();
            next[k] += mu[k] * (1.0 - out as f64 / d / 2.0);
            for (l, w) in row {
                next[*l] += mu[k] * (*w as f64 / d / 2.0);
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let diff = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        mu = next;
        if diff < POWER_TOL {
            break;
        }
    }
    let exact: Vec<BigRational> =
        mu.iter().map(|v| BigRational::from_float(*v).unwrap_or_else(BigRational::zero)).collect();
    let total: BigRational = exact.iter().sum();
    exact.into_iter().map(|v| v / &total).collect()
}

/// Mass each class's invariant measure assigns to the states in `region`.
pub fn invariant_measure_mass<F>(classes: &[ClosedClass], region: F) -> Vec<BigRational>
where
    F: Fn(&DiscreteState) -> bool,
{
    classes
        .iter()
        .map(|c| {
            c.states
                .iter()
                .zip(&c.invariant_measure)
                .filter(|(s, _)| region(s))
                .map(|(_, m)| m.clone())
                .sum()
        })
        .collect()
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_rational, preferred_strategy, Strategy};

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn example3() -> PopulationProfile {
        PopulationProfile::new(
            vec![(r("0.6"), r("0.85"))],
            vec![(r("0.3"), r("0.75")), (r("0.1"), r("0.35"))],
        )
        .unwrap()
    }

    fn coord_half() -> PopulationProfile {
        PopulationProfile::new(vec![], vec![(r("1"), r("0.5"))]).unwrap()
    }

    fn anti_single() -> PopulationProfile {
        PopulationProfile::new(vec![(r("1"), r("0.6"))], vec![]).unwrap()
    }

    fn st(n: u64, counts: &[u64]) -> DiscreteState {
        DiscreteState::new(n, counts.to_vec())
    }

    #[test]
    fn kernel_preference_matches_rational_rule() {
        let p = example3();
        for tie in TieRule::ALL {
            let k = Kernel::new(&p, 20, tie).unwrap();
            for total in 0..=20u64 {
                for idx in 0..3 {
                    for plays_a in [false, true] {
                        let cur = if plays_a { Strategy::A } else { Strategy::B };
                        let expected =
                            preferred_strategy(&p, idx, Rational::new(total as i64, 20), cur, 20, tie).unwrap();
                        assert_eq!(k.preference(idx, total, plays_a), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn unanimous_coordinators_stay_put() {
        let d = transition_distribution(&coord_half(), &st(4, &[4]), TieRule::PreferA).unwrap();
        assert_eq!(d.entries, vec![(st(4, &[4]), Rational::one())]);
    }

    #[test]
    fn example3_hand_evaluated_kernel() {
        let d = transition_distribution(&example3(), &st(20, &[12, 1, 2]), TieRule::PreferA).unwrap();
        assert_eq!(d.probability_of(&st(20, &[12, 0, 2])), Rational::new(1, 20));
        assert_eq!(d.probability_of(&st(20, &[12, 2, 2])), Rational::new(5, 20));
        assert_eq!(d.probability_of(&st(20, &[12, 1, 2])), Rational::new(14, 20));
        assert_eq!(d.entries.len(), 3);
        assert_eq!(d.total_probability(), Rational::one());

        let fixed = transition_distribution(&example3(), &st(20, &[12, 0, 2]), TieRule::PreferA).unwrap();
        assert_eq!(fixed.entries, vec![(st(20, &[12, 0, 2]), Rational::one())]);
    }

    #[test]
    fn out_of_space_and_bad_size() {
        assert!(matches!(
            transition_distribution(&example3(), &st(20, &[13, 0, 0]), TieRule::PreferA),
            Err(DiscreteError::StateOutOfSpace { .. })
        ));
        assert_eq!(Kernel::new(&example3(), 15, TieRule::PreferA).unwrap_err(), DiscreteError::InvalidSize(15));
    }

    #[test]
    fn sampled_frequencies_match_kernel() {
        let kernel = Kernel::new(&example3(), 20, TieRule::PreferA).unwrap();
        let mut rng = rng_from_seed(11);
        let trials = 100_000u64;
        let (mut down, mut up, mut stay) = (0u64, 0u64, 0u64);
        for _ in 0..trials {
            let mut counts = vec![12, 1, 2];
            let mut total = 15;
            kernel.step(&mut counts, &mut total, &mut rng);
            match counts[1] {
                0 => down += 1,
                2 => up += 1,
                _ => stay += 1,
            }
        }
        for (hits, p) in [(down, 0.05), (up, 0.25), (stay, 0.7)] {
            let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!((hits as f64 - trials as f64 * p).abs() < 3.0 * sigma, "{hits} vs {p}");
        }
    }

    #[test]
    fn coin_ties_halve_the_rate() {
        // N = 10, tau' = 0.5: a B-player at total 5/10 faces an exact tie.
        let d = transition_distribution(&coord_half(), &st(10, &[5]), TieRule::UniformRandom).unwrap();
        assert_eq!(d.probability_of(&st(10, &[6])), Rational::new(5, 20));
        // A-players see 4/10 < 1/2 and leave for sure.
        assert_eq!(d.probability_of(&st(10, &[4])), Rational::new(5, 10));
        assert_eq!(d.total_probability(), Rational::one());
    }

    #[test]
    fn drift_examples() {
        // total 0.3 lies below every threshold: x1 -> rho1, coordinators -> 0.
        let drift = expected_drift(&example3(), &st(20, &[4, 0, 2]), TieRule::PreferA).unwrap();
        assert_eq!(drift, vec![r("0.4"), r("0"), r("-0.1")]);
        let at_eq = expected_drift(&example3(), &st(20, &[12, 0, 2]), TieRule::PreferA).unwrap();
        assert!(at_eq.iter().all(|d| d.is_zero()));
        let band = expected_drift(&example3(), &st(20, &[12, 1, 2]), TieRule::PreferA).unwrap();
        assert_eq!(band[1], r("0.2"));
        assert!(band[1] >= r("-0.05") && band[1] <= r("0.25"));
    }

    #[test]
    fn noise_bound_values() {
        assert_eq!(noise_bound(&anti_single()), 2.0);
        assert!((noise_bound(&example3()) - 5.46f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn simulate_absorbed_runs() {
        let stats = simulate(&coord_half(), &st(4, &[0]), 100, 10, 3, TieRule::PreferA).unwrap();
        assert_eq!(stats.amplitude, Rational::zero());
        assert_eq!(stats.final_state, st(4, &[0]));
        let ex3 = simulate(&example3(), &st(20, &[12, 0, 2]), 500, 100, 9, TieRule::PreferA).unwrap();
        assert_eq!(ex3.amplitude, Rational::zero());
        let again = simulate(&example3(), &st(20, &[5, 3, 1]), 500, 100, 9, TieRule::PreferA).unwrap();
        assert_eq!(again, simulate(&example3(), &st(20, &[5, 3, 1]), 500, 100, 9, TieRule::PreferA).unwrap());
    }

    #[test]
    fn coordinator_chain_has_two_absorbing_states() {
        let classes = closed_classes(&coord_half(), 4, TieRule::PreferA, DEFAULT_STATE_CAP).unwrap();
        let states: Vec<_> = classes.iter().map(|c| c.states.clone()).collect();
        assert_eq!(states, vec![vec![st(4, &[0])], vec![st(4, &[4])]]);
        assert!(classes.iter().all(|c| c.is_singleton && c.invariant_measure == vec![BigRational::one()]));
    }

    #[test]
    fn single_anticoordinator_chain() {
        // From 3 the B-players see 3/5 <= 0.6 and join; at 4 the A-players see 3/5 and stay,
        // B-players see 4/5 > 0.6 and stay; at 5 the A-players see 4/5 and leave.
        let classes = closed_classes(&anti_single(), 5, TieRule::PreferA, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].states, vec![st(5, &[4])]);
        assert_eq!(classes[0].abstract_range, (r("0.8"), r("0.8")));
    }

    #[test]
    fn example3_contains_its_clean_cut_state() {
        let classes = closed_classes(&example3(), 20, TieRule::PreferA, DEFAULT_STATE_CAP).unwrap();
        assert!(classes.iter().any(|c| c.states == vec![st(20, &[12, 0, 2])]));
        let kernel = Kernel::new(&example3(), 20, TieRule::PreferA).unwrap();
        for class in &classes {
            let sum: BigRational = class.invariant_measure.iter().sum();
            assert_eq!(sum, BigRational::one());
            for s in &class.states {
                for (t, _) in kernel.transition_distribution(s).unwrap().entries {
                    assert!(class.states.contains(&t));
                }
            }
        }
    }

    #[test]
    fn two_cycle_measure_is_uniform() {
        // Two states swapping with equal weight.
        let rows = vec![vec![(1usize, 3u64)], vec![(0usize, 3u64)]];
        let mu = exact_measure(&rows);
        assert_eq!(mu, vec![BigRational::new(1.into(), 2.into()); 2]);
        let class = ClosedClass {
            states: vec![st(2, &[0]), st(2, &[1])],
            is_singleton: false,
            abstract_range: (r("0"), r("0.5")),
            invariant_measure: mu,
            measure_exact: true,
        };
        let mass = invariant_measure_mass(&[class], |s| s.counts[0] == 1);
        assert_eq!(mass, vec![BigRational::new(1.into(), 2.into())]);
    }

    #[test]
    fn exact_and_power_measures_agree() {
        // Birth-death chain 0..4 with asymmetric rates; detailed balance gives the oracle.
        let up = [4u64, 3, 2, 1];
        let down = [1u64, 2, 3, 4];
        let rows: Vec<Vec<(usize, u64)>> = (0..5)
            .map(|k| {
                let mut row = Vec::new();
                if k > 0 {
                    row.push((k - 1, down[k - 1]));
                }
                if k < 4 {
                    row.push((k + 1, up[k]));
                }
                row
            })
            .collect();
        let exact = exact_measure(&rows);
        let mut oracle = vec![BigRational::one()];
        for k in 0..4 {
            let next = &oracle[k] * BigRational::new(up[k].into(), down[k].into());
            oracle.push(next);
        }
        let z: BigRational = oracle.iter().sum();
        let oracle: Vec<BigRational> = oracle.into_iter().map(|v| v / &z).collect();
        assert_eq!(exact, oracle);
        let approx = power_measure(&rows, 20);
        for (a, b) in approx.iter().zip(&oracle) {
            assert!((big_to_f64(a) - big_to_f64(b)).abs() < 1e-9);
        }
    }

    #[test]
    fn state_space_cap_is_enforced() {
        let err = closed_classes(&example3(), 20, TieRule::PreferA, 100).unwrap_err();
        assert_eq!(err, DiscreteError::StateSpaceTooLarge { size: 13 * 7 * 3, cap: 100 });
    }

    #[test]
    fn tarjan_on_small_graph() {
        // 0 -> 1 -> 2 -> 0, 2 -> 3, 3 -> 3
        let adj = [vec![1], vec![2], vec![0, 3], vec![]];
        let comp = tarjan(4, |v| adj[v].clone());
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[2], comp[3]);
    }
}
