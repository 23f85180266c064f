//! Reproducible experiments built on the chain, the mean dynamics and the equilibrium analysis.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::continuous::{component_hull, flow, vector_field_exact, ContinuousError, FlowOptions};
use crate::discrete::{
    big_to_f64, closed_classes, random_state, rng_from_seed, simulate_with, DiscreteError, DiscreteState, Kernel,
};
use crate::equilibria::{birkhoff_center, EquilibriumError};
use crate::model::{to_f64, PopulationProfile, Rational, TieRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("InvalidSize: N = {0} is not a valid population size for this profile")]
    InvalidSize(u64),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error(transparent)]
    Continuous(#[from] ContinuousError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-run seed for cell `(n, replicate)` of a sweep.
pub fn run_seed(master_seed: u64, n: u64, replicate: u64) -> u64 {
    mix(mix(mix(master_seed) ^ n) ^ replicate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sizes: Vec<u64>,
    pub replicates: u64,
    pub steps_per_agent: u64,
    pub burn_in_fraction: f64,
    pub master_seed: u64,
    pub tie: TieRule,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: Vec::new(),
            replicates: 1,
            steps_per_agent: 30,
            burn_in_fraction: 0.5,
            master_seed: 0,
            tie: TieRule::PreferA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub n: u64,
    pub replicate: u64,
    pub seed: u64,
    pub min_total: Rational,
    pub max_total: Rational,
    pub amplitude: Rational,
}

/// Independent runs from uniformly random initial states, one row per `(N, replicate)`.
pub fn fluctuation_sweep(profile: &PopulationProfile, cfg: &SweepConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    if cfg.replicates == 0 {
        return Err(ExperimentError::InvalidArgument("replicates must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.burn_in_fraction) {
        return Err(ExperimentError::InvalidArgument("burn-in fraction must lie in [0, 1)".into()));
    }
    let kernels = cfg
        .sizes
        .iter()
        .map(|&n| Kernel::new(profile, n, cfg.tie).map_err(|_| ExperimentError::InvalidSize(n)))
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, u64)> =
        (0..kernels.len()).flat_map(|k| (0..cfg.replicates).map(move |r| (k, r))).collect();
    let mut rows = cells
        .par_iter()
        .map(|&(k, replicate)| {
            let kernel = &kernels[k];
            let n = kernel.n();
            let seed = run_seed(cfg.master_seed, n, replicate);
            let mut rng = rng_from_seed(seed);
            let start = random_state(kernel, &mut rng);
            let steps = cfg.steps_per_agent * n;
            let burn_in = (cfg.burn_in_fraction * steps as f64).floor() as u64;
            let stats = simulate_with(kernel, &start, steps, burn_in, &mut rng, seed, |_, _, _| {})?;
            Ok(SweepRow {
                n,
                replicate,
                seed,
                min_total: stats.visited_min_total,
                max_total: stats.visited_max_total,
                amplitude: stats.amplitude,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.sort_by_key(|r| (r.n, r.replicate));
    Ok(rows)
}

/// Median amplitude per population size, ascending in `N`.
pub fn median_amplitudes(rows: &[SweepRow]) -> Vec<(u64, Rational)> {
    let mut sizes: Vec<u64> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let mut amps: Vec<Rational> = rows.iter().filter(|r| r.n == n).map(|r| r.amplitude).collect();
            amps.sort();
            let m = amps.len();
            let median = if m % 2 == 1 {
                amps[m / 2]
            } else {
                (amps[m / 2 - 1] + amps[m / 2]) / Rational::from_integer(2)
            };
            (n, median)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub n: u64,
    pub class_id: usize,
    pub abs_lo: Rational,
    pub abs_hi: Rational,
    pub class_size: usize,
    /// Largest distance from a total occupied by the class to the nearest equilibrium value.
    pub hausdorff: f64,
    /// Invariant-measure mass of class states within `eps` (sup-norm) of an equilibrium state.
    pub mass_within_eps: f64,
}

pub fn concentration_check(
    profile: &PopulationProfile,
    sizes: &[u64],
    eps: f64,
    tie: TieRule,
    cap: u64,
) -> Result<Vec<ConcentrationRow>, ExperimentError> {
    let bc = birkhoff_center(profile)?;
    let bc_values: Vec<Rational> = bc.iter().map(|e| e.abstract_value).collect();
    let bc_states: Vec<Vec<f64>> = bc.iter().map(|e| e.state.iter().map(to_f64).collect()).collect();
    let mut rows = Vec::new();
    for &n in sizes {
        if !profile.is_valid_size(n) {
            return Err(ExperimentError::InvalidSize(n));
        }
        let classes = closed_classes(profile, n, tie, cap)?;
        for (class_id, class) in classes.iter().enumerate() {
            let hausdorff = class
                .states
                .iter()
                .map(|s| {
                    let x = s.total_x();
                    bc_values.iter().map(|v| (x - v).abs()).min().expect("nonempty center")
                })
                .max()
                .map(|d| to_f64(&d))
                .unwrap_or(0.0);
            let mass: f64 = class
                .states
                .iter()
                .zip(&class.invariant_measure)
                .filter(|(s, _)| {
                    let x = s.proportions_f64();
                    bc_states.iter().any(|q| x.iter().zip(q).all(|(a, b)| (a - b).abs() <= eps))
                })
                .map(|(_, m)| big_to_f64(m))
                .sum();
            rows.push(ConcentrationRow {
                n,
                class_id,
                abs_lo: class.abstract_range.0,
                abs_hi: class.abstract_range.1,
                class_size: class.len(),
                hausdorff,
                mass_within_eps: mass,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftViolation {
    pub counts: Vec<u64>,
    pub component: usize,
    pub drift: Rational,
    pub lo: Rational,
    pub hi: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftReport {
    pub n: u64,
    pub tie: TieRule,
    pub states: u64,
    /// States outside every tie band whose drift equals the field exactly.
    pub singleton_matched: u64,
    /// States inside some band `[tau, tau + 1/N]`.
    pub band_states: u64,
    pub violations: Vec<DriftViolation>,
}

/// Calls `f` on every state of the product space `0..=cap_p`.
fn for_each_state<F: FnMut(&[u64])>(capacities: &[u64], mut f: F) {
    let mut counts = vec![0u64; capacities.len()];
    loop {
        f(&counts);
        let mut k = counts.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if counts[k] < capacities[k] {
                counts[k] += 1;
                break;
            }
            counts[k] = 0;
        }
    }
}

/// Compares the chain's exact drift with the mean-dynamics field at every state.
///
/// Outside every band `[tau, tau + 1/N]` the drift must equal the (single-valued) field.
/// Inside a band each component must lie in the hull of its field over totals in
/// `[x - 1/N, x]`. Under the self-inclusive rule the drift must also equal
/// `rho_p (2 - s_hat) - x_p`.
pub fn drift_consistency_check(
    profile: &PopulationProfile,
    n: u64,
    tie: TieRule,
    cap: u64,
) -> Result<DriftReport, ExperimentError> {
    let kernel = Kernel::new(profile, n, tie).map_err(|_| ExperimentError::InvalidSize(n))?;
    let size = kernel.state_space_size();
    if size > cap as u128 {
        return Err(DiscreteError::StateSpaceTooLarge { size, cap }.into());
    }
    let step = Rational::new(1, n as i64);
    let thresholds = profile.flat_tau();
    let rho = profile.flat_rho();
    let mut report = DriftReport { n, tie, states: 0, singleton_matched: 0, band_states: 0, violations: Vec::new() };
    let mut failure = None;
    for_each_state(kernel.capacities(), |counts| {
        if failure.is_some() {
            return;
        }
        let state = DiscreteState::new(n, counts.to_vec());
        let drift = match kernel.expected_drift(&state) {
            Ok(d) => d,
            Err(e) => {
                failure = Some(ExperimentError::from(e));
                return;
            }
        };
        let x = state.proportions();
        let total = state.total_x();
        report.states += 1;
        let in_band = thresholds.iter().any(|t| *t <= total && total <= *t + step);
        let mut found = Vec::new();
        let mut check = |component: usize, lo: Rational, hi: Rational| {
            let d = drift[component];
            if d < lo || d > hi {
                found.push(DriftViolation { counts: counts.to_vec(), component, drift: d, lo, hi });
            }
        };
        if in_band {
            for (k, xk) in x.iter().enumerate() {
                let hull = component_hull(profile, k, *xk, total - step, total);
                check(k, hull.lo, hull.hi);
            }
        } else {
            let field = vector_field_exact(profile, &x).expect("state lies in the space");
            for (k, iv) in field.iter().enumerate() {
                check(k, iv.lo, iv.hi);
            }
        }
        if tie == TieRule::SelfInclusivePreferA {
            for k in 0..x.len() {
                let prefers_a = kernel.preference(k, state.total_count(), false) == crate::model::Preference::A;
                let expected = if prefers_a { rho[k] } else { Rational::zero() } - x[k];
                check(k, expected, expected);
            }
        }
        if in_band {
            report.band_states += 1;
        } else if found.is_empty() {
            report.singleton_matched += 1;
        }
        report.violations.extend(found);
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayRow {
    pub t: f64,
    pub discrete_total: f64,
    pub continuous_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub rows: Vec<OverlayRow>,
    pub sup_gap: f64,
}

/// Runs the chain and the mean dynamics from the same state on the time scale `t = k / N`.
pub fn compare_discrete_continuous(
    profile: &PopulationProfile,
    n: u64,
    counts: &[u64],
    steps: u64,
    seed: u64,
    tie: TieRule,
    eq_tol: f64,
) -> Result<Overlay, ExperimentError> {
    if steps == 0 {
        return Err(ExperimentError::InvalidArgument("steps must be at least 1".into()));
    }
    let kernel = Kernel::new(profile, n, tie).map_err(|_| ExperimentError::InvalidSize(n))?;
    let start = DiscreteState::new(n, counts.to_vec());
    kernel.check(&start)?;
    let horizon = steps as f64 / n as f64;
    let traj = flow(profile, &start.proportions_f64(), FlowOptions { t_end: horizon, eq_tol, ..Default::default() })?;
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(steps as usize + 1);
    simulate_with(&kernel, &start, steps, 0, &mut rng, seed, |k, _, total| {
        let t = k as f64 / n as f64;
        rows.push(OverlayRow { t, discrete_total: total as f64 / n as f64, continuous_total: traj.total_at(t) });
    })?;
    let sup_gap = rows.iter().map(|r| (r.discrete_total - r.continuous_total).abs()).fold(0.0, f64::max);
    Ok(Overlay { rows, sup_gap })
}
