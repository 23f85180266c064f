//! Mean dynamics of the population state.
//!
//! Every component relaxes at unit rate toward either `0` or its full proportion, and the
//! choice only changes when the total crosses a threshold. Between thresholds the flow is
//! therefore a closed-form exponential, and the integrator jumps from event to event.
//! Region bookkeeping is symbolic (which pair of thresholds brackets the total), so
//! floating-point round-off never decides which side of a threshold the state is on.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::{to_f64, PopulationProfile, Rational, Role};

pub const DEFAULT_EQ_TOL: f64 = 1e-12;
pub const DEFAULT_T_END: f64 = 50.0;
pub const PERTURBATION: f64 = 1e-9;
const TINY_EVENT: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuousError {
    #[error("StateOutOfSpace: component {index} = {value} is outside [0, {rho}]")]
    StateOutOfSpace { index: usize, value: f64, rho: f64 },
    #[error("StateOutOfSpace: expected {expected} components, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("AssumptionViolated: {0}")]
    AssumptionViolated(String),
    #[error("NoProgress: repeated zero-length segments near t = {0}")]
    NoProgress(f64),
    #[error("InvalidHorizon: t_end must be positive, got {0}")]
    InvalidHorizon(f64),
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: PartialOrd + Copy> Interval<T> {
    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn hull(&self, other: &Self) -> Self {
        let lo = if other.lo < self.lo { other.lo } else { self.lo };
        let hi = if other.hi > self.hi { other.hi } else { self.hi };
        Self { lo, hi }
    }
}

impl Interval<f64> {
    pub fn contains_tol(&self, v: f64, tol: f64) -> bool {
        self.lo - tol <= v && v <= self.hi + tol
    }
}

/// Field of one component given how the total compares with its threshold.
fn component<T>(role: Role, ord: std::cmp::Ordering, rho: T, x: T) -> Interval<T>
where
    T: Copy + PartialOrd + std::ops::Sub<Output = T> + std::ops::Neg<Output = T>,
{
    use std::cmp::Ordering::*;
    let toward_a = Interval::point(rho - x);
    let toward_b = Interval::point(-x);
    match (role, ord) {
        (_, Equal) => Interval::new(-x, rho - x),
        (Role::Anticoordinator, Less) | (Role::Coordinator, Greater) => toward_a,
        _ => toward_b,
    }
}

/// Componentwise field at a rational state; threshold comparisons are exact.
pub fn vector_field_exact(
    profile: &PopulationProfile,
    x: &[Rational],
) -> Result<Vec<Interval<Rational>>, ContinuousError> {
    let rho = profile.flat_rho();
    check_dim(rho.len(), x.len())?;
    for (index, (xp, r)) in x.iter().zip(&rho).enumerate() {
        if *xp < Rational::zero() || xp > r {
            return Err(ContinuousError::StateOutOfSpace { index, value: to_f64(xp), rho: to_f64(r) });
        }
    }
    let total: Rational = x.iter().sum();
    Ok(profile
        .flat()
        .iter()
        .zip(x)
        .map(|(sub, xp)| component(sub.role, total.cmp(&sub.tau), sub.rho, *xp))
        .collect())
}

/// Componentwise field at a real state; totals within `eq_tol` of a threshold count as equal.
pub fn vector_field(
    profile: &PopulationProfile,
    x: &[f64],
    eq_tol: f64,
) -> Result<Vec<Interval<f64>>, ContinuousError> {
    let rho: Vec<f64> = profile.flat_rho().iter().map(to_f64).collect();
    check_state(&rho, x, eq_tol)?;
    let total: f64 = x.iter().sum();
    Ok(profile
        .flat()
        .iter()
        .zip(x.iter().zip(&rho))
        .map(|(sub, (xp, r))| {
            let tau = to_f64(&sub.tau);
            let ord = if (total - tau).abs() <= eq_tol {
                std::cmp::Ordering::Equal
            } else {
                total.partial_cmp(&tau).expect("finite state")
            };
            component(sub.role, ord, *r, *xp)
        })
        .collect())
}

/// Hull of one component's field over all totals in `[lo, hi]` with the component fixed at `x`.
pub fn component_hull(
    profile: &PopulationProfile,
    index: usize,
    x: Rational,
    lo: Rational,
    hi: Rational,
) -> Interval<Rational> {
    let sub = profile.subpopulation(index).expect("index in range");
    if lo <= sub.tau && sub.tau <= hi {
        return Interval::new(-x, sub.rho - x);
    }
    component(sub.role, lo.cmp(&sub.tau), sub.rho, x)
}

/// Field of the total, from the cumulative proportions alone.
pub fn abstract_field(profile: &PopulationProfile, total: Rational) -> Result<Interval<Rational>, ContinuousError> {
    let report = profile.validate_assumption1();
    if report.equilibria_affected() {
        return Err(ContinuousError::AssumptionViolated(
            "cumulative sums or thresholds coincide; the abstract field is not defined by the usual cases".into(),
        ));
    }
    Ok(abstract_field_unchecked(profile, total))
}

pub(crate) fn abstract_field_unchecked(profile: &PopulationProfile, x: Rational) -> Interval<Rational> {
    let cum = profile.cumulative();
    if let Some(pos) = profile.anti_tau().iter().position(|t| *t == x) {
        let i = pos as isize + 1;
        let j = cum.coord_below(&x) as isize;
        return Interval::new(
            cum.pi(i - 1) + cum.pi_prime(j) - x,
            cum.pi(i) + cum.pi_prime(j) - x,
        );
    }
    if let Some(pos) = profile.coord_tau().iter().position(|t| *t == x) {
        let j = pos as isize + 1;
        let i = cum.anti_above(&x) as isize;
        return Interval::new(
            cum.pi(i) + cum.pi_prime(j - 1) - x,
            cum.pi(i) + cum.pi_prime(j) - x,
        );
    }
    let i = cum.anti_above(&x) as isize;
    let j = cum.coord_below(&x) as isize;
    Interval::point(cum.pi(i) + cum.pi_prime(j) - x)
}

fn check_dim(expected: usize, got: usize) -> Result<(), ContinuousError> {
    if expected == got {
        Ok(())
    } else {
        Err(ContinuousError::WrongDimension { expected, got })
    }
}

fn check_state(rho: &[f64], x: &[f64], tol: f64) -> Result<(), ContinuousError> {
    check_dim(rho.len(), x.len())?;
    for (index, (xp, r)) in x.iter().zip(rho).enumerate() {
        if !xp.is_finite() || *xp < -tol || *xp > r + tol {
            return Err(ContinuousError::StateOutOfSpace { index, value: *xp, rho: *r });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Smooth,
    /// Total pinned at the threshold of subpopulation `index`, which absorbs the residual.
    Sliding { index: usize },
}

impl SegmentKind {
    pub fn label(&self) -> &'static str {
        match self {
            SegmentKind::Smooth => "smooth",
            SegmentKind::Sliding { .. } => "sliding",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    /// Relaxation targets; for a sliding segment the pinned component's entry is its limit.
    pub targets: Vec<f64>,
    pub kind: SegmentKind,
    /// Pinned total on sliding segments.
    pub level: f64,
}

impl Segment {
    fn state_at(&self, t: f64) -> Vec<f64> {
        let decay = (-(t - self.t0)).exp();
        let mut x: Vec<f64> =
            self.x0.iter().zip(&self.targets).map(|(x0, c)| c + (x0 - c) * decay).collect();
        if let SegmentKind::Sliding { index } = self.kind {
            let others: f64 = x.iter().enumerate().filter(|(k, _)| *k != index).map(|(_, v)| v).sum();
            x[index] = self.level - others;
        }
        x
    }

    fn derivative_at(&self, t: f64) -> Vec<f64> {
        let x = self.state_at(t);
        let mut d: Vec<f64> = x.iter().zip(&self.targets).map(|(xp, c)| c - xp).collect();
        if let SegmentKind::Sliding { index } = self.kind {
            let others: f64 = d.iter().enumerate().filter(|(k, _)| *k != index).map(|(_, v)| v).sum();
            d[index] = -others;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub segments: Vec<Segment>,
    pub t_end: f64,
    /// Time after which the state stays within `eq_tol` of its limit, if reached before `t_end`.
    pub converged_at: Option<f64>,
    /// Limit point of the final segment.
    pub limit: Vec<f64>,
}

impl FlowTrajectory {
    fn segment_for(&self, t: f64) -> &Segment {
        self.segments
            .iter()
            .find(|s| t <= s.t1)
            .unwrap_or_else(|| self.segments.last().expect("at least one segment"))
    }

    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.segment_for(t).state_at(t)
    }

    pub fn total_at(&self, t: f64) -> f64 {
        self.state_at(t).iter().sum()
    }

    pub fn kind_at(&self, t: f64) -> SegmentKind {
        self.segment_for(t).kind
    }

    /// Selected velocity at time `t`.
    pub fn derivative_at(&self, t: f64) -> Vec<f64> {
        self.segment_for(t).derivative_at(t)
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.state_at(self.t_end)
    }

    /// Segment starts followed by the state at `t_end`.
    pub fn breakpoints(&self) -> Vec<Breakpoint> {
        let mut out: Vec<Breakpoint> = self
            .segments
            .iter()
            .map(|s| Breakpoint { t: s.t0, x: s.x0.clone(), kind: s.kind })
            .collect();
        let last = self.segments.last().expect("at least one segment");
        if self.t_end > last.t0 {
            out.push(Breakpoint { t: self.t_end, x: last.state_at(self.t_end), kind: last.kind });
        }
        out
    }

    /// Breakpoints with `per_gap` evenly spaced extra samples between consecutive ones.
    pub fn sample(&self, per_gap: usize) -> Vec<Breakpoint> {
        let bps = self.breakpoints();
        let mut out = Vec::new();
        for w in bps.windows(2) {
            out.push(w[0].clone());
            for k in 1..=per_gap {
                let t = w[0].t + (w[1].t - w[0].t) * k as f64 / (per_gap + 1) as f64;
                out.push(Breakpoint { t, x: self.state_at(t), kind: w[0].kind });
            }
        }
        out.extend(bps.last().cloned());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Perturb {
    #[default]
    None,
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub t_end: f64,
    pub eq_tol: f64,
    /// Nudges the initial total by `PERTURBATION` to leave an unstable threshold.
    pub perturb: Perturb,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { t_end: DEFAULT_T_END, eq_tol: DEFAULT_EQ_TOL, perturb: Perturb::None }
    }
}

/// Where the total sits relative to the sorted thresholds `levels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    /// Strictly between `levels[k-1]` and `levels[k]` (with 0 and 1 as outer bounds).
    Between(usize),
    At(usize),
}

struct Regions<'a> {
    profile: &'a PopulationProfile,
    /// Thresholds ascending, paired with their flat index.
    levels: Vec<(Rational, usize)>,
}

impl<'a> Regions<'a> {
    fn new(profile: &'a PopulationProfile) -> Result<Self, ContinuousError> {
        let mut levels: Vec<(Rational, usize)> =
            profile.flat_tau().into_iter().enumerate().map(|(k, t)| (t, k)).collect();
        levels.sort();
        if levels.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ContinuousError::AssumptionViolated(
                "an anticoordinator and a coordinator share a threshold".into(),
            ));
        }
        Ok(Self { profile, levels })
    }

    fn bounds(&self, k: usize) -> (Rational, Rational) {
        let lo = if k == 0 { Rational::zero() } else { self.levels[k - 1].0 };
        let hi = if k == self.levels.len() { Rational::one() } else { self.levels[k].0 };
        (lo, hi)
    }

    /// Exact targets for a total strictly inside region `k`.
    fn targets(&self, k: usize) -> Vec<Rational> {
        let (lo, hi) = self.bounds(k);
        let probe = (lo + hi) / Rational::from_integer(2);
        self.profile
            .flat()
            .iter()
            .map(|s| {
                let toward_a = match s.role {
                    Role::Anticoordinator => probe < s.tau,
                    Role::Coordinator => probe > s.tau,
                };
                if toward_a {
                    s.rho
                } else {
                    Rational::zero()
                }
            })
            .collect()
    }

    fn locate(&self, total: f64, tol: f64) -> Position {
        for (k, (tau, _)) in self.levels.iter().enumerate() {
            if (total - to_f64(tau)).abs() <= tol {
                return Position::At(k);
            }
        }
        Position::Between(self.levels.iter().filter(|(tau, _)| to_f64(tau) < total).count())
    }
}

fn to_f64s(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

fn convergence_time(t0: f64, deviation: f64, tol: f64) -> f64 {
    if deviation <= tol {
        t0
    } else {
        t0 + (deviation / tol).ln()
    }
}

/// Integrates the mean dynamics from `x0` with the sliding and stationary selections.
pub fn flow(
    profile: &PopulationProfile,
    x0: &[f64],
    opts: FlowOptions,
) -> Result<FlowTrajectory, ContinuousError> {
    if opts.t_end.is_nan() || opts.t_end <= 0.0 {
        return Err(ContinuousError::InvalidHorizon(opts.t_end));
    }
    let rho = to_f64s(&profile.flat_rho());
    check_state(&rho, x0, opts.eq_tol)?;
    let regions = Regions::new(profile)?;
    let mut x = x0.to_vec();
    match opts.perturb {
        Perturb::None => {}
        Perturb::Up => {
            if let Some(k) = (0..x.len()).find(|k| rho[*k] - x[*k] >= PERTURBATION) {
                x[k] += PERTURBATION;
            }
        }
        Perturb::Down => {
            if let Some(k) = (0..x.len()).find(|k| x[*k] >= PERTURBATION) {
                x[k] -= PERTURBATION;
            }
        }
    }

    let mut pos = regions.locate(x.iter().sum(), opts.eq_tol);
    let mut t = 0.0;
    let mut segments = Vec::new();
    let mut tiny_events = 0usize;
    let mut converged_at = None;
    let limit;

    loop {
        match pos {
            Position::At(k) => {
                let (tau, index) = regions.levels[k];
                let below: Rational = regions.targets(k).iter().sum();
                let above: Rational = regions.targets(k + 1).iter().sum();
                let rises = above > tau;
                let falls = below < tau;
                if rises && !falls {
                    pos = Position::Between(k + 1);
                    continue;
                }
                if falls && !rises {
                    pos = Position::Between(k);
                    continue;
                }
                // Attracting (sliding) or repelling (stationary selection): the total stays at
                // tau while the rest of the population relaxes and `index` takes up the slack.
                let mut targets = regions.targets(k);
                let others: Rational =
                    targets.iter().enumerate().filter(|(q, _)| *q != index).map(|(_, v)| *v).sum();
                targets[index] = tau - others;
                let targets = to_f64s(&targets);
                let deviation: f64 = x.iter().zip(&targets).map(|(a, b)| (a - b).abs()).sum();
                converged_at = Some(convergence_time(t, deviation, opts.eq_tol));
                limit = targets.clone();
                segments.push(Segment {
                    t0: t,
                    t1: opts.t_end,
                    x0: x.clone(),
                    targets,
                    kind: SegmentKind::Sliding { index },
                    level: to_f64(&tau),
                });
                break;
            }
            Position::Between(k) => {
                let exact = regions.targets(k);
                let c_total: Rational = exact.iter().sum();
                let targets = to_f64s(&exact);
                let (lo, hi) = regions.bounds(k);
                let (cf, lof, hif) = (to_f64(&c_total), to_f64(&lo), to_f64(&hi));
                let total0: f64 = x.iter().sum::<f64>().clamp(lof, hif);
                let event = if c_total > hi && k < regions.levels.len() {
                    Some((k, ((total0 - cf) / (hif - cf)).ln()))
                } else if c_total < lo && k > 0 {
                    Some((k - 1, ((total0 - cf) / (lof - cf)).ln()))
                } else {
                    None
                };
                match event {
                    Some((level, dt)) if t + dt < opts.t_end => {
                        let dt = dt.max(0.0);
                        if dt < TINY_EVENT {
                            tiny_events += 1;
                            if tiny_events > 2 * regions.levels.len() + 2 {
                                return Err(ContinuousError::NoProgress(t));
                            }
                        }
                        let seg = Segment {
                            t0: t,
                            t1: t + dt,
                            x0: x.clone(),
                            targets,
                            kind: SegmentKind::Smooth,
                            level: 0.0,
                        };
                        x = seg.state_at(t + dt);
                        t += dt;
                        segments.push(seg);
                        pos = Position::At(level);
                    }
                    _ => {
                        if event.is_none() {
                            let deviation = x.iter().zip(&targets).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                            converged_at = Some(convergence_time(t, deviation, opts.eq_tol));
                        }
                        limit = targets.clone();
                        segments.push(Segment {
                            t0: t,
                            t1: opts.t_end,
                            x0: x.clone(),
                            targets,
                            kind: SegmentKind::Smooth,
                            level: 0.0,
                        });
                        break;
                    }
                }
            }
        }
    }
    let converged_at = converged_at.filter(|c| *c <= opts.t_end);
    Ok(FlowTrajectory { segments, t_end: opts.t_end, converged_at, limit })
}
