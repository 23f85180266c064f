//! Equilibria of the mean dynamics, found from the cumulative proportions.
//!
//! Every equilibrium is one of three shapes. In a clean-cut state every subpopulation is
//! unanimous. In an anticoordinator-driven state the total sits on an anticoordinator
//! threshold and that subpopulation is split. A coordinator-driven state is the same with
//! a coordinator. All conditions are checked in exact arithmetic.

use num_traits::Zero;
use thiserror::Error;

use crate::continuous::{abstract_field_unchecked, vector_field_exact};
use crate::model::{format_rational, DegenerateCase, PopulationProfile, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquilibriumError {
    #[error("AssumptionViolated: thresholds coincide with benchmark cumulative sums or with each other; rerun with the degenerate override")]
    AssumptionViolated,
    #[error("MalformedSet: {0}")]
    MalformedSet(String),
    #[error("IndexOutOfRange: separator {k} requested, but there are {q} stable points")]
    IndexOutOfRange { k: usize, q: usize },
    #[error("BirkhoffMismatch: {0}")]
    BirkhoffMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquilibriumKind {
    CleanCut { i: usize, j: usize },
    AnticoordDriven { i: usize, j: usize },
    CoordDriven { i: usize, j: usize },
}

impl EquilibriumKind {
    pub fn indices(&self) -> (usize, usize) {
        match *self {
            EquilibriumKind::CleanCut { i, j }
            | EquilibriumKind::AnticoordDriven { i, j }
            | EquilibriumKind::CoordDriven { i, j } => (i, j),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EquilibriumKind::CleanCut { .. } => "clean-cut",
            EquilibriumKind::AnticoordDriven { .. } => "anticoordinator-driven",
            EquilibriumKind::CoordDriven { .. } => "coordinator-driven",
        }
    }

    /// Short label such as `c^{22}`.
    pub fn label(&self) -> String {
        let (i, j) = self.indices();
        let letter = match self {
            EquilibriumKind::CleanCut { .. } => 'c',
            EquilibriumKind::AnticoordDriven { .. } => 'a',
            EquilibriumKind::CoordDriven { .. } => 'o',
        };
        format!("{letter}^{{{i}{j}}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
}

impl Stability {
    pub fn name(&self) -> &'static str {
        match self {
            Stability::AsymptoticallyStable => "asymptotically-stable",
            Stability::Unstable => "unstable",
        }
    }
}

/// Basin of attraction in the abstract coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basin {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Basin {
    pub fn contains(&self, x: Rational) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        let (lo, hi) = (crate::model::to_f64(&self.lo), crate::model::to_f64(&self.hi));
        let above = if self.lo_closed { x >= lo } else { x > lo };
        let below = if self.hi_closed { x <= hi } else { x < hi };
        above && below
    }
}

impl std::fmt::Display for Basin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            format_rational(&self.lo),
            format_rational(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumPoint {
    pub kind: EquilibriumKind,
    /// Flat population state.
    pub state: Vec<Rational>,
    pub abstract_value: Rational,
    pub stability: Stability,
    /// Filled in by [`classify`] for stable points.
    pub basin: Option<Basin>,
    pub globally_stable: bool,
    /// Kinds that coincide with this point when the override admits degenerate profiles.
    pub merged: Vec<EquilibriumKind>,
    pub degenerate_case: Option<DegenerateCase>,
}

impl EquilibriumPoint {
    fn new(kind: EquilibriumKind, state: Vec<Rational>) -> Self {
        let abstract_value = state.iter().sum();
        let stability = match kind {
            EquilibriumKind::CoordDriven { .. } => Stability::Unstable,
            _ => Stability::AsymptoticallyStable,
        };
        Self {
            kind,
            state,
            abstract_value,
            stability,
            basin: None,
            globally_stable: false,
            merged: Vec::new(),
            degenerate_case: None,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.stability == Stability::AsymptoticallyStable
    }
}

/// Coincident anticoordinator and coordinator thresholds: a continuum of equilibria may exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuumMarker {
    pub anti_label: usize,
    pub coord_label: usize,
    pub tau: Rational,
    /// Zero lies in the abstract field at the shared threshold.
    pub is_equilibrium: bool,
    /// The abstract field points toward the shared threshold from both sides.
    pub attracting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumSet {
    /// All points in ascending abstract value.
    pub all: Vec<EquilibriumPoint>,
    pub continua: Vec<ContinuumMarker>,
    pub degenerate: bool,
}

impl EquilibriumSet {
    /// Stable points `q*_1 < ... < q*_Q`.
    pub fn ordered_q(&self) -> Vec<&EquilibriumPoint> {
        self.all.iter().filter(|e| e.is_stable()).collect()
    }

    /// Unstable separators `q*_{k,k+1}`.
    pub fn separators(&self) -> Vec<&EquilibriumPoint> {
        self.all.iter().filter(|e| !e.is_stable()).collect()
    }

    pub fn abstract_values(&self) -> Vec<Rational> {
        self.all.iter().map(|e| e.abstract_value).collect()
    }

    pub fn find(&self, kind: EquilibriumKind) -> Option<&EquilibriumPoint> {
        self.all.iter().find(|e| e.kind == kind || e.merged.contains(&kind))
    }
}

struct Conditions<'a> {
    profile: &'a PopulationProfile,
    strict: bool,
}

impl Conditions<'_> {
    fn lt(&self, a: Rational, b: Rational) -> bool {
        if self.strict {
            a < b
        } else {
            a <= b
        }
    }

    fn clean_cut_state(&self, i: usize, j: usize) -> Vec<Rational> {
        let p = self.profile;
        let anti = p.anti_rho().iter().enumerate().map(|(k, r)| if k < i { *r } else { Rational::zero() });
        let coord = p.coord_rho().iter().enumerate().map(|(k, r)| if k < j { *r } else { Rational::zero() });
        anti.chain(coord.rev()).collect()
    }

    fn enumerate(&self) -> Vec<EquilibriumPoint> {
        let p = self.profile;
        let cum = p.cumulative();
        let (np, nq) = (p.num_anti(), p.num_coord());
        let mut out = Vec::new();
        for i in 0..=np {
            for j in 0..=nq {
                let sum = cum.pi(i as isize) + cum.pi_prime(j as isize);
                // Bounds that are sentinels do not bind; only real thresholds constrain.
                let lower = [(cum.tau(i + 1), cum.tau_is_sentinel(i + 1)), (cum.tau_prime(j), cum.tau_prime_is_sentinel(j))];
                let upper = [(cum.tau(i), cum.tau_is_sentinel(i)), (cum.tau_prime(j + 1), cum.tau_prime_is_sentinel(j + 1))];
                let ok = lower.iter().all(|(b, sentinel)| *sentinel || self.lt(*b, sum))
                    && upper.iter().all(|(b, sentinel)| *sentinel || self.lt(sum, *b));
                if ok {
                    out.push(EquilibriumPoint::new(EquilibriumKind::CleanCut { i, j }, self.clean_cut_state(i, j)));
                }
            }
        }
        for i in 1..=np {
            let tau = cum.tau(i);
            let j = cum.coord_below(&tau);
            let v = tau - cum.pi_prime(j as isize) - cum.pi(i as isize - 1);
            if self.lt(Rational::zero(), v) && self.lt(v, p.anti_rho()[i - 1]) {
                let mut state = self.clean_cut_state(i - 1, j);
                state[i - 1] = v;
                out.push(EquilibriumPoint::new(EquilibriumKind::AnticoordDriven { i, j }, state));
            }
        }
        for j in 1..=nq {
            let tau = cum.tau_prime(j);
            let i = cum.anti_above(&tau);
            let v = tau - cum.pi_prime(j as isize - 1) - cum.pi(i as isize);
            if self.lt(Rational::zero(), v) && self.lt(v, p.coord_rho()[j - 1]) {
                let mut state = self.clean_cut_state(i, j - 1);
                let slot = p.num_anti() + p.num_coord() - j;
                state[slot] = v;
                out.push(EquilibriumPoint::new(EquilibriumKind::CoordDriven { i, j }, state));
            }
        }
        out
    }
}

fn verify(profile: &PopulationProfile, set: &EquilibriumSet) -> Result<(), EquilibriumError> {
    for e in &set.all {
        let field = vector_field_exact(profile, &e.state)
            .map_err(|err| EquilibriumError::MalformedSet(format!("{}: {err}", e.kind.label())))?;
        if !field.iter().all(|iv| iv.contains(Rational::zero())) {
            return Err(EquilibriumError::MalformedSet(format!("{} is not a zero of the field", e.kind.label())));
        }
        if !set.degenerate && !abstract_field_unchecked(profile, e.abstract_value).contains(Rational::zero()) {
            return Err(EquilibriumError::MalformedSet(format!(
                "{} is not a zero of the abstract field",
                e.kind.label()
            )));
        }
    }
    Ok(())
}

/// All equilibria, sorted by abstract value. Refuses profiles whose coincidences merge points.
pub fn enumerate_equilibria(profile: &PopulationProfile) -> Result<EquilibriumSet, EquilibriumError> {
    if profile.validate_assumption1().equilibria_affected() {
        return Err(EquilibriumError::AssumptionViolated);
    }
    let mut all = Conditions { profile, strict: true }.enumerate();
    all.sort_by(|a, b| a.abstract_value.cmp(&b.abstract_value).then(a.kind.cmp(&b.kind)));
    let set = EquilibriumSet { all, continua: Vec::new(), degenerate: false };
    verify(profile, &set)?;
    Ok(set)
}

/// Enumeration with non-strict conditions for degenerate profiles: coincident points are
/// merged and tagged with the degenerate case they fall under, and shared thresholds are
/// reported as continuum markers.
pub fn enumerate_equilibria_degenerate(profile: &PopulationProfile) -> Result<EquilibriumSet, EquilibriumError> {
    let raw = Conditions { profile, strict: false }.enumerate();
    let mut all: Vec<EquilibriumPoint> = Vec::new();
    for e in raw {
        match all.iter_mut().find(|g| g.state == e.state) {
            Some(group) => group.merged.push(e.kind),
            None => all.push(e),
        }
    }
    for g in &mut all {
        if g.merged.is_empty() {
            continue;
        }
        let kinds: Vec<EquilibriumKind> = std::iter::once(g.kind).chain(g.merged.iter().copied()).collect();
        let coord = kinds.iter().any(|k| matches!(k, EquilibriumKind::CoordDriven { .. }));
        g.degenerate_case = Some(if coord { DegenerateCase::CaseII } else { DegenerateCase::CaseI });
        g.stability = if coord { Stability::Unstable } else { Stability::AsymptoticallyStable };
    }
    all.sort_by(|a, b| a.abstract_value.cmp(&b.abstract_value).then(a.kind.cmp(&b.kind)));

    let cum = profile.cumulative();
    let continua = profile
        .validate_assumption1()
        .shared_thresholds
        .into_iter()
        .map(|s| {
            let (i, j) = (s.anti_label as isize, s.coord_label as isize);
            let lo = cum.pi(i - 1) + cum.pi_prime(j - 1);
            let hi = cum.pi(i) + cum.pi_prime(j);
            let from_below = cum.pi(i) + cum.pi_prime(j - 1);
            let from_above = cum.pi(i - 1) + cum.pi_prime(j);
            ContinuumMarker {
                anti_label: s.anti_label,
                coord_label: s.coord_label,
                tau: s.tau,
                is_equilibrium: lo <= s.tau && s.tau <= hi,
                attracting: from_above < s.tau && s.tau < from_below,
            }
        })
        .collect();
    let set = EquilibriumSet { all, continua, degenerate: true };
    verify(profile, &set)?;
    Ok(set)
}

/// Fills in basins and global stability. Stable and unstable points must alternate,
/// starting and ending with a stable one.
pub fn classify(mut set: EquilibriumSet) -> Result<EquilibriumSet, EquilibriumError> {
    if set.all.is_empty() {
        return Err(EquilibriumError::MalformedSet("no equilibria".into()));
    }
    if !set.degenerate {
        let n = set.all.len();
        for (k, e) in set.all.iter().enumerate() {
            if e.is_stable() != (k % 2 == 0) || n.is_multiple_of(2) {
                return Err(EquilibriumError::MalformedSet(format!(
                    "stable and unstable points do not alternate at {}",
                    e.kind.label()
                )));
            }
        }
    }
    let values: Vec<(Rational, bool)> = set.all.iter().map(|e| (e.abstract_value, e.is_stable())).collect();
    let stable_count = values.iter().filter(|v| v.1).count();
    for (k, e) in set.all.iter_mut().enumerate() {
        if !e.is_stable() {
            e.basin = None;
            e.globally_stable = false;
            continue;
        }
        let below = values[..k].iter().rev().find(|v| !v.1).map(|v| v.0);
        let above = values[k + 1..].iter().find(|v| !v.1).map(|v| v.0);
        e.basin = Some(Basin {
            lo: below.unwrap_or_else(Rational::zero),
            hi: above.unwrap_or_else(|| Rational::from_integer(1)),
            lo_closed: below.is_none(),
            hi_closed: above.is_none(),
        });
        e.globally_stable = stable_count == 1 && below.is_none() && above.is_none();
    }
    Ok(set)
}

/// Enumerates (with or without the degenerate override) and classifies.
pub fn analyze(profile: &PopulationProfile, allow_degenerate: bool) -> Result<EquilibriumSet, EquilibriumError> {
    let degenerate = profile.validate_assumption1().equilibria_affected();
    let set = if degenerate && allow_degenerate {
        enumerate_equilibria_degenerate(profile)?
    } else {
        enumerate_equilibria(profile)?
    };
    classify(set)
}

/// The three-point limit set `{q*_k, q*_{k,k+1}, q*_{k+1}}` around separator `k` (1-based).
pub fn limit_set_at_separator(
    set: &EquilibriumSet,
    k: usize,
) -> Result<[EquilibriumPoint; 3], EquilibriumError> {
    let q = set.ordered_q();
    let seps = set.separators();
    if k == 0 || k >= q.len() || k > seps.len() {
        return Err(EquilibriumError::IndexOutOfRange { k, q: q.len() });
    }
    Ok([q[k - 1].clone(), seps[k - 1].clone(), q[k].clone()])
}

/// Birkhoff center of the mean dynamics: all equilibria, cross-checked against the closed
/// forms for single-role populations.
pub fn birkhoff_center(profile: &PopulationProfile) -> Result<Vec<EquilibriumPoint>, EquilibriumError> {
    let set = analyze(profile, false)?;
    if profile.num_anti() == 0
        && set.all.iter().any(|e| matches!(e.kind, EquilibriumKind::AnticoordDriven { .. }))
    {
        return Err(EquilibriumError::BirkhoffMismatch(
            "a coordinator-only population produced an anticoordinator-driven point".into(),
        ));
    }
    if profile.num_coord() == 0 {
        let candidates = anticoordinator_benchmark_points(profile);
        let unique = match set.all.as_slice() {
            [only] => only,
            _ => {
                return Err(EquilibriumError::BirkhoffMismatch(format!(
                    "anticoordinator-only population has {} equilibria",
                    set.all.len()
                )))
            }
        };
        if !candidates.contains(&unique.state) {
            return Err(EquilibriumError::BirkhoffMismatch(
                "closed-form point does not match the enumeration".into(),
            ));
        }
    }
    Ok(set.all)
}

/// Closed-form candidates `(rho_1, .., rho_{b-1}, min{tau_b - pi_{b-1}, rho_b}, 0, ..)` for every
/// benchmark `b` with `pi_{b-1} < tau_b` and `tau_{b+1} < pi_b`.
pub fn anticoordinator_benchmark_points(profile: &PopulationProfile) -> Vec<Vec<Rational>> {
    let cum = profile.cumulative();
    let p = profile.num_anti();
    (1..=p)
        .filter(|b| cum.pi(*b as isize - 1) < cum.tau(*b) && cum.tau(b + 1) < cum.pi(*b as isize))
        .map(|b| {
            let rho = profile.anti_rho();
            let mut q: Vec<Rational> = (0..p).map(|k| if k + 1 < b { rho[k] } else { Rational::zero() }).collect();
            let room = cum.tau(b) - cum.pi(b as isize - 1);
            q[b - 1] = if room < rho[b - 1] { room } else { rho[b - 1] };
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_rational;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn rs(v: &[&str]) -> Vec<Rational> {
        v.iter().map(|s| r(s)).collect()
    }

    fn example3() -> PopulationProfile {
        PopulationProfile::new(
            vec![(r("0.6"), r("0.85"))],
            vec![(r("0.3"), r("0.75")), (r("0.1"), r("0.35"))],
        )
        .unwrap()
    }

    fn example4() -> PopulationProfile {
        PopulationProfile::new(
            vec![(r("2/28"), r("0.929")), (r("3/28"), r("6/7")), (r("3/28"), r("0.357"))],
            vec![(r("3/28"), r("0.05")), (r("3/28"), r("0.321")), (r("8/28"), r("0.5")), (r("6/28"), r("0.643"))],
        )
        .unwrap()
    }

    fn example2() -> PopulationProfile {
        PopulationProfile::new(
            vec![(r("12/30"), r("0.885"))],
            vec![
                (r("3/30"), r("0.89")),
                (r("3/30"), r("0.604")),
                (r("3/30"), r("0.481")),
                (r("1/30"), r("0.444")),
                (r("8/30"), r("0.21")),
            ],
        )
        .unwrap()
    }

    #[test]
    fn example3_has_three_points() {
        let set = analyze(&example3(), false).unwrap();
        let got: Vec<_> = set.all.iter().map(|e| (e.kind, e.state.clone(), e.abstract_value)).collect();
        assert_eq!(
            got,
            vec![
                (EquilibriumKind::CleanCut { i: 1, j: 1 }, rs(&["0.6", "0", "0.1"]), r("0.7")),
                (EquilibriumKind::CoordDriven { i: 1, j: 2 }, rs(&["0.6", "0.05", "0.1"]), r("0.75")),
                (EquilibriumKind::AnticoordDriven { i: 1, j: 2 }, rs(&["0.45", "0.3", "0.1"]), r("0.85")),
            ]
        );
    }

    #[test]
    fn example4_points_and_basins() {
        let set = analyze(&example4(), false).unwrap();
        let e = |v: [i64; 7]| v.iter().map(|k| Rational::new(*k, 28)).collect::<Vec<_>>();
        let kinds: Vec<_> = set.all.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EquilibriumKind::CleanCut { i: 2, j: 2 },
                EquilibriumKind::CoordDriven { i: 2, j: 3 },
                EquilibriumKind::AnticoordDriven { i: 2, j: 4 },
            ]
        );
        assert_eq!(set.all[0].state, e([2, 3, 0, 0, 0, 3, 3]));
        assert_eq!(set.all[1].state, e([2, 3, 0, 0, 3, 3, 3]));
        assert_eq!(set.all[2].state, e([2, 2, 0, 6, 8, 3, 3]));
        assert_eq!(set.abstract_values(), vec![r("11/28"), r("1/2"), r("6/7")]);
        let stab: Vec<_> = set.all.iter().map(|p| p.stability).collect();
        assert_eq!(stab, vec![Stability::AsymptoticallyStable, Stability::Unstable, Stability::AsymptoticallyStable]);
        assert_eq!(
            set.all[0].basin,
            Some(Basin { lo: r("0"), hi: r("1/2"), lo_closed: true, hi_closed: false })
        );
        assert_eq!(
            set.all[2].basin,
            Some(Basin { lo: r("1/2"), hi: r("1"), lo_closed: false, hi_closed: true })
        );
        assert!(!set.all[0].globally_stable);
    }

    #[test]
    fn example2_is_globally_stable() {
        let set = analyze(&example2(), false).unwrap();
        assert_eq!(set.all.len(), 1);
        let e = &set.all[0];
        assert_eq!(e.kind, EquilibriumKind::AnticoordDriven { i: 1, j: 4 });
        assert_eq!(e.abstract_value, r("0.885"));
        assert_eq!(e.state[0], r("0.385"));
        assert!(e.globally_stable);
    }

    #[test]
    fn single_anticoordinator() {
        let p = PopulationProfile::new(vec![(r("1"), r("0.6"))], vec![]).unwrap();
        let set = analyze(&p, false).unwrap();
        assert_eq!(set.all.len(), 1);
        assert_eq!(set.all[0].kind, EquilibriumKind::AnticoordDriven { i: 1, j: 0 });
        assert_eq!(set.all[0].state, rs(&["0.6"]));
        assert!(set.all[0].globally_stable);
        assert_eq!(anticoordinator_benchmark_points(&p), vec![rs(&["0.6"])]);
        assert_eq!(birkhoff_center(&p).unwrap().len(), 1);
    }

    #[test]
    fn coordinators_only_boundary_points() {
        let p = PopulationProfile::new(vec![], vec![(r("1"), r("0.5"))]).unwrap();
        let set = analyze(&p, false).unwrap();
        let got: Vec<_> = set.all.iter().map(|e| (e.kind, e.abstract_value, e.stability)).collect();
        assert_eq!(
            got,
            vec![
                (EquilibriumKind::CleanCut { i: 0, j: 0 }, r("0"), Stability::AsymptoticallyStable),
                (EquilibriumKind::CoordDriven { i: 0, j: 1 }, r("0.5"), Stability::Unstable),
                (EquilibriumKind::CleanCut { i: 0, j: 1 }, r("1"), Stability::AsymptoticallyStable),
            ]
        );
    }

    #[test]
    fn limit_sets() {
        let set = analyze(&example4(), false).unwrap();
        let [a, b, c] = limit_set_at_separator(&set, 1).unwrap();
        assert_eq!(
            (a.kind, b.kind, c.kind),
            (
                EquilibriumKind::CleanCut { i: 2, j: 2 },
                EquilibriumKind::CoordDriven { i: 2, j: 3 },
                EquilibriumKind::AnticoordDriven { i: 2, j: 4 }
            )
        );
        let ex3 = analyze(&example3(), false).unwrap();
        assert_eq!(limit_set_at_separator(&ex3, 1).unwrap()[1].kind, EquilibriumKind::CoordDriven { i: 1, j: 2 });
        let single = analyze(&example2(), false).unwrap();
        assert_eq!(limit_set_at_separator(&single, 1), Err(EquilibriumError::IndexOutOfRange { k: 1, q: 1 }));
    }

    #[test]
    fn birkhoff_centers() {
        let kinds = |v: Vec<EquilibriumPoint>| v.into_iter().map(|e| e.kind).collect::<Vec<_>>();
        assert_eq!(kinds(birkhoff_center(&example4()).unwrap()).len(), 3);

        let anti = PopulationProfile::new(vec![(r("0.5"), r("0.9")), (r("0.5"), r("0.2"))], vec![]).unwrap();
        let bc = birkhoff_center(&anti).unwrap();
        assert_eq!(bc.len(), 1);
        assert_eq!(bc[0].kind, EquilibriumKind::CleanCut { i: 1, j: 0 });
        assert_eq!(bc[0].state, rs(&["0.5", "0"]));

        let coord = PopulationProfile::new(vec![], vec![(r("0.5"), r("0.2")), (r("0.5"), r("0.7"))]).unwrap();
        let bc = birkhoff_center(&coord).unwrap();
        assert!(bc.iter().all(|e| !matches!(e.kind, EquilibriumKind::AnticoordDriven { .. })));
        // 0 and 1 are clean-cut; 0.2 and 0.7 are coordinator-driven; 0.5 is clean-cut c^{01}.
        assert_eq!(
            bc.iter().map(|e| e.abstract_value).collect::<Vec<_>>(),
            rs(&["0", "0.2", "0.5", "0.7", "1"])
        );
    }

    #[test]
    fn degenerate_profiles_need_the_override() {
        let p = PopulationProfile::new(vec![], vec![(r("0.5"), r("0.5")), (r("0.5"), r("0.9"))]).unwrap();
        assert_eq!(enumerate_equilibria(&p), Err(EquilibriumError::AssumptionViolated));
        let set = analyze(&p, true).unwrap();
        let merged = set.all.iter().find(|e| e.abstract_value == r("0.5")).unwrap();
        assert_eq!(merged.degenerate_case, Some(DegenerateCase::CaseII));
        assert_eq!(merged.stability, Stability::Unstable);
        assert_eq!(merged.merged.len(), 1);
    }

    #[test]
    fn shared_thresholds_yield_a_continuum_marker() {
        let p = PopulationProfile::new(
            vec![(r("0.3"), r("0.65"))],
            vec![(r("0.3"), r("0.2")), (r("0.4"), r("0.65"))],
        )
        .unwrap();
        let set = analyze(&p, true).unwrap();
        assert_eq!(set.continua.len(), 1);
        let m = &set.continua[0];
        // [pi_0 + pi'_1, pi_1 + pi'_2] = [0.3, 1.0] contains 0.65; from below the field
        // heads to pi_1 + pi'_1 = 0.6 < 0.65, so the point is not attracting.
        assert!(m.is_equilibrium);
        assert!(!m.attracting);
    }
}
