//! Population configuration in exact arithmetic.
//!
//! A population is split into anticoordinating subpopulations (prefer `A` when
//! few others play it) and coordinating subpopulations (prefer `A` when many
//! others play it). Anticoordinators are kept in descending threshold order and
//! coordinators in ascending order. The flat index used by the dynamics lists
//! anticoordinators first and then coordinators *reversed*, so flat slot
//! `num_anti()` holds the coordinator with the highest threshold.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::Value;
use thiserror::Error;

/// Exact rational used for proportions, thresholds and probabilities.
pub type Rational = num_rational::Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("MalformedNumber: {0:?} is not a decimal or num/den rational")]
    MalformedNumber(String),
    #[error("MalformedConfig: {0}")]
    MalformedConfig(String),
    #[error("ProportionsDoNotSumToOne: proportions sum to {0}")]
    ProportionsDoNotSumToOne(Rational),
    #[error("NonPositiveProportion: {0}")]
    NonPositiveProportion(Rational),
    #[error("DuplicateThreshold: {role} threshold {tau} appears more than once")]
    DuplicateThreshold { role: Role, tau: Rational },
    #[error("ThresholdOutOfRange: {0} is not in (0,1)")]
    ThresholdOutOfRange(Rational),
    #[error("EmptyPopulation: at least one subpopulation is required")]
    EmptyPopulation,
    #[error("IndexOutOfRange: subpopulation {index} (population has {len})")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Parses `"0.885"`, `"12/30"`, `"3"` or `"-0.5"` into an exact rational.
///
/// Decimals with `k` fractional digits become `digits / 10^k` before reduction.
pub fn parse_rational(text: &str) -> Result<Rational, ModelError> {
    let s = text.trim();
    let bad = || ModelError::MalformedNumber(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all_digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) || frac_part.len() > 17 {
        return Err(bad());
    }
    let den = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(bad)?;
    let int_val: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac_val: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let num = int_val
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(bad)?;
    let value = Rational::new(num, den);
    Ok(if negative { -value } else { value })
}

/// Formats a rational as `num/den` (denominator always present).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Rational to f64 without going through the (lossy for large parts) integer casts twice.
pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Anticoordinator,
    Coordinator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Anticoordinator => write!(f, "anticoordinator"),
            Role::Coordinator => write!(f, "coordinator"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preference {
    A,
    B,
    /// Exact tie under uniform-random tie breaking; the agent flips a fair coin.
    Coin,
}

/// How an agent resolves an exact tie between the others' `A` proportion and its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieRule {
    #[default]
    PreferA,
    PreferB,
    UniformRandom,
    /// Agents count themselves when measuring the `A` proportion; ties go to `A`.
    SelfInclusivePreferA,
}

impl TieRule {
    pub const ALL: [TieRule; 4] = [
        TieRule::PreferA,
        TieRule::PreferB,
        TieRule::UniformRandom,
        TieRule::SelfInclusivePreferA,
    ];
}

/// One subpopulation: its role, proportion `rho` and threshold `tau`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subpopulation {
    pub role: Role,
    pub rho: Rational,
    pub tau: Rational,
}

/// Validated, canonically ordered population configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationProfile {
    anti_rho: Vec<Rational>,
    anti_tau: Vec<Rational>,
    coord_rho: Vec<Rational>,
    coord_tau: Vec<Rational>,
}

impl PopulationProfile {
    /// Builds a profile from `(rho, tau)` pairs in any order.
    pub fn new(
        anticoordinators: Vec<(Rational, Rational)>,
        coordinators: Vec<(Rational, Rational)>,
    ) -> Result<Self, ModelError> {
        if anticoordinators.is_empty() && coordinators.is_empty() {
            return Err(ModelError::EmptyPopulation);
        }
        let mut anti = anticoordinators;
        let mut coord = coordinators;
        for (rho, tau) in anti.iter().chain(coord.iter()) {
            if !rho.is_positive() {
                return Err(ModelError::NonPositiveProportion(*rho));
            }
            if !tau.is_positive() || *tau >= Rational::one() {
                return Err(ModelError::ThresholdOutOfRange(*tau));
            }
        }
        let total: Rational = anti.iter().chain(coord.iter()).map(|(rho, _)| *rho).sum();
        if total != Rational::one() {
            return Err(ModelError::ProportionsDoNotSumToOne(total));
        }
        anti.sort_by_key(|a| std::cmp::Reverse(a.1));
        coord.sort_by_key(|a| a.1);
        for (role, list) in [(Role::Anticoordinator, &anti), (Role::Coordinator, &coord)] {
            if let Some(w) = list.windows(2).find(|w| w[0].1 == w[1].1) {
                return Err(ModelError::DuplicateThreshold { role, tau: w[0].1 });
            }
        }
        Ok(Self {
            anti_rho: anti.iter().map(|e| e.0).collect(),
            anti_tau: anti.iter().map(|e| e.1).collect(),
            coord_rho: coord.iter().map(|e| e.0).collect(),
            coord_tau: coord.iter().map(|e| e.1).collect(),
        })
    }

    /// Parses the JSON config document (`anticoordinators` / `coordinators` arrays of `{rho, tau}`).
    pub fn from_json(doc: &Value) -> Result<Self, ModelError> {
        let obj = doc
            .as_object()
            .ok_or_else(|| ModelError::MalformedConfig("top level must be an object".into()))?;
        let read = |key: &str| -> Result<Vec<(Rational, Rational)>, ModelError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(Vec::new()),
                Some(Value::Array(items)) => items.iter().map(parse_entry).collect(),
                Some(_) => Err(ModelError::MalformedConfig(format!("{key:?} must be an array"))),
            }
        };
        Self::new(read("anticoordinators")?, read("coordinators")?)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| ModelError::MalformedConfig(e.to_string()))?;
        Self::from_json(&doc)
    }

    pub fn to_json(&self) -> Value {
        let entries = |rho: &[Rational], tau: &[Rational]| -> Vec<Value> {
            rho.iter()
                .zip(tau)
                .map(|(r, t)| serde_json::json!({"rho": format_rational(r), "tau": format_rational(t)}))
                .collect()
        };
        serde_json::json!({
            "anticoordinators": entries(&self.anti_rho, &self.anti_tau),
            "coordinators": entries(&self.coord_rho, &self.coord_tau),
        })
    }

    /// Number of anticoordinating subpopulations (`p`).
    pub fn num_anti(&self) -> usize {
        self.anti_rho.len()
    }

    /// Number of coordinating subpopulations (`p'`).
    pub fn num_coord(&self) -> usize {
        self.coord_rho.len()
    }

    /// Total number of subpopulations in the flat vector.
    pub fn len(&self) -> usize {
        self.num_anti() + self.num_coord()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Anticoordinator proportions, descending-threshold order (1-based label = position + 1).
    pub fn anti_rho(&self) -> &[Rational] {
        &self.anti_rho
    }

    pub fn anti_tau(&self) -> &[Rational] {
        &self.anti_tau
    }

    /// Coordinator proportions, ascending-threshold order.
    pub fn coord_rho(&self) -> &[Rational] {
        &self.coord_rho
    }

    pub fn coord_tau(&self) -> &[Rational] {
        &self.coord_tau
    }

    /// `(role, label)` of flat slot `index`; labels are 1-based within the role.
    pub fn role_view(&self, index: usize) -> Result<(Role, usize), ModelError> {
        let (p, q) = (self.num_anti(), self.num_coord());
        if index < p {
            Ok((Role::Anticoordinator, index + 1))
        } else if index < p + q {
            Ok((Role::Coordinator, p + q - index))
        } else {
            Err(ModelError::IndexOutOfRange { index, len: p + q })
        }
    }

    /// Flat slot of the subpopulation with the given role and 1-based label.
    pub fn flat_index(&self, role: Role, label: usize) -> Result<usize, ModelError> {
        let (p, q) = (self.num_anti(), self.num_coord());
        match role {
            Role::Anticoordinator if (1..=p).contains(&label) => Ok(label - 1),
            Role::Coordinator if (1..=q).contains(&label) => Ok(p + q - label),
            _ => Err(ModelError::IndexOutOfRange { index: label, len: p + q }),
        }
    }

    pub fn subpopulation(&self, index: usize) -> Result<Subpopulation, ModelError> {
        let (role, label) = self.role_view(index)?;
        Ok(match role {
            Role::Anticoordinator => Subpopulation {
                role,
                rho: self.anti_rho[label - 1],
                tau: self.anti_tau[label - 1],
            },
            Role::Coordinator => Subpopulation {
                role,
                rho: self.coord_rho[label - 1],
                tau: self.coord_tau[label - 1],
            },
        })
    }

    /// All subpopulations in flat order.
    pub fn flat(&self) -> Vec<Subpopulation> {
        (0..self.len()).map(|i| self.subpopulation(i).expect("index in range")).collect()
    }

    /// Proportions in flat order.
    pub fn flat_rho(&self) -> Vec<Rational> {
        self.anti_rho.iter().chain(self.coord_rho.iter().rev()).copied().collect()
    }

    /// Thresholds in flat order.
    pub fn flat_tau(&self) -> Vec<Rational> {
        self.anti_tau.iter().chain(self.coord_tau.iter().rev()).copied().collect()
    }

    pub fn cumulative(&self) -> CumulativeProfile {
        CumulativeProfile::new(self)
    }

    /// Every `N <= n_max` for which each `N * rho` is an integer.
    pub fn valid_sizes(&self, n_max: u64) -> Vec<u64> {
        let lcd = self.size_step();
        (1..=n_max / lcd).map(|k| k * lcd).collect()
    }

    /// Least common denominator of all proportions; valid sizes are its multiples.
    pub fn size_step(&self) -> u64 {
        self.flat_rho().iter().fold(1i64, |acc, r| acc.lcm(r.denom())) as u64
    }

    pub fn is_valid_size(&self, n: u64) -> bool {
        n > 0 && n.is_multiple_of(self.size_step())
    }

    /// Number of agents in each flat subpopulation for population size `n`.
    pub fn capacities(&self, n: u64) -> Option<Vec<u64>> {
        if !self.is_valid_size(n) {
            return None;
        }
        Some(
            self.flat_rho()
                .iter()
                .map(|r| (*r.numer() as u64) * (n / *r.denom() as u64))
                .collect(),
        )
    }

    pub fn validate_assumption1(&self) -> ValidationReport {
        validate_assumption1(self)
    }
}

fn parse_entry(item: &Value) -> Result<(Rational, Rational), ModelError> {
    let field = |key: &str| -> Result<Rational, ModelError> {
        match item.get(key) {
            Some(Value::String(s)) => parse_rational(s),
            Some(Value::Number(n)) => parse_rational(&n.to_string()),
            _ => Err(ModelError::MalformedConfig(format!("entry missing string field {key:?}"))),
        }
    };
    Ok((field("rho")?, field("tau")?))
}

/// Cumulative proportions with the boundary sentinels used by the abstract dynamics.
///
/// Indices follow the 1-based labels of the abstract dynamics: `pi(i)` for `i` in `-1..=p+1`, `pi_prime(j)` for
/// `j` in `-1..=p'+1`; `tau(0) = 1`, `tau(p+1) = 0`, `tau_prime(0) = 0`, `tau_prime(p'+1) = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeProfile {
    pi: Vec<Rational>,
    pi_prime: Vec<Rational>,
    tau: Vec<Rational>,
    tau_prime: Vec<Rational>,
    min_threshold_gap: Option<Rational>,
}

impl CumulativeProfile {
    fn new(profile: &PopulationProfile) -> Self {
        let partial = |rho: &[Rational]| -> Vec<Rational> {
            let mut out = vec![Rational::zero()];
            let mut acc = Rational::zero();
            for r in rho {
                acc += r;
                out.push(acc);
            }
            out
        };
        let pi = partial(profile.anti_rho());
        let pi_prime = partial(profile.coord_rho());
        let mut tau = vec![Rational::one()];
        tau.extend_from_slice(profile.anti_tau());
        tau.push(Rational::zero());
        let mut tau_prime = vec![Rational::zero()];
        tau_prime.extend_from_slice(profile.coord_tau());
        tau_prime.push(Rational::one());

        let mut all: Vec<Rational> = profile.flat_tau();
        all.sort();
        let min_threshold_gap = all.windows(2).map(|w| w[1] - w[0]).min();
        Self { pi, pi_prime, tau, tau_prime, min_threshold_gap }
    }

    pub fn num_anti(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn num_coord(&self) -> usize {
        self.pi_prime.len() - 1
    }

    /// `pi_i`; clamps to 0 below and to `pi_p` above.
    pub fn pi(&self, i: isize) -> Rational {
        Self::clamped(&self.pi, i)
    }

    pub fn pi_prime(&self, j: isize) -> Rational {
        Self::clamped(&self.pi_prime, j)
    }

    fn clamped(values: &[Rational], i: isize) -> Rational {
        if i <= 0 {
            Rational::zero()
        } else {
            values[(i as usize).min(values.len() - 1)]
        }
    }

    /// Anticoordinator threshold `tau_i` with sentinels `tau_0 = 1`, `tau_{p+1} = 0`.
    pub fn tau(&self, i: usize) -> Rational {
        self.tau[i]
    }

    /// Coordinator threshold `tau'_j` with sentinels `tau'_0 = 0`, `tau'_{p'+1} = 1`.
    pub fn tau_prime(&self, j: usize) -> Rational {
        self.tau_prime[j]
    }

    /// True when `tau(i)` is one of the artificial bounds rather than a real threshold.
    pub fn tau_is_sentinel(&self, i: usize) -> bool {
        i == 0 || i == self.num_anti() + 1
    }

    pub fn tau_prime_is_sentinel(&self, j: usize) -> bool {
        j == 0 || j == self.num_coord() + 1
    }

    /// Smallest gap between two thresholds (any roles); `None` with fewer than two thresholds.
    pub fn min_threshold_gap(&self) -> Option<Rational> {
        self.min_threshold_gap
    }

    /// Number of anticoordinator thresholds strictly above `x` (the `i` of the abstract dynamics).
    pub fn anti_above(&self, x: &Rational) -> usize {
        self.tau[1..=self.num_anti()].iter().take_while(|t| *t > x).count()
    }

    /// Number of coordinator thresholds strictly below `x`.
    pub fn coord_below(&self, x: &Rational) -> usize {
        self.tau_prime[1..=self.num_coord()].iter().take_while(|t| *t < x).count()
    }
}

/// Which degenerate situation a coincidence between a cumulative sum and a threshold produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DegenerateCase {
    /// A cumulative sum hits an anticoordinator threshold: clean-cut and
    /// anticoordinator-driven points merge and stay stable.
    CaseI,
    /// A cumulative sum hits a coordinator threshold: clean-cut and
    /// coordinator-driven points merge into an unstable point.
    CaseII,
    /// An anticoordinator and a coordinator share a threshold: a continuum may appear.
    CaseIII,
}

impl DegenerateCase {
    pub fn name(&self) -> &'static str {
        match self {
            DegenerateCase::CaseI => "i",
            DegenerateCase::CaseII => "ii",
            DegenerateCase::CaseIII => "iii",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumViolation {
    /// Anticoordinator prefix length `k` in `0..=p`.
    pub k: usize,
    /// Coordinator prefix length `l` in `0..=p'`.
    pub l: usize,
    pub sum: Rational,
    pub role: Role,
    /// 1-based label of the matched threshold within its role.
    pub label: usize,
    pub case: DegenerateCase,
    /// True when `(k, l)` are the benchmark prefixes of the matched threshold, so that two
    /// equilibria actually merge; other coincidences leave the equilibrium structure intact.
    pub benchmark: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedThreshold {
    pub anti_label: usize,
    pub coord_label: usize,
    pub tau: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub sum_violations: Vec<SumViolation>,
    pub shared_thresholds: Vec<SharedThreshold>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.sum_violations.is_empty() && self.shared_thresholds.is_empty()
    }

    /// Whether some coincidence changes the equilibrium structure (merged points or a
    /// possible continuum). Analyses refuse to run in that case unless overridden.
    pub fn equilibria_affected(&self) -> bool {
        !self.shared_thresholds.is_empty() || self.sum_violations.iter().any(|v| v.benchmark)
    }

    pub fn cases(&self) -> Vec<DegenerateCase> {
        let mut cases: Vec<DegenerateCase> = self
            .sum_violations
            .iter()
            .map(|v| v.case)
            .chain(self.shared_thresholds.iter().map(|_| DegenerateCase::CaseIII))
            .collect();
        cases.sort_by_key(|c| *c as u8);
        cases.dedup();
        cases
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "status": if self.passed() { "PASS" } else { "FAIL" },
            "equilibria_affected": self.equilibria_affected(),
            "sum_violations": self.sum_violations.iter().map(|v| serde_json::json!({
                "k": v.k,
                "l": v.l,
                "sum": format_rational(&v.sum),
                "role": v.role.to_string(),
                "label": v.label,
                "case": v.case.name(),
                "benchmark": v.benchmark,
            })).collect::<Vec<_>>(),
            "shared_thresholds": self.shared_thresholds.iter().map(|s| serde_json::json!({
                "anti_label": s.anti_label,
                "coord_label": s.coord_label,
                "tau": format_rational(&s.tau),
                "case": "iii",
            })).collect::<Vec<_>>(),
        })
    }
}

/// Checks that no `pi_k + pi'_l` equals a threshold and that thresholds are pairwise distinct.
pub fn validate_assumption1(profile: &PopulationProfile) -> ValidationReport {
    let cum = profile.cumulative();
    let mut sum_violations = Vec::new();
    for k in 0..=profile.num_anti() {
        for l in 0..=profile.num_coord() {
            let sum = cum.pi(k as isize) + cum.pi_prime(l as isize);
            for (idx, tau) in profile.anti_tau().iter().enumerate() {
                if *tau == sum {
                    let i = idx + 1;
                    sum_violations.push(SumViolation {
                        k,
                        l,
                        sum,
                        role: Role::Anticoordinator,
                        label: i,
                        case: DegenerateCase::CaseI,
                        benchmark: l == cum.coord_below(tau) && (k + 1 == i || k == i),
                    });
                }
            }
            for (idx, tau) in profile.coord_tau().iter().enumerate() {
                if *tau == sum {
                    let j = idx + 1;
                    sum_violations.push(SumViolation {
                        k,
                        l,
                        sum,
                        role: Role::Coordinator,
                        label: j,
                        case: DegenerateCase::CaseII,
                        benchmark: k == cum.anti_above(tau) && (l + 1 == j || l == j),
                    });
                }
            }
        }
    }
    let mut shared_thresholds = Vec::new();
    for (i, ta) in profile.anti_tau().iter().enumerate() {
        for (j, tc) in profile.coord_tau().iter().enumerate() {
            if ta == tc {
                shared_thresholds.push(SharedThreshold { anti_label: i + 1, coord_label: j + 1, tau: *ta });
            }
        }
    }
    ValidationReport { sum_violations, shared_thresholds }
}

/// Preferred strategy of an agent of flat subpopulation `index` currently playing `current`,
/// when the population-wide `A` proportion (agent included) is `total`.
///
/// The agent compares the proportion of *others* playing `A` with its threshold, so an
/// `A`-player sees `total - 1/N`; the self-inclusive rule drops that correction.
pub fn preferred_strategy(
    profile: &PopulationProfile,
    index: usize,
    total: Rational,
    current: Strategy,
    n: u64,
    tie: TieRule,
) -> Result<Preference, ModelError> {
    let sub = profile.subpopulation(index)?;
    let shift = match (current, tie) {
        (Strategy::A, TieRule::SelfInclusivePreferA) | (Strategy::B, _) => Rational::zero(),
        (Strategy::A, _) => Rational::new(1, n as i64),
    };
    let level = sub.tau + shift;
    let ord = total.cmp(&level);
    let strict = match (sub.role, ord) {
        (_, Ordering::Equal) => None,
        (Role::Anticoordinator, Ordering::Less) | (Role::Coordinator, Ordering::Greater) => {
            Some(Preference::A)
        }
        _ => Some(Preference::B),
    };
    Ok(strict.unwrap_or(match tie {
        TieRule::PreferA | TieRule::SelfInclusivePreferA => Preference::A,
        TieRule::PreferB => Preference::B,
        TieRule::UniformRandom => Preference::Coin,
    }))
}
