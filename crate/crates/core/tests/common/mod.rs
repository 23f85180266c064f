#![allow(dead_code)]

use std::path::PathBuf;

use brdyn::model::{PopulationProfile, Rational};
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> PopulationProfile {
    let text = std::fs::read_to_string(config_path(name)).expect("config file");
    PopulationProfile::from_json_str(&text).expect("valid config")
}

pub fn example2() -> PopulationProfile {
    load("example2.json")
}

pub fn example3() -> PopulationProfile {
    load("example3.json")
}

pub fn example4() -> PopulationProfile {
    load("example4.json")
}

pub fn single_anticoordinator() -> PopulationProfile {
    load("single_anticoordinator.json")
}

pub fn coordinators_only() -> PopulationProfile {
    load("coordinators_only.json")
}

pub fn r(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

/// Random profile with up to `max_roles` subpopulations of each role, integer weights and
/// thresholds on the 1/100 grid. Not checked against the sum condition.
pub fn random_profile<R: Rng>(rng: &mut R, max_roles: usize) -> PopulationProfile {
    loop {
        let p = rng.gen_range(0..=max_roles);
        let q = rng.gen_range(0..=max_roles);
        if p + q == 0 {
            continue;
        }
        let weights: Vec<i64> = (0..p + q).map(|_| rng.gen_range(1..=6)).collect();
        let total: i64 = weights.iter().sum();
        let mut taus: Vec<i64> = Vec::new();
        while taus.len() < p + q {
            let t = rng.gen_range(1..100);
            if !taus.contains(&t) {
                taus.push(t);
            }
        }
        let entry = |k: usize| (Rational::new(weights[k], total), Rational::new(taus[k], 100));
        let anti = (0..p).map(entry).collect();
        let coord = (p..p + q).map(entry).collect();
        return PopulationProfile::new(anti, coord).expect("generated profile is valid");
    }
}

/// Random profile that passes the literal sum and uniqueness check.
pub fn random_generic_profile<R: Rng>(rng: &mut R, max_roles: usize) -> PopulationProfile {
    loop {
        let profile = random_profile(rng, max_roles);
        if profile.validate_assumption1().passed() {
            return profile;
        }
    }
}

/// Radical-inverse point `k` of the Halton sequence in base `b`.
pub fn halton(mut k: u64, b: u64) -> f64 {
    let (mut f, mut out) = (1.0, 0.0);
    while k > 0 {
        f /= b as f64;
        out += f * (k % b) as f64;
        k /= b;
    }
    out
}

pub const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Quasi-random interior state: component `p` is `rho_p` times a Halton coordinate.
pub fn halton_state(profile: &PopulationProfile, k: u64) -> Vec<f64> {
    profile
        .flat_rho()
        .iter()
        .enumerate()
        .map(|(d, rho)| brdyn::model::to_f64(rho) * halton(k, PRIMES[d % PRIMES.len()]))
        .collect()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
