mod common;

use brdyn::discrete::{DiscreteState, Kernel};
use brdyn::experiments::{compare_discrete_continuous, fluctuation_sweep, median_amplitudes, SweepConfig};
use brdyn::model::{Rational, TieRule};
use common::*;
use num_traits::One;

/// The state with `ceil(0.885 N)` A-players, where every coordinator below 0.89 plays A and the
/// 0.89 coordinators play B, is absorbing once `N` is large enough.
fn threshold_state(n: u64) -> DiscreteState {
    let p = example2();
    let caps = p.capacities(n).unwrap();
    let total = (885 * n).div_ceil(1000);
    // Flat order: anticoordinator, then coordinators from the highest threshold down.
    let coord_a: u64 = caps[2..].iter().sum();
    DiscreteState::new(n, vec![total - coord_a, 0, caps[2], caps[3], caps[4], caps[5]])
}

#[test]
fn large_populations_absorb_next_to_the_anticoordinator_threshold() {
    let p = example2();
    for n in [480, 1920, 3840] {
        let s = threshold_state(n);
        let kernel = Kernel::new(&p, n, TieRule::PreferA).unwrap();
        let dist = kernel.transition_distribution(&s).unwrap();
        assert_eq!(dist.probability_of(&s), Rational::one(), "N = {n}");
    }
    for n in [30, 120] {
        let s = threshold_state(n);
        let kernel = Kernel::new(&p, n, TieRule::PreferA).unwrap();
        assert!(kernel.transition_distribution(&s).unwrap().probability_of(&s) < Rational::one(), "N = {n}");
    }
}

#[test]
fn fluctuations_shrink_with_population_size() {
    let cfg = SweepConfig { sizes: vec![30, 120, 480], replicates: 30, master_seed: 11, ..Default::default() };
    let medians = median_amplitudes(&fluctuation_sweep(&example2(), &cfg).unwrap());
    assert!(medians.windows(2).all(|w| w[1].1 <= w[0].1), "{medians:?}");
    assert!(medians[2].1 < medians[0].1 / Rational::from_integer(2));
}

#[test]
fn chain_tracks_the_mean_dynamics_better_at_larger_sizes() {
    let p = example3();
    let gap = |n: u64| {
        // Start everyone on B and follow the chain for two time units.
        let counts = vec![0; p.len()];
        compare_discrete_continuous(&p, n, &counts, 2 * n, 5, TieRule::PreferA, 1e-12).unwrap().sup_gap
    };
    let (small, large) = (gap(30), gap(3840));
    assert!(large < small, "gap at 3840 = {large}, at 30 = {small}");
    assert!(large < 0.05);
}
