use proptest::prelude::*;
use reset_ruin::montecarlo::{estimate_ruin_with_threads, DEFAULT_SEED, DEFAULT_TRAJECTORIES};
use reset_ruin::*;

fn cfg(a: usize, z: usize, p: f64, g: f64) -> WalkConfig {
    WalkConfig::new(a, z, p, g).unwrap()
}

fn within_four_sigma(c: &WalkConfig, est: &McEstimate) -> bool {
    let exact = exact_ruin(c).unwrap();
    let sigma = (exact * (1.0 - exact) / est.n_sim as f64).sqrt();
    (est.p_hat - exact).abs() <= 4.0 * sigma
}

#[test]
fn biased_table_cells_agree_with_default_seed() {
    for z in 1..=4 {
        for g in [0.3, 0.6, 0.9] {
            let c = cfg(5, z, 0.6, g);
            let est = estimate_ruin(&c, DEFAULT_TRAJECTORIES, DEFAULT_SEED).unwrap();
            assert!(within_four_sigma(&c, &est), "{c:?}: {est:?}");
        }
    }
}

#[test]
fn no_reset_reference_point() {
    let c = cfg(5, 2, 0.6, 0.0);
    let est = estimate_ruin(&c, DEFAULT_TRAJECTORIES, DEFAULT_SEED).unwrap();
    assert!((est.p_hat - 0.360).abs() <= 4.0 * est.stderr + 5e-4);
    assert_eq!(est.mean_resets, 0.0);
}

#[test]
fn rare_ruin_cell() {
    let c = cfg(5, 4, 0.6, 0.9);
    let est = estimate_ruin(&c, DEFAULT_TRAJECTORIES, DEFAULT_SEED).unwrap();
    assert!(est.p_hat < 2e-4);
    assert!(within_four_sigma(&c, &est));
}

#[test]
fn resets_track_gamma_times_steps() {
    let c = cfg(8, 4, 0.5, 0.3);
    let est = estimate_ruin(&c, DEFAULT_TRAJECTORIES, DEFAULT_SEED).unwrap();
    let expected = c.gamma() * est.mean_steps;
    assert!((est.mean_resets - expected).abs() <= 0.05 * expected, "{est:?}");
}

#[test]
fn interior_start_required() {
    assert!(matches!(WalkConfig::new(5, 5, 0.5, 0.3), Err(Error::InvalidConfig(_))));
}

#[test]
fn same_inputs_same_bits() {
    let c = cfg(9, 3, 0.55, 0.45);
    let x = estimate_ruin(&c, 20_000, 77).unwrap();
    let y = estimate_ruin_with_threads(&c, 20_000, 77, 3).unwrap();
    assert_eq!(x, y);
    let other = estimate_ruin(&c, 20_000, 78).unwrap();
    assert_ne!(x.p_hat, other.p_hat);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_invariants(a in 2usize..12, zf in 0.0f64..1.0, p in 0.05f64..0.95, g in 0.0f64..0.9, seed: u64) {
        let z = 1 + (zf * (a - 1) as f64) as usize % (a - 1);
        let c = cfg(a, z, p, g);
        let mut rng = StreamRng::for_trajectory(seed, 0);
        let o = simulate_trajectory(&c, &mut rng).unwrap();
        prop_assert!(o.steps >= 1);
        prop_assert!(o.resets < o.steps);
        let est = estimate_ruin(&c, 200, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&est.p_hat));
        prop_assert!(est.stderr >= 0.0);
    }
}
