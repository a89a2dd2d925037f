use proptest::prelude::*;
use reset_ruin::*;

fn cfg(a: usize, z: usize, p: f64, g: f64) -> WalkConfig {
    WalkConfig::new(a, z, p, g).unwrap()
}

#[test]
fn fair_walk_is_antisymmetric() {
    for a in [5, 10, 11, 20, 31] {
        for g in [0.1, 0.3, 0.6, 0.9] {
            let r = sign_change(a, 0.5, g).unwrap();
            for z in 1..a {
                assert!((r.h(z) + r.h(a - z)).abs() <= 1e-10, "a={a} gamma={g} z={z}");
            }
        }
    }
}

#[test]
fn fair_walk_sensitivity_shrinks_with_gamma() {
    // Away from the crossing, at the gammas plotted for a = 10 and a = 11.
    for (a, sites) in [(10usize, vec![1, 2, 3, 6, 7, 8, 9]), (11, vec![1, 2, 3, 4, 7, 8, 9, 10])] {
        let rows: Vec<Vec<f64>> = [0.3, 0.6, 0.9]
            .iter()
            .map(|&g| sign_change(a, 0.5, g).unwrap().h_values)
            .collect();
        for &z in &sites {
            assert!(rows[0][z - 1].abs() >= rows[1][z - 1].abs(), "a={a} z={z}");
            assert!(rows[1][z - 1].abs() >= rows[2][z - 1].abs(), "a={a} z={z}");
        }
    }
}

#[test]
fn crossing_follows_the_bias() {
    let r = sign_change(11, 0.6, 0.3).unwrap();
    assert_eq!(r.bracket, Bracket::Between(5, 6));
    assert!(r.z_cross > 5.5);
    let r = sign_change(11, 0.4, 0.3).unwrap();
    assert!(r.z_cross < 5.5);
    assert!(!r.midpoint_exact);
}

#[test]
fn long_biased_midpoint_matches_oracle() {
    let target = midpoint_value(50, 0.8).unwrap();
    for g in [0.05, 0.3, 0.5, 0.7, 0.95] {
        let c = cfg(50, 25, 0.8, g);
        assert!((exact_ruin(&c).unwrap() - target).abs() <= 1e-10 * target.max(1e-300) + 1e-300);
        assert!((ruin_probability_spectral(&c).unwrap() - target).abs() <= 1e-10);
    }
    let sweep = midpoint_invariance_sweep(50, &[0.8], &[0.05, 0.3, 0.5, 0.7, 0.95]).unwrap();
    assert!(sweep <= 1e-10);
}

#[test]
fn bias_shift_at_fair_walk_is_symmetric() {
    let up = sign_change(21, 0.5 + 1e-3, 0.3).unwrap().z_cross;
    let down = sign_change(21, 0.5 - 1e-3, 0.3).unwrap().z_cross;
    assert!(((up - 10.5) + (down - 10.5)).abs() < 1e-9);
    let c = bias_shift_coefficient(21, 0.3).unwrap();
    assert!((c + (up - down) / 2e-3).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivative_matches_oracle_slope(a in 3usize..16, zf in 0.0f64..1.0, p in 0.3f64..0.7, g in 0.05f64..0.95) {
        let z = 1 + (zf * (a - 1) as f64) as usize % (a - 1);
        let c = cfg(a, z, p, g);
        let h = derivative(&c).unwrap().h;
        let step = 1e-5;
        let q = |x: f64| exact_ruin(&c.with_gamma(x).unwrap()).unwrap();
        let fd = (q(g + step) - q(g - step)) / (2.0 * step);
        prop_assert!((h - fd).abs() <= 1e-7 * h.abs().max(1.0), "h={} fd={}", h, fd);
    }

    #[test]
    fn one_crossing_everywhere(a in 3usize..30, p in 0.35f64..0.65, g in 0.05f64..0.95) {
        let r = sign_change(a, p, g).unwrap();
        prop_assert!(r.h(1) > 0.0 && r.h(a - 1) < 0.0);
        prop_assert!(r.z_cross > 1.0 && r.z_cross < (a - 1) as f64);
    }
}
