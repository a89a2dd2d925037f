//! Closed-form ruin probability from the eigenmodes of the Doob-symmetrized walk.
//!
//! Conjugating the interior transition matrix by `(q/p)^{x/2}` gives the
//! symmetric tridiagonal operator with off-diagonal `sqrt(pq)`, eigenvalues
//! `lambda_nu = 2 sqrt(pq) cos(pi nu / a)` and eigenvectors `sin(pi nu x / a)`.
//! Ruin at exactly step `k` then reads `u_k = sum_nu A_nu lambda_nu^{k-1}` with
//!
//! ```text
//! A_nu = sqrt(pq) (2/a) (q/p)^{z/2}       sin(pi nu z / a)       sin(pi nu / a)
//! B_nu = sqrt(pq) (2/a) (p/q)^{(a-z)/2}   sin(pi nu (a - z) / a) sin(pi nu / a)
//! ```
//!
//! and the renewal ratio under resetting becomes
//! `q_z = sum A_nu (1 + f_nu) / sum (A_nu + B_nu)(1 + f_nu)`.

use num_bigint::BigInt;

use crate::config::{check_bias, check_domain, WalkConfig};
use crate::error::{Error, Result};
use crate::precision::{adaptive, resolvent_bits, Fixed, Scaled};

/// One eigen-triple. `ruin` and `success` are the coefficients `A_nu`, `B_nu`
/// divided by `exp(log_scale)` of the owning decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    pub nu: usize,
    pub lambda: f64,
    pub ruin: f64,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub config: WalkConfig,
    pub modes: Vec<SpectralMode>,
    pub log_scale: f64,
}

impl SpectralDecomposition {
    /// `(A_nu, B_nu)` at their true magnitude. May overflow for strong bias.
    pub fn coefficients(&self, nu: usize) -> (f64, f64) {
        let m = &self.modes[nu - 1];
        let scale = self.log_scale.exp();
        (m.ruin * scale, m.success * scale)
    }
}

/// Ruin and success probabilities, each computed without forming `1 - other`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionSplit {
    pub ruin: f64,
    pub success: f64,
}

/// `sin(pi m / n)` with the argument reduced in integers first.
pub(crate) fn sin_pi(m: usize, n: usize) -> f64 {
    let mut k = m % (2 * n);
    let negate = k >= n;
    if negate {
        k -= n;
    }
    let k = k.min(n - k);
    let v = if k == 0 {
        0.0
    } else if 2 * k == n {
        1.0
    } else {
        (std::f64::consts::PI * k as f64 / n as f64).sin()
    };
    if negate {
        -v
    } else {
        v
    }
}

pub(crate) fn cos_pi(m: usize, n: usize) -> f64 {
    sin_pi(2 * m + n, 2 * n)
}

/// `ln(q/p)` accurate near `p = 1/2`.
pub(crate) fn ln_odds(p: f64) -> f64 {
    ((1.0 - 2.0 * p) / p).ln_1p()
}

pub fn eigenvalue(a: usize, p: f64, nu: usize) -> Result<f64> {
    check_domain(a)?;
    check_bias(p)?;
    if nu < 1 || nu >= a {
        return Err(Error::Domain(format!("mode index {nu} outside 1..={}", a - 1)));
    }
    Ok(2.0 * (p * (1.0 - p)).sqrt() * cos_pi(nu, a))
}

/// Natural logs of the mode-independent prefactors of `A_nu` and `B_nu`.
pub(crate) fn coefficient_scales(cfg: &WalkConfig) -> (f64, f64) {
    let (a, z) = (cfg.a() as f64, cfg.z() as f64);
    let common = 0.5 * (cfg.p() * cfg.q()).ln() + (2.0 / a).ln();
    let odds = ln_odds(cfg.p());
    (common + 0.5 * z * odds, common - 0.5 * (a - z) * odds)
}

pub fn decompose(config: &WalkConfig) -> SpectralDecomposition {
    let (a, z) = (config.a(), config.z());
    let (ln_ruin, ln_success) = coefficient_scales(config);
    let log_scale = ln_ruin.max(ln_success);
    let ruin_scale = (ln_ruin - log_scale).exp();
    let success_scale = (ln_success - log_scale).exp();
    let rho = 2.0 * (config.p() * config.q()).sqrt();
    let modes = (1..a)
        .map(|nu| {
            let base = sin_pi(nu, a);
            SpectralMode {
                nu,
                lambda: rho * cos_pi(nu, a),
                ruin: ruin_scale * sin_pi(nu * z, a) * base,
                success: success_scale * sin_pi(nu * (a - z), a) * base,
            }
        })
        .collect();
    SpectralDecomposition { config: *config, modes, log_scale }
}

/// `f = lambda s / (1 - lambda s)` with `s = 1 - gamma`.
pub fn reset_weight(lambda: f64, gamma: f64) -> f64 {
    let ls = lambda * (1.0 - gamma);
    ls / (1.0 - ls)
}

fn reset_weight_fixed(fx: &Fixed, lambda: &BigInt, s: &BigInt) -> BigInt {
    let ls = fx.mul(lambda, s);
    fx.div(&ls, &(fx.one() - &ls))
}

/// Resolvent sums `G = sum shape_nu (1 + f_nu)` for both boundaries.
pub(crate) struct Resolvent {
    pub(crate) ln_ruin_scale: f64,
    pub(crate) ln_success_scale: f64,
    pub(crate) ruin_sum: Scaled,
    pub(crate) success_sum: Scaled,
}

impl Resolvent {
    pub(crate) fn split(&self) -> AbsorptionSplit {
        let r = (self.ln_success_scale - self.ln_ruin_scale)
            + self.success_sum.ln_ratio(&self.ruin_sum);
        AbsorptionSplit {
            ruin: 1.0 / (1.0 + r.exp()),
            success: 1.0 / (1.0 + (-r).exp()),
        }
    }
}

pub(crate) fn resolvent(cfg: &WalkConfig) -> Result<Resolvent> {
    let (ln_ruin_scale, ln_success_scale) = coefficient_scales(cfg);
    let sums = adaptive(cfg, resolvent_bits(cfg), |m| {
        let w: Vec<BigInt> = m
            .weights(reset_weight_fixed)
            .into_iter()
            .map(|f| f + m.fx.one())
            .collect();
        let ruin = m.dot(&m.ruin_shape, &w);
        let success = if m.symmetric { ruin.clone() } else { m.dot(&m.success_shape, &w) };
        (m.resolved(&ruin) && m.resolved(&success))
            .then(|| (m.fx.to_scaled(&ruin), m.fx.to_scaled(&success)))
    })?;
    if sums.0.signum() <= 0.0 || sums.1.signum() <= 0.0 {
        return Err(Error::Numeric(format!(
            "non-positive resolvent sum for {cfg:?}: ruin {:e}, success {:e}",
            sums.0.to_f64(),
            sums.1.to_f64()
        )));
    }
    Ok(Resolvent {
        ln_ruin_scale,
        ln_success_scale,
        ruin_sum: sums.0,
        success_sum: sums.1,
    })
}

pub fn absorption_split(config: &WalkConfig) -> Result<AbsorptionSplit> {
    Ok(resolvent(config)?.split())
}

pub fn ruin_probability_spectral(config: &WalkConfig) -> Result<f64> {
    Ok(absorption_split(config)?.ruin)
}

/// Reset-free ruin probability; `z = 0` and `z = a` are the absorbing ends.
pub fn classical_ruin(a: usize, z: usize, p: f64) -> Result<f64> {
    check_domain(a)?;
    check_bias(p)?;
    if z > a {
        return Err(Error::InvalidConfig(format!("start z = {z} beyond a = {a}")));
    }
    if z == 0 {
        return Ok(1.0);
    }
    if z == a {
        return Ok(0.0);
    }
    if (p - 0.5).abs() < 1e-12 {
        return Ok(1.0 - z as f64 / a as f64);
    }
    // With r = q/p: (r^z - r^a) / (1 - r^a). For r > 1 use t = 1/r to stay finite.
    let lr = ln_odds(p);
    let (a, z) = (a as f64, z as f64);
    if lr < 0.0 {
        Ok((z * lr).exp() * ((a - z) * lr).exp_m1() / (a * lr).exp_m1())
    } else {
        Ok(((a - z) * -lr).exp_m1() / (a * -lr).exp_m1())
    }
}

/// Ruin probability at the midpoint of an even domain, the same for every `gamma`.
pub fn midpoint_value(a: usize, p: f64) -> Result<f64> {
    check_domain(a)?;
    check_bias(p)?;
    if a % 2 != 0 {
        return Err(Error::Domain(format!("midpoint value needs even a, got {a}")));
    }
    let r = 0.5 * a as f64 * ln_odds(p);
    Ok(1.0 / (1.0 + (-r).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: usize, z: usize, p: f64, g: f64) -> WalkConfig {
        WalkConfig::new(a, z, p, g).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(4, 0.5, 2).unwrap(), 0.0);
        assert_eq!(eigenvalue(2, 0.5, 1).unwrap(), 0.0);
        let want = 2.0 * 0.24f64.sqrt() * (std::f64::consts::PI / 5.0).cos();
        assert!((eigenvalue(5, 0.6, 1).unwrap() - want).abs() < 1e-15);
        assert!(matches!(eigenvalue(5, 0.6, 0), Err(Error::Domain(_))));
        assert!(matches!(eigenvalue(5, 0.6, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn decomposition_shapes() {
        let d = decompose(&cfg(2, 1, 0.5, 0.0));
        assert_eq!(d.modes.len(), 1);
        assert_eq!(d.modes[0].lambda, 0.0);
        assert_eq!(d.modes[0].ruin, d.modes[0].success);

        let d = decompose(&cfg(10, 5, 0.6, 0.3));
        let ratio = (2.0f64 / 3.0).powi(5);
        for m in d.modes.iter().filter(|m| m.success != 0.0) {
            assert!((m.ruin / m.success - ratio).abs() < 1e-12 * ratio);
        }
        let idx: Vec<usize> = d.modes.iter().map(|m| m.nu).collect();
        assert_eq!(idx, (1..10).collect::<Vec<_>>());
    }

    #[test]
    fn reset_weight_examples() {
        assert_eq!(reset_weight(0.0, 0.5), 0.0);
        assert_eq!(reset_weight(0.5, 0.0), 1.0);
        assert!((reset_weight(-0.5, 0.3) + 0.35 / 1.35).abs() < 1e-15);
    }

    #[test]
    fn table_cells() {
        let cases = [
            (5, 2, 0.6, 0.3, 0.4829),
            (5, 2, 0.5, 0.6, 0.8276),
            (5, 3, 0.6, 0.9, 0.0175),
        ];
        for (a, z, p, g, want) in cases {
            let got = ruin_probability_spectral(&cfg(a, z, p, g)).unwrap();
            assert!((got - want).abs() < 5e-5, "({a},{z},{p},{g}) -> {got}");
        }
    }

    #[test]
    fn midpoint_is_flat() {
        let want = (2.0f64 / 3.0).powi(5) / (1.0 + (2.0f64 / 3.0).powi(5));
        assert!((midpoint_value(10, 0.6).unwrap() - want).abs() < 1e-15);
        assert_eq!(midpoint_value(10, 0.5).unwrap(), 0.5);
        assert!((midpoint_value(4, 0.25).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(midpoint_value(5, 0.5), Err(Error::Domain(_))));
        for g in [0.0, 0.2, 0.5, 0.99] {
            let got = ruin_probability_spectral(&cfg(10, 5, 0.6, g)).unwrap();
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn classical_examples() {
        assert!((classical_ruin(5, 2, 0.5).unwrap() - 0.6).abs() < 1e-15);
        assert!((classical_ruin(5, 2, 0.6).unwrap() - 0.360).abs() < 5e-4);
        assert_eq!(classical_ruin(5, 5, 0.3).unwrap(), 0.0);
        assert_eq!(classical_ruin(5, 0, 0.3).unwrap(), 1.0);
        // r = 2/3: (r^2 - r^5)/(1 - r^5)
        let r: f64 = 2.0 / 3.0;
        let want = (r.powi(2) - r.powi(5)) / (1.0 - r.powi(5));
        assert!((classical_ruin(5, 2, 0.6).unwrap() - want).abs() < 1e-15);
        let r: f64 = 1.5;
        let want = (r.powi(2) - r.powi(5)) / (1.0 - r.powi(5));
        assert!((classical_ruin(5, 2, 0.4).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn single_site_is_one_minus_p() {
        for g in [0.0, 0.4, 0.9] {
            let got = ruin_probability_spectral(&cfg(2, 1, 0.7, g)).unwrap();
            assert!((got - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn strong_bias_stays_finite() {
        let split = absorption_split(&cfg(400, 100, 0.9, 0.5)).unwrap();
        assert!(split.ruin > 0.0 && split.ruin < 1e-20);
        assert_eq!(split.success, 1.0);
        let d = decompose(&cfg(4000, 10, 0.95, 0.1));
        assert!(d.modes.iter().all(|m| m.ruin.is_finite() && m.success.is_finite()));
    }
}
