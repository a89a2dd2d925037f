//! Reset sensitivity `h_z = dq_z / dgamma` and where it changes sign.
//!
//! With `w_nu = 1 / (1 - lambda_nu s)`, the sums are
//!
//! ```text
//! S1 = sum A lambda w^2   S2 = sum (A + B) w   S3 = sum A w   S4 = sum (A + B) lambda w^2
//! h  = (S3 S4 - S1 S2) / S2^2
//! ```
//!
//! The numerator collapses to `C_A C_B (G_A H_B - H_A G_B)` where `G = sum shape w`
//! and `H = sum shape lambda w^2`, which is evaluated exactly in integers.

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::config::{check_bias, WalkConfig};
use crate::error::{Error, Result};
use crate::precision::{adaptive, ln_add_exp, resolvent_bits, Fixed, Scaled, GUARD_BITS};
use crate::spectral::{coefficient_scales, ruin_probability_spectral, midpoint_value};

/// `|h_{a/2}|` below this counts as an exact zero.
pub const ZERO_TOLERANCE: f64 = 1e-9;

/// Bias offset for the central difference behind [`bias_shift_coefficient`].
pub const BIAS_STEP: f64 = 1e-3;

/// The four sums divided by `exp(log_scale)`, and the derivative itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeComponents {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub h: f64,
    pub log_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// `h` vanishes at this site.
    ExactZero(usize),
    /// `h` is positive at the first site and negative at the second.
    Between(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointReport {
    pub a: usize,
    pub p: f64,
    pub gamma: f64,
    /// `h_z` for `z = 1..a-1`.
    pub h_values: Vec<f64>,
    pub bracket: Bracket,
    /// Crossing by linear interpolation between the bracket sites. A reporting
    /// convention: `h` only has meaning at integer sites.
    pub z_cross: f64,
    pub midpoint_exact: bool,
}

impl CriticalPointReport {
    pub fn h(&self, z: usize) -> f64 {
        self.h_values[z - 1]
    }
}

fn derivative_weights(fx: &Fixed, lambda: &BigInt, s: &BigInt) -> (BigInt, BigInt) {
    let den = fx.one() - fx.mul(lambda, s);
    let w = fx.div(&fx.one(), &den);
    let h = fx.div(lambda, &fx.mul(&den, &den));
    (w, h)
}

struct Sums {
    g_ruin: BigInt,
    g_success: BigInt,
    h_ruin: BigInt,
    h_success: BigInt,
    cross: BigInt,
    frac: u32,
}

pub fn derivative(config: &WalkConfig) -> Result<DerivativeComponents> {
    if config.gamma() <= 0.0 {
        return Err(Error::Domain(format!(
            "derivative needs gamma in (0, 1), got {}",
            config.gamma()
        )));
    }
    let sums = adaptive(config, resolvent_bits(config), |m| {
        let (w, hw): (Vec<BigInt>, Vec<BigInt>) = m
            .lambda
            .iter()
            .map(|l| derivative_weights(&m.fx, l, &m.discount))
            .unzip();
        let g_ruin = m.dot(&m.ruin_shape, &w);
        let g_success = m.dot(&m.success_shape, &w);
        let h_ruin = m.dot(&m.ruin_shape, &hw);
        let h_success = m.dot(&m.success_shape, &hw);
        if !(m.resolved(&g_ruin) && m.resolved(&g_success)) {
            return None;
        }
        let flat = m.lambda.iter().all(|l| l.bits() == 0);
        if !flat && !(m.resolved(&h_ruin) && m.resolved(&h_success)) {
            return None;
        }
        let cross = &g_ruin * &h_success - &h_ruin * &g_success;
        let widest = [&g_ruin, &g_success, &h_ruin, &h_success]
            .iter()
            .map(|x| x.bits())
            .max()
            .unwrap_or(0);
        let exact = m.symmetric || flat;
        if !exact && cross.bits() <= widest + m.error_bits + 2 + GUARD_BITS {
            return None;
        }
        Some(Sums { g_ruin, g_success, h_ruin, h_success, cross, frac: m.fx.frac() })
    })?;

    let (ln_ruin, ln_success) = coefficient_scales(config);
    let log_scale = ln_ruin.max(ln_success);
    let fx = Fixed::new(sums.frac);
    let g_a = fx.to_scaled(&sums.g_ruin);
    let g_b = fx.to_scaled(&sums.g_success);
    let h_a = fx.to_scaled(&sums.h_ruin);
    let h_b = fx.to_scaled(&sums.h_success);
    let s1 = h_a.times_exp(ln_ruin - log_scale);
    let s3 = g_a.times_exp(ln_ruin - log_scale);
    let s2 = s3 + g_b.times_exp(ln_success - log_scale);
    let s4 = s1 + h_b.times_exp(ln_success - log_scale);

    // Normalize by the width of the larger G so every logarithm stays moderate.
    let t = sums.g_ruin.bits().max(sums.g_success.bits()) as i64;
    let h = if sums.cross.bits() == 0 {
        0.0
    } else {
        let k = Scaled::from_bigint(&sums.cross, 2 * t);
        let ga = Scaled::from_bigint(&sums.g_ruin, t);
        let gb = Scaled::from_bigint(&sums.g_success, t);
        let ln_d = ln_add_exp(ln_ruin + ga.ln_abs(), ln_success + gb.ln_abs());
        k.signum() * (ln_ruin + ln_success + k.ln_abs() - 2.0 * ln_d).exp()
    };
    Ok(DerivativeComponents { s1, s2, s3, s4, h, log_scale })
}

fn h_row(a: usize, p: f64, gamma: f64) -> Result<Vec<f64>> {
    (1..a)
        .into_par_iter()
        .map(|z| Ok(derivative(&WalkConfig::new(a, z, p, gamma)?)?.h))
        .collect()
}

/// Locates the single sign change of `h_z` over the interior sites.
pub fn sign_change(a: usize, p: f64, gamma: f64) -> Result<CriticalPointReport> {
    if a < 3 {
        return Err(Error::Domain(format!("sign change needs a >= 3, got {a}")));
    }
    let h_values = h_row(a, p, gamma)?;
    let sign = |z: usize| -> i8 {
        let h = h_values[z - 1];
        let zero = if a % 2 == 0 && 2 * z == a { h.abs() <= ZERO_TOLERANCE } else { h == 0.0 };
        if zero {
            0
        } else if h > 0.0 {
            1
        } else {
            -1
        }
    };
    let violation = |what: String| Error::StructuralViolation(format!("a={a} p={p} gamma={gamma}: {what}"));
    if sign(1) != 1 || sign(a - 1) != -1 {
        return Err(violation(format!(
            "boundary signs h_1 = {:e}, h_(a-1) = {:e}",
            h_values[0],
            h_values[a - 2]
        )));
    }
    let zeros: Vec<usize> = (1..a).filter(|&z| sign(z) == 0).collect();
    let nonzero: Vec<usize> = (1..a).filter(|&z| sign(z) != 0).collect();
    let changes: Vec<(usize, usize)> = nonzero
        .windows(2)
        .filter(|w| sign(w[0]) != sign(w[1]))
        .map(|w| (w[0], w[1]))
        .collect();
    if changes.len() != 1 || zeros.len() > 1 {
        return Err(violation(format!(
            "{} sign changes and {} zero sites",
            changes.len(),
            zeros.len()
        )));
    }
    let (lo, hi) = changes[0];
    let (bracket, z_cross) = match zeros.first() {
        Some(&z0) if lo < z0 && z0 < hi => (Bracket::ExactZero(z0), z0 as f64),
        Some(&z0) => return Err(violation(format!("zero at {z0} away from the crossing ({lo}, {hi})"))),
        None if hi == lo + 1 => {
            let (h0, h1) = (h_values[lo - 1], h_values[hi - 1]);
            (Bracket::Between(lo, hi), lo as f64 + h0 / (h0 - h1))
        }
        None => unreachable!("adjacent non-zero sites"),
    };
    let midpoint_exact = a % 2 == 0 && h_values[a / 2 - 1].abs() <= ZERO_TOLERANCE;
    Ok(CriticalPointReport { a, p, gamma, h_values, bracket, z_cross, midpoint_exact })
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Largest `|q_{a/2}(gamma) - midpoint_value(a, p)|` over the grid.
pub fn midpoint_invariance_sweep(a: usize, ps: &[f64], gammas: &[f64]) -> Result<f64> {
    if a % 2 != 0 {
        return Err(Error::Domain(format!("midpoint sweep needs even a, got {a}")));
    }
    check_grid("p", ps)?;
    check_grid("gamma", gammas)?;
    let points: Vec<(f64, f64)> = ps.iter().flat_map(|&p| gammas.iter().map(move |&g| (p, g))).collect();
    let worst = points
        .par_iter()
        .map(|&(p, g)| {
            let target = midpoint_value(a, p)?;
            let got = ruin_probability_spectral(&WalkConfig::new(a, a / 2, p, g)?)?;
            Ok((got - target).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

fn check_odd(a: usize) -> Result<()> {
    if a % 2 == 0 || a < 3 {
        return Err(Error::Domain(format!("needs odd a >= 3, got {a}")));
    }
    Ok(())
}

/// `C = -(z_cross(1/2 + eps) - z_cross(1/2 - eps)) / (2 eps)`, the slope in
/// `z_cross = a/2 - C (p - q) / 2`.
pub fn bias_shift_coefficient(a: usize, gamma: f64) -> Result<f64> {
    check_odd(a)?;
    let up = sign_change(a, 0.5 + BIAS_STEP, gamma)?.z_cross;
    let down = sign_change(a, 0.5 - BIAS_STEP, gamma)?.z_cross;
    Ok(-(up - down) / (2.0 * BIAS_STEP))
}

/// `a` times the largest `|h|` at the two central sites over the bias grid.
pub fn central_site_bound(a: usize, ps: &[f64], gamma: f64) -> Result<f64> {
    check_odd(a)?;
    check_grid("p", ps)?;
    let mut worst = 0.0f64;
    for &p in ps {
        check_bias(p)?;
        for z in [(a - 1) / 2, (a + 1) / 2] {
            worst = worst.max(derivative(&WalkConfig::new(a, z, p, gamma)?)?.h.abs());
        }
    }
    Ok(a as f64 * worst)
}
