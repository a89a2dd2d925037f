//! Reference engines that never touch the spectral formulas: linear solves of
//! the one-step recursion and direct propagation of the probability vector.

use crate::config::{check_bias, check_domain, WalkConfig};
use crate::error::{Error, Result};
use crate::renewal::FiniteTimeDistribution;
use crate::spectral::AbsorptionSplit;

/// Dense square system `matrix * x = rhs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub dimension: usize,
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    /// `phi(x) - (1-gamma)(p phi(x+1) + q phi(x-1)) - gamma phi(z) = 0` on the
    /// interior with `phi(0) = 1`, `phi(a) = 0`. Row and column `i` stand for site `i + 1`.
    pub fn reset_chain(config: &WalkConfig) -> Self {
        let n = config.a() - 1;
        let s = config.discount();
        let (p, q, g) = (config.p(), config.q(), config.gamma());
        let zc = config.z() - 1;
        let mut matrix = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            matrix[i * n + i] += 1.0;
            if i + 1 < n {
                matrix[i * n + i + 1] -= s * p;
            }
            if i > 0 {
                matrix[i * n + i - 1] -= s * q;
            } else {
                rhs[i] = s * q;
            }
            matrix[i * n + zc] -= g;
        }
        Self { dimension: n, matrix, rhs }
    }

    /// Gaussian elimination with partial pivoting, followed by a residual check
    /// `|M x - b| <= 1e-12 |M| |x|` in the infinity norm.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.dimension;
        let mut m = self.matrix.clone();
        let mut b = self.rhs.clone();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
                .expect("non-empty column");
            if m[pivot * n + col] == 0.0 {
                return Err(Error::SingularSystem(col));
            }
            if pivot != col {
                for k in 0..n {
                    m.swap(col * n + k, pivot * n + k);
                }
                b.swap(col, pivot);
            }
            let d = m[col * n + col];
            for row in col + 1..n {
                let factor = m[row * n + col] / d;
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    m[row * n + k] -= factor * m[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let tail: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
            x[row] = (b[row] - tail) / m[row * n + row];
        }

        let norm_m = (0..n)
            .map(|i| self.matrix[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let norm_x = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let residual = (0..n)
            .map(|i| {
                let row: f64 = (0..n).map(|k| self.matrix[i * n + k] * x[k]).sum();
                (row - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max);
        if residual > 1e-12 * norm_m * norm_x {
            return Err(Error::Numeric(format!(
                "residual {residual:e} exceeds bound for |M| = {norm_m:e}, |x| = {norm_x:e}"
            )));
        }
        Ok(x)
    }
}

/// Ruin probability from the dense reset-chain system.
///
/// The system's conditioning degrades like the inverse probability of
/// absorption before the first reset, so for long domains with frequent resets
/// the answer can be far off even though the residual is tiny. `exact_ruin`
/// avoids that.
pub fn exact_ruin_dense(config: &WalkConfig) -> Result<f64> {
    let x = LinearSystem::reset_chain(config).solve()?;
    Ok(x[config.z() - 1])
}

/// Solves `(I - s Q) x = rhs` for the tridiagonal `Q` of the reset-free walk.
/// Every pivot is at least 1/2 and `rhs >= 0` keeps all updates additive.
fn discounted_tridiagonal(config: &WalkConfig, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    let s = config.discount();
    let (up, down) = (s * config.p(), s * config.q());
    let mut pivot = vec![1.0; n];
    for i in 1..n {
        let factor = down / pivot[i - 1];
        pivot[i] = 1.0 - factor * up;
        rhs[i] += factor * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / pivot[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] + up * x[i + 1]) / pivot[i];
    }
    x
}

/// Ruin and success probabilities through the first reset cycle: with `U`, `V`
/// the chances of ruin or success before any reset, `q = U / (U + V)`. Both
/// come from one tridiagonal solve each, with no subtraction anywhere.
pub fn exact_split(config: &WalkConfig) -> Result<AbsorptionSplit> {
    let n = config.a() - 1;
    let zi = config.z() - 1;
    let s = config.discount();
    let mut e_first = vec![0.0; n];
    e_first[0] = s * config.q();
    let mut e_last = vec![0.0; n];
    e_last[n - 1] = s * config.p();
    let u = discounted_tridiagonal(config, e_first)[zi];
    let v = discounted_tridiagonal(config, e_last)[zi];
    let total = u + v;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numeric(format!("no absorption mass before reset for {config:?}")));
    }
    Ok(AbsorptionSplit { ruin: u / total, success: v / total })
}

pub fn exact_ruin(config: &WalkConfig) -> Result<f64> {
    Ok(exact_split(config)?.ruin)
}

fn dp_steps(
    a: usize,
    z: usize,
    p: f64,
    horizon: usize,
    mut observe: impl FnMut(f64, f64, &[f64]),
) -> Result<()> {
    let cfg = WalkConfig::new(a, z, p, 0.0)?;
    let q = cfg.q();
    let mut mass = vec![0.0; a + 1];
    mass[z] = 1.0;
    let mut next = vec![0.0; a + 1];
    for _ in 0..horizon {
        let u = q * mass[1];
        let v = p * mass[a - 1];
        next.fill(0.0);
        for x in 1..a {
            if x >= 2 {
                next[x] += p * mass[x - 1];
            }
            if x + 1 <= a - 1 {
                next[x] += q * mass[x + 1];
            }
        }
        std::mem::swap(&mut mass, &mut next);
        observe(u, v, &mass[1..a]);
    }
    Ok(())
}

/// Reset-free absorption law by propagating the probability vector.
pub fn finite_time_dp(a: usize, z: usize, p: f64, horizon: usize) -> Result<FiniteTimeDistribution> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let cfg = WalkConfig::new(a, z, p, 0.0)?;
    let mut u = Vec::with_capacity(horizon);
    let mut v = Vec::with_capacity(horizon);
    dp_steps(a, z, p, horizon, |uk, vk, _| {
        u.push(uk);
        v.push(vk);
    })?;
    Ok(FiniteTimeDistribution::from_parts(cfg, u, v))
}

/// Largest `|interior mass + absorbed mass - 1|` seen over `horizon` steps.
pub fn conservation_defect(a: usize, z: usize, p: f64, horizon: usize) -> Result<f64> {
    let (mut absorbed, mut worst) = (0.0, 0.0f64);
    dp_steps(a, z, p, horizon, |uk, vk, interior| {
        absorbed += uk + vk;
        let total: f64 = interior.iter().sum::<f64>() + absorbed;
        worst = worst.max((total - 1.0).abs());
    })?;
    Ok(worst)
}

const DISCOUNT_TAIL: f64 = 1.0 / (1u64 << 40) as f64;
const DISCOUNT_STEP_CAP: usize = 50_000_000;

/// `(sum_k u_k s^k, sum_k (u_k + v_k) s^k)` by truncated propagation. The
/// remaining tail is at most `s^k` times the surviving mass; stop once that is
/// below `2^-40` (relative to `S` when `S < 1`).
pub fn discounted_dp(a: usize, z: usize, p: f64, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidConfig(format!("discount s = {s} must lie in (0, 1]")));
    }
    let cfg = WalkConfig::new(a, z, p, 0.0)?;
    let q = cfg.q();
    let mut mass = vec![0.0; a + 1];
    mass[z] = 1.0;
    let mut next = vec![0.0; a + 1];
    let (mut big_u, mut big_s) = (0.0, 0.0);
    let mut weight = 1.0;
    for _ in 0..DISCOUNT_STEP_CAP {
        weight *= s;
        let u = q * mass[1];
        let v = p * mass[a - 1];
        big_u += weight * u;
        big_s += weight * (u + v);
        next.fill(0.0);
        for x in 1..a {
            if x >= 2 {
                next[x] += p * mass[x - 1];
            }
            if x + 1 <= a - 1 {
                next[x] += q * mass[x + 1];
            }
        }
        std::mem::swap(&mut mass, &mut next);
        let tail = weight * mass.iter().sum::<f64>();
        if tail <= DISCOUNT_TAIL * big_s.min(1.0) || tail < 1e-300 {
            return Ok((big_u, big_s));
        }
    }
    Err(Error::Numeric(format!("discounted sums not converged after {DISCOUNT_STEP_CAP} steps")))
}

/// Interior transition matrix conjugated by `D = diag((q/p)^{x/2})`, row-major.
pub fn doob_operator(a: usize, p: f64) -> Result<Vec<f64>> {
    check_domain(a)?;
    check_bias(p)?;
    let n = a - 1;
    let q = 1.0 - p;
    let weight = |x: usize| (0.5 * x as f64 * (q / p).ln()).exp();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let x = i + 1;
        if i + 1 < n {
            out[i * n + i + 1] = p * weight(x + 1) / weight(x);
        }
        if i > 0 {
            out[i * n + i - 1] = q * weight(x - 1) / weight(x);
        }
    }
    Ok(out)
}

/// Largest `|P(x, y) - P(y, x)|` of the conjugated operator.
pub fn doob_symmetry_check(a: usize, p: f64) -> Result<f64> {
    let m = doob_operator(a, p)?;
    let n = a - 1;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[i * n + j] - m[j * n + i]).abs());
        }
    }
    Ok(worst)
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix, from
/// the signs of the `LDL^T` pivots of `T - x I`.
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..diag.len() {
        let couple = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / d };
        d = diag[i] - x - couple;
        if d == 0.0 {
            d = -f64::EPSILON * (diag[i].abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of a symmetric tridiagonal matrix by Sturm-sequence bisection, descending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let radius = (0..n)
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { off[i].abs() } else { 0.0 };
            diag[i].abs() + left + right
        })
        .fold(0.0, f64::max);
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            // k-th smallest: count_below(lo) <= k < count_below(hi)
            let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(diag, off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    out.reverse();
    out
}

/// Spectrum of the conjugated operator, descending.
pub fn doob_eigenvalues(a: usize, p: f64) -> Result<Vec<f64>> {
    let m = doob_operator(a, p)?;
    let n = a - 1;
    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let off: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| 0.5 * (m[i * n + i + 1] + m[(i + 1) * n + i]))
        .collect();
    Ok(tridiagonal_eigenvalues(&diag, &off))
}
