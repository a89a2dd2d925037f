//! Fixed-point multiprecision evaluation of spectral mode sums.
//!
//! A resolvent sum such as `sum_nu sin(pi nu z / a) sin(pi nu / a) / (1 - lambda_nu s)`
//! is a Green's function of the symmetrized walk: its terms are O(1) while the
//! total decays geometrically with the distance `z - 1`. In binary64 the result
//! is noise once that decay passes 2^-53, which happens well inside the
//! parameter ranges of interest (a = 26, p = 0.8, gamma = 0.9 already returns a
//! "probability" near 996). Every quantity here is bounded, so the shapes,
//! eigenvalues and weights are carried as integers scaled by `2^-frac` and
//! `frac` is raised until each requested sum clears its rounding bound.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::config::WalkConfig;
use crate::error::{Error, Result};

/// Bits a sum must carry above its rounding bound to count as resolved.
pub(crate) const GUARD_BITS: u64 = 64;

/// Working-precision ceiling for the adaptive loop.
pub(crate) const MAX_FRAC_BITS: u32 = 1 << 16;

const TABLE_CACHE_LIMIT: usize = 64;

/// Arithmetic on integers read as `value * 2^-frac`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Fixed {
    frac: u32,
}

impl Fixed {
    pub(crate) fn new(frac: u32) -> Self {
        Self { frac }
    }

    pub(crate) fn frac(&self) -> u32 {
        self.frac
    }

    pub(crate) fn one(&self) -> BigInt {
        BigInt::one() << self.frac
    }

    /// Exact when `x` has no bits below `2^-frac`, truncated otherwise.
    pub(crate) fn from_f64(&self, x: f64) -> BigInt {
        debug_assert!(x.is_finite());
        if x == 0.0 {
            return BigInt::zero();
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let fraction = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), biased - 1075)
        };
        let shift = exponent + self.frac as i64;
        let mut v = BigInt::from(mantissa);
        if shift >= 0 {
            v <<= shift as usize;
        } else {
            v >>= (-shift) as usize;
        }
        if negative {
            -v
        } else {
            v
        }
    }

    pub(crate) fn mul(&self, x: &BigInt, y: &BigInt) -> BigInt {
        (x * y) >> self.frac as usize
    }

    pub(crate) fn div(&self, x: &BigInt, y: &BigInt) -> BigInt {
        (x << self.frac as usize) / y
    }

    pub(crate) fn sqrt(&self, x: &BigInt) -> BigInt {
        debug_assert!(!x.is_negative());
        (x << self.frac as usize).sqrt()
    }

    pub(crate) fn to_scaled(&self, x: &BigInt) -> Scaled {
        Scaled::from_bigint(x, self.frac as i64)
    }
}

/// A real number `mantissa * 2^exp2` with an unbounded exponent, used to move
/// multiprecision results into binary64 without overflow or underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scaled {
    mantissa: f64,
    exp2: i64,
}

impl Scaled {
    pub(crate) const ZERO: Scaled = Scaled { mantissa: 0.0, exp2: 0 };

    /// Reads `x * 2^-scale_bits`.
    pub(crate) fn from_bigint(x: &BigInt, scale_bits: i64) -> Self {
        let width = x.bits();
        if width == 0 {
            return Self::ZERO;
        }
        let drop = width.saturating_sub(63);
        let top = (x.abs() >> drop as usize).to_u64().expect("63-bit window fits in u64");
        let mantissa = if x.is_negative() { -(top as f64) } else { top as f64 };
        Self { mantissa, exp2: drop as i64 - scale_bits }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub(crate) fn signum(&self) -> f64 {
        if self.mantissa > 0.0 {
            1.0
        } else if self.mantissa < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub(crate) fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    pub(crate) fn to_f64(&self) -> f64 {
        ldexp(self.mantissa, self.exp2)
    }

    /// `ln(|self| / |other|)`, exact in the exponents.
    pub(crate) fn ln_ratio(&self, other: &Scaled) -> f64 {
        (self.mantissa / other.mantissa).abs().ln()
            + (self.exp2 - other.exp2) as f64 * std::f64::consts::LN_2
    }

    /// `self * exp(ln_factor)` as binary64.
    pub(crate) fn times_exp(&self, ln_factor: f64) -> f64 {
        let e = ln_factor / std::f64::consts::LN_2;
        let whole = e.floor();
        ldexp(self.mantissa * (e - whole).exp2(), self.exp2 + whole as i64)
    }
}

/// `m * 2^e` without intermediate overflow for exponents far outside binary64.
pub(crate) fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return m;
    }
    let mut e = e.clamp(-2300, 2300);
    let mut out = m;
    while e > 1000 {
        out *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        out *= 2f64.powi(-1000);
        e += 1000;
    }
    out * 2f64.powi(e as i32)
}

/// `ln(exp(x) + exp(y))` without overflow.
pub(crate) fn ln_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

fn arctan_inverse(n: u64, prec: u32) -> BigInt {
    let n2 = BigInt::from(n * n);
    let mut power = (BigInt::one() << prec as usize) / n;
    let mut sum = power.clone();
    let mut k = 1u64;
    loop {
        power = &power / &n2;
        if power.is_zero() {
            break;
        }
        let term = &power / (2 * k + 1);
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

/// Machin's formula.
fn pi_fixed(prec: u32) -> BigInt {
    arctan_inverse(5, prec) * 16 - arctan_inverse(239, prec) * 4
}

fn sin_series(x: &BigInt, prec: u32) -> BigInt {
    let x2 = (x * x) >> prec as usize;
    let mut term = x.clone();
    let mut sum = x.clone();
    let mut k = 1u64;
    loop {
        term = ((&term * &x2) >> prec as usize) / ((2 * k) * (2 * k + 1));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        k += 1;
    }
    sum
}

fn cos_series(x: &BigInt, prec: u32) -> BigInt {
    let x2 = (x * x) >> prec as usize;
    let mut term = BigInt::one() << prec as usize;
    let mut sum = term.clone();
    let mut k = 1u64;
    loop {
        term = ((&term * &x2) >> prec as usize) / ((2 * k - 1) * (2 * k));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        k += 1;
    }
    sum
}

/// `sin(pi * num / den)` at `prec` fractional bits. Multiples of `pi / 2` come
/// out exact, which the midpoint and `a = 2` cases rely on.
fn sin_pi_ratio(num: u64, den: u64, pi: &BigInt, prec: u32) -> BigInt {
    let mut k = num % (2 * den);
    let mut negate = false;
    if k >= den {
        k -= den;
        negate = true;
    }
    let k = k.min(den - k);
    let value = if k == 0 {
        BigInt::zero()
    } else if 4 * k <= den {
        sin_series(&(pi * k / den), prec)
    } else {
        // sin(pi k / den) = cos(pi (den - 2k) / (2 den)), argument below pi / 4
        let rest = den - 2 * k;
        if rest == 0 {
            BigInt::one() << prec as usize
        } else {
            cos_series(&(pi * rest / (2 * den)), prec)
        }
    };
    if negate {
        -value
    } else {
        value
    }
}

/// `sin(pi m / a)` for `m` in `0..2a` and `cos(pi nu / a)` for `nu` in `0..=a`.
#[derive(Debug)]
pub(crate) struct SineTable {
    sin: Vec<BigInt>,
    cos: Vec<BigInt>,
}

impl SineTable {
    fn build(a: usize, frac: u32) -> Self {
        let prec = frac + GUARD_BITS as u32;
        let pi = pi_fixed(prec + 8) >> 8usize;
        let a64 = a as u64;
        let round = |v: BigInt| v >> GUARD_BITS as usize;
        let sin = (0..2 * a64)
            .map(|m| round(sin_pi_ratio(m, a64, &pi, prec)))
            .collect();
        let cos = (0..=a64)
            .map(|nu| round(sin_pi_ratio(2 * nu + a64, 2 * a64, &pi, prec)))
            .collect();
        Self { sin, cos }
    }

    /// `sin(pi m / a)` for any non-negative `m`.
    pub(crate) fn sin(&self, m: usize) -> &BigInt {
        &self.sin[m % self.sin.len()]
    }

    pub(crate) fn cos(&self, nu: usize) -> &BigInt {
        &self.cos[nu]
    }
}

fn sine_table(a: usize, frac: u32) -> Arc<SineTable> {
    static TABLES: OnceLock<Mutex<HashMap<(usize, u32), Arc<SineTable>>>> = OnceLock::new();
    let cache = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("sine table cache poisoned").get(&(a, frac)) {
        return Arc::clone(t);
    }
    let table = Arc::new(SineTable::build(a, frac));
    let mut guard = cache.lock().expect("sine table cache poisoned");
    if guard.len() >= TABLE_CACHE_LIMIT {
        guard.clear();
    }
    Arc::clone(guard.entry((a, frac)).or_insert(table))
}

/// Per-mode ingredients of one configuration at one working precision.
///
/// `ruin_shape[nu - 1] = sin(pi nu z / a) sin(pi nu / a)` and
/// `success_shape[nu - 1] = sin(pi nu (a - z) / a) sin(pi nu / a)`; the
/// `z`-dependent scale factors of the coefficients are kept out of the sums.
#[derive(Debug)]
pub(crate) struct Modes {
    pub(crate) fx: Fixed,
    pub(crate) lambda: Vec<BigInt>,
    pub(crate) ruin_shape: Vec<BigInt>,
    pub(crate) success_shape: Vec<BigInt>,
    pub(crate) discount: BigInt,
    /// `z = a - z`: both shapes are bitwise identical.
    pub(crate) symmetric: bool,
    /// Rounding bound of a single weighted sum, in units of `2^-frac`, as a bit count.
    pub(crate) error_bits: u64,
}

impl Modes {
    pub(crate) fn new(cfg: &WalkConfig, frac: u32) -> Self {
        let fx = Fixed::new(frac);
        let (a, z) = (cfg.a(), cfg.z());
        let table = sine_table(a, frac);
        let one = fx.one();
        let p = fx.from_f64(cfg.p());
        let q = &one - &p;
        let rho = fx.sqrt(&(fx.mul(&p, &q) << 2usize));
        let mut lambda = Vec::with_capacity(a - 1);
        let mut ruin_shape = Vec::with_capacity(a - 1);
        let mut success_shape = Vec::with_capacity(a - 1);
        for nu in 1..a {
            lambda.push(fx.mul(&rho, table.cos(nu)));
            let base = table.sin(nu);
            ruin_shape.push(fx.mul(table.sin(nu * z), base));
            success_shape.push(fx.mul(table.sin(nu * (a - z)), base));
        }
        let discount = &one - fx.from_f64(cfg.gamma());
        let lead = 2.0 * (cfg.p() * cfg.q()).sqrt() * (std::f64::consts::PI / a as f64).cos();
        let peak_weight = 1.0 / (1.0 - lead * cfg.discount()).max(f64::MIN_POSITIVE);
        let error_bits = bit_length(a as f64) + 3 * bit_length(peak_weight + 1.0) + 8;
        Self {
            fx,
            lambda,
            ruin_shape,
            success_shape,
            discount,
            symmetric: 2 * z == a,
            error_bits,
        }
    }

    /// `sum_nu shape[nu] * weight[nu]`.
    pub(crate) fn dot(&self, shape: &[BigInt], weight: &[BigInt]) -> BigInt {
        let raw: BigInt = shape.iter().zip(weight).map(|(x, w)| x * w).sum();
        raw >> self.fx.frac() as usize
    }

    /// Applies `f(lambda_nu, s)` to every mode.
    pub(crate) fn weights(&self, f: impl Fn(&Fixed, &BigInt, &BigInt) -> BigInt) -> Vec<BigInt> {
        self.lambda.iter().map(|l| f(&self.fx, l, &self.discount)).collect()
    }

    /// A sum of this precision with magnitude above the rounding bound.
    pub(crate) fn resolved(&self, sum: &BigInt) -> bool {
        sum.bits() > self.error_bits + GUARD_BITS
    }
}

fn bit_length(x: f64) -> u64 {
    x.max(1.0).log2().ceil() as u64
}

/// Starting precision for resolvent sums of `cfg`: the Green's function decays
/// by `r = x / (1 + sqrt(1 - x^2))` per site with `x = 2 sqrt(pq) (1 - gamma)`.
pub(crate) fn resolvent_bits(cfg: &WalkConfig) -> u32 {
    let x = 2.0 * (cfg.p() * cfg.q()).sqrt() * cfg.discount();
    let r = x / (1.0 + (1.0 - x * x).max(0.0).sqrt());
    let per_site = if r > 0.0 { -r.log2() } else { 64.0 };
    let far = cfg.z().max(cfg.a() - cfg.z()) as f64;
    let bits = 128.0 + per_site * far + 2.0 * (cfg.a() as f64).log2();
    round_up_bits(bits.min(MAX_FRAC_BITS as f64) as u32)
}

pub(crate) fn round_up_bits(bits: u32) -> u32 {
    bits.max(64).div_ceil(64) * 64
}

/// Runs `attempt` at increasing precision until it reports a resolved result.
pub(crate) fn adaptive<T>(
    cfg: &WalkConfig,
    start_bits: u32,
    mut attempt: impl FnMut(&Modes) -> Option<T>,
) -> Result<T> {
    let mut frac = round_up_bits(start_bits).min(MAX_FRAC_BITS);
    loop {
        let modes = Modes::new(cfg, frac);
        if let Some(v) = attempt(&modes) {
            return Ok(v);
        }
        if frac >= MAX_FRAC_BITS {
            return Err(Error::PrecisionExhausted { bits: frac });
        }
        frac = (frac * 2).min(MAX_FRAC_BITS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_f64(fx: Fixed, x: &BigInt) -> f64 {
        fx.to_scaled(x).to_f64()
    }

    #[test]
    fn pi_matches_reference_digits() {
        let fx = Fixed::new(256);
        let pi = pi_fixed(256);
        assert_eq!(to_f64(fx, &pi), std::f64::consts::PI);
        // 3.14159265358979323846264338327950288... scaled by 10^35 and compared
        let digits = (&pi * BigInt::from(10u64).pow(35)) >> 256usize;
        assert_eq!(digits.to_string(), "314159265358979323846264338327950288");
    }

    #[test]
    fn sine_table_matches_libm() {
        for a in [2usize, 3, 5, 10, 11, 64] {
            let table = SineTable::build(a, 128);
            let fx = Fixed::new(128);
            for m in 0..2 * a {
                let want = (std::f64::consts::PI * m as f64 / a as f64).sin();
                assert!((to_f64(fx, table.sin(m)) - want).abs() < 1e-15, "a={a} m={m}");
            }
            for nu in 0..=a {
                let want = (std::f64::consts::PI * nu as f64 / a as f64).cos();
                assert!((to_f64(fx, table.cos(nu)) - want).abs() < 1e-15, "a={a} nu={nu}");
            }
        }
    }

    #[test]
    fn special_angles_are_exact() {
        let table = SineTable::build(10, 128);
        assert!(table.sin(0).is_zero());
        assert!(table.sin(10).is_zero());
        assert_eq!(table.sin(5), &(BigInt::one() << 128usize));
        assert_eq!(table.sin(15), &-(BigInt::one() << 128usize));
        assert!(table.cos(5).is_zero());
        assert_eq!(table.cos(0), &(BigInt::one() << 128usize));
    }

    #[test]
    fn from_f64_is_exact_for_dyadics() {
        let fx = Fixed::new(128);
        for x in [0.5, -0.75, 0.6, 1e-10, 3.0] {
            assert_eq!(to_f64(fx, &fx.from_f64(x)), x);
        }
    }

    #[test]
    fn scaled_survives_extreme_exponents() {
        let tiny = BigInt::one();
        let s = Scaled::from_bigint(&tiny, 5000);
        assert!((s.ln_abs() + 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(s.to_f64(), 0.0);
        assert_eq!(ldexp(1.5, 3), 12.0);
        assert_eq!(ldexp(1.0, -1074), f64::from_bits(1));
    }

    #[test]
    fn ln_add_exp_handles_infinities() {
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((ln_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((ln_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
