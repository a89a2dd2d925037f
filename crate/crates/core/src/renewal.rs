//! Renewal route: reset-free first-passage probabilities and their generating
//! functions, `q_z(gamma) = U_z(s) / S_z(s)` with `s = 1 - gamma`.

use num_bigint::BigInt;

use crate::config::WalkConfig;
use crate::error::{Error, Result};
use crate::precision::{adaptive, ln_add_exp, resolvent_bits, round_up_bits, Fixed, Modes, MAX_FRAC_BITS};
use crate::spectral::coefficient_scales;

/// Absorption-time law of the walk without resets. Index `k - 1` holds step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTimeDistribution {
    pub config: WalkConfig,
    pub horizon: usize,
    /// Ruin at exactly step `k`.
    pub u: Vec<f64>,
    /// Success at exactly step `k`.
    pub v: Vec<f64>,
    pub s: Vec<f64>,
}

impl FiniteTimeDistribution {
    pub(crate) fn from_parts(config: WalkConfig, u: Vec<f64>, v: Vec<f64>) -> Self {
        let s = u.iter().zip(&v).map(|(x, y)| x + y).collect();
        Self { config, horizon: u.len(), u, v, s }
    }

    /// Probability of absorption by step `horizon`.
    pub fn absorbed_mass(&self) -> f64 {
        self.s.iter().sum()
    }
}

/// Generating functions at `s = 1 - gamma`, kept as logarithms because both
/// can sit far below the binary64 range for strongly biased walks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingFunctions {
    pub ln_u: f64,
    pub ln_s: f64,
    /// `ln(V / U)` with `V = S - U`, carried separately to keep the ratio sharp.
    log_odds: f64,
}

impl GeneratingFunctions {
    pub fn u(&self) -> f64 {
        self.ln_u.exp()
    }

    pub fn s(&self) -> f64 {
        self.ln_s.exp()
    }

    pub fn ratio(&self) -> f64 {
        1.0 / (1.0 + self.log_odds.exp())
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Parity and distance rule out absorption at `k` for a start `dist` sites away.
fn reachable(dist: usize, k: usize) -> bool {
    k >= dist && (k - dist) % 2 == 0
}

/// `u_k` and `v_k` by mode summation, `k = 1..=horizon`. `gamma` is ignored.
pub fn finite_time_spectral(config: &WalkConfig, horizon: usize) -> Result<FiniteTimeDistribution> {
    check_horizon(horizon)?;
    let cfg = config.with_gamma(0.0)?;
    let (a, z) = (cfg.a(), cfg.z());
    let (ln_ruin, ln_success) = coefficient_scales(&cfg);
    // Absolute accuracy near 2^-96 on each entry.
    let span = ln_ruin.max(ln_success).max(0.0) / std::f64::consts::LN_2;
    let bits = 96.0 + span + 2.0 * ((a * horizon) as f64).log2();
    let frac = round_up_bits((bits.ceil() as u32).min(MAX_FRAC_BITS));
    let modes = Modes::new(&cfg, frac);
    let fx = modes.fx;

    let mut power: Vec<BigInt> = vec![fx.one(); a - 1];
    let mut u = Vec::with_capacity(horizon);
    let mut v = Vec::with_capacity(horizon);
    let read = |sum: BigInt, ln_scale: f64| {
        let s = fx.to_scaled(&sum);
        if s.signum() <= 0.0 {
            0.0
        } else {
            s.times_exp(ln_scale)
        }
    };
    for k in 1..=horizon {
        u.push(if reachable(z, k) { read(modes.dot(&modes.ruin_shape, &power), ln_ruin) } else { 0.0 });
        v.push(if reachable(a - z, k) {
            read(modes.dot(&modes.success_shape, &power), ln_success)
        } else {
            0.0
        });
        for (pw, l) in power.iter_mut().zip(&modes.lambda) {
            *pw = fx.mul(pw, l);
        }
    }
    Ok(FiniteTimeDistribution::from_parts(cfg, u, v))
}

/// Smallest `K` whose certified tail `sum_nu (|A_nu| + |B_nu|) |lambda_nu|^K / (1 - |lambda_nu|)`
/// falls below `2^-46`.
pub fn truncation_horizon(config: &WalkConfig) -> usize {
    let a = config.a();
    let (ln_ruin, ln_success) = coefficient_scales(config);
    let lead = 2.0 * (config.p() * config.q()).sqrt() * crate::spectral::cos_pi(1, a);
    if lead <= 0.0 {
        return 1;
    }
    let ln_coef = ln_add_exp(ln_ruin, ln_success) + ((a - 1) as f64).ln();
    let ln_tail = ln_coef - (1.0 - lead).ln();
    let target = -46.0 * std::f64::consts::LN_2;
    let k = ((ln_tail - target) / -lead.ln()).ceil();
    k.max(1.0) as usize
}

fn discounted_weight(fx: &Fixed, lambda: &BigInt, s: &BigInt) -> BigInt {
    fx.div(s, &(fx.one() - fx.mul(lambda, s)))
}

/// `U = sum_k u_k s^k` and `S = sum_k (u_k + v_k) s^k` in closed form.
pub fn generating_functions(config: &WalkConfig) -> Result<GeneratingFunctions> {
    let (ln_ruin, ln_success) = coefficient_scales(config);
    let (ruin, success) = adaptive(config, resolvent_bits(config), |m| {
        let w = m.weights(discounted_weight);
        let ruin = m.dot(&m.ruin_shape, &w);
        let success = m.dot(&m.success_shape, &w);
        (m.resolved(&ruin) && m.resolved(&success))
            .then(|| (m.fx.to_scaled(&ruin), m.fx.to_scaled(&success)))
    })?;
    if ruin.signum() <= 0.0 || success.signum() <= 0.0 {
        return Err(Error::Numeric(format!("generating function not positive for {config:?}")));
    }
    let ln_u = ln_ruin + ruin.ln_abs();
    let ln_v = ln_success + success.ln_abs();
    Ok(GeneratingFunctions {
        ln_u,
        ln_s: ln_add_exp(ln_u, ln_v),
        log_odds: (ln_success - ln_ruin) + success.ln_ratio(&ruin),
    })
}

pub fn ruin_probability_renewal(config: &WalkConfig) -> Result<f64> {
    Ok(generating_functions(config)?.ratio())
}
