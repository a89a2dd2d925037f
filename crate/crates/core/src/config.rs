use crate::error::{Error, Result};

/// One problem instance: a walk on `{0, ..., a}` started at `z`, stepping right
/// with probability `p` and returned to `z` with probability `gamma` per tick.
///
/// The left-step probability is always derived as `1 - p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    a: usize,
    z: usize,
    p: f64,
    gamma: f64,
}

impl WalkConfig {
    pub fn new(a: usize, z: usize, p: f64, gamma: f64) -> Result<Self> {
        check_domain(a)?;
        check_bias(p)?;
        if z < 1 || z > a - 1 {
            return Err(Error::InvalidConfig(format!(
                "start z = {z} must lie in 1..={}",
                a - 1
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidConfig(format!(
                "reset probability gamma = {gamma} must lie in [0, 1)"
            )));
        }
        Ok(Self { a, z, p, gamma })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Survival factor `1 - gamma` per tick.
    pub fn discount(&self) -> f64 {
        1.0 - self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.a, self.z, self.p, gamma)
    }

    pub fn with_start(&self, z: usize) -> Result<Self> {
        Self::new(self.a, z, self.p, self.gamma)
    }

    pub fn with_bias(&self, p: f64) -> Result<Self> {
        Self::new(self.a, self.z, p, self.gamma)
    }

    /// The same walk seen from the other end: `z -> a - z`, `p -> q`.
    pub fn mirrored(&self) -> Self {
        Self {
            a: self.a,
            z: self.a - self.z,
            p: 1.0 - self.p,
            gamma: self.gamma,
        }
    }
}

pub(crate) fn check_domain(a: usize) -> Result<()> {
    if a < 2 {
        return Err(Error::InvalidConfig(format!("domain size a = {a} must be at least 2")));
    }
    Ok(())
}

pub(crate) fn check_bias(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidConfig(format!("step probability p = {p} must lie in (0, 1)")));
    }
    Ok(())
}
