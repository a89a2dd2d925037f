//! Trajectory simulation of the reset walk.
//!
//! Every trajectory owns a SplitMix64 stream whose state is the `(i + 1)`-th
//! output of SplitMix64 seeded with the run seed, so trajectory `i` draws the
//! same numbers no matter which thread runs it. Tallies are integers and merge
//! exactly.

use rayon::prelude::*;

use crate::config::WalkConfig;
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRAJECTORIES: u64 = 100_000;
pub const STEP_CAP: u64 = 1_000_000_000;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 (Steele, Lea and Flood).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for trajectory `index` of a run seeded with `seed`.
    pub fn for_trajectory(seed: u64, index: u64) -> Self {
        Self::new(mix(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Ruin,
    Success,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryOutcome {
    pub absorbed_at: Boundary,
    pub steps: u64,
    pub resets: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p_hat (1 - p_hat) / n_sim)`.
    pub stderr: f64,
    pub n_sim: u64,
    pub seed: u64,
    pub mean_steps: f64,
    pub mean_resets: f64,
}

/// One tick: reset with probability `gamma`, otherwise a step right with
/// probability `p` or left. A reset at `z` is a no-op tick.
pub fn simulate_trajectory(config: &WalkConfig, rng: &mut StreamRng) -> Result<TrajectoryOutcome> {
    let (a, z) = (config.a() as i64, config.z() as i64);
    let (p, gamma) = (config.p(), config.gamma());
    let mut x = z;
    let mut steps = 0u64;
    let mut resets = 0u64;
    while steps < STEP_CAP {
        steps += 1;
        if gamma > 0.0 && rng.next_f64() < gamma {
            x = z;
            resets += 1;
            continue;
        }
        x += if rng.next_f64() < p { 1 } else { -1 };
        if x == 0 {
            return Ok(TrajectoryOutcome { absorbed_at: Boundary::Ruin, steps, resets });
        }
        if x == a {
            return Ok(TrajectoryOutcome { absorbed_at: Boundary::Success, steps, resets });
        }
    }
    Err(Error::Runaway { cap: STEP_CAP })
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    ruins: u64,
    steps: u128,
    resets: u128,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            ruins: self.ruins + other.ruins,
            steps: self.steps + other.steps,
            resets: self.resets + other.resets,
        }
    }
}

fn run(config: &WalkConfig, n_sim: u64, seed: u64) -> Result<McEstimate> {
    if n_sim == 0 {
        return Err(Error::InvalidConfig("n_sim must be at least 1".into()));
    }
    let tally = (0..n_sim)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::for_trajectory(seed, i);
            simulate_trajectory(config, &mut rng).map(|o| Tally {
                ruins: (o.absorbed_at == Boundary::Ruin) as u64,
                steps: o.steps as u128,
                resets: o.resets as u128,
            })
        })
        .try_reduce(Tally::default, |x, y| Ok(x.merge(y)))?;
    let n = n_sim as f64;
    let p_hat = tally.ruins as f64 / n;
    Ok(McEstimate {
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
        n_sim,
        seed,
        mean_steps: tally.steps as f64 / n,
        mean_resets: tally.resets as f64 / n,
    })
}

/// Fraction of `n_sim` trajectories absorbed at 0, on the global thread pool.
pub fn estimate_ruin(config: &WalkConfig, n_sim: u64, seed: u64) -> Result<McEstimate> {
    run(config, n_sim, seed)
}

/// As `estimate_ruin`, on a private pool of `threads` workers.
pub fn estimate_ruin_with_threads(
    config: &WalkConfig,
    n_sim: u64,
    seed: u64,
    threads: usize,
) -> Result<McEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| run(config, n_sim, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_outputs() {
        let mut rng = StreamRng::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
        assert_eq!(rng.next_u64(), 9817491932198370423);
    }

    #[test]
    fn trajectory_streams_follow_the_seed_sequence() {
        let mut parent = StreamRng::new(1234567);
        for i in 0..3 {
            let state = parent.next_u64();
            assert_eq!(StreamRng::for_trajectory(1234567, i), StreamRng::new(state));
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = StreamRng::new(7);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn two_sites_end_on_a_boundary() {
        let cfg = WalkConfig::new(2, 1, 0.3, 0.6).unwrap();
        for i in 0..200 {
            let mut rng = StreamRng::for_trajectory(9, i);
            let o = simulate_trajectory(&cfg, &mut rng).unwrap();
            assert!(o.steps >= 1 && o.resets < o.steps);
            assert_eq!(o.steps, o.resets + 1);
        }
    }

    #[test]
    fn zero_trajectories_rejected() {
        let cfg = WalkConfig::new(5, 2, 0.5, 0.1).unwrap();
        assert!(matches!(estimate_ruin(&cfg, 0, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = WalkConfig::new(7, 3, 0.45, 0.2).unwrap();
        let one = estimate_ruin_with_threads(&cfg, 5_000, 11, 1).unwrap();
        let four = estimate_ruin_with_threads(&cfg, 5_000, 11, 4).unwrap();
        assert_eq!(one, four);
    }
}
