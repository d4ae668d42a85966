//! Exact sampling by inversion from a geometric first guess followed by a
//! sequential search on the true c.d.f.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::LerchDist;
use crate::error::{LerchError, Result};

pub const MAX_SEARCH_STEPS: u64 = 1_000_000;

/// Which way the correction moves from the first guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Exact,
    /// Truncated support: the guess carries no ordering guarantee.
    Both,
}

/// Step counts accumulated over all draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub draws: u64,
    pub steps_up: u64,
    pub steps_down: u64,
}

pub struct SamplerState<R = ChaCha8Rng> {
    dist: LerchDist,
    rng: R,
    direction: Direction,
    stats: SearchStats,
}

impl SamplerState<ChaCha8Rng> {
    pub fn seeded(dist: LerchDist, seed: u64) -> Self {
        Self::new(dist, ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<R: Rng> SamplerState<R> {
    pub fn new(dist: LerchDist, rng: R) -> Self {
        let s = dist.params().s;
        let direction = if !dist.truncation().is_untruncated() {
            Direction::Both
        } else if s > 0.0 {
            Direction::Down
        } else if s < 0.0 {
            Direction::Up
        } else {
            Direction::Exact
        };
        Self {
            dist,
            rng,
            direction,
            stats: SearchStats::default(),
        }
    }

    pub fn dist(&self) -> &LerchDist {
        &self.dist
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    /// Inverse of `H(x) = 1 - z^{x+1}`, clamped to the support.
    pub fn first_guess(&self, u: f64) -> i64 {
        first_guess(&self.dist, u)
    }

    pub fn sample(&mut self) -> Result<i64> {
        let u: f64 = self.rng.sample(Open01);
        self.invert(u)
    }

    pub fn sample_n(&mut self, n: usize) -> Result<Vec<i64>> {
        (0..n).map(|_| self.sample()).collect()
    }

    /// Smallest support point `x` with `F(x) ≥ u`.
    pub fn invert(&mut self, u: f64) -> Result<i64> {
        self.stats.draws += 1;
        let x0 = self.first_guess(u);
        if self.direction == Direction::Exact {
            return Ok(x0);
        }
        let a = self.dist.truncation().lower as i64;
        let b = self.dist.truncation().upper.map(|b| b as i64);
        let mut x = x0;
        let mut f = self.dist.cdf(x)?;
        let mut steps = 0u64;
        if f < u {
            while f < u && b.is_none_or(|b| x < b) {
                x += 1;
                f += self.dist.pmf(x);
                steps += 1;
                if steps > MAX_SEARCH_STEPS {
                    return Err(no_convergence(u, x0));
                }
            }
            self.stats.steps_up += steps;
        } else {
            while x > a {
                let prev = f - self.dist.pmf(x);
                if prev < u {
                    break;
                }
                f = prev;
                x -= 1;
                steps += 1;
                if steps > MAX_SEARCH_STEPS {
                    return Err(no_convergence(u, x0));
                }
            }
            self.stats.steps_down += steps;
        }
        Ok(x)
    }
}

fn no_convergence(u: f64, x0: i64) -> LerchError {
    LerchError::NoConvergence(format!(
        "sequential search from {x0} for u = {u} exceeded {MAX_SEARCH_STEPS} steps"
    ))
}

/// `max(a, ⌈ln(1-u)/ln z⌉ - 1)`, also capped at the upper bound if any.
pub fn first_guess(dist: &LerchDist, u: f64) -> i64 {
    let t = dist.truncation();
    let a = t.lower as i64;
    let ratio = (-u).ln_1p() / dist.params().z.ln();
    let raw = ratio.ceil() - 1.0;
    let mut x = if raw.is_finite() && raw < i64::MAX as f64 / 2.0 {
        (raw as i64).max(a)
    } else {
        i64::MAX / 2
    };
    if let Some(b) = t.upper {
        x = x.min(b as i64);
    }
    x
}
