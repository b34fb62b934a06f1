//! The forward mean-reverting process in closed form:
//!
//! ```text
//! x_t = alpha_t x_0 + (1 - alpha_t) mu + sigma_t z,   z ~ N(0, I)
//! ```
//!
//! Used to generate test states and as ground truth for the analytic
//! oracle predictors. The forward SDE is never discretized; the
//! transition above is exact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::PredictorError;
use crate::schedule::Schedule;

/// Per-chain random stream. Streams derived from the same master seed but
/// different chain indices are independent; draws are bit-stable for a
/// given (seed, chain) pair.
#[derive(Debug, Clone)]
pub struct ChainRng {
    rng: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(master_seed: u64, chain_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(chain_index);
        Self { rng }
    }

    /// Draw a D-dimensional standard normal vector.
    pub fn standard_normal(&mut self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect()
    }
}

/// A sample together with its conditioning mean and time coordinate.
#[derive(Debug, Clone)]
pub struct StateVec {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub t: f64,
}

impl StateVec {
    pub fn new(x: Vec<f64>, mu: Vec<f64>, t: f64) -> Result<Self, PredictorError> {
        if x.len() != mu.len() || x.is_empty() {
            return Err(PredictorError::DimMismatch {
                expected: x.len().max(1),
                got: mu.len(),
            });
        }
        Ok(Self { x, mu, t })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

fn check_dims(x0: &[f64], mu: &[f64]) -> Result<(), PredictorError> {
    if x0.len() != mu.len() {
        return Err(PredictorError::DimMismatch {
            expected: x0.len(),
            got: mu.len(),
        });
    }
    Ok(())
}

/// Mean and (isotropic) standard deviation of `p(x_t | x_0)`.
pub fn transition_moments(
    s: &Schedule,
    x0: &[f64],
    mu: &[f64],
    t: f64,
) -> Result<(Vec<f64>, f64), PredictorError> {
    check_dims(x0, mu)?;
    let alpha = s.alpha(t)?;
    let sigma = s.sigma(t)?;
    let mean = x0
        .iter()
        .zip(mu)
        .map(|(&x, &m)| alpha * x + (1.0 - alpha) * m)
        .collect();
    Ok((mean, sigma))
}

/// Draw `x_t ~ p(x_t | x_0)` exactly via the closed-form transition.
pub fn forward_sample(
    s: &Schedule,
    x0: &[f64],
    mu: &[f64],
    t: f64,
    rng: &mut ChainRng,
) -> Result<Vec<f64>, PredictorError> {
    let (mean, std) = transition_moments(s, x0, mu, t)?;
    let z = rng.standard_normal(x0.len());
    Ok(mean
        .iter()
        .zip(&z)
        .map(|(&m, &zi)| m + std * zi)
        .collect())
}
