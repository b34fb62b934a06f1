//! Score-model abstraction in noise, data and velocity parameterizations,
//! the exact transforms between them, and analytic oracle predictors that
//! stand in for trained networks during verification.
//!
//! The transforms follow from the closed-form forward transition
//! `x_t = alpha_t x_0 + (1 - alpha_t) mu + sigma_t eps` and from the angle
//! `phi_t = arctan(sigma_t / (sigma_inf alpha_t))`, for which
//! `alpha_t = cos(phi_t)` and `sigma_t = sigma_inf sin(phi_t)`.
//!
//! Note: transforms through `1 / sigma_t` or `1 / alpha_t` amplify noise
//! as `t -> 0`; callers should keep `t` bounded away from the origin when
//! exercising them on random data.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::PredictorError;
use crate::schedule::Schedule;

/// Network output convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Noise,
    Data,
    Velocity,
}

/// A pure score-model surrogate `(x, mu, t) -> vector` in one
/// parameterization. This is the extension point where a real trained
/// network would attach; the library itself never loads weights.
#[derive(Clone)]
pub struct Predictor {
    kind: Parameterization,
    eval: Arc<dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync>,
}

impl std::fmt::Debug for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Predictor").field("kind", &self.kind).finish()
    }
}

impl Predictor {
    pub fn new(
        kind: Parameterization,
        eval: impl Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind,
            eval: Arc::new(eval),
        }
    }

    pub fn kind(&self) -> Parameterization {
        self.kind
    }

    pub fn eval(&self, x: &[f64], mu: &[f64], t: f64) -> Vec<f64> {
        (self.eval)(x, mu, t)
    }

    /// Wrap this predictor so every evaluation increments a shared counter.
    /// Used to audit NFE accounting.
    pub fn counted(self) -> (Predictor, Arc<AtomicUsize>) {
        let counter = Arc::new(AtomicUsize::new(0));
        let c = counter.clone();
        let inner = self.eval.clone();
        let wrapped = Predictor {
            kind: self.kind,
            eval: Arc::new(move |x, mu, t| {
                c.fetch_add(1, Ordering::Relaxed);
                inner(x, mu, t)
            }),
        };
        (wrapped, counter)
    }
}

/// Analytic stand-ins for a trained noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    /// Point-mass data distribution at `x0`; the exact data predictor is
    /// the constant function `x0`.
    DiracData { x0: Vec<f64> },
    /// Isotropic Gaussian data `N(m0, s0^2 I)`; the marginal of `x_t` is
    /// Gaussian with exactly computable score.
    GaussianData { m0: Vec<f64>, s0: f64 },
    /// Constant noise output `c`, independent of `x` and `t`.
    ConstantNoise { c: Vec<f64> },
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), PredictorError> {
    if a.len() != b.len() {
        return Err(PredictorError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `x_theta = (x_t - (1 - alpha_t) mu - sigma_t eps) / alpha_t`
pub fn data_from_noise(
    s: &Schedule,
    x: &[f64],
    mu: &[f64],
    t: f64,
    eps: &[f64],
) -> Result<Vec<f64>, PredictorError> {
    check_dims(x, mu)?;
    check_dims(x, eps)?;
    let alpha = s.alpha(t)?;
    let sigma = s.sigma(t)?;
    Ok(x.iter()
        .zip(mu)
        .zip(eps)
        .map(|((&xi, &mi), &ei)| (xi - (1.0 - alpha) * mi - sigma * ei) / alpha)
        .collect())
}

/// `eps_theta = (x_t - alpha_t x_theta - (1 - alpha_t) mu) / sigma_t`
pub fn noise_from_data(
    s: &Schedule,
    x: &[f64],
    mu: &[f64],
    t: f64,
    x0_hat: &[f64],
) -> Result<Vec<f64>, PredictorError> {
    check_dims(x, mu)?;
    check_dims(x, x0_hat)?;
    let alpha = s.alpha(t)?;
    let sigma = s.sigma(t)?;
    if sigma == 0.0 {
        return Err(PredictorError::SingularTime { t });
    }
    Ok(x.iter()
        .zip(mu)
        .zip(x0_hat)
        .map(|((&xi, &mi), &di)| (xi - alpha * di - (1.0 - alpha) * mi) / sigma)
        .collect())
}

/// `phi_t = arctan(sigma_t / (sigma_inf alpha_t))` in `[0, pi/2)`.
pub fn phi_of_t(s: &Schedule, t: f64) -> Result<f64, PredictorError> {
    let alpha = s.alpha(t)?;
    let sigma = s.sigma(t)?;
    Ok(sigma.atan2(s.sigma_inf() * alpha))
}

/// `x_theta = x_t cos(phi) + mu (1 - cos(phi)) - v_theta sin(phi)`
pub fn data_from_velocity(
    s: &Schedule,
    x: &[f64],
    mu: &[f64],
    t: f64,
    v: &[f64],
) -> Result<Vec<f64>, PredictorError> {
    check_dims(x, mu)?;
    check_dims(x, v)?;
    let phi = phi_of_t(s, t)?;
    let (sin, cos) = phi.sin_cos();
    Ok(x.iter()
        .zip(mu)
        .zip(v)
        .map(|((&xi, &mi), &vi)| xi * cos + mi * (1.0 - cos) - vi * sin)
        .collect())
}

/// `eps_theta = (v_theta cos(phi) + x_t sin(phi) - mu sin(phi)) / sigma_inf`
pub fn noise_from_velocity(
    s: &Schedule,
    x: &[f64],
    mu: &[f64],
    t: f64,
    v: &[f64],
) -> Result<Vec<f64>, PredictorError> {
    check_dims(x, mu)?;
    check_dims(x, v)?;
    let phi = phi_of_t(s, t)?;
    let (sin, cos) = phi.sin_cos();
    let si = s.sigma_inf();
    Ok(x.iter()
        .zip(mu)
        .zip(v)
        .map(|((&xi, &mi), &vi)| (vi * cos + xi * sin - mi * sin) / si)
        .collect())
}

/// `v_theta = mu sin(phi) - x_theta sin(phi) + sigma_inf cos(phi) eps_theta`
pub fn velocity_from_data_noise(
    s: &Schedule,
    mu: &[f64],
    t: f64,
    x0_hat: &[f64],
    eps: &[f64],
) -> Result<Vec<f64>, PredictorError> {
    check_dims(mu, x0_hat)?;
    check_dims(mu, eps)?;
    let phi = phi_of_t(s, t)?;
    let (sin, cos) = phi.sin_cos();
    let si = s.sigma_inf();
    Ok(mu
        .iter()
        .zip(x0_hat)
        .zip(eps)
        .map(|((&mi, &di), &ei)| mi * sin - di * sin + si * cos * ei)
        .collect())
}

/// Build an analytic oracle predictor in the requested parameterization.
///
/// Each oracle is exact for its data distribution: the noise form equals
/// `-sigma_t * score` of the true marginal, and the other forms are
/// obtained through the exact transforms.
pub fn make_oracle(
    s: &Schedule,
    spec: &OracleSpec,
    out_kind: Parameterization,
) -> Result<Predictor, PredictorError> {
    match spec {
        OracleSpec::DiracData { x0 } | OracleSpec::GaussianData { m0: x0, .. }
            if x0.is_empty() =>
        {
            return Err(PredictorError::DimMismatch {
                expected: 1,
                got: 0,
            })
        }
        OracleSpec::ConstantNoise { c } if c.is_empty() => {
            return Err(PredictorError::DimMismatch {
                expected: 1,
                got: 0,
            })
        }
        _ => {}
    }
    let sched = s.clone();
    let spec = spec.clone();
    // Exact noise prediction for the oracle's data distribution.
    let noise_eval = move |x: &[f64], mu: &[f64], t: f64| -> Vec<f64> {
        match &spec {
            OracleSpec::DiracData { x0 } => {
                let alpha = sched.alpha(t).expect("t in domain");
                let sigma = sched.sigma(t).expect("t in domain");
                x.iter()
                    .zip(mu)
                    .zip(x0)
                    .map(|((&xi, &mi), &x0i)| (xi - alpha * x0i - (1.0 - alpha) * mi) / sigma)
                    .collect()
            }
            OracleSpec::GaussianData { m0, s0 } => {
                // marginal: N(alpha m0 + (1 - alpha) mu, (sigma^2 + alpha^2 s0^2) I)
                let alpha = sched.alpha(t).expect("t in domain");
                let sigma = sched.sigma(t).expect("t in domain");
                let var = sigma * sigma + alpha * alpha * s0 * s0;
                x.iter()
                    .zip(mu)
                    .zip(m0)
                    .map(|((&xi, &mi), &m0i)| sigma * (xi - alpha * m0i - (1.0 - alpha) * mi) / var)
                    .collect()
            }
            OracleSpec::ConstantNoise { c } => c.clone(),
        }
    };
    let sched = s.clone();
    Ok(match out_kind {
        Parameterization::Noise => Predictor::new(Parameterization::Noise, noise_eval),
        Parameterization::Data => Predictor::new(Parameterization::Data, move |x, mu, t| {
            let eps = noise_eval(x, mu, t);
            data_from_noise(&sched, x, mu, t, &eps).expect("dims checked")
        }),
        Parameterization::Velocity => Predictor::new(Parameterization::Velocity, move |x, mu, t| {
            let eps = noise_eval(x, mu, t);
            let x0_hat = data_from_noise(&sched, x, mu, t, &eps).expect("dims checked");
            velocity_from_data_noise(&sched, mu, t, &x0_hat, &eps).expect("dims checked")
        }),
    })
}
