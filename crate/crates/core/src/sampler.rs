//! Reverse-process samplers for the mean-reverting SDE: the eight
//! exponential-integrator variants ({SDE, ODE} x {noise, data} x
//! {order 1, 2}), the ancestral posterior baseline and the
//! Euler-Maruyama baseline.
//!
//! The exponential integrators solve the linear part of the semi-linear
//! reverse SDE/ODE exactly in the half log-SNR variable `lambda` and
//! Taylor-expand only the model term; first-order variants keep the
//! constant term, second-order variants add a backward difference of the
//! two most recent buffered model outputs. Steps advance from `t_prev`
//! to `t_next < t_prev` with `h = lambda(t_next) - lambda(t_prev) > 0`.

use crate::error::SamplerError;
use crate::predictor::{
    data_from_velocity, noise_from_data, noise_from_velocity, Parameterization, Predictor,
};
use crate::process::{ChainRng, StateVec};
use crate::schedule::{Schedule, TimeGrid};

/// Solver family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverFamily {
    /// Exponential-integrator solver of the reverse-time SDE.
    MrSde,
    /// Exponential-integrator solver of the probability-flow ODE.
    MrOde,
    /// Ancestral posterior baseline.
    Posterior,
    /// Euler-Maruyama discretization of the reverse-time SDE.
    EulerMaruyama,
}

impl SolverFamily {
    pub fn is_stochastic(self) -> bool {
        !matches!(self, SolverFamily::MrOde)
    }
}

/// Full configuration of one sampling run.
#[derive(Debug, Clone)]
pub struct SamplerSpec {
    pub family: SolverFamily,
    /// Working parameterization; velocity predictors are adapted at entry.
    pub parameterization: Parameterization,
    /// 1 or 2; ignored by the baselines.
    pub order: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    /// For data solvers, return the last buffered data estimate instead of
    /// the terminal state.
    pub denoise_final: bool,
}

/// Ordered record of one sampling run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(t_i, x_{t_i})` for `i = 0..=M`, strictly decreasing in `t`.
    pub states: Vec<(f64, Vec<f64>)>,
    /// Buffered predictor evaluations, one per step, in the working
    /// parameterization: `(t_i, output)` for `i = 0..M`.
    pub model_outputs: Vec<(f64, Vec<f64>)>,
    /// The returned sample.
    pub final_x: Vec<f64>,
}

/// Per-step scalar coefficients shared by the step formulas.
struct StepCoeffs {
    alpha_prev: f64,
    alpha_next: f64,
    sigma_prev: f64,
    sigma_next: f64,
    h: f64,
}

fn coeffs(s: &Schedule, t_prev: f64, t_next: f64) -> Result<StepCoeffs, SamplerError> {
    let h = s.lambda(t_next)? - s.lambda(t_prev)?;
    if !(h > 0.0) {
        return Err(SamplerError::NonpositiveStep { h, t_prev, t_next });
    }
    Ok(StepCoeffs {
        alpha_prev: s.alpha(t_prev)?,
        alpha_next: s.alpha(t_next)?,
        sigma_prev: s.sigma(t_prev)?,
        sigma_next: s.sigma(t_next)?,
        h,
    })
}

/// Backward difference `(out_prev - out_prev2) / (lambda_prev - lambda_prev2)`.
fn backward_difference(
    s: &Schedule,
    out_prev: &[f64],
    t_prev: f64,
    out_prev2: &[f64],
    t_prev2: f64,
) -> Result<Vec<f64>, SamplerError> {
    let h_prev = s.lambda(t_prev)? - s.lambda(t_prev2)?;
    if !(h_prev > 0.0) {
        return Err(SamplerError::NonpositiveStep {
            h: h_prev,
            t_prev: t_prev2,
            t_next: t_prev,
        });
    }
    Ok(out_prev
        .iter()
        .zip(out_prev2)
        .map(|(&a, &b)| (a - b) / h_prev)
        .collect())
}

/// One first-order noise-prediction SDE step.
pub fn step_sde_noise_1(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let ratio = c.alpha_next / c.alpha_prev;
    let drift = -2.0 * c.sigma_next * (c.h.exp() - 1.0);
    let noise = c.sigma_next * (2.0 * c.h).exp_m1().sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .zip(z)
        .map(|(((&x, &m), &e), &zi)| ratio * x + (1.0 - ratio) * m + drift * e + noise * zi)
        .collect())
}

/// Second-order noise-prediction SDE step; needs the previous two buffered
/// noise outputs (`eps_prev2` evaluated at `t_prev2`).
pub fn step_sde_noise_2(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
    eps_prev2: &[f64],
    t_prev2: f64,
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let d = backward_difference(s, eps_prev, x_prev.t, eps_prev2, t_prev2)?;
    let ratio = c.alpha_next / c.alpha_prev;
    let c_eps = -2.0 * c.sigma_next * (c.h.exp() - 1.0);
    let c_diff = -2.0 * c.sigma_next * (c.h.exp() - 1.0 - c.h);
    let noise = c.sigma_next * (2.0 * c.h).exp_m1().sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .zip(&d)
        .zip(z)
        .map(|((((&x, &m), &e), &di), &zi)| {
            ratio * x + (1.0 - ratio) * m + c_eps * e + c_diff * di + noise * zi
        })
        .collect())
}

/// One first-order noise-prediction ODE step.
pub fn step_ode_noise_1(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let ratio = c.alpha_next / c.alpha_prev;
    let drift = -c.sigma_next * (c.h.exp() - 1.0);
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .map(|((&x, &m), &e)| ratio * x + (1.0 - ratio) * m + drift * e)
        .collect())
}

/// Second-order noise-prediction ODE step.
pub fn step_ode_noise_2(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
    eps_prev2: &[f64],
    t_prev2: f64,
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let d = backward_difference(s, eps_prev, x_prev.t, eps_prev2, t_prev2)?;
    let ratio = c.alpha_next / c.alpha_prev;
    let c_eps = -c.sigma_next * (c.h.exp() - 1.0);
    let c_diff = -c.sigma_next * (c.h.exp() - 1.0 - c.h);
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .zip(&d)
        .map(|(((&x, &m), &e), &di)| ratio * x + (1.0 - ratio) * m + c_eps * e + c_diff * di)
        .collect())
}

/// One first-order data-prediction SDE step.
pub fn step_sde_data_1(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    x0_prev: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let e2h = (-2.0 * c.h).exp();
    let c_x = (c.sigma_next / c.sigma_prev) * (-c.h).exp();
    let c_mu = 1.0 - (c.alpha_next / c.alpha_prev) * e2h - c.alpha_next + c.alpha_next * e2h;
    let c_data = c.alpha_next * (1.0 - e2h);
    let noise = c.sigma_next * (-(-2.0 * c.h).exp_m1()).sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(x0_prev)
        .zip(z)
        .map(|(((&x, &m), &d0), &zi)| c_x * x + c_mu * m + c_data * d0 + noise * zi)
        .collect())
}

/// Second-order data-prediction SDE step.
pub fn step_sde_data_2(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    x0_prev: &[f64],
    x0_prev2: &[f64],
    t_prev2: f64,
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let d = backward_difference(s, x0_prev, x_prev.t, x0_prev2, t_prev2)?;
    let e2h = (-2.0 * c.h).exp();
    let c_x = (c.sigma_next / c.sigma_prev) * (-c.h).exp();
    let c_mu = 1.0 - (c.alpha_next / c.alpha_prev) * e2h - c.alpha_next + c.alpha_next * e2h;
    let c_data = c.alpha_next * (1.0 - e2h);
    let c_diff = c.alpha_next * (c.h - 0.5 * (1.0 - e2h));
    let noise = c.sigma_next * (-(-2.0 * c.h).exp_m1()).sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(x0_prev)
        .zip(&d)
        .zip(z)
        .map(|((((&x, &m), &d0), &di), &zi)| {
            c_x * x + c_mu * m + c_data * d0 + c_diff * di + noise * zi
        })
        .collect())
}

/// One first-order data-prediction ODE step.
pub fn step_ode_data_1(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    x0_prev: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let sr = c.sigma_next / c.sigma_prev;
    let c_mu = 1.0 - sr + sr * c.alpha_prev - c.alpha_next;
    let c_data = c.alpha_next * (1.0 - (-c.h).exp());
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(x0_prev)
        .map(|((&x, &m), &d0)| sr * x + c_mu * m + c_data * d0)
        .collect())
}

/// Second-order data-prediction ODE step.
pub fn step_ode_data_2(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    x0_prev: &[f64],
    x0_prev2: &[f64],
    t_prev2: f64,
) -> Result<Vec<f64>, SamplerError> {
    let c = coeffs(s, x_prev.t, t_next)?;
    let d = backward_difference(s, x0_prev, x_prev.t, x0_prev2, t_prev2)?;
    let sr = c.sigma_next / c.sigma_prev;
    let c_mu = 1.0 - sr + sr * c.alpha_prev - c.alpha_next;
    let c_data = c.alpha_next * (1.0 - (-c.h).exp());
    let c_diff = c.alpha_next * (c.h - 1.0 + (-c.h).exp());
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(x0_prev)
        .zip(&d)
        .map(|(((&x, &m), &d0), &di)| sr * x + c_mu * m + c_data * d0 + c_diff * di)
        .collect())
}

/// One ancestral posterior step: sample from the reconstruction-conditioned
/// Gaussian `N(mu_tilde, beta_tilde I)`.
pub fn step_posterior(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let alpha_prev = s.alpha(x_prev.t)?;
    let alpha_next = s.alpha(t_next)?;
    let sigma_prev = s.sigma(x_prev.t)?;
    let (c_x, c_x0, beta) = posterior_coefficients(alpha_prev, alpha_next);
    if beta < 0.0 {
        return Err(SamplerError::DegenerateVariance {
            beta,
            t: x_prev.t,
        });
    }
    let noise = beta.sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .zip(z)
        .map(|(((&x, &m), &e), &zi)| {
            // x0 reconstruction from the noise prediction
            let x0 = (x - m - sigma_prev * e) / alpha_prev + m;
            m + c_x * (x - m) + c_x0 * (x0 - m) + noise * zi
        })
        .collect())
}

/// Posterior mean/variance coefficients for a step from the noisier time
/// (`alpha_prev`) to the cleaner time (`alpha_next`):
/// `mu_tilde = mu + c_x (x - mu) + c_x0 (x0 - mu)`, variance `beta_tilde`.
pub fn posterior_coefficients(alpha_prev: f64, alpha_next: f64) -> (f64, f64, f64) {
    let one_m_prev2 = 1.0 - alpha_prev * alpha_prev;
    let one_m_next2 = 1.0 - alpha_next * alpha_next;
    let ratio2 = (alpha_prev / alpha_next) * (alpha_prev / alpha_next);
    let c_x = one_m_next2 * alpha_prev / (one_m_prev2 * alpha_next);
    let c_x0 = (1.0 - ratio2) / one_m_prev2 * alpha_next;
    let beta = one_m_next2 * (1.0 - ratio2) / one_m_prev2;
    (c_x, c_x0, beta)
}

/// One Euler-Maruyama step of the reverse-time SDE, with coefficients
/// frozen at the noisier endpoint.
pub fn step_euler_maruyama(
    s: &Schedule,
    x_prev: &StateVec,
    t_next: f64,
    eps_prev: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let dt = x_prev.t - t_next;
    let f = s.theta(x_prev.t)?;
    let g2 = s.g_squared(x_prev.t)?;
    let sigma_prev = s.sigma(x_prev.t)?;
    let noise = g2.sqrt() * dt.sqrt();
    Ok(x_prev
        .x
        .iter()
        .zip(&x_prev.mu)
        .zip(eps_prev)
        .zip(z)
        .map(|(((&x, &m), &e), &zi)| {
            x + f * (x - m) * dt - g2 / sigma_prev * e * dt + noise * zi
        })
        .collect())
}

fn validate_spec(spec: &SamplerSpec, s: &Schedule) -> Result<(), SamplerError> {
    match spec.family {
        SolverFamily::MrSde | SolverFamily::MrOde => {
            if spec.parameterization == Parameterization::Velocity {
                return Err(SamplerError::InvalidSpec(
                    "solvers work in noise or data parameterization; velocity predictors \
                     are adapted at the predictor boundary"
                        .into(),
                ));
            }
            if spec.order != 1 && spec.order != 2 {
                return Err(SamplerError::InvalidSpec(format!(
                    "order must be 1 or 2, got {}",
                    spec.order
                )));
            }
            if spec.order == 2 && spec.grid.nfe() < 2 {
                return Err(SamplerError::InvalidSpec(
                    "order 2 requires at least 2 grid steps".into(),
                ));
            }
        }
        SolverFamily::Posterior | SolverFamily::EulerMaruyama => {
            if spec.parameterization != Parameterization::Noise {
                return Err(SamplerError::InvalidSpec(
                    "posterior and Euler-Maruyama baselines require noise parameterization"
                        .into(),
                ));
            }
        }
    }
    let times = &spec.grid.times;
    if times.len() < 2 {
        return Err(SamplerError::InvalidSpec("grid needs at least 2 times".into()));
    }
    if (times[0] - s.t_max()).abs() > 1e-12 * s.t_max() {
        return Err(SamplerError::InvalidSpec(format!(
            "grid must start at T = {}, starts at {}",
            s.t_max(),
            times[0]
        )));
    }
    if !times.windows(2).all(|w| w[0] > w[1]) || !(spec.grid.t_end > 0.0) {
        return Err(SamplerError::InvalidSpec(
            "grid times must be strictly decreasing and positive".into(),
        ));
    }
    Ok(())
}

/// Adapt a predictor of any parameterization to the working one.
fn adapt(
    predictor: &Predictor,
    target: Parameterization,
    s: &Schedule,
) -> Result<Predictor, SamplerError> {
    if predictor.kind() == target {
        return Ok(predictor.clone());
    }
    let sched = s.clone();
    let inner = predictor.clone();
    let adapted = match (predictor.kind(), target) {
        (Parameterization::Velocity, Parameterization::Data) => {
            Predictor::new(target, move |x, mu, t| {
                let v = inner.eval(x, mu, t);
                data_from_velocity(&sched, x, mu, t, &v).expect("dims checked")
            })
        }
        (Parameterization::Velocity, Parameterization::Noise) => {
            Predictor::new(target, move |x, mu, t| {
                let v = inner.eval(x, mu, t);
                noise_from_velocity(&sched, x, mu, t, &v).expect("dims checked")
            })
        }
        (Parameterization::Data, Parameterization::Noise) => {
            Predictor::new(target, move |x, mu, t| {
                let x0 = inner.eval(x, mu, t);
                noise_from_data(&sched, x, mu, t, &x0).expect("dims checked")
            })
        }
        (Parameterization::Noise, Parameterization::Data) => {
            Predictor::new(target, move |x, mu, t| {
                let eps = inner.eval(x, mu, t);
                crate::predictor::data_from_noise(&sched, x, mu, t, &eps).expect("dims checked")
            })
        }
        _ => {
            return Err(SamplerError::InvalidSpec(format!(
                "cannot adapt {:?} predictor to {:?}",
                predictor.kind(),
                target
            )))
        }
    };
    Ok(adapted)
}

/// Run one sampling chain, drawing the initial noise and all per-step
/// Gaussians from `rng`.
pub fn run(
    spec: &SamplerSpec,
    s: &Schedule,
    predictor: &Predictor,
    mu: &[f64],
    rng: &mut ChainRng,
) -> Result<Trajectory, SamplerError> {
    validate_spec(spec, s)?;
    let dim = mu.len();
    let eps0 = rng.standard_normal(dim);
    let nfe = spec.grid.nfe();
    let zs: Option<Vec<Vec<f64>>> = spec
        .family
        .is_stochastic()
        .then(|| (0..nfe).map(|_| rng.standard_normal(dim)).collect());
    run_with_inputs(spec, s, predictor, mu, &eps0, zs.as_deref())
}

/// Run one sampling chain with caller-supplied noise: `eps_init` seeds
/// `x_T = mu + sigma_inf * eps_init` and `zs` (one vector per step) drives
/// the stochastic term. `zs = None` means all-zero step noise.
pub fn run_with_inputs(
    spec: &SamplerSpec,
    s: &Schedule,
    predictor: &Predictor,
    mu: &[f64],
    eps_init: &[f64],
    zs: Option<&[Vec<f64>]>,
) -> Result<Trajectory, SamplerError> {
    validate_spec(spec, s)?;
    let dim = mu.len();
    if eps_init.len() != dim {
        return Err(SamplerError::InvalidSpec(format!(
            "eps_init dimension {} does not match mu dimension {}",
            eps_init.len(),
            dim
        )));
    }
    if let Some(zs) = zs {
        if spec.family.is_stochastic() && zs.len() != spec.grid.nfe() {
            return Err(SamplerError::InvalidSpec(format!(
                "expected {} step noise vectors, got {}",
                spec.grid.nfe(),
                zs.len()
            )));
        }
    }
    let working = adapt(predictor, spec.parameterization, s)?;
    let times = &spec.grid.times;
    let nfe = spec.grid.nfe();
    let zeros = vec![0.0; dim];

    let x_t: Vec<f64> = mu
        .iter()
        .zip(eps_init)
        .map(|(&m, &e)| m + s.sigma_inf() * e)
        .collect();
    let mut states: Vec<(f64, Vec<f64>)> = vec![(times[0], x_t)];
    let mut buffer: Vec<Vec<f64>> = Vec::with_capacity(nfe);
    buffer.push(working.eval(&states[0].1, mu, times[0]));

    for i in 1..=nfe {
        let (t_prev, x_prev_vec) = &states[i - 1];
        let x_prev = StateVec {
            x: x_prev_vec.clone(),
            mu: mu.to_vec(),
            t: *t_prev,
        };
        let t_next = times[i];
        let z: &[f64] = zs.map_or(zeros.as_slice(), |zs| &zs[i - 1]);
        let out_prev = &buffer[i - 1];
        let second_order = spec.order == 2 && i >= 2;
        let x_next = match (spec.family, spec.parameterization) {
            (SolverFamily::MrSde, Parameterization::Noise) => {
                if second_order {
                    step_sde_noise_2(s, &x_prev, t_next, out_prev, &buffer[i - 2], times[i - 2], z)?
                } else {
                    step_sde_noise_1(s, &x_prev, t_next, out_prev, z)?
                }
            }
            (SolverFamily::MrSde, Parameterization::Data) => {
                if second_order {
                    step_sde_data_2(s, &x_prev, t_next, out_prev, &buffer[i - 2], times[i - 2], z)?
                } else {
                    step_sde_data_1(s, &x_prev, t_next, out_prev, z)?
                }
            }
            (SolverFamily::MrOde, Parameterization::Noise) => {
                if second_order {
                    step_ode_noise_2(s, &x_prev, t_next, out_prev, &buffer[i - 2], times[i - 2])?
                } else {
                    step_ode_noise_1(s, &x_prev, t_next, out_prev)?
                }
            }
            (SolverFamily::MrOde, Parameterization::Data) => {
                if second_order {
                    step_ode_data_2(s, &x_prev, t_next, out_prev, &buffer[i - 2], times[i - 2])?
                } else {
                    step_ode_data_1(s, &x_prev, t_next, out_prev)?
                }
            }
            (SolverFamily::MrSde | SolverFamily::MrOde, Parameterization::Velocity) => {
                unreachable!("rejected by validate_spec")
            }
            (SolverFamily::Posterior, _) => step_posterior(s, &x_prev, t_next, out_prev, z)?,
            (SolverFamily::EulerMaruyama, _) => {
                step_euler_maruyama(s, &x_prev, t_next, out_prev, z)?
            }
        };
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(SamplerError::NonFinite { step: i });
        }
        states.push((t_next, x_next));
        if i < nfe {
            buffer.push(working.eval(&states[i].1, mu, times[i]));
        }
    }

    let final_x = if spec.denoise_final && spec.parameterization == Parameterization::Data {
        buffer.last().expect("nonempty buffer").clone()
    } else {
        states.last().expect("nonempty states").1.clone()
    };
    let model_outputs = buffer
        .into_iter()
        .enumerate()
        .map(|(i, out)| (times[i], out))
        .collect();
    Ok(Trajectory {
        states,
        model_outputs,
        final_x,
    })
}
