//! Time-dependent coefficients of the mean-reverting SDE
//! `dx = f(t)(mu - x) dt + g(t) dw` under the stationarity constraint
//! `g^2(t) = 2 sigma_inf^2 f(t)`, plus the half log-SNR change of
//! variables and sampling-grid construction.
//!
//! All quantities derive from the closed-form integral `int_0^t f(tau) dtau`
//! of the chosen schedule family:
//!
//! ```text
//! alpha_t  = exp(-int_0^t f)
//! sigma_t  = sigma_inf * sqrt(1 - alpha_t^2)
//! lambda_t = log(alpha_t / sigma_t)
//! ```
//!
//! `lambda_t` is strictly decreasing in `t` and is the integration variable
//! used by the exponential-integrator samplers.

use crate::error::ScheduleError;

/// Mean-reversion speed families with closed-form `int_0^t f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleFamily {
    /// `f(t) = theta`
    Constant { theta: f64 },
    /// `f(t) = theta_start + (theta_end - theta_start) * t / T`
    Linear { theta_start: f64, theta_end: f64 },
    /// `f(t) = 1 - cos(pi t / T)`
    Cosine,
}

/// Spacing rule for sampling time grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingMode {
    /// Uniform steps in `t`.
    UniformT,
    /// Uniform steps in the half log-SNR `lambda`.
    UniformLambda,
}

/// Immutable coefficient bundle for one forward process.
#[derive(Debug, Clone)]
pub struct Schedule {
    sigma_inf: f64,
    t_max: f64,
    family: ScheduleFamily,
}

/// Strictly decreasing sampling times `t_0 = T > t_1 > ... > t_M = t_end`.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub spacing: SpacingMode,
    pub t_end: f64,
}

impl TimeGrid {
    /// Number of solver steps (NFE); the grid holds `nfe + 1` times.
    pub fn nfe(&self) -> usize {
        self.times.len() - 1
    }
}

/// Smallest `t / T` for which the lambda inverse is considered representable.
const T_MIN_FRAC: f64 = 1e-15;

impl Schedule {
    pub fn new(family: ScheduleFamily, sigma_inf: f64, t_max: f64) -> Result<Self, ScheduleError> {
        if !(sigma_inf > 0.0) || !sigma_inf.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "sigma_inf must be positive, got {sigma_inf}"
            )));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        match family {
            ScheduleFamily::Constant { theta } if !(theta > 0.0) => {
                return Err(ScheduleError::InvalidParameter(format!(
                    "constant theta must be positive, got {theta}"
                )));
            }
            ScheduleFamily::Linear {
                theta_start,
                theta_end,
            } if !(theta_start > 0.0 && theta_end > 0.0) => {
                return Err(ScheduleError::InvalidParameter(format!(
                    "linear theta endpoints must be positive, got ({theta_start}, {theta_end})"
                )));
            }
            _ => {}
        }
        Ok(Self {
            sigma_inf,
            t_max,
            family,
        })
    }

    pub fn sigma_inf(&self) -> f64 {
        self.sigma_inf
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn family(&self) -> ScheduleFamily {
        self.family
    }

    fn check_domain(&self, t: f64) -> Result<(), ScheduleError> {
        if !t.is_finite() || t < 0.0 || t > self.t_max {
            return Err(ScheduleError::TimeOutOfDomain {
                t,
                lo: 0.0,
                hi: self.t_max,
            });
        }
        Ok(())
    }

    /// Mean-reversion speed `f(t)`.
    pub fn theta(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        Ok(self.theta_unchecked(t))
    }

    fn theta_unchecked(&self, t: f64) -> f64 {
        match self.family {
            ScheduleFamily::Constant { theta } => theta,
            ScheduleFamily::Linear {
                theta_start,
                theta_end,
            } => theta_start + (theta_end - theta_start) * t / self.t_max,
            ScheduleFamily::Cosine => 1.0 - (core::f64::consts::PI * t / self.t_max).cos(),
        }
    }

    /// Closed-form `int_0^t f(tau) dtau`.
    pub fn theta_integral(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        Ok(self.theta_integral_unchecked(t))
    }

    fn theta_integral_unchecked(&self, t: f64) -> f64 {
        match self.family {
            ScheduleFamily::Constant { theta } => theta * t,
            ScheduleFamily::Linear {
                theta_start,
                theta_end,
            } => theta_start * t + (theta_end - theta_start) * t * t / (2.0 * self.t_max),
            ScheduleFamily::Cosine => {
                let pi = core::f64::consts::PI;
                t - (self.t_max / pi) * (pi * t / self.t_max).sin()
            }
        }
    }

    /// Signal-retention coefficient `alpha_t = exp(-int_0^t f)` in `(0, 1]`.
    pub fn alpha(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        Ok((-self.theta_integral_unchecked(t)).exp())
    }

    /// Transition standard deviation `sigma_t = sigma_inf * sqrt(1 - alpha_t^2)`.
    ///
    /// Evaluated as `sqrt(-expm1(-2 int f))` to keep precision near `t = 0`.
    pub fn sigma(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        let i2 = 2.0 * self.theta_integral_unchecked(t);
        Ok(self.sigma_inf * (-(-i2).exp_m1()).sqrt())
    }

    /// Half log-SNR `lambda_t = log(alpha_t / sigma_t)`; diverges at `t = 0`.
    pub fn lambda(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        if t == 0.0 {
            return Err(ScheduleError::TimeOutOfDomain {
                t,
                lo: 0.0,
                hi: self.t_max,
            });
        }
        Ok(self.lambda_unchecked(t))
    }

    fn lambda_unchecked(&self, t: f64) -> f64 {
        let i = self.theta_integral_unchecked(t);
        // log(alpha) - log(sigma) with sigma^2 = sigma_inf^2 * (1 - e^{-2i})
        -i - self.sigma_inf.ln() - 0.5 * (-(-2.0 * i).exp_m1()).ln()
    }

    /// Squared volatility `g^2(t) = 2 sigma_inf^2 f(t)`.
    pub fn g_squared(&self, t: f64) -> Result<f64, ScheduleError> {
        self.check_domain(t)?;
        Ok(2.0 * self.sigma_inf * self.sigma_inf * self.theta_unchecked(t))
    }

    /// Volatility `g(t)`.
    pub fn g(&self, t: f64) -> Result<f64, ScheduleError> {
        Ok(self.g_squared(t)?.sqrt())
    }

    /// Inverse of [`Schedule::lambda`]: closed form for the constant family,
    /// safeguarded bisection elsewhere.
    pub fn t_of_lambda(&self, lam: f64) -> Result<f64, ScheduleError> {
        let t_min = T_MIN_FRAC * self.t_max;
        let lam_lo = self.lambda_unchecked(self.t_max);
        let lam_hi = self.lambda_unchecked(t_min);
        if !lam.is_finite() || lam < lam_lo - 1e-9 || lam > lam_hi {
            return Err(ScheduleError::LambdaOutOfRange {
                lam,
                lo: lam_lo,
                hi: lam_hi,
            });
        }
        if lam <= lam_lo {
            return Ok(self.t_max);
        }
        if let ScheduleFamily::Constant { theta } = self.family {
            // alpha^2 = r / (1 + r) with r = sigma_inf^2 e^{2 lambda},
            // so t = -ln(alpha^2) / (2 theta) = ln(1 + 1/r) / (2 theta).
            let r = self.sigma_inf * self.sigma_inf * (2.0 * lam).exp();
            return Ok((1.0 / r).ln_1p() / (2.0 * theta));
        }
        // lambda is strictly decreasing in t: bisect on the residual.
        let (mut lo, mut hi) = (t_min, self.t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lambda_unchecked(mid) > lam {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Build a strictly decreasing grid of `nfe + 1` times from `T` to `t_end`.
    pub fn make_grid(
        &self,
        nfe: usize,
        spacing: SpacingMode,
        t_end: f64,
    ) -> Result<TimeGrid, ScheduleError> {
        if nfe == 0 {
            return Err(ScheduleError::InvalidGrid("nfe must be at least 1".into()));
        }
        if !(t_end > 0.0) || t_end >= self.t_max {
            return Err(ScheduleError::InvalidGrid(format!(
                "t_end must lie in (0, T), got {t_end} with T = {}",
                self.t_max
            )));
        }
        let mut times = Vec::with_capacity(nfe + 1);
        match spacing {
            SpacingMode::UniformT => {
                let dt = (self.t_max - t_end) / nfe as f64;
                times.push(self.t_max);
                for i in 1..nfe {
                    times.push(self.t_max - dt * i as f64);
                }
                times.push(t_end);
            }
            SpacingMode::UniformLambda => {
                let lam_start = self.lambda_unchecked(self.t_max);
                let lam_end = self.lambda_unchecked(t_end);
                let dl = (lam_end - lam_start) / nfe as f64;
                times.push(self.t_max);
                for i in 1..nfe {
                    times.push(self.t_of_lambda(lam_start + dl * i as f64)?);
                }
                times.push(t_end);
            }
        }
        debug_assert!(times.windows(2).all(|w| w[0] > w[1]));
        Ok(TimeGrid {
            times,
            spacing,
            t_end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn constant(theta: f64, sigma_inf: f64) -> Schedule {
        Schedule::new(ScheduleFamily::Constant { theta }, sigma_inf, 1.0).unwrap()
    }

    fn families() -> Vec<Schedule> {
        vec![
            constant(1.0, 1.0),
            Schedule::new(
                ScheduleFamily::Linear {
                    theta_start: 0.5,
                    theta_end: 3.0,
                },
                0.7,
                1.0,
            )
            .unwrap(),
            Schedule::new(ScheduleFamily::Cosine, 1.3, 1.0).unwrap(),
        ]
    }

    /// Adaptive Simpson quadrature, used as an independent oracle for the
    /// closed-form theta integrals.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, 0.5 * tol, depth - 1)
                    + recurse(f, m, b, right, 0.5 * tol, depth - 1)
            }
        }
        recurse(f, a, b, simpson(f, a, b), tol, 40)
    }

    #[test]
    fn alpha_at_origin_is_one() {
        for s in families() {
            assert_eq!(s.alpha(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn alpha_constant_closed_form() {
        let s = constant(1.0, 1.0);
        assert_relative_eq!(s.alpha(2f64.ln()).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn alpha_matches_quadrature_oracle() {
        let s = Schedule::new(ScheduleFamily::Cosine, 1.0, 1.0).unwrap();
        let t = 0.5;
        let integral = adaptive_simpson(&|tau| s.theta(tau).unwrap(), 0.0, t, 1e-13);
        assert_relative_eq!(s.alpha(t).unwrap(), (-integral).exp(), max_relative = 1e-8);
    }

    #[test]
    fn alpha_domain_errors() {
        let s = constant(1.0, 1.0);
        assert!(s.alpha(-0.1).is_err());
        assert!(s.alpha(1.5).is_err());
    }

    #[test]
    fn sigma_at_origin_and_limits() {
        for s in families() {
            assert_eq!(s.sigma(0.0).unwrap(), 0.0);
        }
        let s = Schedule::new(ScheduleFamily::Constant { theta: 1.0 }, 2.0, 50.0).unwrap();
        assert_abs_diff_eq!(s.sigma(50.0).unwrap(), 2.0, epsilon = 1e-8);
        let s = constant(1.0, 1.0);
        assert_relative_eq!(
            s.sigma(2f64.ln()).unwrap(),
            0.75f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn lambda_substitution_and_monotonicity() {
        let s = constant(1.0, 1.0);
        assert_relative_eq!(
            s.lambda(2f64.ln()).unwrap(),
            (0.5 / 0.75f64.sqrt()).ln(),
            max_relative = 1e-13
        );
        for s in families() {
            let mut prev = f64::INFINITY;
            for i in 1..=100 {
                let t = s.t_max() * i as f64 / 100.0;
                let l = s.lambda(t).unwrap();
                assert!(l < prev, "lambda not strictly decreasing at t = {t}");
                prev = l;
            }
        }
        assert!(constant(1.0, 1.0).lambda(0.0).is_err());
    }

    #[test]
    fn lambda_round_trips() {
        for s in families() {
            for i in 1..=50 {
                let t = s.t_max() * i as f64 / 50.0;
                let back = s.t_of_lambda(s.lambda(t).unwrap()).unwrap();
                assert_relative_eq!(back, t, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn t_of_lambda_constant_closed_form() {
        let s = constant(1.0, 1.0);
        let lam = s.lambda(0.3).unwrap();
        assert_relative_eq!(s.t_of_lambda(lam).unwrap(), 0.3, max_relative = 1e-9);
        assert_eq!(s.t_of_lambda(s.lambda(1.0).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn t_of_lambda_bisection_residuals() {
        let s = Schedule::new(
            ScheduleFamily::Linear {
                theta_start: 0.2,
                theta_end: 4.0,
            },
            1.0,
            1.0,
        )
        .unwrap();
        for i in 0..20 {
            let t = 0.01 + 0.99 * i as f64 / 19.0;
            let lam = s.lambda(t).unwrap();
            let found = s.t_of_lambda(lam).unwrap();
            assert!((s.lambda(found).unwrap() - lam).abs() < 1e-10);
        }
    }

    #[test]
    fn t_of_lambda_range_errors() {
        let s = constant(1.0, 1.0);
        assert!(s.t_of_lambda(s.lambda(1.0).unwrap() - 1.0).is_err());
        assert!(s.t_of_lambda(f64::NAN).is_err());
    }

    #[test]
    fn g_squared_values() {
        let s = constant(1.0, 1.0);
        assert_eq!(s.g_squared(0.3).unwrap(), 2.0);
        let s = constant(2.0, 0.5);
        assert_eq!(s.g_squared(1.0).unwrap(), 1.0);
    }

    #[test]
    fn g_squared_matches_lambda_derivative() {
        // g^2(t) = -2 sigma_t^2 dlambda/dt, dlambda/dt by central difference.
        for s in families() {
            for i in 1..10 {
                let t = 0.1 + 0.8 * i as f64 / 10.0;
                let eps = 1e-6;
                let dldt =
                    (s.lambda(t + eps).unwrap() - s.lambda(t - eps).unwrap()) / (2.0 * eps);
                let sig = s.sigma(t).unwrap();
                assert_relative_eq!(
                    s.g_squared(t).unwrap(),
                    -2.0 * sig * sig * dldt,
                    max_relative = 1e-6
                );
            }
        }
    }

    #[test]
    fn grid_single_step() {
        let s = constant(1.0, 1.0);
        let g = s.make_grid(1, SpacingMode::UniformT, 0.01).unwrap();
        assert_eq!(g.times, vec![1.0, 0.01]);
    }

    #[test]
    fn grid_uniform_t_spacing() {
        let s = constant(1.0, 1.0);
        let g = s.make_grid(5, SpacingMode::UniformT, 0.01).unwrap();
        assert_eq!(g.times.len(), 6);
        for w in g.times.windows(2) {
            assert_abs_diff_eq!(w[0] - w[1], 0.198, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_uniform_lambda_spacing() {
        for s in families() {
            let g = s.make_grid(10, SpacingMode::UniformLambda, 1e-3).unwrap();
            let lam: Vec<f64> = g.times.iter().map(|&t| s.lambda(t).unwrap()).collect();
            let h_expected = (lam[10] - lam[0]) / 10.0;
            for w in lam.windows(2) {
                assert_abs_diff_eq!(w[1] - w[0], h_expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        let s = constant(1.0, 1.0);
        assert!(s.make_grid(0, SpacingMode::UniformT, 0.5).is_err());
        assert!(s.make_grid(5, SpacingMode::UniformT, 1.0).is_err());
        assert!(s.make_grid(5, SpacingMode::UniformT, -0.1).is_err());
    }

    #[test]
    fn stationarity_identity_random_times() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in families() {
            for _ in 0..1000 {
                let t: f64 = rng.gen_range(0.0..=s.t_max());
                let g2 = s.g_squared(t).unwrap();
                let f = s.theta(t).unwrap();
                let si = s.sigma_inf();
                assert!((g2 - 2.0 * si * si * f).abs() <= 1e-12 * g2.abs().max(1.0));
                let a = s.alpha(t).unwrap();
                let sg = s.sigma(t).unwrap();
                let lhs = sg * sg + si * si * a * a;
                assert!((lhs - si * si).abs() <= 1e-12 * (si * si));
            }
        }
    }
}
