//! JSON experiment configuration. Field names mirror the library types
//! one-to-one; unknown keys are rejected so typos surface as config errors.

use mrsde::predictor::{OracleSpec, Parameterization};
use mrsde::sampler::SolverFamily;
use mrsde::schedule::{Schedule, ScheduleFamily, SpacingMode, TimeGrid};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FamilyConfig {
    Constant { theta: f64 },
    Linear { theta_start: f64, theta_end: f64 },
    Cosine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub family: FamilyConfig,
    pub sigma_inf: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum OracleConfig {
    DiracData { x0: Vec<f64> },
    GaussianData { m0: Vec<f64>, s0: f64 },
    ConstantNoise { c: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    MrSde,
    MrOde,
    Posterior,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Noise,
    Data,
    Velocity,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SpacingName {
    UniformT,
    UniformLambda,
}

fn default_order() -> usize {
    1
}

fn default_chains() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub family: FamilyName,
    pub parameterization: ParamName,
    #[serde(default = "default_order")]
    pub order: usize,
    pub nfe: usize,
    pub spacing: SpacingName,
    /// Defaults to 1e-3 * t_max when absent.
    #[serde(default)]
    pub t_end: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub denoise_final: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(default)]
    pub pretty_json: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schedule: ScheduleConfig,
    pub oracle: OracleConfig,
    pub sampler: SamplerConfig,
    #[serde(default = "default_chains")]
    pub chains: usize,
    pub outputs: OutputConfig,
    /// Conditioning mean; defaults to zeros of the oracle's dimension.
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    /// NFE sweep for convergence-study and compare-baselines.
    #[serde(default)]
    pub nfe_list: Option<Vec<usize>>,
    /// Methods for the trajectory dump; defaults to the configured sampler.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.schedule.sigma_inf > 0.0) {
            return Err("schedule.sigma_inf: must be positive".into());
        }
        if !(self.schedule.t_max > 0.0) {
            return Err("schedule.t_max: must be positive".into());
        }
        if self.sampler.nfe == 0 {
            return Err("sampler.nfe: must be at least 1".into());
        }
        if self.sampler.order != 1 && self.sampler.order != 2 {
            return Err(format!("sampler.order: must be 1 or 2, got {}", self.sampler.order));
        }
        if self.chains == 0 {
            return Err("chains: must be at least 1".into());
        }
        let d = self.dim();
        if d == 0 {
            return Err("oracle: vector fields must be nonempty".into());
        }
        if let Some(mu) = &self.mu {
            if mu.len() != d {
                return Err(format!(
                    "mu: length {} does not match oracle dimension {d}",
                    mu.len()
                ));
            }
        }
        if let Some(list) = &self.nfe_list {
            if list.is_empty() || list.iter().any(|&n| n == 0) {
                return Err("nfe_list: entries must be positive".into());
            }
        }
        if let Some(t_end) = self.sampler.t_end {
            if !(t_end > 0.0 && t_end < self.schedule.t_max) {
                return Err(format!(
                    "sampler.t_end: must lie in (0, t_max), got {t_end}"
                ));
            }
        }
        if let OracleConfig::GaussianData { s0, .. } = &self.oracle {
            if *s0 < 0.0 {
                return Err("oracle.gaussian_data.s0: must be nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.oracle {
            OracleConfig::DiracData { x0 } => x0.len(),
            OracleConfig::GaussianData { m0, .. } => m0.len(),
            OracleConfig::ConstantNoise { c } => c.len(),
        }
    }

    pub fn mu_vec(&self) -> Vec<f64> {
        self.mu.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    pub fn schedule(&self) -> Result<Schedule, String> {
        let family = match self.schedule.family {
            FamilyConfig::Constant { theta } => ScheduleFamily::Constant { theta },
            FamilyConfig::Linear {
                theta_start,
                theta_end,
            } => ScheduleFamily::Linear {
                theta_start,
                theta_end,
            },
            FamilyConfig::Cosine => ScheduleFamily::Cosine,
        };
        Schedule::new(family, self.schedule.sigma_inf, self.schedule.t_max)
            .map_err(|e| format!("schedule: {e}"))
    }

    pub fn oracle_spec(&self) -> OracleSpec {
        match &self.oracle {
            OracleConfig::DiracData { x0 } => OracleSpec::DiracData { x0: x0.clone() },
            OracleConfig::GaussianData { m0, s0 } => OracleSpec::GaussianData {
                m0: m0.clone(),
                s0: *s0,
            },
            OracleConfig::ConstantNoise { c } => OracleSpec::ConstantNoise { c: c.clone() },
        }
    }

    pub fn solver_family(&self) -> SolverFamily {
        match self.sampler.family {
            FamilyName::MrSde => SolverFamily::MrSde,
            FamilyName::MrOde => SolverFamily::MrOde,
            FamilyName::Posterior => SolverFamily::Posterior,
            FamilyName::EulerMaruyama => SolverFamily::EulerMaruyama,
        }
    }

    pub fn parameterization(&self) -> Parameterization {
        match self.sampler.parameterization {
            ParamName::Noise => Parameterization::Noise,
            ParamName::Data => Parameterization::Data,
            ParamName::Velocity => Parameterization::Velocity,
        }
    }

    pub fn spacing(&self) -> SpacingMode {
        match self.sampler.spacing {
            SpacingName::UniformT => SpacingMode::UniformT,
            SpacingName::UniformLambda => SpacingMode::UniformLambda,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.sampler.t_end.unwrap_or(1e-3 * self.schedule.t_max)
    }

    pub fn grid(&self, s: &Schedule, nfe: usize) -> Result<TimeGrid, String> {
        s.make_grid(nfe, self.spacing(), self.t_end())
            .map_err(|e| format!("grid: {e}"))
    }
}
