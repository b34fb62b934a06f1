//! The five experiment subcommands. Each one builds the schedule, oracle
//! and grid from the validated config, runs the requested chains, and
//! writes machine-readable outputs into the configured directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mrsde::diagnostics::{convergence_ratio, empirical_order, rmse, PcaBasis};
use mrsde::predictor::{make_oracle, OracleSpec, Parameterization, Predictor};
use mrsde::process::ChainRng;
use mrsde::sampler::{run, SamplerSpec, SolverFamily, Trajectory};
use mrsde::schedule::{Schedule, TimeGrid};
use mrsde::SamplerError;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{ff, write_csv, write_json};

/// Errors mapped to process exit codes: config problems exit 1,
/// numerical blowups exit 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

fn sampler_error(e: SamplerError) -> CliError {
    match e {
        SamplerError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn run_chains(
    spec: &SamplerSpec,
    s: &Schedule,
    predictor: &Predictor,
    mu: &[f64],
    chains: usize,
) -> Result<Vec<Trajectory>, CliError> {
    (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = ChainRng::new(spec.seed, chain as u64);
            run(spec, s, predictor, mu, &mut rng).map_err(sampler_error)
        })
        .collect()
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    Path::new(&cfg.outputs.dir).join(name)
}

fn build_spec(
    cfg: &ExperimentConfig,
    family: SolverFamily,
    param: Parameterization,
    order: usize,
    grid: TimeGrid,
) -> SamplerSpec {
    SamplerSpec {
        family,
        parameterization: param,
        order,
        grid,
        seed: cfg.sampler.seed,
        denoise_final: cfg.sampler.denoise_final,
    }
}

fn oracle_for(
    s: &Schedule,
    spec: &OracleSpec,
    param: Parameterization,
) -> Result<Predictor, CliError> {
    make_oracle(s, spec, param).map_err(|e| CliError::Config(format!("oracle: {e}")))
}

fn terminal_moments(trajs: &[Trajectory]) -> (Vec<f64>, Vec<f64>) {
    let d = trajs[0].final_x.len();
    let n = trajs.len() as f64;
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for t in trajs {
        for i in 0..d {
            mean[i] += t.final_x[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    for t in trajs {
        for i in 0..d {
            let dlt = t.final_x[i] - mean[i];
            var[i] += dlt * dlt;
        }
    }
    for v in &mut var {
        *v /= n;
    }
    (mean, var)
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let s = cfg.schedule().map_err(CliError::Config)?;
    let oracle = oracle_for(&s, &cfg.oracle_spec(), cfg.parameterization())?;
    let grid = cfg.grid(&s, cfg.sampler.nfe).map_err(CliError::Config)?;
    let spec = build_spec(cfg, cfg.solver_family(), cfg.parameterization(), cfg.sampler.order, grid);
    let mu = cfg.mu_vec();
    log::info!(
        "sample: {:?}/{:?} order {} nfe {} chains {}",
        spec.family,
        spec.parameterization,
        spec.order,
        cfg.sampler.nfe,
        cfg.chains
    );
    let trajs = run_chains(&spec, &s, &oracle, &mu, cfg.chains)?;

    let d = cfg.dim();
    let mut rows = Vec::new();
    for (chain, traj) in trajs.iter().enumerate() {
        for (step, (t, x)) in traj.states.iter().enumerate() {
            let lam = s.lambda(*t).map_err(|e| CliError::Config(e.to_string()))?;
            let mut row = vec![chain.to_string(), step.to_string(), ff(*t), ff(lam)];
            row.extend(x.iter().map(|&v| ff(v)));
            rows.push(row);
        }
    }
    let header: String = {
        let mut h = String::from("chain,step,t,lambda");
        for i in 0..d {
            h.push_str(&format!(",x_{i}"));
        }
        h
    };
    write_csv(&out_path(cfg, "trajectories.csv"), &header, &rows).map_err(CliError::Config)?;

    let (mean, var) = terminal_moments(&trajs);
    let summary = serde_json::json!({
        "nfe": cfg.sampler.nfe,
        "chains": cfg.chains,
        "terminal_mean": mean,
        "terminal_variance": var,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&out_path(cfg, "summary.json"), &summary, cfg.outputs.pretty_json)
        .map_err(CliError::Config)
}

pub fn cmd_convergence_study(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let nfe_list = cfg
        .nfe_list
        .clone()
        .ok_or_else(|| CliError::Config("nfe_list: required for convergence-study".into()))?;
    let s = cfg.schedule().map_err(CliError::Config)?;
    let oracle = oracle_for(&s, &cfg.oracle_spec(), cfg.parameterization())?;
    let mu = cfg.mu_vec();
    let family = cfg.solver_family();
    let param = cfg.parameterization();
    let ref_nfe = 100 * nfe_list.iter().max().copied().unwrap();
    log::info!("convergence-study: nfe {nfe_list:?}, reference nfe {ref_nfe}");
    let run_at = |nfe: usize| -> Result<Vec<Trajectory>, CliError> {
        let grid = cfg.grid(&s, nfe).map_err(CliError::Config)?;
        let spec = build_spec(cfg, family, param, cfg.sampler.order, grid);
        run_chains(&spec, &s, &oracle, &mu, cfg.chains)
    };
    let reference = run_at(ref_nfe)?;
    let mut errors = Vec::new();
    for &nfe in &nfe_list {
        let trajs = run_at(nfe)?;
        let mut acc = 0.0;
        for (t, r) in trajs.iter().zip(&reference) {
            let e = rmse(&t.final_x, &r.final_x).map_err(|e| CliError::Config(e.to_string()))?;
            acc += e * e;
        }
        errors.push((nfe, (acc / trajs.len() as f64).sqrt()));
    }
    let mut rows: Vec<Vec<String>> = errors
        .iter()
        .map(|&(nfe, err)| vec![nfe.to_string(), ff(err)])
        .collect();
    let order = if errors.len() >= 3 && errors.iter().all(|&(_, e)| e > 1e-10) {
        empirical_order(&errors)
            .map(|o| ff(o))
            .unwrap_or_else(|_| "n/a".into())
    } else {
        "n/a".into()
    };
    rows.push(vec!["order".into(), order]);
    write_csv(&out_path(cfg, "order_study.csv"), "nfe,rmse_vs_reference", &rows)
        .map_err(CliError::Config)
}

/// Exact marginal moments of the configured data law at `t`: the analytic
/// target the baseline comparison measures against.
fn target_moments(
    s: &Schedule,
    oracle: &OracleSpec,
    mu: &[f64],
    t: f64,
) -> Result<(Vec<f64>, f64), CliError> {
    let a = s.alpha(t).map_err(|e| CliError::Config(e.to_string()))?;
    let sg = s.sigma(t).map_err(|e| CliError::Config(e.to_string()))?;
    match oracle {
        OracleSpec::DiracData { x0 } => {
            let mean = x0.iter().zip(mu).map(|(&x, &m)| a * x + (1.0 - a) * m).collect();
            Ok((mean, sg * sg))
        }
        OracleSpec::GaussianData { m0, s0 } => {
            let mean = m0.iter().zip(mu).map(|(&x, &m)| a * x + (1.0 - a) * m).collect();
            Ok((mean, sg * sg + a * a * s0 * s0))
        }
        OracleSpec::ConstantNoise { .. } => Err(CliError::Config(
            "oracle: constant_noise has no data law; compare-baselines needs dirac_data \
             or gaussian_data"
                .into(),
        )),
    }
}

pub fn method_table(order: usize) -> Vec<(&'static str, SolverFamily, Parameterization, usize)> {
    vec![
        ("mr_sde_noise", SolverFamily::MrSde, Parameterization::Noise, order),
        ("mr_ode_noise", SolverFamily::MrOde, Parameterization::Noise, order),
        ("mr_sde_data", SolverFamily::MrSde, Parameterization::Data, order),
        ("mr_ode_data", SolverFamily::MrOde, Parameterization::Data, order),
        ("posterior", SolverFamily::Posterior, Parameterization::Noise, 1),
        ("euler_maruyama", SolverFamily::EulerMaruyama, Parameterization::Noise, 1),
    ]
}

pub fn cmd_compare_baselines(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = cfg.schedule().map_err(CliError::Config)?;
    let spec_oracle = cfg.oracle_spec();
    let mu = cfg.mu_vec();
    let nfe_list = cfg.nfe_list.clone().unwrap_or_else(|| vec![cfg.sampler.nfe]);
    let (target_mean, target_var) = target_moments(&s, &spec_oracle, &mu, cfg.t_end())?;
    let d = cfg.dim();
    let mut rows = Vec::new();
    for (name, family, param, order) in method_table(cfg.sampler.order) {
        let oracle = oracle_for(&s, &spec_oracle, param)?;
        for &nfe in &nfe_list {
            let grid = cfg.grid(&s, nfe).map_err(CliError::Config)?;
            let spec = build_spec(cfg, family, param, order, grid);
            let trajs = run_chains(&spec, &s, &oracle, &mu, cfg.chains)?;
            let mut acc = 0.0;
            for t in &trajs {
                for i in 0..d {
                    acc += (t.final_x[i] - target_mean[i]) * (t.final_x[i] - target_mean[i]);
                }
            }
            let sample_rmse = (acc / (trajs.len() * d) as f64).sqrt();
            let (emp_mean, emp_var) = terminal_moments(&trajs);
            let mean_err = rmse(&emp_mean, &target_mean)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let var_err = emp_var
                .iter()
                .map(|&v| (v - target_var).abs())
                .sum::<f64>()
                / d as f64;
            log::debug!("{name} nfe {nfe}: rmse {sample_rmse:.3e}");
            rows.push(vec![
                name.to_string(),
                nfe.to_string(),
                ff(sample_rmse),
                ff(mean_err),
                ff(var_err),
            ]);
        }
    }
    write_csv(
        &out_path(cfg, "compare.csv"),
        "method,nfe,rmse,terminal_mean_err,terminal_var_err",
        &rows,
    )
    .map_err(CliError::Config)
}

fn parse_method(
    name: &str,
    order: usize,
) -> Result<(String, SolverFamily, Parameterization, usize), CliError> {
    method_table(order)
        .into_iter()
        .find(|(n, _, _, _)| *n == name)
        .map(|(n, f, p, o)| (n.to_string(), f, p, o))
        .ok_or_else(|| {
            CliError::Config(format!(
                "methods: unknown method '{name}'; expected one of {:?}",
                method_table(order)
                    .iter()
                    .map(|(n, _, _, _)| *n)
                    .collect::<Vec<_>>()
            ))
        })
}

fn default_method_name(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let family = cfg.solver_family();
    let param = cfg.parameterization();
    method_table(cfg.sampler.order)
        .into_iter()
        .find(|&(_, f, p, _)| f == family && (p == param || !matches!(f, SolverFamily::MrSde | SolverFamily::MrOde)))
        .map(|(n, _, _, _)| n.to_string())
        .ok_or_else(|| {
            CliError::Config("sampler: cannot derive a method name for this configuration".into())
        })
}

pub fn cmd_trajectory(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.dim() < 2 {
        return Err(CliError::Config(
            "oracle: trajectory projection needs dimension >= 2".into(),
        ));
    }
    let s = cfg.schedule().map_err(CliError::Config)?;
    let spec_oracle = cfg.oracle_spec();
    let mu = cfg.mu_vec();
    let method_names = match &cfg.methods {
        Some(m) => m.clone(),
        None => vec![default_method_name(cfg)?],
    };
    let mut runs: Vec<(String, Trajectory)> = Vec::new();
    for name in &method_names {
        let (name, family, param, order) = parse_method(name, cfg.sampler.order)?;
        let oracle = oracle_for(&s, &spec_oracle, param)?;
        let grid = cfg.grid(&s, cfg.sampler.nfe).map_err(CliError::Config)?;
        let spec = build_spec(cfg, family, param, order, grid);
        let mut rng = ChainRng::new(spec.seed, 0);
        let traj = run(&spec, &s, &oracle, &mu, &mut rng).map_err(sampler_error)?;
        runs.push((name, traj));
    }
    // shared basis over the union of all states so the overlays are
    // directly comparable; stacked in name order so the fitted basis does
    // not depend on the order methods were requested in
    let mut sorted: Vec<&(String, Trajectory)> = runs.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let union: Vec<Vec<f64>> = sorted
        .iter()
        .flat_map(|(_, t)| t.states.iter().map(|(_, x)| x.clone()))
        .collect();
    let basis = PcaBasis::fit(&union).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for (name, traj) in &runs {
        for (step, (_, x)) in traj.states.iter().enumerate() {
            let (p1, p2) = basis.project_one(x);
            rows.push(vec![name.clone(), step.to_string(), ff(p1), ff(p2)]);
        }
    }
    write_csv(&out_path(cfg, "trajectory_2d.csv"), "method,step,pc1,pc2", &rows)
        .map_err(CliError::Config)
}

pub fn cmd_radius_report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let param = cfg.parameterization();
    if param == Parameterization::Velocity {
        return Err(CliError::Config(
            "sampler.parameterization: radius-report needs noise or data".into(),
        ));
    }
    if cfg.sampler.nfe < 2 {
        return Err(CliError::Config(
            "sampler.nfe: radius-report needs at least 2 steps".into(),
        ));
    }
    let s = cfg.schedule().map_err(CliError::Config)?;
    let oracle = oracle_for(&s, &cfg.oracle_spec(), param)?;
    let mu = cfg.mu_vec();
    let grid = cfg.grid(&s, cfg.sampler.nfe).map_err(CliError::Config)?;
    let lambdas: Vec<f64> = grid
        .times
        .iter()
        .map(|&t| s.lambda(t))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let h: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0]).collect();
    let spec = build_spec(cfg, cfg.solver_family(), param, cfg.sampler.order, grid.clone());
    let mut rng = ChainRng::new(spec.seed, 0);
    let traj = run(&spec, &s, &oracle, &mu, &mut rng).map_err(sampler_error)?;
    let report = convergence_ratio(&traj, &h, 0.0).map_err(|e| CliError::Config(e.to_string()))?;
    // ratios exist from the second step on
    let rows: Vec<Vec<String>> = report
        .per_step_ratio
        .iter()
        .enumerate()
        .map(|(k, &ratio)| {
            let step = k + 2;
            vec![
                step.to_string(),
                ff(grid.times[step]),
                ff(lambdas[step]),
                ff(report.h_values[k]),
                ff(ratio),
            ]
        })
        .collect();
    write_csv(&out_path(cfg, "radius.csv"), "step,t,lambda,h,ratio", &rows)
        .map_err(CliError::Config)
}
