//! Experiment configuration: a JSON file names a registry problem, an
//! algorithm, schedule inputs, and overrides. Parsing fills defaults so a
//! normalized config round-trips field for field.

use std::str::FromStr;

use proxescape::driver::{ScheduleParams, StationarityMode};
use proxescape::problems::{
    make_abs_1d, make_circle_abs, make_lasso_default, make_phase_default, make_quadratic,
    make_square_abs_1d, BenchmarkProblem,
};
use proxescape::steps::StepKind;
use proxescape::CertifyTols;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Smoothing choice for the general schedule; absent means automatic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Prox step choice for the prox-point schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverrideSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_interval: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_iters: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_interval: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub overrides: OverrideSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub tolerance: ToleranceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("config parse error at {}:{}: {e}", e.line(), e.column())))
    }

    /// Fill every defaultable field so serialization is stable under re-parse.
    pub fn normalized(mut self) -> Self {
        if self.seeds.is_none() {
            self.seeds = Some((0..20).collect());
        }
        if self.stationarity_mode.is_none() {
            self.stationarity_mode = Some("gradient_mapping".into());
        }
        self
    }
}

pub fn lookup_problem(spec: &ProblemSpec) -> Result<BenchmarkProblem, CliError> {
    let fixed_dim = |p: BenchmarkProblem| -> Result<BenchmarkProblem, CliError> {
        match spec.dim {
            Some(d) if d != p.dim() => Err(CliError::config(format!(
                "problem '{}' has fixed dimension {}, got {d}",
                spec.name,
                p.dim()
            ))),
            _ => Ok(p),
        }
    };
    match spec.name.as_str() {
        "circle-abs" => Ok(make_circle_abs(spec.dim.unwrap_or(2))),
        "quadratic" => Ok(make_quadratic(spec.dim.unwrap_or(2))),
        "abs" => fixed_dim(make_abs_1d()),
        "square-abs" => fixed_dim(make_square_abs_1d()),
        "lasso" => fixed_dim(make_lasso_default()),
        "phase" => fixed_dim(make_phase_default()),
        other => Err(CliError::config(format!(
            "unknown problem '{other}' (known: circle-abs, quadratic, abs, square-abs, lasso, phase)"
        ))),
    }
}

/// Everything a command needs, resolved and validated.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub problem: BenchmarkProblem,
    pub params: ScheduleParams,
    pub start: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mode: StationarityMode,
    pub inner_tol: f64,
    pub certify_tols: CertifyTols,
}

pub fn parse_mode(s: &str) -> Result<StationarityMode, CliError> {
    match s {
        "envelope" => Ok(StationarityMode::Envelope),
        "gradient_mapping" => Ok(StationarityMode::GradientMapping),
        other => Err(CliError::config(format!(
            "unknown stationarity mode '{other}' (envelope or gradient_mapping)"
        ))),
    }
}

pub fn resolve(config: ExperimentConfig) -> Result<Resolved, CliError> {
    let config = config.normalized();
    let problem = lookup_problem(&config.problem)?;
    let algo = StepKind::from_str(&config.algorithm).map_err(CliError::from_config_err)?;
    if algo != problem.kind {
        return Err(CliError::config(format!(
            "problem '{}' runs {}, not {}",
            problem.name,
            problem.kind.as_str(),
            algo.as_str()
        )));
    }
    let rec = &problem.recommended;
    let s = &config.schedule;
    let eps = s.eps.unwrap_or(rec.eps);
    let delta = s.delta.unwrap_or(rec.delta);
    let c = Some(s.c.unwrap_or(rec.c));
    let gap = s.gap.unwrap_or(rec.gap);
    let base = match problem.kind {
        StepKind::ProxPoint => ScheduleParams::prox_point(
            eps,
            delta,
            problem.ell,
            problem.rho,
            problem.dim(),
            gap,
            c,
            s.lambda.or(rec.lambda),
        ),
        StepKind::ProxGradient | StepKind::ProxLinear => ScheduleParams::general(
            eps,
            delta,
            problem.beta,
            problem.mu,
            problem.rho,
            problem.dim(),
            gap,
            c,
            s.l,
        ),
    }
    .map_err(CliError::from_config_err)?;
    let o = &config.overrides;
    let params = base
        .with_overrides(o.eta, o.lambda, o.r, o.t_interval, o.total_iters)
        .map_err(CliError::from_config_err)?;
    let start = match &config.start {
        Some(x) if x.len() == problem.dim() => x.clone(),
        Some(x) => {
            return Err(CliError::config(format!(
                "start has {} coordinates, problem is {}-dimensional",
                x.len(),
                problem.dim()
            )))
        }
        None => rec.start.clone(),
    };
    let seeds = config.seeds.clone().unwrap_or_default();
    if seeds.is_empty() {
        return Err(CliError::config("seed list must be nonempty"));
    }
    let mode = parse_mode(config.stationarity_mode.as_deref().unwrap_or("gradient_mapping"))?;
    // The composite solver certifies its nested subproblems one decade below
    // the requested tolerance, so its default sits one decade looser.
    let default_inner = match problem.kind {
        StepKind::ProxLinear => 1e-7,
        _ => 1e-8,
    };
    let inner_tol = config.tolerance.inner_tol.unwrap_or(default_inner);
    if inner_tol <= 0.0 {
        return Err(CliError::config("inner_tol must be positive"));
    }
    let certify_tols = CertifyTols {
        fd_step: config.tolerance.fd_step,
        power_tol: config.tolerance.power_tol.unwrap_or(1e-8),
        ..CertifyTols::default()
    };
    Ok(Resolved {
        config,
        problem,
        params,
        start,
        seeds,
        mode,
        inner_tol,
        certify_tols,
    })
}

/// Seed list syntax for the --seeds flag: "a..b" (half-open) or "s1,s2,...".
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |_| CliError::config(format!("bad seed list '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(bad)?;
        let hi: u64 = b.trim().parse().map_err(bad)?;
        if lo >= hi {
            return Err(CliError::config(format!("empty seed range '{text}'")));
        }
        return Ok((lo..hi).collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(bad)).collect()
}
