//! The three subcommands: run a seeded experiment batch, certify a single
//! point, sweep a parameter grid. Each writes into its own fresh directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use proxescape::certify::{certify_point, Certificate};
use proxescape::driver::{summarize, RunSummary, ScheduleParams, StationarityMode};
use proxescape::parallel::run_many;
use proxescape::records::write_trajectory_csv;
use serde::Serialize;

use crate::config::Resolved;
use crate::output::{fresh_run_dir, write_json};
use crate::CliError;

const ESCAPE_TOL: f64 = 1e-3;

#[derive(Debug, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub trajectory_file: String,
    pub escaped: bool,
    pub summary: RunSummary,
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify_error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
    pub partial_file: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub version: String,
    pub config: crate::config::ExperimentConfig,
    pub schedule: ScheduleParams,
    pub mode: String,
    pub seeds: Vec<SeedOutcome>,
    pub failed: Vec<FailedSeed>,
    pub partial: bool,
    pub escape_fraction: f64,
    pub wall_clock_secs: f64,
}

fn mode_name(mode: StationarityMode) -> &'static str {
    match mode {
        StationarityMode::Envelope => "envelope",
        StationarityMode::GradientMapping => "gradient_mapping",
    }
}

fn write_seed_csv(dir: &Path, name: &str, traj: &[proxescape::driver::TrajectoryPoint]) -> Result<String, CliError> {
    let path = dir.join(name);
    write_trajectory_csv(&path, traj)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(name.to_string())
}

pub fn cmd_run(res: &Resolved, out_root: &Path, quiet: bool) -> Result<(PathBuf, bool), CliError> {
    let dir = fresh_run_dir(out_root, &format!("{}-run", res.problem.name))?;
    write_json(&dir.join("config.json"), &res.config)?;
    let op = res
        .problem
        .step_operator(res.params.eta, res.inner_tol)
        .map_err(CliError::from_config_err)?;
    let t0 = Instant::now();
    let results = run_many(&op, &res.start, &res.params, &res.seeds, res.mode);
    let mut outcomes = Vec::new();
    let mut failed = Vec::new();
    let mut escaped_count = 0usize;
    for (seed, result) in res.seeds.iter().copied().zip(results) {
        match result {
            Ok(traj) => {
                let file = write_seed_csv(&dir, &format!("seed-{seed}.csv"), &traj.points)?;
                let summary = match summarize(&traj, &op, &res.params, &res.certify_tols) {
                    Ok(s) => s,
                    Err(e) => {
                        failed.push(FailedSeed {
                            seed,
                            error: format!("summary failed: {e}"),
                            partial_file: file,
                        });
                        continue;
                    }
                };
                let final_x = &traj.final_point().x;
                let escaped = res.problem.near_labeled_min(final_x, ESCAPE_TOL);
                escaped_count += escaped as usize;
                let (certificate, certify_error) = match certify_point(
                    &op,
                    final_x,
                    res.params.lambda,
                    res.params.eps,
                    res.params.rho,
                    &res.certify_tols,
                    seed,
                ) {
                    Ok(c) => (Some(c), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                if !quiet {
                    println!(
                        "seed {seed}: {} points, perturbations {}, escaped {}, certified fraction {:.3}",
                        summary.total, summary.perturbation_count, escaped, summary.certified_fraction
                    );
                }
                outcomes.push(SeedOutcome {
                    seed,
                    trajectory_file: file,
                    escaped,
                    summary,
                    certificate,
                    certify_error,
                });
            }
            Err(fail) => {
                let file = write_seed_csv(&dir, &format!("seed-{seed}-partial.csv"), &fail.partial.points)?;
                if !quiet {
                    println!("seed {seed}: FAILED after {} points: {}", fail.partial.points.len(), fail.error);
                }
                failed.push(FailedSeed {
                    seed,
                    error: fail.error.to_string(),
                    partial_file: file,
                });
            }
        }
    }
    let partial = !failed.is_empty();
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: res.config.clone(),
        schedule: res.params.clone(),
        mode: mode_name(res.mode).to_string(),
        seeds: outcomes,
        failed,
        partial,
        escape_fraction: escaped_count as f64 / res.seeds.len() as f64,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &record)?;
    if !quiet {
        println!(
            "escape fraction {:.3} over {} seeds{} -> {}",
            record.escape_fraction,
            res.seeds.len(),
            if partial { " (partial: some seeds failed)" } else { "" },
            dir.display()
        );
    }
    Ok((dir, partial))
}

#[derive(Debug, Serialize)]
pub struct CertifyRecord {
    pub version: String,
    pub problem: String,
    pub point: Vec<f64>,
    pub certificate: Certificate,
}

pub fn cmd_certify(res: &Resolved, point: &[f64], out_root: &Path, quiet: bool) -> Result<PathBuf, CliError> {
    if point.len() != res.problem.dim() {
        return Err(CliError::config(format!(
            "point has {} coordinates, problem is {}-dimensional",
            point.len(),
            res.problem.dim()
        )));
    }
    let dir = fresh_run_dir(out_root, &format!("{}-certify", res.problem.name))?;
    write_json(&dir.join("config.json"), &res.config)?;
    let op = res
        .problem
        .step_operator(res.params.eta, res.inner_tol)
        .map_err(CliError::from_config_err)?;
    let seed = res.seeds.first().copied().unwrap_or(0);
    let cert = certify_point(
        &op,
        point,
        res.params.lambda,
        res.params.eps,
        res.params.rho,
        &res.certify_tols,
        seed,
    )
    .map_err(|e| CliError::runtime(format!("certification failed: {e}")))?;
    if !quiet {
        println!(
            "{} at {:?}: certified {} (grad {:.3e} vs eps {:.3e}, lambda_max {:.6} vs threshold {:.6}{})",
            res.problem.name,
            point,
            cert.is_eps_local_min,
            cert.grad_mapping_norm,
            res.params.eps,
            cert.lambda_max_s,
            cert.threshold,
            if cert.indeterminate { ", indeterminate" } else { "" }
        );
    }
    let record = CertifyRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        problem: res.problem.name.to_string(),
        point: point.to_vec(),
        certificate: cert,
    };
    write_json(&dir.join("certificate.json"), &record)?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub t_interval: usize,
    pub eta: f64,
    pub escape_fraction: f64,
    pub diverged: usize,
}

#[derive(Debug, Serialize)]
pub struct SweepRecord {
    pub version: String,
    pub config: crate::config::ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub wall_clock_secs: f64,
}

fn run_cell(
    res: &Resolved,
    params: &ScheduleParams,
    eta: f64,
) -> Result<(usize, usize), CliError> {
    let op = res
        .problem
        .step_operator(eta, res.inner_tol)
        .map_err(CliError::from_config_err)?;
    let results = run_many(&op, &res.start, params, &res.seeds, res.mode);
    let mut escaped = 0usize;
    let mut diverged = 0usize;
    for result in results {
        match result {
            Ok(traj) => {
                let fin = &traj.final_point().x;
                if fin.iter().any(|v| !v.is_finite()) {
                    diverged += 1;
                } else if res.problem.near_labeled_min(fin, ESCAPE_TOL) {
                    escaped += 1;
                }
            }
            Err(_) => diverged += 1,
        }
    }
    Ok((escaped, diverged))
}

pub fn cmd_sweep(res: &Resolved, out_root: &Path, quiet: bool) -> Result<PathBuf, CliError> {
    let spec = res.config.sweep.clone().unwrap_or_default();
    let rs = spec.r.unwrap_or_else(|| vec![res.params.r]);
    let ts = spec.t_interval.unwrap_or_else(|| vec![res.params.t_interval]);
    let etas = spec.eta.unwrap_or_else(|| vec![res.params.eta]);
    let cells = rs.len() * ts.len() * etas.len();
    if cells == 0 {
        return Err(CliError::config("sweep grid is empty"));
    }
    if cells > 1000 {
        return Err(CliError::config(format!("sweep grid has {cells} cells, limit is 1000")));
    }
    let dir = fresh_run_dir(out_root, &format!("{}-sweep", res.problem.name))?;
    write_json(&dir.join("config.json"), &res.config)?;
    let t0 = Instant::now();
    let mut rows = Vec::with_capacity(cells);
    for &r in &rs {
        for &ti in &ts {
            for &eta in &etas {
                let params = res
                    .params
                    .clone()
                    .with_overrides(Some(eta), None, Some(r), Some(ti), None)
                    .map_err(CliError::from_config_err)?;
                let (escaped, diverged) = run_cell(res, &params, eta)?;
                let row = SweepRow {
                    r,
                    t_interval: ti,
                    eta,
                    escape_fraction: escaped as f64 / res.seeds.len() as f64,
                    diverged,
                };
                if !quiet {
                    println!(
                        "r {:.3e} t_interval {} eta {:.4}: escape {:.3}, diverged {}",
                        row.r, row.t_interval, row.eta, row.escape_fraction, row.diverged
                    );
                }
                rows.push(row);
            }
        }
    }
    let mut csv = String::from("r,t_interval,eta,escape_fraction,diverged\n");
    for row in &rows {
        csv.push_str(&format!(
            "{:.17e},{},{:.17e},{:.17e},{}\n",
            row.r, row.t_interval, row.eta, row.escape_fraction, row.diverged
        ));
    }
    std::fs::write(dir.join("sweep.csv"), csv)
        .map_err(|e| CliError::runtime(format!("cannot write sweep.csv: {e}")))?;
    let record = SweepRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: res.config.clone(),
        rows,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &record)?;
    if !quiet {
        println!("{cells} cells -> {}", dir.display());
    }
    Ok(dir)
}
