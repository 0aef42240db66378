//! Local-minimum certification through the spectrum of the step-operator
//! Jacobian. A point passes when its envelope gradient is small and the
//! dominant eigenvalue of dS stays below 1 + eta sqrt(rho eps).
//!
//! dS is non-symmetric for the composite operators; the power iteration
//! targets the largest real eigenvalue reachable from a random start, which is
//! the quantity the certification threshold bounds.

use crate::error::{ProxError, Result};
use crate::linalg::{add_scaled, dot, norm, normalize, Mat};
use crate::moreau;
use crate::steps::{StepKind, StepOperator};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Knobs for the spectral estimator. `fd_step` of None auto-scales to
/// 1e-5 (1 + ||x||).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertifyTols {
    pub fd_step: Option<f64>,
    pub power_tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
}

impl Default for CertifyTols {
    fn default() -> Self {
        CertifyTols {
            fd_step: None,
            power_tol: 1e-8,
            max_iters: 300,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub point: Vec<f64>,
    pub lambda_max: f64,
    pub iterations_used: usize,
    pub residual: f64,
    pub fd_step: f64,
    pub converged: bool,
    /// Set when forward and backward differences disagree (a kink) or when no
    /// restart converged; such estimates are never certified.
    pub indeterminate: bool,
}

/// Verdict at a point per the two-condition rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub point: Vec<f64>,
    pub grad_mapping_norm: f64,
    pub lambda_max_s: f64,
    pub is_eps_local_min: bool,
    pub indeterminate: bool,
    pub eps: f64,
    pub rho: f64,
    pub eta: f64,
    pub threshold: f64,
}

/// Central-difference action of dS(x) on v: (S(x + h v) - S(x - h v)) / (2h).
pub fn jacobian_vector_product(
    op: &StepOperator,
    x: &[f64],
    v: &[f64],
    fd_step: f64,
) -> Result<Vec<f64>> {
    if fd_step <= 0.0 {
        return Err(ProxError::parameter("finite-difference step must be positive"));
    }
    let xp = add_scaled(x, fd_step, v);
    let xm = add_scaled(x, -fd_step, v);
    let sp = op.apply(&xp)?;
    let sm = op.apply(&xm)?;
    Ok(sp
        .iter()
        .zip(&sm)
        .map(|(a, b)| (a - b) / (2.0 * fd_step))
        .collect())
}

fn shift_for(kind: StepKind) -> f64 {
    // the prox-point Jacobian has nonnegative spectrum under lam ell < 1;
    // the composite operators get a +1 shift to guard sign ambiguity
    match kind {
        StepKind::ProxPoint => 0.0,
        StepKind::ProxGradient | StepKind::ProxLinear => 1.0,
    }
}

/// Dominant real eigenvalue of dS(x) by seeded power iteration with restarts;
/// the max over converged restarts is reported.
pub fn estimate_lambda_max(
    op: &StepOperator,
    x: &[f64],
    tols: &CertifyTols,
    seed: u64,
) -> Result<SpectralEstimate> {
    if tols.max_iters == 0 || tols.restarts == 0 {
        return Err(ProxError::parameter("max_iters and restarts must be positive"));
    }
    let d = op.oracle.dim();
    let h = tols.fd_step.unwrap_or(1e-5 * (1.0 + norm(x)));
    let shift = shift_for(op.kind);
    let mut best_lam = f64::NEG_INFINITY;
    let mut best_v: Vec<f64> = vec![0.0; d];
    let mut best_converged = false;
    let mut iterations_used = 0usize;
    for restart in 0..tols.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((restart as u64 + 1) * 0x9E3779B9));
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) < 1e-300 {
            v = vec![0.0; d];
            v[0] = 1.0;
        }
        let mut lam = 0.0_f64;
        let mut converged = false;
        for it in 1..=tols.max_iters {
            let jv = jacobian_vector_product(op, x, &v, h)?;
            let w = add_scaled(&jv, shift, &v);
            lam = dot(&v, &w);
            let res = norm(&add_scaled(&w, -lam, &v));
            if res <= tols.power_tol * lam.abs().max(1.0) {
                converged = true;
                iterations_used += it;
                break;
            }
            let mut next = w;
            if normalize(&mut next) < 1e-300 {
                // the shifted action annihilates v: eigenvalue 0 along v
                lam = 0.0;
                converged = true;
                iterations_used += it;
                break;
            }
            v = next;
        }
        if !converged {
            iterations_used += tols.max_iters;
        }
        let better = lam > best_lam || (converged && !best_converged && lam >= best_lam - tols.power_tol);
        if better {
            best_lam = lam;
            best_v = v;
            best_converged = converged;
        }
    }
    let jv = jacobian_vector_product(op, x, &best_v, h)?;
    let w = add_scaled(&jv, shift, &best_v);
    let residual = norm(&add_scaled(&w, -best_lam, &best_v));
    // kink detection: compare one-sided differences along the eigen-direction
    let sx = op.apply(x)?;
    let sp = op.apply(&add_scaled(x, h, &best_v))?;
    let sm = op.apply(&add_scaled(x, -h, &best_v))?;
    let fwd: Vec<f64> = sp.iter().zip(&sx).map(|(a, b)| (a - b) / h).collect();
    let bwd: Vec<f64> = sx.iter().zip(&sm).map(|(a, b)| (a - b) / h).collect();
    let central_scale = jv.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let asym = fwd
        .iter()
        .zip(&bwd)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        / central_scale;
    Ok(SpectralEstimate {
        point: x.to_vec(),
        lambda_max: best_lam - shift,
        iterations_used,
        residual,
        fd_step: h,
        converged: best_converged,
        indeterminate: !best_converged || asym > 0.1,
    })
}

/// Full certificate: envelope gradient norm plus the spectral decision
/// against the threshold 1 + eta sqrt(rho eps).
pub fn certify_point(
    op: &StepOperator,
    x: &[f64],
    lambda: f64,
    eps: f64,
    rho: f64,
    tols: &CertifyTols,
    seed: u64,
) -> Result<Certificate> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ProxError::parameter("candidate point must be finite"));
    }
    if eps <= 0.0 || rho <= 0.0 {
        return Err(ProxError::parameter("eps and rho must be positive"));
    }
    let state = moreau::moreau_grad(&op.oracle, lambda, x, op.inner_tolerance)?;
    let grad_norm = norm(&state.envelope_gradient);
    let est = estimate_lambda_max(op, x, tols, seed)?;
    let threshold = 1.0 + op.eta * (rho * eps).sqrt();
    let is_min = grad_norm <= eps && !est.indeterminate && est.lambda_max < threshold;
    Ok(Certificate {
        point: x.to_vec(),
        grad_mapping_norm: grad_norm,
        lambda_max_s: est.lambda_max,
        is_eps_local_min: is_min,
        indeterminate: est.indeterminate,
        eps,
        rho,
        eta: op.eta,
        threshold,
    })
}

/// Column-by-column central-difference Jacobian of S at x; small d only.
pub fn dense_jacobian(op: &StepOperator, x: &[f64], fd_step: f64) -> Result<Mat> {
    let d = op.oracle.dim();
    let mut j = Mat::zeros(d, d);
    let mut e = vec![0.0; d];
    for col in 0..d {
        e[col] = 1.0;
        let jv = jacobian_vector_product(op, x, &e, fd_step)?;
        e[col] = 0.0;
        for row in 0..d {
            j.set(row, col, jv[row]);
        }
    }
    Ok(j)
}

/// Sampled estimate of rho: max ||dS(x) - dS(y)|| / (eta ||x - y||) over
/// pairs drawn near `center`. A sanity probe for the user-declared constant,
/// not a certified bound.
pub fn probe_rho(
    op: &StepOperator,
    center: &[f64],
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let d = op.oracle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5 * (1.0 + norm(center));
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let x: Vec<f64> = center.iter().map(|c| c + rng.gen_range(-radius..radius)).collect();
        let y: Vec<f64> = center.iter().map(|c| c + rng.gen_range(-radius..radius)).collect();
        let sep = crate::linalg::dist(&x, &y);
        if sep < 1e-8 {
            continue;
        }
        let jx = dense_jacobian(op, &x, h)?;
        let jy = dense_jacobian(op, &y, h)?;
        let mut diff = Mat::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                diff.set(r, c, jx.get(r, c) - jy.get(r, c));
            }
        }
        let opnorm = diff.spectral_norm_sq().sqrt();
        worst = worst.max(opnorm / (op.eta * sep));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig2_max_real;
    use crate::oracles::{NonsmoothObjective, ProblemOracle};
    use std::sync::Arc;

    fn ppa_quadratic(eta: f64) -> StepOperator {
        let o = NonsmoothObjective::new(2, 0.0, Arc::new(|x: &[f64]| 0.5 * dot(x, x))).with_prox(
            Arc::new(|x: &[f64], lam: f64| x.iter().map(|v| v / (1.0 + lam)).collect()),
        );
        StepOperator::new(StepKind::ProxPoint, eta, 1e-10, Arc::new(ProblemOracle::Plain(o)))
            .unwrap()
    }

    // f = (x1^2 - 0.5 x2^2)/2 is 0.5-weakly convex; prox at lam=1 is the
    // linear map diag(1/2, 2)
    fn ppa_anisotropic() -> StepOperator {
        let o = NonsmoothObjective::new(
            2,
            0.5,
            Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] - 0.5 * x[1] * x[1])),
        )
        .with_prox(Arc::new(|x: &[f64], lam: f64| {
            vec![x[0] / (1.0 + lam), x[1] / (1.0 - 0.5 * lam)]
        }));
        StepOperator::new(StepKind::ProxPoint, 1.0, 1e-10, Arc::new(ProblemOracle::Plain(o)))
            .unwrap()
    }

    fn circle_op(lam: f64) -> StepOperator {
        let p = crate::problems::make_circle_abs(2);
        StepOperator::new(StepKind::ProxPoint, lam, 1e-10, p.oracle.clone()).unwrap()
    }

    #[test]
    fn jvp_linear_map_exact() {
        let op = ppa_anisotropic();
        let jv = jacobian_vector_product(&op, &[0.3, -0.7], &[0.0, 1.0], 1e-5).unwrap();
        assert!((jv[0]).abs() <= 1e-9 && (jv[1] - 2.0).abs() <= 1e-9, "{jv:?}");
    }

    #[test]
    fn jvp_scaled_identity() {
        let op = ppa_quadratic(1.0);
        let jv = jacobian_vector_product(&op, &[0.1, 0.2], &[0.6, 0.8], 1e-5).unwrap();
        assert!((jv[0] - 0.3).abs() <= 1e-10 && (jv[1] - 0.4).abs() <= 1e-10);
    }

    #[test]
    fn power_iteration_anisotropic() {
        let op = ppa_anisotropic();
        let est = estimate_lambda_max(&op, &[0.0, 0.0], &CertifyTols::default(), 0).unwrap();
        assert!((est.lambda_max - 2.0).abs() <= 1e-6, "{}", est.lambda_max);
        assert!(est.converged && !est.indeterminate);
        assert!(est.residual <= 1e-6);
    }

    #[test]
    fn power_iteration_scaled_identity() {
        let op = ppa_quadratic(1.0);
        let est = estimate_lambda_max(&op, &[0.5, -0.5], &CertifyTols::default(), 1).unwrap();
        assert!((est.lambda_max - 0.5).abs() <= 1e-6, "{}", est.lambda_max);
    }

    #[test]
    fn circle_saddle_fails_and_min_passes() {
        let op = circle_op(0.2);
        let tols = CertifyTols::default();
        let saddle = certify_point(&op, &[1.0, 0.0], 0.2, 0.1, 10.0, &tols, 0).unwrap();
        // dS at the saddle stretches tangentially by 1/(1 - lam) = 1.25
        assert!((saddle.lambda_max_s - 1.25).abs() <= 1e-4, "{}", saddle.lambda_max_s);
        assert!(saddle.lambda_max_s > saddle.threshold);
        assert!(!saddle.is_eps_local_min);
        let min = certify_point(&op, &[-1.0, 0.0], 0.2, 0.1, 10.0, &tols, 0).unwrap();
        // tangential contraction 1/(1 + lam)
        assert!((min.lambda_max_s - 1.0 / 1.2).abs() <= 1e-4, "{}", min.lambda_max_s);
        assert!(min.is_eps_local_min);
        assert!((saddle.threshold - 1.2).abs() <= 1e-12);
    }

    #[test]
    fn power_matches_dense_eig_on_circle() {
        let op = circle_op(0.2);
        for pt in [[1.0, 0.0], [-1.0, 0.0], [0.4, 0.6]] {
            let est = estimate_lambda_max(&op, &pt, &CertifyTols::default(), 3).unwrap();
            let j = dense_jacobian(&op, &pt, est.fd_step).unwrap();
            let dense = eig2_max_real(&j).expect("real spectrum");
            assert!(
                (est.lambda_max - dense).abs() <= 1e-4,
                "power {} dense {dense} at {pt:?}",
                est.lambda_max
            );
        }
    }

    #[test]
    fn certificate_monotone_in_eps() {
        let op = circle_op(0.2);
        let tols = CertifyTols::default();
        let at = |eps: f64| {
            certify_point(&op, &[-1.0, 0.0], 0.2, eps, 10.0, &tols, 0)
                .unwrap()
                .is_eps_local_min
        };
        assert!(at(0.1));
        assert!(at(0.2), "larger eps must not lose the certificate");
    }

    #[test]
    fn quadratic_min_certifies() {
        let op = ppa_quadratic(0.5);
        let c = certify_point(&op, &[0.0, 0.0], 0.5, 0.1, 1.0, &CertifyTols::default(), 0).unwrap();
        assert!(c.is_eps_local_min);
        assert_eq!(c.grad_mapping_norm, 0.0);
    }

    #[test]
    fn probe_rho_constant_jacobian() {
        let op = ppa_quadratic(0.5);
        let w = probe_rho(&op, &[0.0, 0.0], 0.5, 20, 4).unwrap();
        assert!(w <= 1e-4, "probe {w}");
    }

    #[test]
    fn local_max_rejected_by_spectral_test() {
        // (0.5, 0) is the circle landscape's local max: an envelope-stationary
        // point whose Jacobian expands by 1/(1 - 2 lam)
        let op = circle_op(0.2);
        let c = certify_point(&op, &[0.5, 0.0], 0.2, 0.1, 10.0, &CertifyTols::default(), 0).unwrap();
        assert!(c.grad_mapping_norm <= 1e-9);
        assert!((c.lambda_max_s - 1.0 / 0.6).abs() <= 1e-4, "{}", c.lambda_max_s);
        assert!(!c.is_eps_local_min);
    }
}
