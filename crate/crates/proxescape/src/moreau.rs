//! Moreau envelope f_lam, the proximal map, and the envelope gradient
//! grad f_lam(x) = (x - prox(x)) / lam, which the perturbed loop uses as its
//! stationarity measure.

use crate::error::{ProxError, Result};
use crate::linalg::{dist, norm};
use crate::oracles::ProblemOracle;
use crate::solvers;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cached envelope evaluation at a point. `envelope_gradient` is always the
/// closed form lam^-1 (x - prox_point), never re-solved.
#[derive(Debug, Clone)]
pub struct MoreauState {
    pub base_point: Vec<f64>,
    pub lambda: f64,
    pub prox_point: Vec<f64>,
    pub envelope_value: f64,
    pub envelope_gradient: Vec<f64>,
    pub inner_tolerance: f64,
}

fn validate_lambda(oracle: &ProblemOracle, lam: f64) -> Result<()> {
    if lam <= 0.0 {
        return Err(ProxError::parameter("lambda must be positive"));
    }
    let ell = oracle.weak_modulus();
    if ell > 0.0 && lam >= 1.0 / ell {
        return Err(ProxError::parameter(format!(
            "lambda {lam} is not below 1/ell = {}",
            1.0 / ell
        )));
    }
    Ok(())
}

/// Approximate minimizer of value(.) + ||. - x||^2 / (2 lam). Dispatches to
/// the analytic prox when the oracle declares one, else to the
/// structure-matched inner solver.
pub fn moreau_prox(oracle: &ProblemOracle, lam: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    validate_lambda(oracle, lam)?;
    match oracle {
        ProblemOracle::Plain(o) => solvers::prox_of_plain(o, x, lam, tol),
        ProblemOracle::SmoothPlusProx(o) => solvers::prox_smooth_plus(o, lam, x, tol),
        ProblemOracle::OuterInner(o) => solvers::prox_outer_inner(o, lam, x, tol),
    }
}

/// Full envelope state at x: prox point, envelope value, and the closed-form
/// gradient.
pub fn moreau_grad(oracle: &ProblemOracle, lam: f64, x: &[f64], tol: f64) -> Result<MoreauState> {
    let prox_point = moreau_prox(oracle, lam, x, tol)?;
    let envelope_value =
        oracle.value(&prox_point) + dist(&prox_point, x).powi(2) / (2.0 * lam);
    let envelope_gradient: Vec<f64> = x
        .iter()
        .zip(&prox_point)
        .map(|(xi, pi)| (xi - pi) / lam)
        .collect();
    Ok(MoreauState {
        base_point: x.to_vec(),
        lambda: lam,
        prox_point,
        envelope_value,
        envelope_gradient,
        inner_tolerance: tol,
    })
}

/// Deviation between the closed-form envelope gradient and a central finite
/// difference of envelope values. Used by tests; the bound degrades with the
/// inner tolerance.
pub fn envelope_grad_fd_check(
    oracle: &ProblemOracle,
    lam: f64,
    x: &[f64],
    fd_step: f64,
    tol: f64,
) -> Result<f64> {
    let state = moreau_grad(oracle, lam, x, tol)?;
    let mut xp = x.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        xp[i] = x[i] + fd_step;
        let fp = moreau_grad(oracle, lam, &xp, tol)?.envelope_value;
        xp[i] = x[i] - fd_step;
        let fm = moreau_grad(oracle, lam, &xp, tol)?.envelope_value;
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * fd_step);
        worst = worst.max((fd - state.envelope_gradient[i]).abs());
    }
    Ok(worst)
}

/// Max over sampled pairs of ||prox(x) - prox(y)|| / ||x - y||; the Lipschitz
/// bound for lam < 1/ell is 1/(1 - lam ell).
pub fn prox_lipschitz_probe(
    oracle: &ProblemOracle,
    lam: f64,
    pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = oracle.dim();
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let denom = dist(&x, &y);
        if denom < 1e-9 {
            continue;
        }
        let px = moreau_prox(oracle, lam, &x, tol)?;
        let py = moreau_prox(oracle, lam, &y, tol)?;
        worst = worst.max(dist(&px, &py) / denom);
    }
    Ok(worst)
}

/// ||grad f_lam(x)|| = 0 iff x is a prox fixed point; helper for fixed-point
/// assertions at known critical points.
pub fn envelope_grad_norm(oracle: &ProblemOracle, lam: f64, x: &[f64], tol: f64) -> Result<f64> {
    Ok(norm(&moreau_grad(oracle, lam, x, tol)?.envelope_gradient))
}

/// Residual of the prox optimality on a sampled grid: returns the worst
/// value(prox) + d^2/(2 lam) - (value(z) + ||z - x||^2/(2 lam)) over supplied
/// candidate points z (positive means a candidate beat the prox).
pub fn prox_optimality_violation(
    oracle: &ProblemOracle,
    lam: f64,
    x: &[f64],
    prox_point: &[f64],
    candidates: &[Vec<f64>],
) -> f64 {
    let sub_val = |y: &[f64]| oracle.value(y) + dist(y, x).powi(2) / (2.0 * lam);
    let base = sub_val(prox_point);
    let mut worst = f64::NEG_INFINITY;
    for z in candidates {
        worst = worst.max(base - sub_val(z));
    }
    worst
}
