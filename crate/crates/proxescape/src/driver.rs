//! The unified perturbed loop and its parameter schedules. A run applies the
//! step operator T times, injecting a small uniform-ball perturbation whenever
//! the stationarity test fires and the previous perturbation is more than
//! t_interval iterations old.

use crate::certify::{self, CertifyTols};
use crate::error::{ProxError, Result};
use crate::linalg::{dist, norm};
use crate::moreau;
use crate::steps::StepOperator;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Which stationarity test triggers a perturbation. The gradient-mapping test
/// compares lambda^-1 ||x_t - x_{t-1}|| to eps and is suppressed at t=0; the
/// envelope test evaluates ||grad f_lam(x_t)|| directly. Recorded diagnostics
/// are envelope-based in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityMode {
    Envelope,
    GradientMapping,
}

impl std::str::FromStr for StationarityMode {
    type Err = ProxError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "envelope" => Ok(StationarityMode::Envelope),
            "gradient_mapping" => Ok(StationarityMode::GradientMapping),
            other => Err(ProxError::parameter(format!(
                "unknown stationarity mode '{other}'"
            ))),
        }
    }
}

/// The full parameter bundle. `total_iters` is an upper-bound budget derived
/// from the envelope gap, not a convergence test; experiment configs may
/// override it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho: f64,
    pub dim: usize,
    pub gap: f64,
    pub c: f64,
    pub l: f64,
    pub lambda: f64,
    pub eta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub iota: f64,
    pub r: f64,
    pub t_interval: usize,
    pub f_threshold: f64,
    pub s_radius: f64,
    pub total_iters: u64,
}

impl ScheduleParams {
    /// General schedule for all three operators. Requires L > (7/2) beta +
    /// 3 mu; when `l_choice` is absent a valid L is picked as
    /// 1.05 max{3.5 beta + 3 mu, sqrt(rho eps), 1}.
    #[allow(clippy::too_many_arguments)]
    pub fn general(
        eps: f64,
        delta: f64,
        beta: f64,
        mu: f64,
        rho: f64,
        dim: usize,
        gap: f64,
        c: Option<f64>,
        l_choice: Option<f64>,
    ) -> Result<Self> {
        validate_common(eps, delta, rho, dim, gap)?;
        if beta < 0.0 || mu < 0.0 {
            return Err(ProxError::parameter("beta and mu must be nonnegative"));
        }
        let c = c.unwrap_or(4.0);
        if c <= 0.0 {
            return Err(ProxError::parameter("constant c must be positive"));
        }
        let l = l_choice
            .unwrap_or_else(|| 1.05 * (3.5 * beta + 3.0 * mu).max((rho * eps).sqrt()).max(1.0));
        if l <= 3.5 * beta + 3.0 * mu {
            return Err(ProxError::parameter(format!(
                "L = {l} must exceed (7/2) beta + 3 mu = {}",
                3.5 * beta + 3.0 * mu
            )));
        }
        if eps >= l * l / rho {
            return Err(ProxError::parameter(format!(
                "eps = {eps} must lie in (0, L^2/rho) = (0, {})",
                l * l / rho
            )));
        }
        let lambda = 1.0 / (0.5 * l + 0.25 * (beta + 2.0 * mu));
        let lam_inv = 1.0 / lambda;
        let theta1 = (l - lam_inv + beta) * lambda * lambda * l * l / (l - lam_inv - beta);
        let theta2 = (lam_inv - beta - mu) * l * lambda / (lam_inv + l - beta - 2.0 * mu);
        let eta = 1.0 / l;
        let iota = iota_of(c, dim as f64 * l * gap / (rho * eps * delta));
        Ok(Self::fill(
            eps, delta, beta, mu, rho, dim, gap, c, l, lambda, eta, theta1, theta2, iota,
        ))
    }

    /// Prox-point specialization: lambda < 1/(2 ell), eta = lambda, both
    /// theta constants equal to one. Default lambda is 0.4/ell (1.0 when
    /// ell = 0).
    #[allow(clippy::too_many_arguments)]
    pub fn prox_point(
        eps: f64,
        delta: f64,
        ell: f64,
        rho: f64,
        dim: usize,
        gap: f64,
        c: Option<f64>,
        lambda_choice: Option<f64>,
    ) -> Result<Self> {
        validate_common(eps, delta, rho, dim, gap)?;
        if ell < 0.0 {
            return Err(ProxError::parameter("ell must be nonnegative"));
        }
        let c = c.unwrap_or(4.0);
        if c <= 0.0 {
            return Err(ProxError::parameter("constant c must be positive"));
        }
        let lambda = lambda_choice.unwrap_or(if ell > 0.0 { 0.4 / ell } else { 1.0 });
        if lambda <= 0.0 || (ell > 0.0 && lambda >= 0.5 / ell) {
            return Err(ProxError::parameter(format!(
                "lambda = {lambda} must lie in (0, 1/(2 ell))"
            )));
        }
        if eps >= 1.0 / (lambda * lambda * rho) {
            return Err(ProxError::parameter(format!(
                "eps = {eps} must lie in (0, 1/(lambda^2 rho)) = (0, {})",
                1.0 / (lambda * lambda * rho)
            )));
        }
        let iota = iota_of(c, dim as f64 * gap / (lambda * rho * eps * delta));
        Ok(Self::fill(
            eps,
            delta,
            0.0,
            ell,
            rho,
            dim,
            gap,
            c,
            1.0 / lambda,
            lambda,
            lambda,
            1.0,
            1.0,
            iota,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        eps: f64,
        delta: f64,
        beta: f64,
        mu: f64,
        rho: f64,
        dim: usize,
        gap: f64,
        c: f64,
        l: f64,
        lambda: f64,
        eta: f64,
        theta1: f64,
        theta2: f64,
        iota: f64,
    ) -> Self {
        let i3 = iota * iota * iota;
        let ratio = theta2 / theta1;
        let r = ratio * eps / (400.0 * i3);
        let t_interval = ((l / (rho * eps).sqrt()) * iota).ceil() as usize;
        let f_threshold = ratio * (eps * eps * eps / rho).sqrt() / (50.0 * i3);
        let s_radius = (eps / rho).sqrt() / (4.0 * iota);
        let by_decrease = gap * 2.0 * t_interval as f64 / f_threshold;
        let by_gradient = 2.0 * gap / (theta2 * eta * eps * eps);
        let total = (4.0 * by_decrease.max(by_gradient)).ceil().min(9.0e18);
        ScheduleParams {
            eps,
            delta,
            beta,
            mu,
            rho,
            dim,
            gap,
            c,
            l,
            lambda,
            eta,
            theta1,
            theta2,
            iota,
            r,
            t_interval,
            f_threshold,
            s_radius,
            total_iters: total as u64,
        }
    }

    /// Replaces individual fields after the closed-form computation.
    /// Overrides are validated against the structural constraints they touch.
    pub fn with_overrides(
        mut self,
        eta: Option<f64>,
        lambda: Option<f64>,
        r: Option<f64>,
        t_interval: Option<usize>,
        total_iters: Option<u64>,
    ) -> Result<Self> {
        if let Some(e) = eta {
            if e <= 0.0 {
                return Err(ProxError::parameter("eta override must be positive"));
            }
            self.eta = e;
        }
        if let Some(lam) = lambda {
            let modulus = self.beta + self.mu;
            if lam <= 0.0 || (modulus > 0.0 && lam >= 1.0 / modulus) {
                return Err(ProxError::parameter(format!(
                    "lambda override {lam} must lie in (0, 1/(beta+mu))"
                )));
            }
            self.lambda = lam;
        }
        if let Some(rv) = r {
            if rv < 0.0 {
                return Err(ProxError::parameter("r override must be nonnegative"));
            }
            self.r = rv;
        }
        if let Some(ti) = t_interval {
            if ti == 0 {
                return Err(ProxError::parameter("t_interval override must be positive"));
            }
            self.t_interval = ti;
        }
        if let Some(t) = total_iters {
            if t == 0 {
                return Err(ProxError::parameter("total_iters override must be positive"));
            }
            self.total_iters = t;
        }
        Ok(self)
    }
}

fn validate_common(eps: f64, delta: f64, rho: f64, dim: usize, gap: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(ProxError::parameter("eps must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ProxError::parameter("delta must lie in (0, 1)"));
    }
    if !(rho > 0.0) {
        return Err(ProxError::parameter("rho must be positive"));
    }
    if dim == 0 {
        return Err(ProxError::parameter("dimension must be positive"));
    }
    if !(gap > 0.0) {
        return Err(ProxError::parameter("envelope gap must be positive"));
    }
    Ok(())
}

// log factor, floored at c so shallow gaps cannot push it below the constant
fn iota_of(c: f64, arg: f64) -> f64 {
    (c * arg.ln()).max(c)
}

/// General schedule entry point; `l_choice` of None picks a valid L.
#[allow(clippy::too_many_arguments)]
pub fn compute_schedule(
    eps: f64,
    delta: f64,
    beta: f64,
    mu: f64,
    rho: f64,
    dim: usize,
    gap: f64,
    c: Option<f64>,
    l_choice: Option<f64>,
) -> Result<ScheduleParams> {
    ScheduleParams::general(eps, delta, beta, mu, rho, dim, gap, c, l_choice)
}

/// One recorded iterate. When `perturbed` is set the stored x already
/// includes the perturbation, so the next transition out of this record is a
/// pure step; segment-based checks break at perturbed records because the
/// transition into one carries the kick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub x: Vec<f64>,
    pub f_lambda: f64,
    pub grad_map_norm: f64,
    pub perturbed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub seed: u64,
    pub mode: StationarityMode,
    pub perturbation_count: usize,
}

impl Trajectory {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory is never empty")
    }
}

/// A failed run still carries everything recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: ProxError,
    pub partial: Trajectory,
}

pub type RunResult = std::result::Result<Trajectory, Box<RunFailure>>;

/// Uniform sample from the radius-r ball: Gaussian direction, radius scaled
/// by u^(1/d).
pub fn sample_ball<R: Rng>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    if radius <= 0.0 {
        return vec![0.0; d];
    }
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&dir);
        if n < 1e-14 {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let scale = radius * u.powf(1.0 / d as f64) / n;
        return dir.into_iter().map(|v| v * scale).collect();
    }
}

/// Executes the perturbed loop for `params.total_iters` steps, recording
/// every iterate (budget + 1 records). Perturbations subtract eta times a
/// ball sample, fire only when the mode's stationarity test passes and the
/// last event is more than t_interval iterations old, and are disabled
/// entirely when r = 0.
pub fn run(
    op: &StepOperator,
    x0: &[f64],
    params: &ScheduleParams,
    seed: u64,
    mode: StationarityMode,
) -> RunResult {
    let d = op.oracle.dim();
    let make_partial = |points: Vec<TrajectoryPoint>, count: usize| Trajectory {
        points,
        seed,
        mode,
        perturbation_count: count,
    };
    let fail = |e: ProxError, points: Vec<TrajectoryPoint>, count: usize| {
        Box::new(RunFailure {
            error: e,
            partial: make_partial(points, count),
        })
    };
    let mut points: Vec<TrajectoryPoint> = Vec::new();
    if x0.len() != d {
        return Err(fail(
            ProxError::parameter(format!("x0 has dimension {}, oracle expects {d}", x0.len())),
            points,
            0,
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(fail(ProxError::parameter("x0 must be finite"), points, 0));
    }
    let budget = params.total_iters.min(usize::MAX as u64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut prev: Option<Vec<f64>> = None;
    let mut t_perturb: i64 = 0;
    let mut count = 0usize;
    for t in 0..=budget {
        let mut state = match moreau::moreau_grad(&op.oracle, params.lambda, &x, op.inner_tolerance)
        {
            Ok(s) => s,
            Err(e) => return Err(fail(e, points, count)),
        };
        let fires = match mode {
            StationarityMode::Envelope => norm(&state.envelope_gradient) <= params.eps,
            StationarityMode::GradientMapping => match &prev {
                None => false,
                Some(p) => dist(&x, p) / params.lambda <= params.eps,
            },
        };
        let mut perturbed = false;
        if t < budget && params.r > 0.0 && fires && (t as i64 - t_perturb) > params.t_interval as i64
        {
            let xi = sample_ball(d, params.r, &mut rng);
            for i in 0..d {
                x[i] -= params.eta * xi[i];
            }
            t_perturb = t as i64;
            count += 1;
            perturbed = true;
            state = match moreau::moreau_grad(&op.oracle, params.lambda, &x, op.inner_tolerance) {
                Ok(s) => s,
                Err(e) => return Err(fail(e, points, count)),
            };
        }
        points.push(TrajectoryPoint {
            t,
            x: x.clone(),
            f_lambda: state.envelope_value,
            grad_map_norm: norm(&state.envelope_gradient),
            perturbed,
        });
        if t < budget {
            prev = Some(x.clone());
            x = match op.apply(&x) {
                Ok(next) => next,
                Err(e) => return Err(fail(e, points, count)),
            };
        }
    }
    Ok(make_partial(points, count))
}

/// Iterate classification along a finished run: gradient too large, gradient
/// small but the spectral condition fails, or both hold (certified).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub total: usize,
    pub case_grad_large: usize,
    pub case_spectral_fail: usize,
    pub case_certified: usize,
    pub indeterminate: usize,
    pub certified_fraction: f64,
    pub final_point: Vec<f64>,
    pub final_f_lambda: f64,
    pub final_grad_norm: f64,
    pub perturbation_count: usize,
}

/// Classifies every recorded iterate by the two local-minimum conditions.
/// Spectral estimation runs only where the gradient test already passes;
/// indeterminate estimates are counted separately and not certified.
pub fn summarize(
    traj: &Trajectory,
    op: &StepOperator,
    params: &ScheduleParams,
    tols: &CertifyTols,
) -> Result<RunSummary> {
    if traj.points.is_empty() {
        return Err(ProxError::parameter("cannot summarize an empty trajectory"));
    }
    let threshold = 1.0 + params.eta * (params.rho * params.eps).sqrt();
    let mut grad_large = 0;
    let mut spectral_fail = 0;
    let mut certified = 0;
    let mut indeterminate = 0;
    for p in &traj.points {
        if p.grad_map_norm > params.eps {
            grad_large += 1;
            continue;
        }
        let est = certify::estimate_lambda_max(op, &p.x, tols, traj.seed)?;
        if est.indeterminate {
            indeterminate += 1;
        } else if est.lambda_max < threshold {
            certified += 1;
        } else {
            spectral_fail += 1;
        }
    }
    let last = traj.final_point();
    Ok(RunSummary {
        total: traj.points.len(),
        case_grad_large: grad_large,
        case_spectral_fail: spectral_fail,
        case_certified: certified,
        indeterminate,
        certified_fraction: certified as f64 / traj.points.len() as f64,
        final_point: last.x.clone(),
        final_f_lambda: last.f_lambda,
        final_grad_norm: last.grad_map_norm,
        perturbation_count: traj.perturbation_count,
    })
}

/// Worst violation of the localization bound over all pure-step segments:
/// for each segment start s and offset tau,
///   ||x_{s+tau} - x_s|| - sqrt((theta1/theta2) 2 eta tau (f_lam(x_s) - f_lam(x_{s+tau}))).
/// Segments break at perturbation records (which store post-perturbation
/// points, so every in-segment transition is a pure step).
pub fn improve_or_localize_violation(points: &[TrajectoryPoint], params: &ScheduleParams) -> f64 {
    let ratio = params.theta1 / params.theta2;
    let mut worst = f64::NEG_INFINITY;
    let mut start = 0usize;
    for i in 0..=points.len() {
        let boundary = i == points.len() || (i > start && points[i].perturbed);
        if !boundary {
            continue;
        }
        let s = &points[start];
        for (tau, p) in points[start..i].iter().enumerate() {
            let decrease = (s.f_lambda - p.f_lambda).max(0.0);
            let bound = (ratio * 2.0 * params.eta * tau as f64 * decrease).sqrt();
            worst = worst.max(dist(&p.x, &s.x) - bound);
        }
        start = i;
    }
    worst
}
