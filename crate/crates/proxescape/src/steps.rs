//! The three step operators S and their unified model functions. Each
//! iteration of the perturbed loop is one application of S; the model function
//! f_x is what S minimizes (plus the proximal quadratic).

use crate::error::{ProxError, Result};
use crate::linalg::{add_scaled, norm};
use crate::oracles::{
    CompositeOuterInner, CompositeSmoothPlusProx, NonsmoothObjective, ProblemOracle,
};
use crate::solvers;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StepKind {
    ProxPoint,
    ProxGradient,
    ProxLinear,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::ProxPoint => "prox_point",
            StepKind::ProxGradient => "prox_gradient",
            StepKind::ProxLinear => "prox_linear",
        }
    }
}

impl std::str::FromStr for StepKind {
    type Err = ProxError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prox_point" | "ppa" => Ok(StepKind::ProxPoint),
            "prox_gradient" | "pgm" => Ok(StepKind::ProxGradient),
            "prox_linear" | "plm" => Ok(StepKind::ProxLinear),
            other => Err(ProxError::parameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One step operator S bound to its oracle, step size, and inner tolerance.
/// Application is pure: same point in, same point out.
#[derive(Clone)]
pub struct StepOperator {
    pub kind: StepKind,
    pub eta: f64,
    pub inner_tolerance: f64,
    pub oracle: Arc<ProblemOracle>,
}

impl StepOperator {
    pub fn new(
        kind: StepKind,
        eta: f64,
        inner_tolerance: f64,
        oracle: Arc<ProblemOracle>,
    ) -> Result<Self> {
        if eta <= 0.0 || inner_tolerance <= 0.0 {
            return Err(ProxError::parameter(
                "step size and inner tolerance must be positive",
            ));
        }
        match (kind, oracle.as_ref()) {
            (StepKind::ProxPoint, ProblemOracle::Plain(_))
            | (StepKind::ProxGradient, ProblemOracle::SmoothPlusProx(_))
            | (StepKind::ProxLinear, ProblemOracle::OuterInner(_)) => {}
            _ => {
                return Err(ProxError::parameter(format!(
                    "step kind {} does not match the oracle's problem class",
                    kind.as_str()
                )))
            }
        }
        Ok(StepOperator {
            kind,
            eta,
            inner_tolerance,
            oracle,
        })
    }

    /// x_{t+1} = S(x_t).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match (self.kind, self.oracle.as_ref()) {
            (StepKind::ProxPoint, ProblemOracle::Plain(o)) => {
                step_ppa(o, self.eta, x, self.inner_tolerance)
            }
            (StepKind::ProxGradient, ProblemOracle::SmoothPlusProx(o)) => {
                step_pgm(o, self.eta, x, self.inner_tolerance)
            }
            (StepKind::ProxLinear, ProblemOracle::OuterInner(o)) => {
                step_plm(o, self.eta, x, self.inner_tolerance)
            }
            _ => unreachable!("kind/oracle pairing validated at construction"),
        }
    }

    /// The model function instantiated at x.
    pub fn model_at(&self, x: &[f64]) -> ModelFunction {
        model_function(self, x)
    }
}

/// S(x) = prox_{eta f}(x).
pub fn step_ppa(obj: &NonsmoothObjective, eta: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    solvers::prox_of_plain(obj, x, eta, tol)
}

/// S(x) = prox_{eta m}(x - eta grad g(x)).
pub fn step_pgm(
    obj: &CompositeSmoothPlusProx,
    eta: f64,
    x: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mu = obj.prox_term().weak_modulus();
    if eta <= 0.0 || (mu > 0.0 && eta >= 1.0 / mu) {
        return Err(ProxError::parameter(format!(
            "prox-gradient step {eta} must lie in (0, 1/mu)"
        )));
    }
    let grad = obj.smooth_gradient(x);
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(ProxError::oracle("non-finite smooth gradient"));
    }
    let forward = add_scaled(x, -eta, &grad);
    solvers::prox_of_plain(obj.prox_term(), &forward, eta, tol)
}

/// S(x) = argmin_y h(F(x) + dF(x)(y - x)) + m(y) + ||y - x||^2 / (2 eta).
pub fn step_plm(obj: &CompositeOuterInner, eta: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mu = obj.prox_term().map_or(0.0, |m| m.weak_modulus());
    if eta <= 0.0 || (mu > 0.0 && eta >= 1.0 / mu) {
        return Err(ProxError::parameter(format!(
            "prox-linear step {eta} must lie in (0, 1/mu)"
        )));
    }
    solvers::prox_linear_sub(obj, x, x, eta, tol)
}

/// The model f_x that S minimizes together with its accuracy constant beta
/// (quadratic agreement with f) and weak-convexity modulus mu.
pub struct ModelFunction {
    pub base_point: Vec<f64>,
    pub evaluator: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub model_beta: f64,
    pub model_mu: f64,
}

impl ModelFunction {
    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.evaluator)(y)
    }
}

/// Builds the model row matching the operator kind: the function itself for
/// the prox-point step, the smooth-part linearization for prox-gradient, the
/// inner-map linearization for prox-linear.
pub fn model_function(op: &StepOperator, x: &[f64]) -> ModelFunction {
    let base = x.to_vec();
    match (op.kind, op.oracle.as_ref()) {
        (StepKind::ProxPoint, ProblemOracle::Plain(o)) => {
            let o = o.clone();
            ModelFunction {
                base_point: base,
                model_beta: 0.0,
                model_mu: o.weak_modulus(),
                evaluator: Box::new(move |y: &[f64]| o.value(y)),
            }
        }
        (StepKind::ProxGradient, ProblemOracle::SmoothPlusProx(o)) => {
            let gx = o.smooth_value(x);
            let grad = o.smooth_gradient(x);
            let xc = x.to_vec();
            let o = o.clone();
            ModelFunction {
                base_point: base,
                model_beta: o.gradient_lipschitz(),
                model_mu: o.prox_term().weak_modulus(),
                evaluator: Box::new(move |y: &[f64]| {
                    let lin: f64 = grad
                        .iter()
                        .zip(y.iter().zip(&xc))
                        .map(|(g, (yi, xi))| g * (yi - xi))
                        .sum();
                    gx + lin + o.prox_term().value(y)
                }),
            }
        }
        (StepKind::ProxLinear, ProblemOracle::OuterInner(o)) => {
            let fx = o.inner_map(x);
            let jac = o.jacobian(x);
            let xc = x.to_vec();
            let o = o.clone();
            ModelFunction {
                base_point: base,
                model_beta: o.model_beta(),
                model_mu: o.prox_term().map_or(0.0, |m| m.weak_modulus()),
                evaluator: Box::new(move |y: &[f64]| {
                    let diff: Vec<f64> = y.iter().zip(&xc).map(|(a, b)| a - b).collect();
                    let z: Vec<f64> = fx
                        .iter()
                        .zip(jac.matvec(&diff))
                        .map(|(a, b)| a + b)
                        .collect();
                    let mut v = o.outer().value(&z);
                    if let Some(m) = o.prox_term() {
                        v += m.value(y);
                    }
                    v
                }),
            }
        }
        _ => unreachable!("kind/oracle pairing validated at construction"),
    }
}

/// Worst sampled ratio |f(y) - f_x(y)| / (||y - x||^2 / 2) for y uniform in a
/// ball around the base point; the declared beta must dominate it.
pub fn model_error_probe(
    oracle: &ProblemOracle,
    model: &ModelFunction,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if samples < 100 {
        return Err(ProxError::parameter("need at least 100 samples"));
    }
    let x = &model.base_point;
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&dir);
        if n < 1e-12 {
            continue;
        }
        let scale = radius * rng.gen_range(0.0_f64..1.0).powf(1.0 / d as f64) / n;
        for v in dir.iter_mut() {
            *v *= scale;
        }
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let err = (oracle.value(&y) - model.eval(&y)).abs();
        let denom = 0.5 * dir.iter().map(|v| v * v).sum::<f64>();
        if denom > 1e-18 {
            let r = err / denom;
            if !r.is_finite() {
                return Err(ProxError::oracle("non-finite model error"));
            }
            worst = worst.max(r);
        }
    }
    Ok(worst)
}
