//! Oracle abstractions for the three problem classes and their declared
//! regularity constants. Oracles are immutable after construction and safe to
//! evaluate concurrently.

use crate::error::{ProxError, Result};
use crate::linalg::{dist, norm, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type ProxFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;
type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Mat + Send + Sync;

/// A nonsmooth function f with declared weak-convexity modulus ell
/// (f + (ell/2)||.||^2 convex). `analytic_prox(x, lam)` when present returns
/// the exact minimizer of f(y) + ||y - x||^2 / (2 lam).
#[derive(Clone)]
pub struct NonsmoothObjective {
    dim: usize,
    weak_modulus: f64,
    value: Arc<ValueFn>,
    analytic_prox: Option<Arc<ProxFn>>,
    subgradient: Option<Arc<GradFn>>,
}

impl NonsmoothObjective {
    pub fn new(dim: usize, weak_modulus: f64, value: Arc<ValueFn>) -> Self {
        assert!(dim > 0 && weak_modulus >= 0.0);
        NonsmoothObjective {
            dim,
            weak_modulus,
            value,
            analytic_prox: None,
            subgradient: None,
        }
    }

    pub fn with_prox(mut self, prox: Arc<ProxFn>) -> Self {
        self.analytic_prox = Some(prox);
        self
    }

    pub fn with_subgradient(mut self, sg: Arc<GradFn>) -> Self {
        self.subgradient = Some(sg);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weak_modulus(&self) -> f64 {
        self.weak_modulus
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn has_analytic_prox(&self) -> bool {
        self.analytic_prox.is_some()
    }

    pub fn analytic_prox(&self, x: &[f64], lam: f64) -> Option<Vec<f64>> {
        self.analytic_prox.as_ref().map(|p| p(x, lam))
    }

    /// A subgradient at x: the declared closure when present, else a central
    /// finite difference (valid a.e. for the locally Lipschitz functions used
    /// here).
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.subgradient {
            Some(sg) => sg(x),
            None => {
                let step = 1e-7 * (1.0 + norm(x));
                finite_diff_gradient(&|y| self.value(y), x, step).unwrap_or_else(|_| vec![0.0; x.len()])
            }
        }
    }
}

/// g + m with g C^2-smooth (beta-Lipschitz gradient) and m a prox-friendly
/// weakly convex term with modulus mu.
#[derive(Clone)]
pub struct CompositeSmoothPlusProx {
    dim: usize,
    smooth_value: Arc<ValueFn>,
    smooth_gradient: Arc<GradFn>,
    gradient_lipschitz: f64,
    prox_term: NonsmoothObjective,
}

impl CompositeSmoothPlusProx {
    pub fn new(
        dim: usize,
        smooth_value: Arc<ValueFn>,
        smooth_gradient: Arc<GradFn>,
        gradient_lipschitz: f64,
        prox_term: NonsmoothObjective,
    ) -> Self {
        assert!(gradient_lipschitz > 0.0);
        assert_eq!(prox_term.dim(), dim);
        CompositeSmoothPlusProx {
            dim,
            smooth_value,
            smooth_gradient,
            gradient_lipschitz,
            prox_term,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        (self.smooth_value)(x)
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.smooth_gradient)(x)
    }

    pub fn gradient_lipschitz(&self) -> f64 {
        self.gradient_lipschitz
    }

    pub fn prox_term(&self) -> &NonsmoothObjective {
        &self.prox_term
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.prox_term.value(x)
    }
}

/// A convex nonsmooth outer function h with an analytic prox. When the
/// Fenchel conjugate and the projection onto its domain are supplied, the
/// linearized-subproblem solver can certify its result by a duality gap.
#[derive(Clone)]
pub struct OuterConvex {
    value: Arc<ValueFn>,
    prox: Arc<ProxFn>,
    conjugate: Option<Arc<ValueFn>>,
    dual_project: Option<Arc<MapFn>>,
}

impl OuterConvex {
    pub fn new(value: Arc<ValueFn>, prox: Arc<ProxFn>) -> Self {
        OuterConvex {
            value,
            prox,
            conjugate: None,
            dual_project: None,
        }
    }

    /// Attach h* and the projection onto dom h*.
    pub fn with_conjugate(mut self, conjugate: Arc<ValueFn>, dual_project: Arc<MapFn>) -> Self {
        self.conjugate = Some(conjugate);
        self.dual_project = Some(dual_project);
        self
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    /// argmin_u h(u) + ||u - q||^2 / (2 t)
    pub fn prox(&self, q: &[f64], t: f64) -> Vec<f64> {
        (self.prox)(q, t)
    }

    pub fn has_conjugate(&self) -> bool {
        self.conjugate.is_some() && self.dual_project.is_some()
    }

    /// h*(w); only meaningful on dom h* (use `dual_project` first).
    pub fn conjugate(&self, w: &[f64]) -> f64 {
        (self.conjugate.as_ref().expect("conjugate not declared"))(w)
    }

    pub fn dual_project(&self, w: &[f64]) -> Vec<f64> {
        (self.dual_project.as_ref().expect("dual projection not declared"))(w)
    }
}

/// h(F(x)) + m(x) with F a C^2-smooth map, h convex with analytic prox.
#[derive(Clone)]
pub struct CompositeOuterInner {
    dim: usize,
    range_dim: usize,
    inner_map: Arc<MapFn>,
    jacobian: Arc<JacFn>,
    outer: OuterConvex,
    prox_term: Option<NonsmoothObjective>,
    outer_lipschitz: f64,
    jacobian_lipschitz: f64,
}

impl CompositeOuterInner {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        range_dim: usize,
        inner_map: Arc<MapFn>,
        jacobian: Arc<JacFn>,
        outer: OuterConvex,
        prox_term: Option<NonsmoothObjective>,
        outer_lipschitz: f64,
        jacobian_lipschitz: f64,
    ) -> Self {
        assert!(outer_lipschitz > 0.0 && jacobian_lipschitz > 0.0);
        if let Some(m) = &prox_term {
            assert_eq!(m.dim(), dim);
        }
        CompositeOuterInner {
            dim,
            range_dim,
            inner_map,
            jacobian,
            outer,
            prox_term,
            outer_lipschitz,
            jacobian_lipschitz,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range_dim(&self) -> usize {
        self.range_dim
    }

    pub fn inner_map(&self, x: &[f64]) -> Vec<f64> {
        (self.inner_map)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Mat {
        (self.jacobian)(x)
    }

    pub fn outer(&self) -> &OuterConvex {
        &self.outer
    }

    pub fn prox_term(&self) -> Option<&NonsmoothObjective> {
        self.prox_term.as_ref()
    }

    pub fn outer_lipschitz(&self) -> f64 {
        self.outer_lipschitz
    }

    pub fn jacobian_lipschitz(&self) -> f64 {
        self.jacobian_lipschitz
    }

    /// Model accuracy constant beta = L_h * L_dF.
    pub fn model_beta(&self) -> f64 {
        self.outer_lipschitz * self.jacobian_lipschitz
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.outer.value(&self.inner_map(x));
        if let Some(m) = &self.prox_term {
            v += m.value(x);
        }
        v
    }
}

/// One of the three problem classes, unified for the envelope machinery and
/// the step operators.
#[derive(Clone)]
pub enum ProblemOracle {
    Plain(NonsmoothObjective),
    SmoothPlusProx(CompositeSmoothPlusProx),
    OuterInner(CompositeOuterInner),
}

impl ProblemOracle {
    pub fn dim(&self) -> usize {
        match self {
            ProblemOracle::Plain(o) => o.dim(),
            ProblemOracle::SmoothPlusProx(o) => o.dim(),
            ProblemOracle::OuterInner(o) => o.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProblemOracle::Plain(o) => o.value(x),
            ProblemOracle::SmoothPlusProx(o) => o.value(x),
            ProblemOracle::OuterInner(o) => o.value(x),
        }
    }

    /// Upper bound on the weak-convexity modulus of the full objective.
    pub fn weak_modulus(&self) -> f64 {
        match self {
            ProblemOracle::Plain(o) => o.weak_modulus(),
            ProblemOracle::SmoothPlusProx(o) => {
                o.gradient_lipschitz() + o.prox_term().weak_modulus()
            }
            ProblemOracle::OuterInner(o) => {
                o.model_beta() + o.prox_term().map_or(0.0, |m| m.weak_modulus())
            }
        }
    }
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(fn_: &F, x: &[f64], step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 {
        return Err(ProxError::parameter("finite-difference step must be positive"));
    }
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = fn_(&xp);
        xp[i] = x[i] - step;
        let fm = fn_(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(ProxError::oracle(format!(
                "non-finite value on stencil at coordinate {i}"
            )));
        }
        g[i] = (fp - fm) / (2.0 * step);
    }
    Ok(g)
}

/// Outcome of the sampled-secant weak-convexity check.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityReport {
    pub holds: bool,
    pub worst_violation: f64,
}

/// Tests convexity of value(x) + (ell/2)||x||^2 on sampled segments:
/// for random x, y and theta, the secant inequality must hold within 1e-8
/// absolute slack. Sampling is seeded; points are drawn from [-2, 2]^d.
pub fn check_weak_convexity(
    obj: &NonsmoothObjective,
    samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if obj.dim() > 10 {
        return Err(ProxError::parameter("weak-convexity check supports d <= 10"));
    }
    if samples < 100 {
        return Err(ProxError::parameter("need at least 100 samples"));
    }
    let ell = obj.weak_modulus();
    let aug = |x: &[f64]| -> Result<f64> {
        let v = obj.value(x) + 0.5 * ell * crate::linalg::dot(x, x);
        if !v.is_finite() {
            return Err(ProxError::oracle("non-finite value at sampled point"));
        }
        Ok(v)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let theta: f64 = rng.gen_range(0.0..1.0);
        let mid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        let viol = aug(&mid)? - theta * aug(&x)? - (1.0 - theta) * aug(&y)?;
        worst = worst.max(viol);
    }
    Ok(ConvexityReport {
        holds: worst <= 1e-8,
        worst_violation: worst,
    })
}

/// Max of ||grad(x) - grad(y)|| / ||x - y|| over sampled pairs; tests assert
/// it stays at or below the declared Lipschitz constant.
pub fn gradient_lipschitz_probe(obj: &CompositeSmoothPlusProx, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let d = dist(&x, &y);
        if d < 1e-12 {
            continue;
        }
        let gd = dist(&obj.smooth_gradient(&x), &obj.smooth_gradient(&y));
        worst = worst.max(gd / d);
    }
    worst
}

/// Max relative deviation between the declared Jacobian and finite differences
/// of the inner map, over sampled points.
pub fn jacobian_fd_probe(obj: &CompositeOuterInner, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let j = obj.jacobian(&x);
        let step = 1e-6 * (1.0 + norm(&x));
        let mut xp = x.clone();
        for col in 0..obj.dim() {
            xp[col] = x[col] + step;
            let fp = obj.inner_map(&xp);
            xp[col] = x[col] - step;
            let fm = obj.inner_map(&xp);
            xp[col] = x[col];
            for row in 0..obj.range_dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * step);
                if !fd.is_finite() {
                    return Err(ProxError::oracle("non-finite inner map on stencil"));
                }
                let scale = 1.0 + j.get(row, col).abs();
                worst = worst.max((fd - j.get(row, col)).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn half_sq(d: usize) -> NonsmoothObjective {
        NonsmoothObjective::new(d, 0.0, Arc::new(|x: &[f64]| 0.5 * dot(x, x)))
    }

    #[test]
    fn weak_convexity_quadratic() {
        let r = check_weak_convexity(&half_sq(2), 200, 1).unwrap();
        assert!(r.holds);
        assert!(r.worst_violation <= 0.0 + 1e-12);
    }

    #[test]
    fn weak_convexity_abs_sq_minus_one() {
        // |x^2 - 1| + x^2 = max(2x^2 - 1, 1): convex, so ell = 2 suffices
        let f = NonsmoothObjective::new(1, 2.0, Arc::new(|x: &[f64]| (x[0] * x[0] - 1.0).abs()));
        let r = check_weak_convexity(&f, 300, 2).unwrap();
        assert!(r.holds, "worst violation {}", r.worst_violation);
    }

    #[test]
    fn weak_convexity_rejects_understated_modulus() {
        // -||x||^2 needs ell >= 2
        let f = NonsmoothObjective::new(2, 1.0, Arc::new(|x: &[f64]| -dot(x, x)));
        let r = check_weak_convexity(&f, 300, 3).unwrap();
        assert!(!r.holds);
        assert!(r.worst_violation > 1e-3);
    }

    #[test]
    fn fd_gradient_quadratic_exact() {
        let g = finite_diff_gradient(&|x: &[f64]| x[0] * x[0], &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() <= 1e-6);
    }

    #[test]
    fn fd_gradient_constant_is_zero() {
        let g = finite_diff_gradient(&|_: &[f64]| 7.5, &[1.0, -2.0], 1e-4).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn fd_gradient_sin() {
        let g = finite_diff_gradient(&|x: &[f64]| x[0].sin(), &[0.0], 1e-4).unwrap();
        assert!((g[0] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn fd_gradient_rejects_nonfinite() {
        let res = finite_diff_gradient(&|x: &[f64]| x[0].ln(), &[0.0], 1e-4);
        assert!(matches!(res, Err(ProxError::OracleEval(_))));
    }

    #[test]
    fn oracle_evaluation_deterministic() {
        let f = half_sq(3);
        let x = [0.3, -1.7, 2.2];
        let a = f.value(&x);
        let b = f.value(&x);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
