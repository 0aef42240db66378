//! Benchmark landscapes with analytic structure: known critical points, exact
//! prox formulas where available, and recommended schedule inputs. Problems
//! are immutable and safe to share across runs.

use crate::driver::ScheduleParams;
use crate::error::Result;
use crate::linalg::{dist, dot, norm, Mat};
use crate::oracles::{
    CompositeOuterInner, CompositeSmoothPlusProx, NonsmoothObjective, OuterConvex, ProblemOracle,
};
use crate::steps::{StepKind, StepOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Saddle,
    LocalMin,
    LocalMax,
}

/// Suggested experiment inputs bundled with each problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recommended {
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    pub gap: f64,
    pub lambda: Option<f64>,
    pub start: Vec<f64>,
}

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub kind: StepKind,
    pub oracle: Arc<ProblemOracle>,
    pub known_critical_points: Vec<(Vec<f64>, CriticalKind)>,
    pub ell: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho: f64,
    pub recommended: Recommended,
}

impl BenchmarkProblem {
    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    /// The matching step operator.
    pub fn step_operator(&self, eta: f64, inner_tol: f64) -> Result<StepOperator> {
        StepOperator::new(self.kind, eta, inner_tol, self.oracle.clone())
    }

    /// The schedule built from the recommended inputs; prox-point problems use
    /// the specialized schedule, the composite classes the general one.
    pub fn schedule(&self) -> Result<ScheduleParams> {
        let r = &self.recommended;
        match self.kind {
            StepKind::ProxPoint => ScheduleParams::prox_point(
                r.eps,
                r.delta,
                self.ell,
                self.rho,
                self.dim(),
                r.gap,
                Some(r.c),
                r.lambda,
            ),
            StepKind::ProxGradient | StepKind::ProxLinear => ScheduleParams::general(
                r.eps,
                r.delta,
                self.beta,
                self.mu,
                self.rho,
                self.dim(),
                r.gap,
                Some(r.c),
                None,
            ),
        }
    }

    /// Whether x sits within tol of a labeled local minimum.
    pub fn near_labeled_min(&self, x: &[f64], tol: f64) -> bool {
        self.known_critical_points
            .iter()
            .any(|(p, k)| *k == CriticalKind::LocalMin && dist(p, x) <= tol)
    }
}

fn circle_value(x: &[f64]) -> f64 {
    (dot(x, x) - 1.0).abs() + x[0]
}

/// g(x) = | ||x||^2 - 1 | + x_1 on R^d (d >= 2): saddle at (1,0,..), global
/// minimum at (-1,0,..), local maximum at (1/2,0,..). The prox subproblem is
/// solved exactly: after folding the linear term into u = x - lam e_1, the
/// minimizer is one of the two per-piece stationary points or the sphere
/// projection of u, decided by objective value.
pub fn make_circle_abs(d: usize) -> BenchmarkProblem {
    assert!(d >= 2, "circle-abs needs d >= 2");
    let prox = move |x: &[f64], lam: f64| -> Vec<f64> {
        let mut u = x.to_vec();
        u[0] -= lam;
        let sub = |y: &[f64]| circle_value(y) + dist(y, x).powi(2) / (2.0 * lam);
        let mut best: Vec<f64> = u.iter().map(|v| v / (1.0 + 2.0 * lam)).collect();
        let mut best_val = sub(&best);
        let mut consider = |y: Vec<f64>| {
            let v = sub(&y);
            if v < best_val {
                best_val = v;
                best = y;
            }
        };
        if lam < 0.5 {
            consider(u.iter().map(|v| v / (1.0 - 2.0 * lam)).collect());
        }
        let un = norm(&u);
        if un > 0.0 {
            consider(u.iter().map(|v| v / un).collect());
        } else {
            let mut y = vec![0.0; x.len()];
            y[0] = -1.0;
            consider(y);
        }
        best
    };
    let obj = NonsmoothObjective::new(d, 2.0, Arc::new(circle_value))
        .with_prox(Arc::new(prox));
    let point = |first: f64| {
        let mut p = vec![0.0; d];
        p[0] = first;
        p
    };
    BenchmarkProblem {
        name: "circle-abs",
        kind: StepKind::ProxPoint,
        oracle: Arc::new(ProblemOracle::Plain(obj)),
        known_critical_points: vec![
            (point(1.0), CriticalKind::Saddle),
            (point(-1.0), CriticalKind::LocalMin),
            (point(0.5), CriticalKind::LocalMax),
        ],
        ell: 2.0,
        beta: 0.0,
        mu: 2.0,
        rho: 10.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: 2.0,
            lambda: Some(0.2),
            start: point(1.0),
        },
    }
}

/// f(x) = ||x||^2 / 2: the convex sanity instance.
pub fn make_quadratic(d: usize) -> BenchmarkProblem {
    let obj = NonsmoothObjective::new(d, 0.0, Arc::new(|x: &[f64]| 0.5 * dot(x, x)))
        .with_prox(Arc::new(|x: &[f64], lam: f64| {
            x.iter().map(|v| v / (1.0 + lam)).collect()
        }));
    let mut start = vec![0.0; d];
    start[0] = 2.0;
    BenchmarkProblem {
        name: "quadratic",
        kind: StepKind::ProxPoint,
        oracle: Arc::new(ProblemOracle::Plain(obj)),
        known_critical_points: vec![(vec![0.0; d], CriticalKind::LocalMin)],
        ell: 0.0,
        beta: 0.0,
        mu: 0.0,
        rho: 1.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: 2.0,
            lambda: Some(0.5),
            start,
        },
    }
}

/// f(x) = |x| in one dimension.
pub fn make_abs_1d() -> BenchmarkProblem {
    let obj = NonsmoothObjective::new(1, 0.0, Arc::new(|x: &[f64]| x[0].abs())).with_prox(
        Arc::new(|x: &[f64], lam: f64| vec![x[0].signum() * (x[0].abs() - lam).max(0.0)]),
    );
    BenchmarkProblem {
        name: "abs",
        kind: StepKind::ProxPoint,
        oracle: Arc::new(ProblemOracle::Plain(obj)),
        known_critical_points: vec![(vec![0.0], CriticalKind::LocalMin)],
        ell: 0.0,
        beta: 0.0,
        mu: 0.0,
        rho: 1.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: 2.0,
            lambda: Some(0.5),
            start: vec![2.0],
        },
    }
}

/// f(x) = |x^2 - 1| in one dimension: minima at +-1, local max at 0. The
/// exact prox evaluates both per-piece stationary points and both kinks.
pub fn make_square_abs_1d() -> BenchmarkProblem {
    let value = |x: &[f64]| (x[0] * x[0] - 1.0).abs();
    let prox = |x: &[f64], lam: f64| -> Vec<f64> {
        let sub = |y: f64| (y * y - 1.0).abs() + (y - x[0]) * (y - x[0]) / (2.0 * lam);
        let mut best = x[0] / (1.0 + 2.0 * lam);
        let mut best_val = sub(best);
        let mut consider = |y: f64| {
            let v = sub(y);
            if v < best_val {
                best_val = v;
                best = y;
            }
        };
        if lam < 0.5 {
            consider(x[0] / (1.0 - 2.0 * lam));
        }
        consider(1.0);
        consider(-1.0);
        vec![best]
    };
    let obj = NonsmoothObjective::new(1, 2.0, Arc::new(value)).with_prox(Arc::new(prox));
    BenchmarkProblem {
        name: "square-abs",
        kind: StepKind::ProxPoint,
        oracle: Arc::new(ProblemOracle::Plain(obj)),
        known_critical_points: vec![
            (vec![1.0], CriticalKind::LocalMin),
            (vec![-1.0], CriticalKind::LocalMin),
            (vec![0.0], CriticalKind::LocalMax),
        ],
        ell: 2.0,
        beta: 0.0,
        mu: 2.0,
        rho: 10.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: 2.0,
            lambda: Some(0.2),
            start: vec![0.05],
        },
    }
}

/// g(x) = ||Ax - b||^2/2 - (c/2)||x||^2 with m = tau |.|_1: the prox-gradient
/// class instance. beta is lam_max(A^T A) + c; the negative quadratic makes g
/// nonconvex for c > 0.
pub fn make_lasso_nonconvex(
    a: Mat,
    b: Vec<f64>,
    c_neg: f64,
    tau: f64,
) -> Result<BenchmarkProblem> {
    if a.rows != b.len() {
        return Err(crate::error::ProxError::parameter(
            "A and b have mismatched row counts",
        ));
    }
    if tau <= 0.0 || c_neg < 0.0 {
        return Err(crate::error::ProxError::parameter(
            "tau must be positive and c nonnegative",
        ));
    }
    let d = a.cols;
    let beta = a.spectral_norm_sq() + c_neg;
    let av = a.clone();
    let bv = b.clone();
    let value = move |x: &[f64]| {
        let r: f64 = av
            .matvec(x)
            .iter()
            .zip(&bv)
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        0.5 * r - 0.5 * c_neg * dot(x, x)
    };
    let ag = a.clone();
    let bg = b;
    let gradient = move |x: &[f64]| {
        let mut res = ag.matvec(x);
        for (ri, bi) in res.iter_mut().zip(&bg) {
            *ri -= bi;
        }
        let mut g = ag.tmatvec(&res);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi -= c_neg * xi;
        }
        g
    };
    let m = NonsmoothObjective::new(d, 0.0, Arc::new(move |x: &[f64]| {
        tau * x.iter().map(|v| v.abs()).sum::<f64>()
    }))
    .with_prox(Arc::new(move |x: &[f64], lam: f64| {
        x.iter()
            .map(|v| v.signum() * (v.abs() - tau * lam).max(0.0))
            .collect()
    }));
    let obj = CompositeSmoothPlusProx::new(d, Arc::new(value), Arc::new(gradient), beta, m);
    let mut start = vec![0.0; d];
    if d > 0 {
        start[0] = 0.0;
    }
    Ok(BenchmarkProblem {
        name: "lasso",
        kind: StepKind::ProxGradient,
        oracle: Arc::new(ProblemOracle::SmoothPlusProx(obj)),
        known_critical_points: vec![],
        ell: beta,
        beta,
        mu: 0.0,
        rho: 1.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: 1.0,
            lambda: None,
            start,
        },
    })
}

/// The frozen 3x3 lasso instance used by the benchmark suite, with its
/// minimizer labeled (computed offline to high precision).
pub fn make_lasso_default() -> BenchmarkProblem {
    let a = Mat::new(
        3,
        3,
        vec![1.0, 0.2, 0.0, 0.0, 0.9, 0.3, 0.1, 0.0, 1.1],
    );
    let b = vec![1.0, -0.5, 0.7];
    let mut p = make_lasso_nonconvex(a, b, 0.1, 0.5).expect("frozen instance is valid");
    p.known_critical_points = vec![(
        vec![6.211686267247e-01, 0.0, 4.305954255024e-02],
        CriticalKind::LocalMin,
    )];
    p
}

/// Robust phase retrieval: f(x) = (1/m) sum |(a_i.x)^2 - b_i| with seeded
/// Gaussian rows and b from a planted signal, expressed as h(F(x)) with
/// h = mean-l1 distance to b and F the squared measurements. +-x_true are
/// global minima (f = 0) and the origin is a local maximum.
pub fn make_robust_phase_retrieval(
    d: usize,
    num_measurements: usize,
    x_true: &[f64],
    seed: u64,
) -> BenchmarkProblem {
    assert!(d >= 1 && d <= 10, "desk-scale instances only");
    assert_eq!(x_true.len(), d);
    assert!(num_measurements >= 1);
    let m = num_measurements;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            a.set(i, j, StandardNormal.sample(&mut rng));
        }
    }
    let b: Vec<f64> = a.matvec(x_true).iter().map(|v| v * v).collect();
    let mean_b = b.iter().sum::<f64>() / m as f64;
    let max_row_sq = (0..m)
        .map(|i| dot(a.row(i), a.row(i)))
        .fold(0.0_f64, f64::max);
    let jacobian_lipschitz = 2.0 * max_row_sq;

    let af = a.clone();
    let inner = move |x: &[f64]| -> Vec<f64> {
        af.matvec(x).iter().map(|v| v * v).collect()
    };
    let aj = a.clone();
    let jac = move |x: &[f64]| -> Mat {
        let t = aj.matvec(x);
        let mut j = Mat::zeros(m, aj.cols);
        for i in 0..m {
            for c in 0..aj.cols {
                j.set(i, c, 2.0 * t[i] * aj.get(i, c));
            }
        }
        j
    };
    let bh = b.clone();
    let h_value = move |z: &[f64]| -> f64 {
        z.iter().zip(&bh).map(|(zi, bi)| (zi - bi).abs()).sum::<f64>() / m as f64
    };
    let bp = b.clone();
    let h_prox = move |q: &[f64], t: f64| -> Vec<f64> {
        let thr = t / m as f64;
        q.iter()
            .zip(&bp)
            .map(|(qi, bi)| {
                let s = qi - bi;
                bi + s.signum() * (s.abs() - thr).max(0.0)
            })
            .collect()
    };
    let bc = b.clone();
    let h_conj = move |w: &[f64]| -> f64 { dot(w, &bc) };
    let bound = 1.0 / m as f64;
    let h_proj = move |w: &[f64]| -> Vec<f64> {
        w.iter().map(|v| v.clamp(-bound, bound)).collect()
    };
    let outer = OuterConvex::new(Arc::new(h_value), Arc::new(h_prox))
        .with_conjugate(Arc::new(h_conj), Arc::new(h_proj));
    let obj = CompositeOuterInner::new(
        d,
        m,
        Arc::new(inner),
        Arc::new(jac),
        outer,
        None,
        1.0,
        jacobian_lipschitz,
    );
    let beta = obj.model_beta();
    BenchmarkProblem {
        name: "phase",
        kind: StepKind::ProxLinear,
        oracle: Arc::new(ProblemOracle::OuterInner(obj)),
        known_critical_points: vec![
            (x_true.to_vec(), CriticalKind::LocalMin),
            (x_true.iter().map(|v| -v).collect(), CriticalKind::LocalMin),
            (vec![0.0; d], CriticalKind::LocalMax),
        ],
        ell: beta,
        beta,
        mu: 0.0,
        rho: 10.0,
        recommended: Recommended {
            eps: 0.1,
            delta: 0.1,
            c: 4.0,
            gap: mean_b.max(0.1),
            lambda: None,
            start: vec![0.0; d],
        },
    }
}

/// The frozen d=2, m=8 phase instance with planted signal (1, -0.5).
pub fn make_phase_default() -> BenchmarkProblem {
    make_robust_phase_retrieval(2, 8, &[1.0, -0.5], 7)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moreau;
    use crate::oracles::{check_weak_convexity, gradient_lipschitz_probe, jacobian_fd_probe};
    use crate::steps::{step_pgm, step_plm};
    use rand::Rng;

    #[test]
    fn circle_values() {
        let p = make_circle_abs(2);
        assert_eq!(p.oracle.value(&[1.0, 0.0]), 1.0);
        assert_eq!(p.oracle.value(&[-1.0, 0.0]), -1.0);
        assert_eq!(p.oracle.value(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn circle_weak_convexity_modulus() {
        let p = make_circle_abs(2);
        let ProblemOracle::Plain(o) = p.oracle.as_ref() else { unreachable!() };
        let r = check_weak_convexity(o, 300, 21).unwrap();
        assert!(r.holds, "violation {}", r.worst_violation);
    }

    #[test]
    fn circle_prox_value_dominance() {
        // the analytic prox value is never beaten by random candidates
        let p = make_circle_abs(2);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let lam = rng.gen_range(0.02..0.45);
            let y = moreau::moreau_prox(&p.oracle, lam, &x, 1e-10).unwrap();
            let sub = |z: &[f64]| p.oracle.value(z) + dist(z, &x).powi(2) / (2.0 * lam);
            let base = sub(&y);
            for _ in 0..50 {
                let z = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                assert!(base <= sub(&z) + 1e-12, "beaten at x={x:?} lam={lam}");
            }
        }
    }

    #[test]
    fn circle_critical_points_are_fixed() {
        let p = make_circle_abs(2);
        for lam in [0.05, 0.1, 0.2, 0.25] {
            for (pt, _) in &p.known_critical_points {
                let y = moreau::moreau_prox(&p.oracle, lam, pt, 1e-10).unwrap();
                assert!(
                    dist(&y, pt) <= 1e-12,
                    "{pt:?} moved to {y:?} at lam {lam}"
                );
            }
        }
    }

    #[test]
    fn circle_grid_scan_gradient_vanishes_only_at_critical_points() {
        let p = make_circle_abs(2);
        let lam = 0.2;
        let mut x = [0.0; 2];
        let mut i = -20;
        while i <= 20 {
            let mut j = -20;
            while j <= 20 {
                x[0] = i as f64 * 0.1;
                x[1] = j as f64 * 0.1;
                let s = moreau::moreau_grad(&p.oracle, lam, &x, 1e-10).unwrap();
                let gn = norm(&s.envelope_gradient);
                if gn <= 0.05 {
                    let near = p
                        .known_critical_points
                        .iter()
                        .any(|(pt, _)| dist(pt, &x) <= 0.25);
                    assert!(near, "spurious stationary point at {x:?} (grad {gn})");
                }
                j += 1;
            }
            i += 1;
        }
    }

    #[test]
    fn circle_higher_dim_construction() {
        let p = make_circle_abs(3);
        assert_eq!(p.dim(), 3);
        let y = moreau::moreau_prox(&p.oracle, 0.2, &[-1.0, 0.0, 0.0], 1e-10).unwrap();
        assert!(dist(&y, &[-1.0, 0.0, 0.0]) <= 1e-12);
    }

    #[test]
    fn circle_schedule_uses_recommended_inputs() {
        let p = make_circle_abs(2);
        let s = p.schedule().unwrap();
        assert_eq!(s.lambda, 0.2);
        assert_eq!(s.eta, 0.2);
        assert_eq!(s.rho, 10.0);
    }

    #[test]
    fn square_abs_prox_matches_grid() {
        let p = make_square_abs_1d();
        for &(x, lam) in &[(1.2, 0.25), (0.05, 0.2), (-0.6, 0.1), (0.0, 0.3)] {
            let y = moreau::moreau_prox(&p.oracle, lam, &[x], 1e-10).unwrap();
            let sub = |z: f64| (z * z - 1.0).abs() + (z - x) * (z - x) / (2.0 * lam);
            let mut best = -2.0;
            let mut bv = sub(best);
            let mut z = -2.0;
            while z <= 2.0 {
                let v = sub(z);
                if v < bv {
                    bv = v;
                    best = z;
                }
                z += 1e-4;
            }
            assert!((y[0] - best).abs() <= 1e-3, "x={x} lam={lam}: {} vs {best}", y[0]);
        }
    }

    #[test]
    fn lasso_analytic_1d() {
        // A=1, b=2, c=0, tau=1: the soft-threshold solution is 1
        let p = make_lasso_nonconvex(Mat::new(1, 1, vec![1.0]), vec![2.0], 0.0, 1.0).unwrap();
        let ProblemOracle::SmoothPlusProx(o) = p.oracle.as_ref() else { unreachable!() };
        let mut x = vec![0.0];
        for _ in 0..200 {
            x = step_pgm(o, 0.5, &x, 1e-10).unwrap();
        }
        assert!((x[0] - 1.0).abs() <= 1e-9, "got {}", x[0]);
    }

    #[test]
    fn lasso_zero_data_minimum_at_origin() {
        let p = make_lasso_nonconvex(
            Mat::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
            vec![0.0, 0.0],
            0.0,
            0.5,
        )
        .unwrap();
        let ProblemOracle::SmoothPlusProx(o) = p.oracle.as_ref() else { unreachable!() };
        let mut x = vec![1.0, -1.0];
        for _ in 0..100 {
            x = step_pgm(o, 0.5, &x, 1e-10).unwrap();
        }
        assert!(norm(&x) <= 1e-9);
    }

    #[test]
    fn lasso_default_constants_and_minimizer() {
        let p = make_lasso_default();
        let ProblemOracle::SmoothPlusProx(o) = p.oracle.as_ref() else { unreachable!() };
        assert!((p.beta - 1.599444).abs() <= 1e-4, "beta {}", p.beta);
        let probe = gradient_lipschitz_probe(o, 200, 23);
        assert!(probe <= p.beta * (1.0 + 1e-6), "probe {probe}");
        // the labeled minimizer is a fixed point of the step for any eta
        let (min_pt, _) = &p.known_critical_points[0];
        let y = step_pgm(o, 0.1, min_pt, 1e-10).unwrap();
        assert!(dist(&y, min_pt) <= 1e-8, "moved {:?}", y);
    }

    #[test]
    fn phase_symmetry_and_planted_values() {
        let p = make_phase_default();
        let x = [0.37, -0.91];
        let nx = [-0.37, 0.91];
        assert_eq!(p.oracle.value(&x).to_bits(), p.oracle.value(&nx).to_bits());
        assert!(p.oracle.value(&[1.0, -0.5]).abs() <= 1e-12);
        assert!(p.oracle.value(&[-1.0, 0.5]).abs() <= 1e-12);
        // f(0) = mean(b) = recommended gap
        assert!((p.oracle.value(&[0.0, 0.0]) - p.recommended.gap).abs() <= 1e-12);
    }

    #[test]
    fn phase_jacobian_consistency() {
        let p = make_phase_default();
        let ProblemOracle::OuterInner(o) = p.oracle.as_ref() else { unreachable!() };
        let worst = jacobian_fd_probe(o, 20, 24).unwrap();
        assert!(worst <= 1e-5, "jacobian mismatch {worst}");
    }

    #[test]
    fn phase_critical_points_are_fixed() {
        let p = make_phase_default();
        let ProblemOracle::OuterInner(o) = p.oracle.as_ref() else { unreachable!() };
        let eta = 1.0 / (3.7 * p.beta);
        for (pt, _) in &p.known_critical_points {
            let y = step_plm(o, eta, pt, 1e-9).unwrap();
            assert!(dist(&y, pt) <= 1e-7, "{pt:?} moved to {y:?}");
        }
    }

    #[test]
    fn phase_plm_recovers_signal() {
        let p = make_phase_default();
        let ProblemOracle::OuterInner(o) = p.oracle.as_ref() else { unreachable!() };
        let eta = 1.0 / (3.7 * p.beta);
        let mut x = vec![0.8, -0.9];
        for _ in 0..200 {
            x = step_plm(o, eta, &x, 1e-8).unwrap();
        }
        assert!(
            p.near_labeled_min(&x, 1e-6),
            "did not reach a planted signal: {x:?}"
        );
    }

    #[test]
    fn escape_helper_matches_labels() {
        let p = make_circle_abs(2);
        assert!(p.near_labeled_min(&[-1.0005, 0.0], 1e-3));
        assert!(!p.near_labeled_min(&[1.0, 0.0], 1e-3));
    }
}
