//! Acceptance gate for the crate: one test per release criterion, each
//! printing a single pass/fail line (visible with --nocapture). Tolerances
//! are part of the contract; failures carry the measured quantity.

use proxescape::certify::{certify_point, dense_jacobian, estimate_lambda_max, CertifyTols};
use proxescape::driver::{
    compute_schedule, improve_or_localize_violation, run, summarize, ScheduleParams,
    StationarityMode, Trajectory,
};
use proxescape::linalg::{dist, eig2_max_real, norm};
use proxescape::moreau::{envelope_grad_fd_check, moreau_grad};
use proxescape::oracles::ProblemOracle;
use proxescape::problems::{
    make_abs_1d, make_circle_abs, make_lasso_default, make_phase_default, make_quadratic,
    make_square_abs_1d, BenchmarkProblem,
};
use proxescape::records::{read_trajectory_csv, write_trajectory_csv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(tag: &str, ok: bool, detail: &str) {
    println!("acceptance {tag}: {} ({detail})", if ok { "pass" } else { "FAIL" });
    assert!(ok, "{tag}: {detail}");
}

fn seeded_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

fn run_ok(
    op: &proxescape::steps::StepOperator,
    x0: &[f64],
    params: &ScheduleParams,
    seed: u64,
    mode: StationarityMode,
) -> Trajectory {
    run(op, x0, params, seed, mode).unwrap_or_else(|f| panic!("run failed: {}", f.error))
}

#[test]
fn a1_moreau_identities() {
    let cases: [(BenchmarkProblem, f64, f64); 4] = [
        (make_quadratic(2), 0.5, 1e-6),
        (make_abs_1d(), 0.5, 1e-3),
        (make_square_abs_1d(), 0.2, 1e-3),
        (make_circle_abs(2), 0.2, 1e-3),
    ];
    let mut worst_fd = 0.0_f64;
    for (idx, (p, lam, fd_tol)) in cases.iter().enumerate() {
        for x in seeded_points(p.dim(), 100, 11 + idx as u64) {
            let st = moreau_grad(&p.oracle, *lam, &x, 1e-10).unwrap();
            for i in 0..x.len() {
                let direct = (x[i] - st.prox_point[i]) / lam;
                assert_eq!(
                    st.envelope_gradient[i].to_bits(),
                    direct.to_bits(),
                    "{}: gradient identity not bit-exact at {x:?}",
                    p.name
                );
            }
            assert!(
                st.envelope_value <= p.oracle.value(&x) + 1e-8,
                "{}: envelope above the objective at {x:?}",
                p.name
            );
            let dev = envelope_grad_fd_check(&p.oracle, *lam, &x, 1e-4, 1e-10).unwrap();
            worst_fd = worst_fd.max(dev / fd_tol);
            assert!(dev <= *fd_tol, "{}: fd deviation {dev} at {x:?}", p.name);
        }
    }
    report(
        "1 moreau identities",
        true,
        &format!("400 points, worst fd deviation {:.1e}x its bound", worst_fd),
    );
}

#[test]
fn a2_ppa_is_envelope_gradient_descent() {
    let p = make_circle_abs(2);
    let lam = 0.2;
    let op = p.step_operator(lam, 1e-10).unwrap();
    let mut worst = 0.0_f64;
    for x in seeded_points(2, 100, 23) {
        let s = op.apply(&x).unwrap();
        let st = moreau_grad(&p.oracle, lam, &x, 1e-10).unwrap();
        let gd: Vec<f64> = x
            .iter()
            .zip(&st.envelope_gradient)
            .map(|(xi, gi)| xi - lam * gi)
            .collect();
        worst = worst.max(dist(&s, &gd));
    }
    report(
        "2 ppa equals envelope gradient descent",
        worst <= 1e-8,
        &format!("worst deviation {worst:.2e} (bound 1e-8)"),
    );
}

fn decrease_violations(traj: &Trajectory, params: &ScheduleParams) -> (f64, f64) {
    let mut dec = f64::NEG_INFINITY;
    let mut step = f64::NEG_INFINITY;
    for w in traj.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let g2 = a.grad_map_norm * a.grad_map_norm;
        dec = dec.max(b.f_lambda - (a.f_lambda - params.theta2 / (2.0 * params.l) * g2));
        let d = dist(&b.x, &a.x);
        step = step.max(d * d - params.theta1 * params.eta * params.eta * g2);
    }
    (dec, step)
}

#[test]
fn a3_sufficient_decrease() {
    let circle = make_circle_abs(2);
    let lasso = make_lasso_default();
    let phase = make_phase_default();
    // The composite case probes the envelope through a nested inner solver at
    // 10x tighter tolerance, so 1e-7 keeps its certificates reachable while the
    // induced error in the checked quantities stays orders below the slack.
    let cases = [
        (&circle, vec![1.0, 0.0], 1e-8),
        (&lasso, lasso.recommended.start.clone(), 1e-8),
        (&phase, vec![1.3, 0.2], 1e-7),
    ];
    let mut worst_dec = f64::NEG_INFINITY;
    let mut worst_step = f64::NEG_INFINITY;
    for (p, x0, inner_tol) in cases {
        let params = ScheduleParams::general(
            p.recommended.eps,
            p.recommended.delta,
            p.beta,
            p.mu,
            p.rho,
            p.dim(),
            p.recommended.gap,
            None,
            None,
        )
        .unwrap()
        .with_overrides(None, None, None, None, Some(500))
        .unwrap();
        let op = p.step_operator(params.eta, inner_tol).unwrap();
        let traj = run_ok(&op, &x0, &params, 0, StationarityMode::Envelope);
        let (dec, step) = decrease_violations(&traj, &params);
        worst_dec = worst_dec.max(dec);
        worst_step = worst_step.max(step);
        assert!(dec <= 1e-6, "{}: decrease violation {dec:.3e}", p.name);
        assert!(step <= 1e-6, "{}: step-bound violation {step:.3e}", p.name);
    }
    report(
        "3 sufficient decrease",
        true,
        &format!("worst decrease viol {worst_dec:.2e}, worst step viol {worst_step:.2e} (bound 1e-6)"),
    );
}

#[test]
fn a4_improve_or_localize_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let circle = make_circle_abs(2);
    let circle_params = circle
        .schedule()
        .unwrap()
        .with_overrides(None, None, None, None, Some(1000))
        .unwrap();
    let circle_op = circle.step_operator(circle_params.eta, 1e-10).unwrap();
    let lasso = make_lasso_default();
    let lasso_params = ScheduleParams::general(
        0.1, 0.1, lasso.beta, lasso.mu, lasso.rho, 3, 1.0, None, None,
    )
    .unwrap()
    .with_overrides(None, None, None, None, Some(500))
    .unwrap();
    let lasso_op = lasso.step_operator(lasso_params.eta, 1e-8).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let runs = [
        ("circle", run_ok(&circle_op, &[1.0, 0.0], &circle_params, 0, StationarityMode::Envelope), &circle_params),
        ("lasso", run_ok(&lasso_op, &lasso.recommended.start, &lasso_params, 0, StationarityMode::Envelope), &lasso_params),
    ];
    for (name, traj, params) in &runs {
        let path = dir.path().join(format!("{name}.csv"));
        write_trajectory_csv(&path, &traj.points).unwrap();
        let restored = read_trajectory_csv(&path).unwrap();
        assert_eq!(restored.len(), traj.points.len());
        let v = improve_or_localize_violation(&restored, params);
        worst = worst.max(v);
        assert!(v <= 1e-4, "{name}: localization violation {v:.3e}");
    }
    report(
        "4 improve or localize",
        true,
        &format!("worst violation over persisted runs {worst:.2e} (bound 1e-4)"),
    );
}

#[test]
fn a5_saddle_escape_monte_carlo() {
    let p = make_circle_abs(2);
    let params = p
        .schedule()
        .unwrap()
        .with_overrides(None, None, None, None, Some(2000))
        .unwrap();
    let op = p.step_operator(params.eta, 1e-10).unwrap();
    let mut escaped = 0;
    for seed in 0..20 {
        let traj = run_ok(&op, &[1.0, 0.0], &params, seed, StationarityMode::Envelope);
        if p.near_labeled_min(&traj.final_point().x, 1e-3) {
            escaped += 1;
        }
    }
    let pinned_params = p
        .schedule()
        .unwrap()
        .with_overrides(None, None, Some(0.0), None, Some(1000))
        .unwrap();
    let pinned = run_ok(&op, &[1.0, 0.0], &pinned_params, 0, StationarityMode::Envelope);
    let max_drift = pinned
        .points
        .iter()
        .map(|pt| dist(&pt.x, &[1.0, 0.0]))
        .fold(0.0_f64, f64::max);
    let ok = escaped >= 18 && max_drift <= 1e-8;
    report(
        "5 saddle escape",
        ok,
        &format!("escaped {escaped}/20 (need 18), pinned drift {max_drift:.2e} (bound 1e-8)"),
    );
}

#[test]
fn a6_certification_at_labeled_points() {
    let p = make_circle_abs(2);
    let lam = 0.2;
    let op = p.step_operator(lam, 1e-10).unwrap();
    let tols = CertifyTols::default();
    let saddle = certify_point(&op, &[1.0, 0.0], lam, 0.1, p.rho, &tols, 0).unwrap();
    let minimum = certify_point(&op, &[-1.0, 0.0], lam, 0.1, p.rho, &tols, 0).unwrap();
    let mut worst_gap = 0.0_f64;
    for pt in [[1.0, 0.0], [-1.0, 0.0]] {
        let est = estimate_lambda_max(&op, &pt, &tols, 0).unwrap();
        let dense = dense_jacobian(&op, &pt, est.fd_step).unwrap();
        let eig = eig2_max_real(&dense).expect("2x2 eigenvalue");
        worst_gap = worst_gap.max((est.lambda_max - eig).abs());
    }
    let ok = !saddle.is_eps_local_min
        && saddle.lambda_max_s > saddle.threshold
        && minimum.is_eps_local_min
        && worst_gap <= 1e-4;
    report(
        "6 certification",
        ok,
        &format!(
            "saddle lam_max {:.4} > {:.4} rejected, min certified {}, power vs dense gap {worst_gap:.2e}",
            saddle.lambda_max_s, saddle.threshold, minimum.is_eps_local_min
        ),
    );
}

#[test]
fn a7_certified_fraction_full_budget() {
    let p = make_circle_abs(2);
    let params = p
        .schedule()
        .unwrap()
        .with_overrides(None, None, None, None, Some(2000))
        .unwrap();
    let op = p.step_operator(params.eta, 1e-10).unwrap();
    let tols = CertifyTols::default();
    let mut good = 0;
    let mut min_frac = 1.0_f64;
    for seed in 0..20 {
        let traj = run_ok(&op, &[1.0, 0.0], &params, seed, StationarityMode::Envelope);
        let s = summarize(&traj, &op, &params, &tols).unwrap();
        min_frac = min_frac.min(s.certified_fraction);
        if s.certified_fraction >= 0.5 {
            good += 1;
        }
    }
    report(
        "7 certified fraction",
        good >= 18,
        &format!("{good}/20 seeds at fraction >= 0.5 (need 18), minimum fraction {min_frac:.3}"),
    );
}

/// Strong convexity of the linearized subproblem is isotropic (the only
/// curvature is ||y - x||^2 / (2 eta)), so a grid argmin lies within about one
/// step of the true minimizer and each refinement window of 4x the previous
/// step keeps it interior.
fn grid_refine(
    phi: &dyn Fn(f64, f64) -> f64,
    mut cx: f64,
    mut cy: f64,
    mut half: f64,
    stages: usize,
) -> (f64, f64) {
    let n = 100;
    for stage in 0..stages {
        let step = half / n as f64;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for i in 0..=2 * n {
            let y1 = cx - half + i as f64 * step;
            for j in 0..=2 * n {
                let y2 = cy - half + j as f64 * step;
                let v = phi(y1, y2);
                if v < best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (_, bi, bj) = best;
        if stage > 0 {
            assert!(
                bi > 0 && bi < 2 * n && bj > 0 && bj < 2 * n,
                "grid argmin hit the stage-{stage} window boundary"
            );
        }
        cx = cx - half + bi as f64 * step;
        cy = cy - half + bj as f64 * step;
        half = 4.0 * step;
    }
    (cx, cy)
}

#[test]
fn a8_plm_matches_grid_brute_force() {
    let p = make_phase_default();
    let ProblemOracle::OuterInner(o) = p.oracle.as_ref() else {
        panic!("phase oracle is outer-inner")
    };
    let eta = 1.0 / (3.7 * p.beta);
    let op = p.step_operator(eta, 1e-8).unwrap();
    let mut worst = 0.0_f64;
    for x in seeded_points(2, 20, 31) {
        let y = op.apply(&x).unwrap();
        let c = o.inner_map(&x);
        let j = o.jacobian(&x);
        let phi = |y1: f64, y2: f64| -> f64 {
            let dy = [y1 - x[0], y2 - x[1]];
            let z: Vec<f64> = (0..c.len())
                .map(|r| c[r] + j.get(r, 0) * dy[0] + j.get(r, 1) * dy[1])
                .collect();
            o.outer().value(&z) + (dy[0] * dy[0] + dy[1] * dy[1]) / (2.0 * eta)
        };
        let (gx, gy) = grid_refine(&phi, x[0], x[1], 2.0, 4);
        worst = worst.max(dist(&y, &[gx, gy]));
    }
    report(
        "8 plm vs grid brute force",
        worst <= 1e-4,
        &format!("worst solver-grid distance {worst:.2e} over 20 points (bound 1e-4)"),
    );
}

#[test]
fn a9_schedule_closed_forms() {
    let s = compute_schedule(0.1, 0.1, 1.0, 0.0, 1.0, 2, 2.0, None, Some(4.0)).unwrap();
    // independent recomputation: lambda = 1/(L/2 + (beta+2mu)/4) = 4/9,
    // theta1 = (L - 1/lam + beta) lam^2 L^2 / (L - 1/lam - beta) = 704/60.75,
    // theta2 = (1/lam - beta - mu) L lam / (1/lam + L - beta - 2mu) = 20/47.25
    let th1 = 704.0 / 60.75;
    let th2 = 20.0 / 47.25;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let ok = s.lambda == 4.0 / 9.0
        && s.eta == 0.25
        && rel(s.theta1, th1) <= 1e-12
        && rel(s.theta2, th2) <= 1e-12;
    report(
        "9 schedule purity",
        ok,
        &format!(
            "lambda {} (4/9 exact), theta1 rel {:.1e}, theta2 rel {:.1e} (12 digits)",
            s.lambda,
            rel(s.theta1, th1),
            rel(s.theta2, th2)
        ),
    );
}
