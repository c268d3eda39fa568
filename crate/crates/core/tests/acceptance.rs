//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary so the lines are always printed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{gaussian, naive_g, naive_matvec, oracle_solver, random_dataset, random_dual, rng};
use mtfl_dpc::dataset::stack_response;
use mtfl_dpc::dual::{dual_ball, dual_feasibility_violation, dual_from_primal, grad_g_ell, lambda_max, all_g, ReferenceSolution};
use mtfl_dpc::qp1qc::{solve, solve_with, Branch, NewtonOptions};
use mtfl_dpc::screening::{solve_path, PathOptions, PathReport, ZERO_ROW_THRESHOLD};
use mtfl_dpc::solver::{reduce_frobenius, reduce_weighted};
use mtfl_dpc::{
    fit, generate, DualPoint, LambdaGrid, MultiTaskDataset, Qp1qcInstance, SolverConfig, SynthConfig, SynthKind,
    WeightMatrix,
};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct PathRun {
    kind: SynthKind,
    seed: u64,
    ds: MultiTaskDataset,
    screened: PathReport,
    oracle: PathReport,
}

fn kind_name(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::Synthetic1 => "S1",
        SynthKind::Synthetic2 => "S2",
    }
}

fn path_runs() -> Vec<PathRun> {
    let mut runs = Vec::new();
    for kind in [SynthKind::Synthetic1, SynthKind::Synthetic2] {
        for seed in 0..10 {
            let ds = generate(&SynthConfig::new(kind, 10, 30, 1000, seed)).unwrap().dataset;
            let grid = LambdaGrid::log_spaced(lambda_max(&ds).unwrap().value, 100, 0.01).unwrap();
            let screened = solve_path(&ds, &grid, &SolverConfig::with_tol(1e-8), &PathOptions::default())
                .unwrap_or_else(|e| panic!("{} seed {seed}: {e}", kind_name(kind)));
            let oracle = solve_path(&ds, &grid, &oracle_solver(1e-8), &PathOptions::unscreened())
                .unwrap_or_else(|e| panic!("{} seed {seed} oracle: {e}", kind_name(kind)));
            runs.push(PathRun {
                kind,
                seed,
                ds,
                screened,
                oracle,
            });
        }
    }
    runs
}

fn row_max_abs(w: &WeightMatrix, l: usize) -> f64 {
    (0..w.n_tasks()).map(|t| w.get(l, t).abs()).fold(0.0, f64::max)
}

fn safety(runs: &[PathRun]) -> Outcome {
    let mut violations = 0;
    let mut screened_total = 0;
    for run in runs {
        for (s, o) in run.screened.records.iter().zip(&run.oracle.records) {
            let mask = s.mask.as_ref().expect("screened path records a mask");
            for (l, &inactive) in mask.inactive().iter().enumerate() {
                if inactive {
                    screened_total += 1;
                    if row_max_abs(&o.weights, l) > ZERO_ROW_THRESHOLD {
                        violations += 1;
                        eprintln!("  violation: {} seed {} lambda_rel {} feature {l}", kind_name(run.kind), run.seed, s.lambda_rel);
                    }
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations among {screened_total} screened (feature, lambda) pairs over {} paths", runs.len()),
    )
}

fn equivalence(runs: &[PathRun]) -> Outcome {
    let mut worst: f64 = 0.0;
    for run in runs {
        for (s, o) in run.screened.records.iter().zip(&run.oracle.records) {
            worst = worst.max((s.objective - o.objective).abs() / o.objective.abs());
        }
    }
    outcome(worst <= 1e-6, format!("max relative objective difference {worst:.3e}"))
}

fn rejection(runs: &[PathRun]) -> Outcome {
    let mut passed = true;
    let mut worst_mean: f64 = 1.0;
    let mut worst_high: f64 = 1.0;
    for run in runs.iter().filter(|r| r.kind == SynthKind::Synthetic1) {
        let mut all = Vec::new();
        let mut high = Vec::new();
        for (s, o) in run.screened.records.iter().zip(&run.oracle.records) {
            let inactive = (0..run.ds.n_features())
                .filter(|&l| row_max_abs(&o.weights, l) <= ZERO_ROW_THRESHOLD)
                .count();
            if inactive == 0 {
                continue;
            }
            let ratio = s.n_screened as f64 / inactive as f64;
            all.push(ratio);
            if s.lambda_rel >= 0.3 {
                high.push(ratio);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m_all, m_high) = (mean(&all), mean(&high));
        worst_mean = worst_mean.min(m_all);
        worst_high = worst_high.min(m_high);
        passed &= m_all >= 0.7 && m_high >= 0.9;
    }
    outcome(
        passed,
        format!("lowest per-seed mean {worst_mean:.4} over the grid, {worst_high:.4} for lambda/lambda_max >= 0.3"),
    )
}

fn speedup() -> Outcome {
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic1, 10, 30, 5000, 0)).unwrap().dataset;
    let grid = LambdaGrid::log_spaced(lambda_max(&ds).unwrap().value, 100, 0.01).unwrap();
    let cfg = SolverConfig::with_tol(1e-6);
    let with = solve_path(&ds, &grid, &cfg, &PathOptions::default()).unwrap();
    let without = solve_path(&ds, &grid, &cfg, &PathOptions::unscreened()).unwrap();
    let (t_with, t_without) = (with.total_time(), without.total_time());
    let overhead = with.total_screen_time() / t_with;
    outcome(
        t_with < t_without && overhead < 0.05,
        format!("with DPC {t_with:.2}s, without {t_without:.2}s, speedup {:.1}x, screening overhead {:.2}%", t_without / t_with, 100.0 * overhead),
    )
}

fn random_instance(r: &mut ChaCha20Rng, t_len: usize) -> Qp1qcInstance {
    let mut norms = Vec::new();
    let mut c = Vec::new();
    for _ in 0..t_len {
        let x: Vec<f64> = (0..3).map(|_| gaussian(r)).collect();
        let o: Vec<f64> = (0..3).map(|_| gaussian(r)).collect();
        norms.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        c.push(x.iter().zip(&o).map(|(a, b)| a * b).sum());
    }
    let delta = 10f64.powf(r.random_range(-2.0..1.0));
    Qp1qcInstance::from_feature(&norms, c, delta).unwrap()
}

/// Best value of `Σ_t (‖x_t‖ |u_t| + |c_t|)²` over random points of the sphere.
fn sampled_max(r: &mut ChaCha20Rng, inst: &Qp1qcInstance, samples: usize) -> f64 {
    let t_len = inst.n_tasks();
    let mut best = f64::NEG_INFINITY;
    let mut u = vec![0.0; t_len];
    for _ in 0..samples {
        u.iter_mut().for_each(|v| *v = gaussian(r));
        let scale = inst.delta() / u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let value: f64 = (0..t_len)
            .map(|t| (inst.a()[t].sqrt() * (u[t] * scale).abs() + inst.c()[t].abs()).powi(2))
            .sum();
        best = best.max(value);
    }
    best
}

fn qp1qc_oracle() -> Outcome {
    let mut r = rng(0x5eed);
    let mut bad = 0;
    let mut t1_bad = 0;
    let mut t1_total = 0;
    for k in 0..1000 {
        let t_len = [1, 2, 3, 5][k % 4];
        let inst = random_instance(&mut r, t_len);
        let s = solve(&inst).unwrap().s_value;
        let oracle = sampled_max(&mut r, &inst, 100_000);
        if !(s >= oracle - 1e-9 && s <= oracle + 1e-2 * (1.0 + oracle)) {
            bad += 1;
        }
        if t_len == 1 {
            t1_total += 1;
            let exact = (inst.a()[0].sqrt() * inst.delta() + inst.c()[0].abs()).powi(2);
            if (s - exact).abs() > 1e-12 * exact.max(1.0) {
                t1_bad += 1;
            }
        }
    }
    outcome(
        bad == 0 && t1_bad == 0,
        format!("{bad}/1000 outside sampling bounds, {t1_bad}/{t1_total} single-task mismatches"),
    )
}

fn newton() -> Outcome {
    let mut r = rng(0x2e3);
    let opts = NewtonOptions {
        tol: 1e-12,
        max_iters: 50,
    };
    let (mut total, mut fast, mut done) = (0, 0, 0);
    while total < 1000 {
        let t_len = r.random_range(2..=8);
        let inst = random_instance(&mut r, t_len);
        if solve(&inst).unwrap().branch != Branch::Newton {
            continue;
        }
        total += 1;
        let Ok(sol) = solve_with(&inst, opts) else { continue };
        let norm = sol.u_star.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - inst.delta()).abs() <= 1e-12 * inst.delta().max(1.0) {
            done += 1;
            if sol.newton_iters <= 10 {
                fast += 1;
            }
        }
    }
    outcome(
        fast >= 990 && done == 1000,
        format!("{fast}/1000 within 10 iterations, {done}/1000 within 50"),
    )
}

fn closed_form(runs: &[PathRun]) -> Outcome {
    let mut passed = true;
    let mut worst_violation: f64 = 0.0;
    let mut checked_interior = 0;
    for run in runs {
        let ds = &run.ds;
        let lm = lambda_max(ds).unwrap();
        for factor in [1.0, 1.5] {
            let lambda = factor * lm.value;
            passed &= fit(ds, lambda, &SolverConfig::default()).unwrap().weights.is_zero();
            let v = dual_feasibility_violation(ds, &stack_response(ds).scaled(1.0 / lambda));
            worst_violation = worst_violation.max(v);
        }
        let mut g = all_g(ds, &stack_response(ds)).unwrap();
        g.sort_by(|a, b| b.total_cmp(a));
        if g[1] < g[0] {
            checked_interior += 1;
            passed &= !fit(ds, 0.99 * lm.value, &SolverConfig::with_tol(1e-8)).unwrap().weights.is_zero();
        }
    }
    passed &= worst_violation <= 1e-12 && checked_interior > 0;
    outcome(
        passed,
        format!("W = 0 at 1.0 and 1.5 lambda_max on {} datasets, max violation {worst_violation:.1e}, W != 0 at 0.99 lambda_max on {checked_interior}", runs.len()),
    )
}

fn distance(a: &DualPoint, b: &DualPoint) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn ball_containment(runs: &[PathRun]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut checks = 0;
    for run in runs {
        let ds = &run.ds;
        let at_max = ReferenceSolution::at_lambda_max(ds).unwrap();
        let records = &run.oracle.records;
        for k in 1..records.len() {
            let theta = dual_from_primal(ds, &records[k].weights, records[k].lambda).unwrap();
            let sequential = ReferenceSolution::from_primal(ds, &records[k - 1].weights, records[k - 1].lambda).unwrap();
            for reference in [&at_max, &sequential] {
                let ball = dual_ball(ds, reference, records[k].lambda).unwrap();
                let dist = distance(&theta, &ball.center);
                checks += 1;
                if dist > ball.radius * (1.0 + 1e-6) {
                    failures += 1;
                }
                if ball.radius > 0.0 {
                    worst = worst.max(dist / ball.radius);
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures}/{checks} outside, max distance/radius {worst:.9}"))
}

fn random_weights(r: &mut ChaCha20Rng, d: usize, t_len: usize) -> WeightMatrix {
    WeightMatrix::from_col_major(d, t_len, (0..d * t_len).map(|_| gaussian(r)).collect()).unwrap()
}

fn naive_loss(ds: &MultiTaskDataset, w: &WeightMatrix, t: usize) -> f64 {
    let fit = naive_matvec(&ds.task(t).x, w.column(t));
    ds.task(t).y.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum::<f64>()
}

fn reductions() -> Outcome {
    let mut r = rng(0x9ed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ds = random_dataset(&mut r, 4, 8, (3, 9));
        let rho: Vec<f64> = (0..4).map(|_| 10f64.powf(r.random_range(-2.0..2.0))).collect();
        let w = random_weights(&mut r, 8, 4);
        let lambda = r.random_range(0.1..3.0);
        let direct: f64 = (0..4).map(|t| naive_loss(&ds, &w, t) / (2.0 * rho[t])).sum::<f64>() + lambda * w.l21_norm();
        let reduced = reduce_weighted(&ds, &rho).unwrap().objective(&w, lambda);
        worst = worst.max((direct - reduced).abs() / direct.abs());
    }
    for _ in 0..20 {
        let ds = random_dataset(&mut r, 4, 8, (3, 9));
        let rho = 10f64.powf(r.random_range(-3.0..1.0));
        let w = random_weights(&mut r, 8, 4);
        let frob: f64 = w.as_col_major().iter().map(|v| v * v).sum();
        let direct: f64 = (0..4).map(|t| 0.5 * naive_loss(&ds, &w, t)).sum::<f64>() + rho * frob;
        let reduced = reduce_frobenius(&ds, rho).unwrap().loss(&w);
        worst = worst.max((direct - reduced).abs() / direct.abs());
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e} over 40 probes"))
}

fn gradient_and_homogeneity() -> Outcome {
    let mut r = rng(0x9a4);
    let mut worst_grad: f64 = 0.0;
    let mut worst_hom: f64 = 0.0;
    for _ in 0..100 {
        let ds = random_dataset(&mut r, 3, 5, (2, 6));
        let theta = random_dual(&mut r, &ds, 1.0);
        let l = r.random_range(0..5);
        let grad = grad_g_ell(&ds, &theta, l).unwrap();
        let h = 1e-5;
        let mut err_sq = 0.0;
        for i in 0..theta.len() {
            let mut plus = theta.values().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (naive_g(&ds, &theta.with_values(plus), l) - naive_g(&ds, &theta.with_values(minus), l)) / (2.0 * h);
            err_sq += (fd - grad.values()[i]).powi(2);
        }
        worst_grad = worst_grad.max(err_sq.sqrt() / grad.norm().max(1e-300));
        let c = r.random_range(-5.0..5.0);
        let g = naive_g(&ds, &theta, l);
        let gc = mtfl_dpc::dual::g_ell(&ds, &theta.scaled(c), l).unwrap();
        worst_hom = worst_hom.max((gc - c * c * g).abs() / (c * c * g).abs().max(1e-300));
    }
    outcome(
        worst_grad <= 1e-5 && worst_hom <= 1e-12,
        format!("gradient rel. error {worst_grad:.2e}, homogeneity rel. error {worst_hom:.2e}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = path_runs();
    let path_secs = start.elapsed().as_secs_f64();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("safety", Box::new(|| safety(&runs))),
        ("equivalence", Box::new(|| equivalence(&runs))),
        ("rejection ratio", Box::new(|| rejection(&runs))),
        ("speedup", Box::new(speedup)),
        ("qp1qc oracle", Box::new(qp1qc_oracle)),
        ("newton convergence", Box::new(newton)),
        ("closed-form regime", Box::new(|| closed_form(&runs))),
        ("ball containment", Box::new(|| ball_containment(&runs))),
        ("reductions", Box::new(reductions)),
        ("gradient and homogeneity", Box::new(gradient_and_homogeneity)),
    ];
    println!("{} paths (T=10, n=30, d=1000, 100 lambdas) solved in {path_secs:.1}s", runs.len());
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} {:>2} {:<26} {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            name,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
