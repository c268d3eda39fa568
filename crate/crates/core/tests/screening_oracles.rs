mod common;

use common::{oracle_solver, random_dataset, rng};
use mtfl_dpc::dataset::stack_response;
use mtfl_dpc::dual::{g_ell, lambda_max, ReferenceSolution};
use mtfl_dpc::screening::{screen_at, solve_path, PathOptions, ReferenceMode, ZERO_ROW_THRESHOLD};
use mtfl_dpc::{fit, generate, DesignMatrix, LambdaGrid, MultiTaskDataset, SolverConfig, SynthConfig, SynthKind};

fn max_abs_row(w: &mtfl_dpc::WeightMatrix, l: usize) -> f64 {
    w.row(l).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[test]
fn limit_near_lambda_max_matches_g_at_lambda_max() {
    let mut r = rng(31);
    for _ in 0..10 {
        let ds = random_dataset(&mut r, 3, 40, (5, 10));
        let lm = lambda_max(&ds).unwrap();
        let theta = stack_response(&ds).scaled(1.0 / lm.value);
        let at_max = ReferenceSolution::at_lambda_max(&ds).unwrap();
        let mask = screen_at(&ds, &at_max, (1.0 - 1e-6) * lm.value).unwrap();
        for l in 0..40 {
            let g = g_ell(&ds, &theta, l).unwrap();
            if g < 1.0 - 1e-3 {
                assert!(mask.inactive()[l], "feature {l} with g = {g} not screened");
            }
            assert!(mask.scores()[l] >= g - 1e-12);
        }
        assert!(!mask.inactive()[lm.argmax]);
    }
}

#[test]
fn null_feature_is_always_screened() {
    let mut r = rng(32);
    let base = random_dataset(&mut r, 2, 3, (4, 4));
    let tasks: Vec<(DesignMatrix, Vec<f64>)> = (0..2)
        .map(|t| {
            let task = base.task(t);
            let mut cols: Vec<f64> = task.x.as_col_major().to_vec();
            cols.extend(vec![0.0; 4]);
            (DesignMatrix::from_col_major(4, 4, cols).unwrap(), task.y.clone())
        })
        .collect();
    let ds = MultiTaskDataset::from_parts(tasks).unwrap();
    let lm = lambda_max(&ds).unwrap().value;
    let grid = LambdaGrid::log_spaced(lm, 10, 0.01).unwrap();
    let report = solve_path(&ds, &grid, &SolverConfig::with_tol(1e-9), &PathOptions::default()).unwrap();
    for rec in &report.records {
        let mask = rec.mask.as_ref().unwrap();
        assert!(mask.inactive()[3]);
        assert_eq!(mask.scores()[3], 0.0);
    }
}

#[test]
fn screened_features_are_zero_in_full_solution() {
    let mut r = rng(33);
    let mut total_screened = 0;
    for _ in 0..20 {
        let ds = random_dataset(&mut r, 5, 200, (20, 30));
        let lm = lambda_max(&ds).unwrap().value;
        let at_max = ReferenceSolution::at_lambda_max(&ds).unwrap();
        let lambda0 = 0.5 * lm;
        let w0 = fit(&ds, lambda0, &oracle_solver(1e-9)).unwrap().weights;
        let seq = ReferenceSolution::from_primal(&ds, &w0, lambda0).unwrap();
        for (reference, lambda) in [(&at_max, 0.8 * lm), (&seq, 0.45 * lm), (&seq, 0.3 * lm)] {
            let mask = screen_at(&ds, reference, lambda).unwrap();
            let w = fit(&ds, lambda, &oracle_solver(1e-8)).unwrap().weights;
            for l in 0..200 {
                if mask.inactive()[l] {
                    total_screened += 1;
                    assert!(max_abs_row(&w, l) <= ZERO_ROW_THRESHOLD, "feature {l} screened but nonzero");
                }
            }
        }
    }
    assert!(total_screened > 1000);
}

#[test]
fn path_safety_and_equivalence_on_five_seeds() {
    for seed in 0..5 {
        let kind = if seed % 2 == 0 { SynthKind::Synthetic1 } else { SynthKind::Synthetic2 };
        let ds = generate(&SynthConfig::new(kind, 5, 20, 300, seed)).unwrap().dataset;
        let grid = LambdaGrid::log_spaced(lambda_max(&ds).unwrap().value, 30, 0.02).unwrap();
        let oracle = solve_path(&ds, &grid, &oracle_solver(1e-8), &PathOptions::unscreened()).unwrap();
        for mode in [ReferenceMode::Sequential, ReferenceMode::LambdaMax] {
            let opts = PathOptions {
                reference: mode,
                ..PathOptions::default()
            };
            let screened = solve_path(&ds, &grid, &SolverConfig::with_tol(1e-8), &opts).unwrap();
            for (s, o) in screened.records.iter().zip(&oracle.records) {
                assert!(s.safety_violations(&o.weights, ZERO_ROW_THRESHOLD).is_empty(), "seed {seed} lambda {}", s.lambda);
                assert!((s.objective - o.objective).abs() <= 1e-6 * o.objective);
                assert!(s.kkt_residual <= 1e-8);
                assert!(!s.reference_fallback);
            }
        }
    }
}

#[test]
fn masks_are_deterministic() {
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic2, 3, 15, 150, 9)).unwrap().dataset;
    let grid = LambdaGrid::log_spaced(lambda_max(&ds).unwrap().value, 12, 0.05).unwrap();
    let run = || solve_path(&ds, &grid, &SolverConfig::with_tol(1e-8), &PathOptions::default()).unwrap();
    let (a, b) = (run(), run());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.mask, y.mask);
        assert_eq!(x.weights, y.weights);
    }
}

#[test]
fn reference_must_be_above_target() {
    let mut r = rng(34);
    let ds = random_dataset(&mut r, 2, 10, (5, 5));
    let lm = lambda_max(&ds).unwrap().value;
    let w = fit(&ds, 0.5 * lm, &oracle_solver(1e-9)).unwrap().weights;
    let seq = ReferenceSolution::from_primal(&ds, &w, 0.5 * lm).unwrap();
    assert!(screen_at(&ds, &seq, 0.5 * lm).is_err());
    assert!(screen_at(&ds, &seq, 0.6 * lm).is_err());
    assert!(screen_at(&ds, &seq, 0.4 * lm).is_ok());
    assert!(LambdaGrid::new(vec![lm, 0.5 * lm, 0.5 * lm], lm).is_err());
    assert!(LambdaGrid::new(vec![lm, 0.4 * lm, 0.5 * lm], lm).is_err());
    assert!(LambdaGrid::new(vec![0.9 * lm, 0.5 * lm], lm).is_err());
}

#[test]
fn inexact_reference_falls_back_to_lambda_max() {
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic1, 3, 15, 100, 4)).unwrap().dataset;
    let grid = LambdaGrid::log_spaced(lambda_max(&ds).unwrap().value, 8, 0.1).unwrap();
    let sloppy = SolverConfig::with_tol(1e-1);
    let opts = PathOptions {
        feasibility_factor: 0.0,
        min_feasibility_tol: 1e-9,
        ..PathOptions::default()
    };
    let report = solve_path(&ds, &grid, &sloppy, &opts).unwrap();
    let fallbacks = report.records.iter().filter(|r| r.reference_fallback).count();
    assert!(fallbacks > 0);
    for r in report.records.iter().filter(|r| r.reference_fallback) {
        assert_eq!(r.reference_lambda, Some(report.lambda_max));
    }
}
