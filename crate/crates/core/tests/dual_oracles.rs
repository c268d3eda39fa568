mod common;

use common::{gaussian, naive_g, naive_matvec, oracle_solver, random_dataset, random_dual, rng};
use mtfl_dpc::dataset::stack_response;
use mtfl_dpc::dual::{
    all_g, dual_ball, dual_feasibility_violation, dual_from_primal, g_ell, grad_g_ell, lambda_max, normal_vector,
    ReferenceSolution,
};
use mtfl_dpc::{fit, DesignMatrix, Error, MultiTaskDataset, WeightMatrix};
use proptest::prelude::*;

fn hand_dataset() -> MultiTaskDataset {
    MultiTaskDataset::from_parts(vec![
        (DesignMatrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![2.0]),
        (DesignMatrix::from_rows(&[[0.0, 1.0]]).unwrap(), vec![1.0]),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn g_is_quadratically_homogeneous(seed in any::<u64>(), c in -20.0..20.0f64) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 3, 4, (1, 5));
        let theta = random_dual(&mut r, &ds, 1.0);
        for l in 0..4 {
            let g = g_ell(&ds, &theta, l).unwrap();
            let gc = g_ell(&ds, &theta.scaled(c), l).unwrap();
            prop_assert!((gc - c * c * g).abs() <= 1e-12 * (c * c * g).max(1.0));
        }
    }

    #[test]
    fn g_matches_definition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 4, 3, (1, 6));
        let theta = random_dual(&mut r, &ds, 2.0);
        let all = all_g(&ds, &theta).unwrap();
        for l in 0..3 {
            let naive = naive_g(&ds, &theta, l);
            prop_assert!((all[l] - naive).abs() <= 1e-12 * naive.max(1.0));
        }
    }

    #[test]
    fn ball_decomposition_is_orthogonal(seed in any::<u64>(), frac0 in 0.3..0.95f64, frac in 0.05..0.99f64) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 3, 6, (3, 6));
        let lm = lambda_max(&ds).unwrap().value;
        let lambda0 = frac0 * lm;
        let w0 = fit(&ds, lambda0, &oracle_solver(1e-10)).unwrap().weights;
        let reference = ReferenceSolution::from_primal(&ds, &w0, lambda0).unwrap();
        let lambda = frac * lambda0;
        let ball = dual_ball(&ds, &reference, lambda).unwrap();

        let y = stack_response(&ds);
        let rvec: Vec<f64> = y.values().iter().zip(reference.theta0().values()).map(|(a, b)| a / lambda - b).collect();
        let r_perp: Vec<f64> = ball.center.values().iter().zip(reference.theta0().values()).map(|(o, t)| 2.0 * (o - t)).collect();
        let n = reference.normal().unwrap().values();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ip: f64 = r_perp.iter().zip(n).map(|(a, b)| a * b).sum();
        prop_assert!(ip.abs() <= 1e-10 * norm(&rvec) * norm(n));
        prop_assert!(norm(&r_perp) <= norm(&rvec) * (1.0 + 1e-12));
        prop_assert!((2.0 * ball.radius - norm(&r_perp)).abs() <= 1e-12 * norm(&rvec).max(1.0));
    }
}

#[test]
fn g_hand_values() {
    let ds = hand_dataset();
    let theta = mtfl_dpc::DualPoint::from_blocks(vec![vec![1.0], vec![0.5]]);
    assert_eq!(g_ell(&ds, &theta, 0).unwrap(), 1.0);
    assert_eq!(g_ell(&ds, &theta.scaled(0.0), 0).unwrap(), 0.0);
    let single = MultiTaskDataset::from_parts(vec![(DesignMatrix::from_rows(&[[3.0], [4.0]]).unwrap(), vec![0.0, 0.0])]).unwrap();
    let theta = mtfl_dpc::DualPoint::from_blocks(vec![vec![1.0, 1.0]]);
    assert_eq!(g_ell(&single, &theta, 0).unwrap(), 49.0);
    assert!(matches!(g_ell(&ds, &theta, 0), Err(_)));
    assert!(matches!(
        g_ell(&ds, &mtfl_dpc::DualPoint::from_blocks(vec![vec![1.0], vec![0.5]]), 2),
        Err(Error::IndexOutOfRange { .. })
    ));
}

#[test]
fn lambda_max_hand_value_and_normal() {
    let ds = hand_dataset();
    let lm = lambda_max(&ds).unwrap();
    assert_eq!((lm.value, lm.argmax), (2.0, 0));
    let theta0 = stack_response(&ds).scaled(0.5);
    let n = normal_vector(&ds, &theta0, 2.0).unwrap();
    assert_eq!(n.values(), &[2.0, 0.0]);
}

#[test]
fn single_task_lambda_max_is_lasso_lambda_max() {
    let mut r = rng(4);
    for _ in 0..10 {
        let ds = random_dataset(&mut r, 1, 7, (5, 5));
        let y = &ds.task(0).y;
        let want = (0..7)
            .map(|l| ds.column(0, l).iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        assert!((lambda_max(&ds).unwrap().value - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn lambda_max_certificate_both_directions() {
    let mut r = rng(5);
    for _ in 0..20 {
        let ds = random_dataset(&mut r, 3, 8, (2, 6));
        let lm = lambda_max(&ds).unwrap().value;
        let y = stack_response(&ds);
        for factor in [1.0, 1.2, 3.0, 100.0] {
            assert!(dual_feasibility_violation(&ds, &y.scaled(1.0 / (factor * lm))) <= 1e-12);
        }
        assert!(dual_feasibility_violation(&ds, &y.scaled(1.0 / (0.99 * lm))) > 0.0);
        let v = dual_feasibility_violation(&ds, &y.scaled(2.0 / lm));
        assert!((v - 3.0).abs() <= 1e-12 * 4.0);
        assert_eq!(dual_feasibility_violation(&ds, &y.scaled(0.0)), 0.0);
    }
}

#[test]
fn dual_from_primal_matches_naive_residuals() {
    let mut r = rng(6);
    for _ in 0..10 {
        let ds = random_dataset(&mut r, 3, 5, (2, 7));
        let values: Vec<f64> = (0..15).map(|_| gaussian(&mut r)).collect();
        let w = WeightMatrix::from_col_major(5, 3, values).unwrap();
        let theta = dual_from_primal(&ds, &w, 1.0).unwrap();
        for t in 0..3 {
            let xw = naive_matvec(&ds.task(t).x, w.column(t));
            for (i, (y, f)) in ds.task(t).y.iter().zip(&xw).enumerate() {
                assert!((theta.block(t)[i] - (y - f)).abs() <= 1e-12 * (1.0 + y.abs() + f.abs()));
            }
        }
        let zero = WeightMatrix::zeros(5, 3);
        assert_eq!(dual_from_primal(&ds, &zero, 2.0).unwrap(), stack_response(&ds).scaled(0.5));
        assert!(matches!(dual_from_primal(&ds, &w, 0.0), Err(Error::NonPositiveLambda(_))));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(7);
    let ds = random_dataset(&mut r, 3, 4, (2, 5));
    let h = 1e-6;
    for k in 0..100 {
        let theta = random_dual(&mut r, &ds, 1.0);
        let l = k % 4;
        let grad = grad_g_ell(&ds, &theta, l).unwrap();
        let gnorm = grad.norm();
        for i in 0..theta.len() {
            let mut plus = theta.values().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (g_ell(&ds, &theta.with_values(plus), l).unwrap() - g_ell(&ds, &theta.with_values(minus), l).unwrap())
                / (2.0 * h);
            assert!(
                (fd - grad.values()[i]).abs() <= 1e-5 * gnorm.max(1e-3),
                "component {i}: fd {fd} vs {}",
                grad.values()[i]
            );
        }
    }
}

#[test]
fn ball_contains_high_precision_dual_optimum() {
    let mut r = rng(8);
    for _ in 0..10 {
        let ds = random_dataset(&mut r, 3, 12, (4, 8));
        let lm = lambda_max(&ds).unwrap().value;
        let at_max = ReferenceSolution::at_lambda_max(&ds).unwrap();
        let lambda0 = 0.7 * lm;
        let w0 = fit(&ds, lambda0, &oracle_solver(1e-11)).unwrap().weights;
        let seq = ReferenceSolution::from_primal(&ds, &w0, lambda0).unwrap();
        for frac in [0.65, 0.5, 0.3, 0.1] {
            let lambda = frac * lm;
            let theta = dual_from_primal(&ds, &fit(&ds, lambda, &oracle_solver(1e-11)).unwrap().weights, lambda).unwrap();
            for reference in [&at_max, &seq] {
                let ball = dual_ball(&ds, reference, lambda).unwrap();
                assert!(ball.distance_to_center(&theta) <= ball.radius + 1e-6);
            }
        }
    }
}

#[test]
fn degenerate_and_parallel_cases() {
    let zero_y = MultiTaskDataset::from_parts(vec![(DesignMatrix::from_rows(&[[1.0, 2.0]]).unwrap(), vec![0.0])]).unwrap();
    assert!(matches!(lambda_max(&zero_y), Err(Error::DegenerateData)));
    assert!(matches!(
        normal_vector(&hand_dataset(), &stack_response(&hand_dataset()).scaled(1.0), 1.0),
        Err(Error::ZeroNormal)
    ));
}
