#![allow(dead_code)]

use mtfl_dpc::solver::Method;
use mtfl_dpc::{DesignMatrix, DualPoint, MultiTaskDataset, SolverConfig, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_dataset(rng: &mut ChaCha20Rng, n_tasks: usize, d: usize, n_range: (usize, usize)) -> MultiTaskDataset {
    let tasks = (0..n_tasks)
        .map(|_| {
            let n = rng.random_range(n_range.0..=n_range.1);
            let x: Vec<f64> = (0..n * d).map(|_| gaussian(rng)).collect();
            let y: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
            Task::new(DesignMatrix::from_col_major(n, d, x).unwrap(), y)
        })
        .collect();
    MultiTaskDataset::new(tasks).unwrap()
}

pub fn random_dual(rng: &mut ChaCha20Rng, ds: &MultiTaskDataset, scale: f64) -> DualPoint {
    DualPoint::from_blocks(
        ds.block_lens()
            .into_iter()
            .map(|n| (0..n).map(|_| scale * gaussian(rng)).collect())
            .collect(),
    )
}

/// Coordinate-descent reference solver, tight tolerance.
pub fn oracle_solver(kkt_tol: f64) -> SolverConfig {
    SolverConfig {
        kkt_tol,
        method: Method::Bcd,
        max_iters: 2_000_000,
        ..SolverConfig::default()
    }
}

/// Naive `X_t w` with explicit loops over entries.
pub fn naive_matvec(x: &DesignMatrix, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.rows()];
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            out[i] += x.get(i, j) * w[j];
        }
    }
    out
}

/// `g_ℓ(θ)` straight from the definition.
pub fn naive_g(ds: &MultiTaskDataset, theta: &DualPoint, l: usize) -> f64 {
    (0..ds.n_tasks())
        .map(|t| {
            let x = &ds.task(t).x;
            let ip: f64 = (0..x.rows()).map(|i| x.get(i, l) * theta.block(t)[i]).sum();
            ip * ip
        })
        .sum()
}
