//! Primal solver for
//!
//! ```text
//! min_W  Σ_t ½‖y_t − X_t w_t‖² + λ‖W‖_{2,1}
//! ```
//!
//! and the two reductions that map related formulations onto it.
//!
//! The default method is accelerated proximal gradient (FISTA with adaptive
//! restart); the proximal operator of `λη‖·‖_{2,1}` shrinks each row
//! independently. Convergence is declared on the KKT residual, so every
//! returned solution carries a uniform optimality certificate.

use serde::{Deserialize, Serialize};

use crate::dataset::{axpy, dot, DesignMatrix, MultiTaskDataset, Task, WeightMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Step `1/L`, `L = max_t ‖X_t‖₂²` by power iteration.
    Fixed,
    /// Backtracking on the quadratic upper bound; iterates are kept monotone.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Accelerated proximal gradient.
    Apg,
    /// Cyclic block coordinate descent over rows with an active-set inner loop.
    Bcd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub step: StepRule,
    pub method: Method,
    pub warm_start: Option<WeightMatrix>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            kkt_tol: 1e-6,
            step: StepRule::Fixed,
            method: Method::Apg,
            warm_start: None,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(kkt_tol: f64) -> Self {
        Self {
            kkt_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("kkt_tol must be positive, got {}", self.kkt_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub weights: WeightMatrix,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
}

/// Solves the problem at `lambda`, starting from `cfg.warm_start` or zero.
pub fn fit(ds: &MultiTaskDataset, lambda: f64, cfg: &SolverConfig) -> Result<FitOutcome> {
    fit_from(ds, lambda, cfg, cfg.warm_start.as_ref())
}

/// Like [`fit`] with an explicit starting point that overrides the config's.
pub fn fit_from(
    ds: &MultiTaskDataset,
    lambda: f64,
    cfg: &SolverConfig,
    init: Option<&WeightMatrix>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let (d, t_len) = (ds.n_features(), ds.n_tasks());
    let w0 = match init {
        Some(w) if w.n_features() == d && w.n_tasks() == t_len => w.clone(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!(
                "warm start is {}x{}, expected {d}x{t_len}",
                w.n_features(),
                w.n_tasks()
            )))
        }
        None => WeightMatrix::zeros(d, t_len),
    };
    match cfg.method {
        Method::Apg => apg(ds, lambda, cfg, w0, None),
        Method::Bcd => bcd(ds, lambda, cfg, w0),
    }
}

/// Like [`fit`], also returning the objective after every accepted APG
/// iteration (empty for coordinate descent).
pub fn fit_with_history(ds: &MultiTaskDataset, lambda: f64, cfg: &SolverConfig) -> Result<(FitOutcome, Vec<f64>)> {
    if cfg.method == Method::Bcd {
        return fit(ds, lambda, cfg).map(|out| (out, Vec::new()));
    }
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let w0 = match &cfg.warm_start {
        Some(w) => w.clone(),
        None => WeightMatrix::zeros(ds.n_features(), ds.n_tasks()),
    };
    let mut history = Vec::new();
    let out = apg(ds, lambda, cfg, w0, Some(&mut history))?;
    Ok((out, history))
}

/// Something that solves (reduced) problems along a path.
pub trait PathSolver {
    fn solve(&self, ds: &MultiTaskDataset, lambda: f64, warm_start: Option<&WeightMatrix>) -> Result<FitOutcome>;

    fn kkt_tol(&self) -> f64;
}

impl PathSolver for SolverConfig {
    fn solve(&self, ds: &MultiTaskDataset, lambda: f64, warm_start: Option<&WeightMatrix>) -> Result<FitOutcome> {
        fit_from(ds, lambda, self, warm_start)
    }

    fn kkt_tol(&self) -> f64 {
        self.kkt_tol
    }
}

/// Residuals `r_t = y_t − X_t w_t`, stacked in task order.
fn residuals(ds: &MultiTaskDataset, w: &[f64], out: &mut [f64]) {
    let d = ds.n_features();
    let mut start = 0;
    for (t, task) in ds.tasks().iter().enumerate() {
        let n = task.n_samples();
        let r = &mut out[start..start + n];
        task.x.matvec(&w[t * d..(t + 1) * d], r);
        for (ri, yi) in r.iter_mut().zip(&task.y) {
            *ri = yi - *ri;
        }
        start += n;
    }
}

/// Stacked `X_t w_t`.
fn apply(ds: &MultiTaskDataset, w: &[f64], out: &mut [f64]) {
    let d = ds.n_features();
    let mut start = 0;
    for (t, task) in ds.tasks().iter().enumerate() {
        let n = task.n_samples();
        task.x.matvec(&w[t * d..(t + 1) * d], &mut out[start..start + n]);
        start += n;
    }
}

#[inline]
fn row_norm(v: &[f64], d: usize, t_len: usize, l: usize) -> f64 {
    let mut s = 0.0;
    for t in 0..t_len {
        let x = v[t * d + l];
        s += x * x;
    }
    s.sqrt()
}

/// KKT residual from correlations `⟨x_ℓ^(t), r_t⟩` (unscaled) at `w`.
fn kkt_from_corr(w: &[f64], corr: &[f64], lambda: f64, d: usize, t_len: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 0..d {
        let wn = row_norm(w, d, t_len, l);
        let res = if wn > 0.0 {
            let mut s = 0.0;
            for t in 0..t_len {
                let diff = corr[t * d + l] / lambda - w[t * d + l] / wn;
                s += diff * diff;
            }
            s.sqrt()
        } else {
            (row_norm(corr, d, t_len, l) / lambda - 1.0).max(0.0)
        };
        worst = worst.max(res);
    }
    worst
}

/// Maximum over rows of the KKT violation at `w`: `‖m^ℓ − w^ℓ/‖w^ℓ‖‖` for
/// nonzero rows and `max(0, ‖m^ℓ‖ − 1)` for zero rows, where
/// `m^ℓ_t = ⟨x_ℓ^(t), y_t − X_t w_t⟩ / λ`.
pub fn kkt_residual(ds: &MultiTaskDataset, w: &WeightMatrix, lambda: f64) -> f64 {
    FullResidual::new(ds, w).kkt(w, lambda)
}

/// Stacked residuals `y − XW` and their task-major correlations with every column.
#[derive(Debug, Clone)]
pub(crate) struct FullResidual {
    pub(crate) r: Vec<f64>,
    pub(crate) corr: Vec<f64>,
}

impl FullResidual {
    pub(crate) fn new(ds: &MultiTaskDataset, w: &WeightMatrix) -> Self {
        let mut r = vec![0.0; ds.n_total()];
        let mut corr = vec![0.0; ds.n_features() * ds.n_tasks()];
        residuals(ds, w.as_col_major(), &mut r);
        ds.correlations_into(&r, &mut corr);
        Self { r, corr }
    }

    /// [`kkt_residual`] at the `w` these residuals came from.
    pub(crate) fn kkt(&self, w: &WeightMatrix, lambda: f64) -> f64 {
        kkt_from_corr(w.as_col_major(), &self.corr, lambda, w.n_features(), w.n_tasks())
    }
}

/// Duality gap `P(W) − D(θ̂)` with `θ̂` the dual point recovered from `W`,
/// scaled down into the feasible set when needed.
pub fn duality_gap(ds: &MultiTaskDataset, w: &WeightMatrix, lambda: f64) -> Result<f64> {
    let theta = crate::dual::dual_from_primal(ds, w, lambda)?;
    let g_max = crate::dual::all_g(ds, &theta)?.into_iter().fold(0.0, f64::max);
    let theta = theta.scaled(1.0 / g_max.sqrt().max(1.0));
    Ok(ds.objective(w, lambda) - crate::dual::dual_objective(ds, &theta, lambda))
}

/// `max_t ‖X_t‖₂²` by power iteration on `X_tᵀX_t`.
pub fn lipschitz_constant(ds: &MultiTaskDataset) -> f64 {
    ds.tasks()
        .iter()
        .map(|task| spectral_norm_sq(&task.x, 100, 1e-10))
        .fold(0.0, f64::max)
}

fn spectral_norm_sq(x: &DesignMatrix, max_iters: usize, tol: f64) -> f64 {
    let (n, d) = (x.rows(), x.cols());
    // deterministic start with no special alignment
    let mut v: Vec<f64> = (0..d).map(|j| 1.0 + 0.1 * ((j * 7919) % 13) as f64).collect();
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut xv = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        x.matvec(&v, &mut xv);
        let next = dot(&xv, &xv);
        x.matvec_t(&xv, &mut v);
        let nv = dot(&v, &v).sqrt();
        if nv == 0.0 {
            return next;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let done = (next - estimate).abs() <= tol * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Row-wise group soft-thresholding: `w^ℓ ← max(0, 1 − τ/‖z^ℓ‖) z^ℓ`.
/// Rows with a zero shrink factor become exact zeros.
fn prox_l21(z: &mut [f64], tau: f64, d: usize, t_len: usize) {
    for l in 0..d {
        let n = row_norm(z, d, t_len, l);
        let factor = if n > tau { 1.0 - tau / n } else { 0.0 };
        for t in 0..t_len {
            let v = &mut z[t * d + l];
            *v = if factor == 0.0 { 0.0 } else { *v * factor };
        }
    }
}

const CHECK_EVERY: usize = 10;

struct Best {
    w: Vec<f64>,
    kkt: f64,
}

impl Best {
    fn offer(&mut self, w: &[f64], kkt: f64) {
        if kkt < self.kkt {
            self.kkt = kkt;
            self.w.copy_from_slice(w);
        }
    }
}

fn finish(ds: &MultiTaskDataset, lambda: f64, w: Vec<f64>, iterations: usize, kkt: f64) -> FitOutcome {
    let weights = WeightMatrix::from_col_major(ds.n_features(), ds.n_tasks(), w)
        .expect("solver keeps iterates finite");
    FitOutcome {
        objective: ds.objective(&weights, lambda),
        weights,
        iterations,
        kkt_residual: kkt,
    }
}

fn max_iters_error(ds: &MultiTaskDataset, best: Best, iterations: usize) -> Error {
    Error::MaxItersExceeded {
        best: Box::new(
            WeightMatrix::from_col_major(ds.n_features(), ds.n_tasks(), best.w)
                .unwrap_or_else(|_| WeightMatrix::zeros(ds.n_features(), ds.n_tasks())),
        ),
        residual: best.kkt,
        iterations,
    }
}

fn smooth_loss(r: &[f64]) -> f64 {
    0.5 * dot(r, r)
}

fn apg(
    ds: &MultiTaskDataset,
    lambda: f64,
    cfg: &SolverConfig,
    w0: WeightMatrix,
    mut history: Option<&mut Vec<f64>>,
) -> Result<FitOutcome> {
    let (d, t_len) = (ds.n_features(), ds.n_tasks());
    let n_total = ds.n_total();
    let dt = d * t_len;
    let monotone = cfg.step == StepRule::Backtracking;

    let mut x: Vec<f64> = w0.as_col_major().to_vec();
    let mut r = vec![0.0; n_total];
    let mut corr = vec![0.0; dt];

    residuals(ds, &x, &mut r);
    ds.correlations_into(&r, &mut corr);
    let mut kkt = kkt_from_corr(&x, &corr, lambda, d, t_len);
    if kkt <= cfg.kkt_tol {
        return Ok(finish(ds, lambda, x, 0, kkt));
    }
    let mut best = Best { w: x.clone(), kkt };

    let mut lip = lipschitz_constant(ds);
    if lip == 0.0 {
        // every column is zero; W = 0 is optimal
        return Ok(finish(ds, lambda, vec![0.0; dt], 0, 0.0));
    }
    let mut y = x.clone();
    let mut z = vec![0.0; dt];
    let mut x_prev = vec![0.0; dt];
    let mut r_y = r.clone();
    let mut r_z = vec![0.0; n_total];
    let mut step_image = vec![0.0; n_total];
    let mut momentum = 1.0_f64;

    for it in 1..=cfg.max_iters {
        // gradient of the loss at y is −corr(y)
        ds.correlations_into(&r_y, &mut corr);
        loop {
            let eta = 1.0 / lip;
            for k in 0..dt {
                z[k] = y[k] + eta * corr[k];
            }
            prox_l21(&mut z, lambda * eta, d, t_len);
            if !monotone {
                break;
            }
            // the quadratic bound at y holds iff ‖X(z − y)‖² ≤ L‖z − y‖²
            for k in 0..dt {
                x_prev[k] = z[k] - y[k];
            }
            apply(ds, &x_prev, &mut step_image);
            let quad: f64 = dot(&x_prev, &x_prev);
            if dot(&step_image, &step_image) <= lip * quad * (1.0 + 1e-12) {
                break;
            }
            lip *= 2.0;
        }

        x_prev.copy_from_slice(&x);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if monotone {
            // MFISTA: keep the better of the prox point and the previous iterate
            for (rz, (ry, xs)) in r_z.iter_mut().zip(r_y.iter().zip(&step_image)) {
                *rz = ry - xs;
            }
            if objective_change(&x, &r, &z, &r_z, lambda, d, t_len) <= 0.0 {
                x.copy_from_slice(&z);
                r.copy_from_slice(&r_z);
            }
            let (a, b) = (momentum / next_momentum, (momentum - 1.0) / next_momentum);
            for k in 0..dt {
                y[k] = x[k] + a * (z[k] - x[k]) + b * (x[k] - x_prev[k]);
            }
            momentum = next_momentum;
        } else {
            // gradient-based restart: drop momentum when it points uphill
            let mut uphill = 0.0;
            for k in 0..dt {
                uphill += (y[k] - z[k]) * (z[k] - x[k]);
            }
            x.copy_from_slice(&z);
            if uphill > 0.0 {
                momentum = 1.0;
                y.copy_from_slice(&x);
            } else {
                let beta = (momentum - 1.0) / next_momentum;
                for k in 0..dt {
                    y[k] = x[k] + beta * (x[k] - x_prev[k]);
                }
                momentum = next_momentum;
            }
        }
        residuals(ds, &y, &mut r_y);
        if let Some(h) = history.as_deref_mut() {
            let mut r_x = vec![0.0; n_total];
            residuals(ds, &x, &mut r_x);
            h.push(smooth_loss(&r_x) + lambda * l21(&x, d, t_len));
        }

        if it % CHECK_EVERY == 0 || it == cfg.max_iters {
            if !monotone {
                residuals(ds, &x, &mut r);
            }
            ds.correlations_into(&r, &mut corr);
            kkt = kkt_from_corr(&x, &corr, lambda, d, t_len);
            best.offer(&x, kkt);
            if kkt <= cfg.kkt_tol {
                return Ok(finish(ds, lambda, x, it, kkt));
            }
        }
    }
    Err(max_iters_error(ds, best, cfg.max_iters))
}

/// `F(z) − F(x)` from the residuals of both points, formed as a sum of
/// differences so that it keeps its sign near the optimum.
fn objective_change(x: &[f64], r_x: &[f64], z: &[f64], r_z: &[f64], lambda: f64, d: usize, t_len: usize) -> f64 {
    let loss: f64 = r_z
        .iter()
        .zip(r_x)
        .map(|(a, b)| 0.5 * (a - b) * (a + b))
        .sum();
    let reg: f64 = (0..d)
        .map(|l| row_norm(z, d, t_len, l) - row_norm(x, d, t_len, l))
        .sum();
    loss + lambda * reg
}

fn l21(w: &[f64], d: usize, t_len: usize) -> f64 {
    (0..d).map(|l| row_norm(w, d, t_len, l)).sum()
}

/// One proximal coordinate step on row `l`. Returns the squared change.
fn bcd_row_update(
    ds: &MultiTaskDataset,
    lambda: f64,
    l: usize,
    w: &mut [f64],
    r: &mut [f64],
    lip_row: f64,
    offsets: &[usize],
    scratch: &mut [f64],
) -> f64 {
    let d = ds.n_features();
    let t_len = ds.n_tasks();
    if lip_row == 0.0 {
        return 0.0;
    }
    let mut zn = 0.0;
    for t in 0..t_len {
        let col = ds.column(t, l);
        let rt = &r[offsets[t]..offsets[t + 1]];
        let z = w[t * d + l] + dot(col, rt) / lip_row;
        scratch[t] = z;
        zn += z * z;
    }
    let zn = zn.sqrt();
    let tau = lambda / lip_row;
    let factor = if zn > tau { 1.0 - tau / zn } else { 0.0 };
    let mut change = 0.0;
    for t in 0..t_len {
        let new = if factor == 0.0 { 0.0 } else { factor * scratch[t] };
        let delta = new - w[t * d + l];
        if delta != 0.0 {
            axpy(-delta, ds.column(t, l), &mut r[offsets[t]..offsets[t + 1]]);
            w[t * d + l] = new;
            change += delta * delta;
        }
    }
    change
}

fn bcd(ds: &MultiTaskDataset, lambda: f64, cfg: &SolverConfig, w0: WeightMatrix) -> Result<FitOutcome> {
    let (d, t_len) = (ds.n_features(), ds.n_tasks());
    let mut offsets = vec![0];
    for task in ds.tasks() {
        offsets.push(offsets.last().unwrap() + task.n_samples());
    }
    let lip_rows: Vec<f64> = (0..d)
        .map(|l| (0..t_len).map(|t| ds.col_norm(t, l).powi(2)).fold(0.0, f64::max))
        .collect();

    let mut w = w0.as_col_major().to_vec();
    let mut r = vec![0.0; ds.n_total()];
    let mut corr = vec![0.0; d * t_len];
    let mut scratch = vec![0.0; t_len];
    residuals(ds, &w, &mut r);

    let mut best = Best {
        w: w.clone(),
        kkt: f64::INFINITY,
    };
    let inner_tol = 0.1 * cfg.kkt_tol * lambda / lip_rows.iter().copied().fold(1e-300, f64::max).sqrt();
    let mut sweeps = 0;
    loop {
        ds.correlations_into(&r, &mut corr);
        let kkt = kkt_from_corr(&w, &corr, lambda, d, t_len);
        best.offer(&w, kkt);
        if kkt <= cfg.kkt_tol {
            return Ok(finish(ds, lambda, w, sweeps, kkt));
        }
        if sweeps >= cfg.max_iters {
            return Err(max_iters_error(ds, best, sweeps));
        }
        // full sweep
        for l in 0..d {
            bcd_row_update(ds, lambda, l, &mut w, &mut r, lip_rows[l], &offsets, &mut scratch);
        }
        sweeps += 1;
        // inner sweeps restricted to the current support
        let active: Vec<usize> = (0..d).filter(|&l| row_norm(&w, d, t_len, l) > 0.0).collect();
        for _ in 0..50 {
            if sweeps >= cfg.max_iters {
                break;
            }
            let mut change = 0.0;
            for &l in &active {
                change += bcd_row_update(ds, lambda, l, &mut w, &mut r, lip_rows[l], &offsets, &mut scratch);
            }
            sweeps += 1;
            if change.sqrt() <= inner_tol {
                break;
            }
        }
    }
}

/// Rescales each task by `1/√ρ_t`, turning the weighted loss
/// `Σ_t 1/(2ρ_t)‖y_t − X_t w_t‖²` into the standard one.
pub fn reduce_weighted(ds: &MultiTaskDataset, weights: &[f64]) -> Result<MultiTaskDataset> {
    if weights.len() != ds.n_tasks() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} tasks",
            weights.len(),
            ds.n_tasks()
        )));
    }
    if let Some(&bad) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::NonPositiveWeight(bad));
    }
    let tasks = ds
        .tasks()
        .iter()
        .zip(weights)
        .map(|(task, &rho)| {
            let s = 1.0 / rho.sqrt();
            Task::new(task.x.scaled(s), task.y.iter().map(|v| v * s).collect())
        })
        .collect();
    MultiTaskDataset::new(tasks)
}

/// Appends `√(2ρ)·I` below each `X_t` and `d` zeros below each `y_t`, which
/// folds the extra `ρ‖W‖_F²` term into the loss.
pub fn reduce_frobenius(ds: &MultiTaskDataset, rho: f64) -> Result<MultiTaskDataset> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveRho(rho));
    }
    let d = ds.n_features();
    let diag = (2.0 * rho).sqrt();
    let tasks = ds
        .tasks()
        .iter()
        .map(|task| {
            let n = task.n_samples();
            let rows = n + d;
            let mut data = Vec::with_capacity(rows * d);
            for j in 0..d {
                data.extend_from_slice(task.x.column(j));
                data.extend((0..d).map(|i| if i == j { diag } else { 0.0 }));
            }
            let mut y = task.y.clone();
            y.resize(rows, 0.0);
            Ok(Task::new(DesignMatrix::from_col_major(rows, d, data)?, y))
        })
        .collect::<Result<Vec<_>>>()?;
    MultiTaskDataset::new(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::lambda_max;

    fn orthogonal_design() -> MultiTaskDataset {
        MultiTaskDataset::from_parts(vec![(
            DesignMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            vec![1.0, 0.0],
        )])
        .unwrap()
    }

    #[test]
    fn orthogonal_lasso_soft_threshold() {
        for method in [Method::Apg, Method::Bcd] {
            let cfg = SolverConfig {
                kkt_tol: 1e-12,
                method,
                ..SolverConfig::default()
            };
            let out = fit(&orthogonal_design(), 0.5, &cfg).unwrap();
            assert!((out.weights.get(0, 0) - 0.5).abs() < 1e-12);
            assert_eq!(out.weights.get(1, 0), 0.0);
        }
    }

    #[test]
    fn above_lambda_max_is_exactly_zero() {
        let ds = orthogonal_design();
        let lm = lambda_max(&ds).unwrap().value;
        let out = fit(&ds, lm, &SolverConfig::default()).unwrap();
        assert!(out.weights.is_zero());
        let out = fit(&ds, 1.5 * lm, &SolverConfig::default()).unwrap();
        assert!(out.weights.is_zero());
    }

    #[test]
    fn rejects_bad_config() {
        let ds = orthogonal_design();
        assert!(matches!(
            fit(&ds, 0.0, &SolverConfig::default()).unwrap_err(),
            Error::NonPositiveLambda(_)
        ));
        let cfg = SolverConfig {
            kkt_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(fit(&ds, 0.1, &cfg).is_err());
        let cfg = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(fit(&ds, 0.1, &cfg).is_err());
    }

    #[test]
    fn max_iters_returns_best_iterate() {
        let ds = MultiTaskDataset::from_parts(vec![(
            DesignMatrix::from_rows(&[[1.0, 0.9], [0.9, 1.0], [0.3, -0.2]]).unwrap(),
            vec![1.0, 0.5, 0.2],
        )])
        .unwrap();
        let cfg = SolverConfig {
            max_iters: 2,
            kkt_tol: 1e-14,
            ..SolverConfig::default()
        };
        match fit(&ds, 0.01, &cfg).unwrap_err() {
            Error::MaxItersExceeded { best, residual, .. } => {
                assert_eq!(best.n_features(), 2);
                assert!(residual.is_finite());
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn weighted_reduction_identity_and_errors() {
        let ds = orthogonal_design();
        assert_eq!(reduce_weighted(&ds, &[1.0]).unwrap(), ds);
        let halved = reduce_weighted(&ds, &[4.0]).unwrap();
        assert_eq!(halved.task(0).y, vec![0.5, 0.0]);
        assert_eq!(halved.task(0).x.get(0, 0), 0.5);
        assert!(matches!(reduce_weighted(&ds, &[0.0]).unwrap_err(), Error::NonPositiveWeight(_)));
    }

    #[test]
    fn frobenius_reduction_shapes() {
        let ds = orthogonal_design();
        let r = reduce_frobenius(&ds, 0.5).unwrap();
        assert_eq!(r.task(0).n_samples(), 4);
        assert_eq!(r.task(0).x.get(2, 0), 1.0);
        assert_eq!(r.task(0).x.get(3, 1), 1.0);
        assert_eq!(r.task(0).x.get(2, 1), 0.0);
        assert_eq!(r.task(0).y, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(reduce_frobenius(&ds, 0.0).unwrap_err(), Error::NonPositiveRho(_)));
    }

    #[test]
    fn lipschitz_of_orthogonal_design_is_one() {
        assert!((lipschitz_constant(&orthogonal_design()) - 1.0).abs() < 1e-12);
    }
}
