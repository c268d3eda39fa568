//! The DPC rule and its sequential use along a regularization path.
//!
//! Feature `ℓ` is certified inactive at `λ` when `s_ℓ(λ, λ0) < 1`, where
//! `s_ℓ` is the maximum of `g_ℓ` over the dual ball built from the reference
//! solution at `λ0`.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{DualPoint, LambdaGrid, MultiTaskDataset, ScreeningMask, WeightMatrix};
use crate::dual::{ball_parts, dual_ball, LambdaMax, ReferenceSolution, LAMBDA_MAX_RTOL};
use crate::error::{Error, Result};
use crate::qp1qc::{all_s, correlations, scores_from_parts};
use crate::solver::{FullResidual, PathSolver};

/// Rows with max-norm at or below this count as zero when measuring
/// rejection ratios and safety.
pub const ZERO_ROW_THRESHOLD: f64 = 1e-6;

/// Screens every feature at `lambda` against the ball from `reference`.
pub fn screen_at(ds: &MultiTaskDataset, reference: &ReferenceSolution, lambda: f64) -> Result<ScreeningMask> {
    let ball = dual_ball(ds, reference, lambda)?;
    Ok(ScreeningMask::from_scores(lambda, all_s(ds, &ball)?))
}

/// How a reference's normal vector `n` enters the ball center.
enum NormalCorr {
    /// `n = 0`
    Zero,
    /// Cached `X^T n`.
    Stored(Vec<f64>),
    /// `n = y/λ0 − θ0`, so `X^T n` follows from `X^T y` and `X^T θ0`.
    Sequential { lambda0: f64 },
}

/// A reference with its task-major feature correlations `X^T θ0`.
struct Prepared {
    reference: ReferenceSolution,
    theta_corr: Vec<f64>,
    normal: NormalCorr,
}

/// Path-level screening state. The ball center is `½θ0 + ½y/λ − ½κn`, so its
/// correlations follow from cached `X^T y`, `X^T θ0` and `X^T n`, and each
/// sequential step costs one pass over the data.
struct Screener<'a> {
    ds: &'a MultiTaskDataset,
    lmax: LambdaMax,
    y_corr: Vec<f64>,
    at_max: Prepared,
}

impl<'a> Screener<'a> {
    fn new(ds: &'a MultiTaskDataset, lmax: LambdaMax) -> Result<Self> {
        let y_corr = correlations(ds, &crate::dataset::stack_response(ds));
        let reference = ReferenceSolution::at_lambda_max(ds)?;
        let at_max = Prepared {
            theta_corr: y_corr.iter().map(|v| v / lmax.value).collect(),
            normal: match reference.normal() {
                Some(n) => NormalCorr::Stored(correlations(ds, n)),
                None => NormalCorr::Zero,
            },
            reference,
        };
        Ok(Self {
            ds,
            lmax,
            y_corr,
            at_max,
        })
    }

    /// Reference from the previous solution, or `None` when it cannot be
    /// built or its dual point violates feasibility by more than `feas_tol`.
    fn sequential(&self, prev: &FullResidual, lambda0: f64, feas_tol: f64) -> Option<Prepared> {
        if lambda0 >= self.lmax.value * (1.0 - LAMBDA_MAX_RTOL) {
            return None;
        }
        let theta0 = DualPoint::new(prev.r.iter().map(|v| v / lambda0).collect(), self.ds.block_lens()).ok()?;
        let reference = ReferenceSolution::new_given(self.ds, theta0, lambda0, &self.lmax).ok()?;
        let theta_corr: Vec<f64> = prev.corr.iter().map(|v| v / lambda0).collect();
        let mut g = vec![0.0; self.ds.n_features()];
        for block in theta_corr.chunks_exact(g.len()) {
            for (g, v) in g.iter_mut().zip(block) {
                *g += v * v;
            }
        }
        if g.iter().copied().fold(0.0, f64::max) - 1.0 > feas_tol {
            return None;
        }
        let normal = match reference.normal() {
            Some(_) => NormalCorr::Sequential { lambda0 },
            None => NormalCorr::Zero,
        };
        Some(Prepared {
            reference,
            theta_corr,
            normal,
        })
    }

    fn screen(&self, prepared: &Prepared, lambda: f64) -> Result<ScreeningMask> {
        let (ball, kappa) = ball_parts(self.ds, &prepared.reference, lambda)?;
        let (theta, y) = (prepared.theta_corr.as_slice(), self.y_corr.as_slice());
        let scores = match &prepared.normal {
            NormalCorr::Zero => scores_from_parts(self.ds, &[(0.5, theta), (0.5 / lambda, y)], ball.radius),
            NormalCorr::Stored(n) => scores_from_parts(
                self.ds,
                &[(0.5, theta), (0.5 / lambda, y), (-0.5 * kappa, n)],
                ball.radius,
            ),
            // ½θ0 + ½y/λ − ½κ(y/λ0 − θ0)
            NormalCorr::Sequential { lambda0 } => scores_from_parts(
                self.ds,
                &[(0.5 + 0.5 * kappa, theta), (0.5 / lambda - 0.5 * kappa / lambda0, y)],
                ball.radius,
            ),
        }?;
        Ok(ScreeningMask::from_scores(lambda, scores))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Screen {
    Dpc,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceMode {
    /// Reference at the previous grid point.
    Sequential,
    /// Reference at λ_max for every grid point.
    LambdaMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub screen: Screen,
    pub reference: ReferenceMode,
    pub zero_threshold: f64,
    /// A sequential reference whose dual infeasibility exceeds
    /// `max(min_feasibility_tol, feasibility_factor · kkt_tol)` is replaced by
    /// the λ_max reference.
    pub min_feasibility_tol: f64,
    pub feasibility_factor: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            screen: Screen::Dpc,
            reference: ReferenceMode::Sequential,
            zero_threshold: ZERO_ROW_THRESHOLD,
            min_feasibility_tol: 1e-6,
            feasibility_factor: 2.5,
        }
    }
}

impl PathOptions {
    pub fn unscreened() -> Self {
        Self {
            screen: Screen::None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub lambda: f64,
    pub lambda_rel: f64,
    /// λ0 of the reference used for screening; `None` at λ_max or unscreened.
    pub reference_lambda: Option<f64>,
    /// True when a sequential reference was rejected in favour of λ_max.
    pub reference_fallback: bool,
    pub mask: Option<ScreeningMask>,
    pub n_screened: usize,
    pub n_truly_inactive: usize,
    pub t_screen_s: f64,
    pub t_solve_s: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub weights: WeightMatrix,
}

impl PathRecord {
    /// `n_screened / n_truly_inactive`, undefined when nothing is inactive.
    pub fn rejection_ratio(&self) -> Option<f64> {
        (self.n_truly_inactive > 0).then(|| self.n_screened as f64 / self.n_truly_inactive as f64)
    }

    /// Screened features whose row norm in `reference` exceeds `threshold`.
    pub fn safety_violations(&self, reference: &WeightMatrix, threshold: f64) -> Vec<usize> {
        let Some(mask) = &self.mask else {
            return Vec::new();
        };
        mask.inactive()
            .iter()
            .enumerate()
            .filter(|&(l, &inactive)| inactive && row_max_abs(reference, l) > threshold)
            .map(|(l, _)| l)
            .collect()
    }
}

fn row_max_abs(w: &WeightMatrix, l: usize) -> f64 {
    (0..w.n_tasks()).map(|t| w.get(l, t).abs()).fold(0.0, f64::max)
}

fn count_zero_rows(w: &WeightMatrix, threshold: f64) -> usize {
    (0..w.n_features()).filter(|&l| row_max_abs(w, l) <= threshold).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub lambda_max: f64,
    pub records: Vec<PathRecord>,
}

impl PathReport {
    pub fn total_screen_time(&self) -> f64 {
        self.records.iter().map(|r| r.t_screen_s).sum()
    }

    pub fn total_solve_time(&self) -> f64 {
        self.records.iter().map(|r| r.t_solve_s).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.total_screen_time() + self.total_solve_time()
    }

    /// Mean of the defined per-λ rejection ratios.
    pub fn mean_rejection_ratio(&self) -> Option<f64> {
        let ratios: Vec<f64> = self.records.iter().filter_map(PathRecord::rejection_ratio).collect();
        (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

/// A path aborted by a failed solve; `partial` holds the completed records.
#[derive(Debug)]
pub struct PathFailure {
    pub partial: PathReport,
    pub lambda: f64,
    pub error: Error,
}

impl fmt::Display for PathFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "path aborted at lambda = {}: {}", self.lambda, self.error)
    }
}

impl std::error::Error for PathFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for Box<PathFailure> {
    fn from(error: Error) -> Self {
        Box::new(PathFailure {
            partial: PathReport {
                lambda_max: f64::NAN,
                records: Vec::new(),
            },
            lambda: f64::NAN,
            error,
        })
    }
}

/// Solves the whole grid in order, warm-starting each λ from the previous
/// solution and, with `Screen::Dpc`, removing certified-inactive features
/// before each solve.
pub fn solve_path<S: PathSolver + ?Sized>(
    ds: &MultiTaskDataset,
    grid: &LambdaGrid,
    solver: &S,
    opts: &PathOptions,
) -> Result<PathReport, Box<PathFailure>> {
    let lmax = crate::dual::lambda_max(ds)?;
    let lambda_max = lmax.value;
    let grid_check = LambdaGrid::new(grid.values().to_vec(), lambda_max)?;
    let (d, t_len) = (ds.n_features(), ds.n_tasks());
    let screener = match opts.screen {
        Screen::Dpc => Some(Screener::new(ds, lmax)?),
        Screen::None => None,
    };
    let feas_tol = opts
        .min_feasibility_tol
        .max(opts.feasibility_factor * solver.kkt_tol());

    let mut report = PathReport {
        lambda_max,
        records: Vec::with_capacity(grid_check.len()),
    };
    // previous λ, its solution, and the full residual the record already needs
    let mut prev: Option<(f64, WeightMatrix, FullResidual)> = None;

    for &lambda in grid_check.values() {
        let lambda_rel = lambda / lambda_max;
        let Some((lambda_prev, w_prev, residual_prev)) = prev.take() else {
            // first grid point is λ_max: closed-form zero solution
            let weights = WeightMatrix::zeros(d, t_len);
            let residual = FullResidual::new(ds, &weights);
            let mask = (opts.screen == Screen::Dpc).then(|| ScreeningMask::all_inactive(lambda, d));
            report.records.push(PathRecord {
                lambda,
                lambda_rel,
                reference_lambda: None,
                reference_fallback: false,
                n_screened: mask.as_ref().map_or(0, ScreeningMask::n_screened),
                mask,
                n_truly_inactive: d,
                t_screen_s: 0.0,
                t_solve_s: 0.0,
                objective: ds.objective(&weights, lambda),
                kkt_residual: residual.kkt(&weights, lambda),
                iterations: 0,
                weights: weights.clone(),
            });
            prev = Some((lambda, weights, residual));
            continue;
        };

        let fail = |report: PathReport, error: Error| {
            Box::new(PathFailure {
                partial: report,
                lambda,
                error,
            })
        };

        let screen_start = Instant::now();
        let mut reference_fallback = false;
        let mut reference_lambda = None;
        let mask = match (&screener, opts.reference) {
            (None, _) => None,
            (Some(sc), ReferenceMode::LambdaMax) => {
                reference_lambda = Some(lambda_max);
                Some(sc.screen(&sc.at_max, lambda))
            }
            (Some(sc), ReferenceMode::Sequential) => {
                let sequential = sc.sequential(&residual_prev, lambda_prev, feas_tol);
                // right after λ_max the previous solution is the λ_max reference itself
                reference_fallback = sequential.is_none() && lambda_prev < lambda_max * (1.0 - LAMBDA_MAX_RTOL);
                let prepared = sequential.as_ref().unwrap_or(&sc.at_max);
                reference_lambda = Some(prepared.reference.lambda0());
                Some(sc.screen(prepared, lambda))
            }
        }
        .transpose();
        let mask = match mask {
            Ok(m) => m,
            Err(e) => return Err(fail(report, e)),
        };
        let t_screen_s = screen_start.elapsed().as_secs_f64();

        let solve_start = Instant::now();
        let kept: Vec<usize> = match &mask {
            Some(m) => m.kept(),
            None => (0..d).collect(),
        };
        let (weights, iterations) = if kept.is_empty() {
            (WeightMatrix::zeros(d, t_len), 0)
        } else if kept.len() == d {
            match solver.solve(ds, lambda, Some(&w_prev)) {
                Ok(out) => (out.weights, out.iterations),
                Err(e) => return Err(fail(report, e)),
            }
        } else {
            let reduced = ds.select_features(&kept);
            let warm = w_prev.select_rows(&kept);
            match solver.solve(&reduced, lambda, Some(&warm)) {
                Ok(out) => (WeightMatrix::embed_rows(&out.weights, &kept, d), out.iterations),
                Err(e) => return Err(fail(report, e)),
            }
        };
        let t_solve_s = solve_start.elapsed().as_secs_f64();
        let residual = FullResidual::new(ds, &weights);

        report.records.push(PathRecord {
            lambda,
            lambda_rel,
            reference_lambda,
            reference_fallback,
            n_screened: mask.as_ref().map_or(0, ScreeningMask::n_screened),
            mask,
            n_truly_inactive: count_zero_rows(&weights, opts.zero_threshold),
            t_screen_s,
            t_solve_s,
            objective: ds.objective(&weights, lambda),
            kkt_residual: residual.kkt(&weights, lambda),
            iterations,
            weights: weights.clone(),
        });
        prev = Some((lambda, weights, residual));
    }
    Ok(report)
}
