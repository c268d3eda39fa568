//! The dual problem: constraint functions `g_ℓ`, `λ_max`, recovery of the dual
//! point from a primal solution, and the ball that certifiably contains the
//! dual optimum at a new λ given the optimum at a reference λ0.
//!
//! The dual feasible set is `F = {θ : g_ℓ(θ) ≤ 1 for all ℓ}` with
//! `g_ℓ(θ) = Σ_t ⟨x_ℓ^(t), θ_t⟩²`, and the dual optimum is the projection of
//! `y/λ` onto `F`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dot, stack_response, DualPoint, MultiTaskDataset, WeightMatrix};
use crate::error::{Error, Result};

/// Relative slack allowed on sign conditions that hold exactly in exact arithmetic.
pub const SIGN_RTOL: f64 = 1e-9;

/// `‖n‖ < ZERO_NORMAL_RTOL · ‖y‖/λ0` counts as a vanishing normal.
pub const ZERO_NORMAL_RTOL: f64 = 1e-14;

/// Relative tolerance used to decide that λ0 sits at λ_max.
pub const LAMBDA_MAX_RTOL: f64 = 1e-12;

/// Correlations `m^ℓ = (⟨x_ℓ^(1), θ_1⟩, …, ⟨x_ℓ^(T), θ_T⟩)`.
pub fn feature_correlations(ds: &MultiTaskDataset, theta: &DualPoint, l: usize) -> Vec<f64> {
    theta
        .blocks()
        .enumerate()
        .map(|(t, block)| dot(ds.column(t, l), block))
        .collect()
}

pub fn g_ell(ds: &MultiTaskDataset, theta: &DualPoint, l: usize) -> Result<f64> {
    ds.check_feature(l)?;
    check_blocks(ds, theta)?;
    Ok(g_unchecked(ds, theta, l))
}

#[inline]
fn g_unchecked(ds: &MultiTaskDataset, theta: &DualPoint, l: usize) -> f64 {
    theta
        .blocks()
        .enumerate()
        .map(|(t, block)| dot(ds.column(t, l), block).powi(2))
        .sum()
}

/// `g_ℓ(θ)` for every feature.
pub fn all_g(ds: &MultiTaskDataset, theta: &DualPoint) -> Result<Vec<f64>> {
    check_blocks(ds, theta)?;
    Ok((0..ds.n_features())
        .into_par_iter()
        .map(|l| g_unchecked(ds, theta, l))
        .collect())
}

/// Gradient of `g_ℓ`: block t is `2⟨x_ℓ^(t), θ_t⟩ x_ℓ^(t)`.
pub fn grad_g_ell(ds: &MultiTaskDataset, theta: &DualPoint, l: usize) -> Result<DualPoint> {
    ds.check_feature(l)?;
    check_blocks(ds, theta)?;
    let blocks = theta
        .blocks()
        .enumerate()
        .map(|(t, block)| {
            let col = ds.column(t, l);
            let c = 2.0 * dot(col, block);
            col.iter().map(|x| c * x).collect()
        })
        .collect();
    Ok(DualPoint::from_blocks(blocks))
}

fn check_blocks(ds: &MultiTaskDataset, theta: &DualPoint) -> Result<()> {
    if !theta.is_compatible(ds) {
        return Err(Error::DimensionMismatch(format!(
            "dual point blocks {:?} do not match task sizes {:?}",
            theta.block_lens(),
            ds.block_lens()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    pub value: f64,
    /// Smallest maximizing feature index ℓ_*.
    pub argmax: usize,
}

/// `λ_max = max_ℓ sqrt(Σ_t ⟨x_ℓ^(t), y_t⟩²)`; ties go to the smallest index.
pub fn lambda_max(ds: &MultiTaskDataset) -> Result<LambdaMax> {
    let y = stack_response(ds);
    let g = all_g(ds, &y)?;
    let (argmax, best) = g
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (l, v)| if v > acc.1 { (l, v) } else { acc });
    if !(best > 0.0) {
        return Err(Error::DegenerateData);
    }
    Ok(LambdaMax {
        value: best.sqrt(),
        argmax,
    })
}

/// `θ_t = (y_t − X_t w_t) / λ`.
pub fn dual_from_primal(ds: &MultiTaskDataset, w: &WeightMatrix, lambda: f64) -> Result<DualPoint> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if w.n_features() != ds.n_features() || w.n_tasks() != ds.n_tasks() {
        return Err(Error::DimensionMismatch(format!(
            "weights are {}x{}, dataset has d={} and T={}",
            w.n_features(),
            w.n_tasks(),
            ds.n_features(),
            ds.n_tasks()
        )));
    }
    let blocks = ds
        .tasks()
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let mut pred = vec![0.0; task.n_samples()];
            task.x.matvec(w.column(t), &mut pred);
            task.y
                .iter()
                .zip(&pred)
                .map(|(y, p)| (y - p) / lambda)
                .collect()
        })
        .collect();
    Ok(DualPoint::from_blocks(blocks))
}

/// `max(0, max_ℓ g_ℓ(θ) − 1)`; zero iff θ ∈ F.
pub fn dual_feasibility_violation(ds: &MultiTaskDataset, theta: &DualPoint) -> f64 {
    match all_g(ds, theta) {
        Ok(g) => (g.into_iter().fold(0.0, f64::max) - 1.0).max(0.0),
        Err(_) => f64::INFINITY,
    }
}

/// Dual objective `½‖y‖² − (λ²/2)‖y/λ − θ‖²`.
pub fn dual_objective(ds: &MultiTaskDataset, theta: &DualPoint, lambda: f64) -> f64 {
    let y = stack_response(ds);
    let dist_sq: f64 = y
        .values()
        .iter()
        .zip(theta.values())
        .map(|(yi, ti)| (yi / lambda - ti).powi(2))
        .sum();
    0.5 * dot(y.values(), y.values()) - 0.5 * lambda * lambda * dist_sq
}

/// Normal vector to F at the reference dual optimum:
/// `y/λ0 − θ0` below λ_max, `∇g_{ℓ_*}(y/λ_max)` at λ_max.
pub fn normal_vector(ds: &MultiTaskDataset, theta0: &DualPoint, lambda0: f64) -> Result<DualPoint> {
    normal_vector_given(ds, theta0, lambda0, &lambda_max(ds)?)
}

fn normal_vector_given(ds: &MultiTaskDataset, theta0: &DualPoint, lambda0: f64, lmax: &LambdaMax) -> Result<DualPoint> {
    check_blocks(ds, theta0)?;
    if !(lambda0 > 0.0) {
        return Err(Error::LambdaOutOfRange {
            lambda: lambda0,
            reason: "reference lambda must be positive".into(),
        });
    }
    let y = stack_response(ds);
    if lambda0 > lmax.value * (1.0 + LAMBDA_MAX_RTOL) {
        return Err(Error::LambdaOutOfRange {
            lambda: lambda0,
            reason: format!("reference lambda exceeds lambda_max = {}", lmax.value),
        });
    }
    let at_max = (lambda0 - lmax.value).abs() <= LAMBDA_MAX_RTOL * lmax.value;
    let n = if at_max {
        let y_scaled = y.scaled(1.0 / lmax.value);
        let mismatch: f64 = y_scaled
            .values()
            .iter()
            .zip(theta0.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if mismatch > SIGN_RTOL * y_scaled.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::LambdaOutOfRange {
                lambda: lambda0,
                reason: "reference at lambda_max must be y / lambda_max".into(),
            });
        }
        grad_g_ell(ds, &y_scaled, lmax.argmax)?
    } else {
        y.with_values(
            y.values()
                .iter()
                .zip(theta0.values())
                .map(|(yi, ti)| yi / lambda0 - ti)
                .collect(),
        )
    };
    if n.norm() < ZERO_NORMAL_RTOL * y.norm() / lambda0 {
        return Err(Error::ZeroNormal);
    }
    Ok(n)
}

/// Known dual optimum θ*(λ0) together with the normal vector n(λ0).
///
/// `normal` is `None` when n(λ0) vanishes; the ball then falls back to the
/// unprojected estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    lambda0: f64,
    theta0: DualPoint,
    normal: Option<DualPoint>,
}

impl ReferenceSolution {
    pub fn new(ds: &MultiTaskDataset, theta0: DualPoint, lambda0: f64) -> Result<Self> {
        Self::new_given(ds, theta0, lambda0, &lambda_max(ds)?)
    }

    pub(crate) fn new_given(ds: &MultiTaskDataset, theta0: DualPoint, lambda0: f64, lmax: &LambdaMax) -> Result<Self> {
        let normal = match normal_vector_given(ds, &theta0, lambda0, lmax) {
            Ok(n) => Some(n),
            Err(Error::ZeroNormal) => None,
            Err(e) => return Err(e),
        };
        if let Some(n) = &normal {
            let y = stack_response(ds);
            let yn = dot(y.values(), n.values());
            let tol = SIGN_RTOL * y.norm() * n.norm();
            if yn < -tol {
                return Err(Error::NegativeInnerProduct {
                    value: yn,
                    tolerance: tol,
                });
            }
        }
        Ok(Self {
            lambda0,
            theta0,
            normal,
        })
    }

    /// θ*(λ_max) = y/λ_max.
    pub fn at_lambda_max(ds: &MultiTaskDataset) -> Result<Self> {
        Self::at_lambda_max_given(ds, &lambda_max(ds)?)
    }

    fn at_lambda_max_given(ds: &MultiTaskDataset, lmax: &LambdaMax) -> Result<Self> {
        let theta0 = stack_response(ds).scaled(1.0 / lmax.value);
        Self::new_given(ds, theta0, lmax.value, lmax)
    }

    /// Reference built from a primal solution `W*(λ0)` via the KKT relation.
    pub fn from_primal(ds: &MultiTaskDataset, w: &WeightMatrix, lambda0: f64) -> Result<Self> {
        Self::from_primal_given(ds, w, lambda0, &lambda_max(ds)?)
    }

    /// [`ReferenceSolution::from_primal`] with `λ_max` already known.
    pub fn from_primal_given(ds: &MultiTaskDataset, w: &WeightMatrix, lambda0: f64, lmax: &LambdaMax) -> Result<Self> {
        if lambda0 >= lmax.value * (1.0 - LAMBDA_MAX_RTOL) {
            return Self::at_lambda_max_given(ds, lmax);
        }
        Self::new_given(ds, dual_from_primal(ds, w, lambda0)?, lambda0, lmax)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn theta0(&self) -> &DualPoint {
        &self.theta0
    }

    pub fn normal(&self) -> Option<&DualPoint> {
        self.normal.as_ref()
    }
}

/// Ball `{θ : ‖θ − center‖ ≤ radius}` that contains θ*(λ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBall {
    pub center: DualPoint,
    pub radius: f64,
    pub lambda: f64,
    pub lambda0: f64,
}

impl DualBall {
    pub fn contains(&self, theta: &DualPoint, rtol: f64) -> bool {
        self.distance_to_center(theta) <= self.radius * (1.0 + rtol)
    }

    pub fn distance_to_center(&self, theta: &DualPoint) -> f64 {
        self.center
            .values()
            .iter()
            .zip(theta.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Ball estimate of θ*(λ) for λ < λ0:
/// `r = y/λ − θ0`, `r⊥ = r − (⟨n,r⟩/‖n‖²) n`, center `θ0 + r⊥/2`, radius `‖r⊥‖/2`.
pub fn dual_ball(ds: &MultiTaskDataset, reference: &ReferenceSolution, lambda: f64) -> Result<DualBall> {
    ball_parts(ds, reference, lambda).map(|(ball, _)| ball)
}

/// The ball together with `κ = ⟨n,r⟩/‖n‖²` (zero without a normal), so that
/// `center = ½θ0 + ½y/λ − ½κn`.
pub(crate) fn ball_parts(ds: &MultiTaskDataset, reference: &ReferenceSolution, lambda: f64) -> Result<(DualBall, f64)> {
    if !(lambda > 0.0 && lambda < reference.lambda0) {
        return Err(Error::LambdaOutOfRange {
            lambda,
            reason: format!("screening requires 0 < lambda < lambda0 = {}", reference.lambda0),
        });
    }
    let y = stack_response(ds);
    let theta0 = reference.theta0();
    let r: Vec<f64> = y
        .values()
        .iter()
        .zip(theta0.values())
        .map(|(yi, ti)| yi / lambda - ti)
        .collect();
    let mut kappa = 0.0;
    let r_perp = match reference.normal() {
        Some(n) => {
            let n = n.values();
            let nn = dot(n, n);
            let rn = dot(&r, n);
            let tol = SIGN_RTOL * dot(&r, &r).sqrt() * nn.sqrt();
            if rn < -tol {
                return Err(Error::NegativeInnerProduct {
                    value: rn,
                    tolerance: tol,
                });
            }
            kappa = rn / nn;
            r.iter().zip(n).map(|(ri, ni)| ri - kappa * ni).collect()
        }
        None => r,
    };
    let radius = 0.5 * dot(&r_perp, &r_perp).sqrt();
    let center = theta0
        .values()
        .iter()
        .zip(&r_perp)
        .map(|(t, rp)| t + 0.5 * rp)
        .collect();
    let ball = DualBall {
        center: theta0.with_values(center),
        radius,
        lambda,
        lambda0: reference.lambda0,
    };
    Ok((ball, kappa))
}
