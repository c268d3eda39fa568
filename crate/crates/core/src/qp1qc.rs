//! Per-feature screening score `s_ℓ = max_{θ ∈ ball} g_ℓ(θ)`.
//!
//! Maximizing the convex `g_ℓ` over a ball is nonconvex, but writing each
//! block of the ball as `o_t + u_t θ_t` with `‖θ_t‖ ≤ 1` and `‖u‖ ≤ Δ`
//! reduces it to a T-dimensional quadratic program with one quadratic
//! constraint:
//!
//! ```text
//! min_{‖u‖ ≤ Δ}  ½ uᵀHu + qᵀu,   H = −diag(2a),  q = −2b,
//! a_t = ‖x_ℓ^(t)‖²,  b_t = ‖x_ℓ^(t)‖·|⟨x_ℓ^(t), o_t⟩|
//! ```
//!
//! whose global solution is characterized by a unique multiplier
//! `α* ≥ 2ρ_ℓ`, `ρ_ℓ = max_t a_t`. Either α* = 2ρ_ℓ in closed form, or α* is
//! the root of the secular function `φ(α) = ‖(H + αI)⁻¹q‖⁻¹ − Δ⁻¹`, found by
//! safeguarded Newton iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dot, DualPoint, MultiTaskDataset};
use crate::dual::DualBall;
use crate::error::{Error, Result};

/// Boundary accuracy below which a solution is accepted at all.
pub const ACCEPT_TOL: f64 = 1e-10;

/// Relative duality gap at which bulk scoring stops iterating.
const SCORE_GAP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qp1qcInstance {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    delta: f64,
}

impl Qp1qcInstance {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        let t = a.len();
        if t == 0 || b.len() != t || c.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "instance vectors have lengths {}, {}, {}",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        let all_finite = a.iter().chain(&b).chain(&c).all(|v| v.is_finite()) && delta.is_finite();
        if !all_finite {
            return Err(Error::NonFinite("QP1QC instance".into()));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidConfig(format!("ball radius must be >= 0, got {delta}")));
        }
        for k in 0..t {
            if a[k] < 0.0 || b[k] < 0.0 {
                return Err(Error::InvalidConfig(format!("a and b must be nonnegative (t = {k})")));
            }
            if a[k] == 0.0 && b[k] != 0.0 {
                return Err(Error::InvalidConfig(format!("b_{k} must vanish with a_{k}")));
            }
        }
        Ok(Self { a, b, c, delta })
    }

    /// Instance for a single feature column given the per-task inner products
    /// `c_t = ⟨x_ℓ^(t), o_t⟩` and column norms.
    pub fn from_feature(col_norms: &[f64], c: Vec<f64>, delta: f64) -> Result<Self> {
        let a = col_norms.iter().map(|n| n * n).collect();
        let b = col_norms.iter().zip(&c).map(|(n, ci)| n * ci.abs()).collect();
        Self::new(a, b, c, delta)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_tasks(&self) -> usize {
        self.a.len()
    }

    /// ρ_ℓ = max_t a_t
    pub fn rho(&self) -> f64 {
        self.a.iter().copied().fold(0.0, f64::max)
    }

    /// 𝓘_ℓ = {t : a_t = ρ_ℓ}
    pub fn top_set(&self) -> Vec<usize> {
        let rho = self.rho();
        (0..self.a.len()).filter(|&t| self.a[t] == rho).collect()
    }

    /// Diagonal of H.
    pub fn h_diag(&self) -> Vec<f64> {
        self.a.iter().map(|a| -2.0 * a).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.b.iter().map(|b| -2.0 * b).collect()
    }

    /// `u(α) = −(H + αI)⁻¹q`, i.e. `u_t = 2b_t / (α − 2a_t)`; components with
    /// `b_t = 0` are zero.
    pub fn u_at(&self, alpha: f64) -> Vec<f64> {
        let mut u = vec![0.0; self.n_tasks()];
        self.view().fill_u(alpha, &mut u);
        u
    }

    /// Secular function `φ(α) = ‖u(α)‖⁻¹ − Δ⁻¹` on (2ρ, ∞).
    pub fn secular(&self, alpha: f64) -> f64 {
        let u = self.u_at(alpha);
        1.0 / dot(&u, &u).sqrt() - 1.0 / self.delta
    }

    /// `Σ c_t² + (α/2)Δ² − ½ qᵀu`. For any α > 2ρ with u = u(α) this is a
    /// Lagrangian upper bound on the maximum; it is tight at α*.
    pub fn value_at(&self, alpha: f64, u: &[f64]) -> f64 {
        self.view().value_at(alpha, u)
    }

    fn view(&self) -> View<'_> {
        View {
            a: &self.a,
            b: &self.b,
            c: &self.c,
            delta: self.delta,
        }
    }

    /// Objective of the maximization at a point u of the ball:
    /// `Σ_t (√a_t |u_t| + |c_t|)²`.
    pub fn objective(&self, u: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.c)
            .zip(u)
            .map(|((a, c), u)| (a.sqrt() * u.abs() + c.abs()).powi(2))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    ClosedForm,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qp1qcSolution {
    pub alpha_star: f64,
    pub u_star: Vec<f64>,
    pub s_value: f64,
    pub branch: Branch,
    /// Number of `u_k` evaluations in the Newton branch, 0 otherwise.
    pub newton_iters: usize,
    /// `|‖u*‖ − Δ|` at return.
    pub boundary_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once `|‖u_k‖ − Δ| ≤ tol · max(Δ, 1)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 50,
        }
    }
}

pub fn solve(inst: &Qp1qcInstance) -> Result<Qp1qcSolution> {
    solve_with(inst, NewtonOptions::default())
}

pub fn solve_with(inst: &Qp1qcInstance, opts: NewtonOptions) -> Result<Qp1qcSolution> {
    let mut u = vec![0.0; inst.n_tasks()];
    let core = solve_core(inst.view(), opts, None, &mut u)?;
    Ok(Qp1qcSolution {
        alpha_star: core.alpha,
        u_star: u,
        s_value: core.s_value,
        branch: core.branch,
        newton_iters: core.iters,
        boundary_residual: core.residual,
    })
}

/// Borrowed instance data, so hot loops can reuse buffers.
#[derive(Clone, Copy)]
struct View<'a> {
    a: &'a [f64],
    b: &'a [f64],
    c: &'a [f64],
    delta: f64,
}

impl View<'_> {
    fn fill_u(&self, alpha: f64, u: &mut [f64]) {
        self.fill_u_moments(alpha, u);
    }

    /// Writes `u(α)` and returns the sums the iteration needs.
    fn fill_u_moments(&self, alpha: f64, u: &mut [f64]) -> Moments {
        let mut m = Moments::default();
        for ((u, &a), &b) in u.iter_mut().zip(self.a).zip(self.b) {
            let inv = 1.0 / (alpha - 2.0 * a);
            let ut = 2.0 * b * inv;
            let (ut, ct) = if b == 0.0 { (0.0, 0.0) } else { (ut, ut * ut * inv) };
            *u = ut;
            m.add(a, b, ut, ct);
        }
        m
    }

    fn value_at(&self, alpha: f64, u: &[f64]) -> f64 {
        let base: f64 = self.c.iter().map(|c| c * c).sum();
        let linear: f64 = self.b.iter().zip(u).map(|(b, u)| b * u).sum();
        base + 0.5 * alpha * self.delta * self.delta + linear
    }

    fn scan(&self) -> Scan {
        Scan::new(self.a.iter().copied().zip(self.b.iter().copied()), self.delta)
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    /// `‖u‖²`
    norm_sq: f64,
    /// `uᵀ(H + αI)⁻¹u`
    curvature: f64,
    /// `Σ b_t u_t`
    bu: f64,
    /// `Σ a_t u_t²`
    au2: f64,
}

impl Moments {
    #[inline]
    fn add(&mut self, a: f64, b: f64, u: f64, curvature: f64) {
        self.norm_sq += u * u;
        self.curvature += curvature;
        self.bu += b * u;
        self.au2 += a * u * u;
    }
}

struct Core {
    alpha: f64,
    s_value: f64,
    branch: Branch,
    iters: usize,
    residual: f64,
}

/// Summary of one instance gathered in a single scan.
struct Scan {
    rho: f64,
    first_top: usize,
    top_is_flat: bool,
    /// `max(2ρ, 2a_t + 2b_t/Δ over b_t ≠ 0)`
    floor: f64,
    b_norm_sq: f64,
}

impl Scan {
    fn new(ab: impl Iterator<Item = (f64, f64)>, delta: f64) -> Self {
        let inv_delta = 1.0 / delta;
        let (mut rho, mut first_top, mut top_b) = (f64::NEG_INFINITY, 0, 0.0f64);
        let (mut floor, mut b_norm_sq) = (0.0f64, 0.0);
        for (t, (a, b)) in ab.enumerate() {
            if a > rho {
                (rho, first_top, top_b) = (a, t, b);
            } else if a == rho {
                top_b = top_b.max(b);
            }
            if b != 0.0 {
                floor = floor.max(2.0 * a + 2.0 * b * inv_delta);
            }
            b_norm_sq += b * b;
        }
        Self {
            rho,
            first_top,
            top_is_flat: top_b == 0.0,
            floor: floor.max(2.0 * rho),
            b_norm_sq,
        }
    }

    /// Initial bracket `(lo, hi)` and iterate for the secular equation.
    fn newton_start(&self, delta: f64) -> (f64, f64, f64) {
        let rho = self.rho;
        // φ < 0 at the left end; ‖u(α)‖ ≤ ‖q‖/(α − 2ρ) gives φ ≥ 0 at the right end
        // ‖u(α)‖ ≥ 2b_t/(α − 2a_t) for every t, so φ ≤ 0 at the largest
        // 2a_t + 2b_t/Δ; that point is past the pole when b_t ≠ 0 on the top set
        let q_norm = 2.0 * self.b_norm_sq.sqrt();
        let lo = self.floor;
        let hi = (2.0 * rho + 2.0 * q_norm / delta).max(lo);
        let alpha = if self.top_is_flat || lo > 2.0 * rho {
            lo
        } else {
            lo + 1e-12 * rho.max(1.0)
        };
        (lo, hi, alpha)
    }
}

/// One Newton step on `φ`, falling back to bisection outside `(lo, hi)`.
/// Tightens the bracket with the sign of `φ(α)` first.
#[inline]
fn newton_next(alpha: f64, m: &Moments, delta: f64, lo: &mut f64, hi: &mut f64) -> f64 {
    let u_norm = m.norm_sq.sqrt();
    if u_norm > delta {
        *lo = lo.max(alpha);
    } else {
        *hi = hi.min(alpha);
    }
    let next = alpha + m.norm_sq * (u_norm - delta) / (delta * m.curvature);
    if next > *lo && next < *hi {
        next
    } else {
        0.5 * (*lo + *hi)
    }
}

/// Lagrangian bound at α and the value at `u(α)` rescaled onto the sphere;
/// the maximum lies between them.
#[inline]
fn value_bounds(base: f64, alpha: f64, delta: f64, m: &Moments) -> (f64, f64) {
    let upper = base + 0.5 * alpha * delta * delta + m.bu;
    let shrink = delta / m.norm_sq.sqrt();
    let lower = base + shrink * shrink * m.au2 + 2.0 * shrink * m.bu;
    (upper, lower)
}

/// Solves the instance, leaving `u*` in `u`. With `gap_tol`, Newton also stops
/// once the bounds from [`value_bounds`] agree to `gap_tol` (relative), and
/// the upper one is returned.
fn solve_core(v: View<'_>, opts: NewtonOptions, gap_tol: Option<f64>, u: &mut [f64]) -> Result<Core> {
    let delta = v.delta;

    if delta == 0.0 {
        let rho = v.a.iter().copied().fold(0.0, f64::max);
        u.fill(0.0);
        return Ok(Core {
            alpha: 2.0 * rho,
            s_value: v.value_at(2.0 * rho, u),
            branch: Branch::ClosedForm,
            iters: 0,
            residual: 0.0,
        });
    }

    let scan = v.scan();
    let rho = scan.rho;
    if scan.top_is_flat {
        // ū_t = −q_t / (h_tt + 2ρ) off the top set, zero on it
        for ((u, &a), &b) in u.iter_mut().zip(v.a).zip(v.b) {
            *u = if a == rho || b == 0.0 { 0.0 } else { b / (rho - a) };
        }
        let norm_sq = dot(u, u);
        if norm_sq <= delta * delta {
            // complete to the sphere on the smallest index of the top set
            u[scan.first_top] = (delta * delta - norm_sq).sqrt();
            let alpha = 2.0 * rho;
            return Ok(Core {
                alpha,
                s_value: v.value_at(alpha, u),
                branch: Branch::ClosedForm,
                iters: 0,
                residual: (dot(u, u).sqrt() - delta).abs(),
            });
        }
    }

    newton(v, &scan, opts, gap_tol, u)
}

fn newton(v: View<'_>, scan: &Scan, opts: NewtonOptions, gap_tol: Option<f64>, u: &mut [f64]) -> Result<Core> {
    let delta = v.delta;
    let scale = delta.max(1.0);
    let (mut lo, mut hi, mut alpha) = scan.newton_start(delta);
    let base: f64 = v.c.iter().map(|c| c * c).sum();

    let (mut best_alpha, mut best_residual) = (alpha, f64::INFINITY);
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let m = v.fill_u_moments(alpha, u);
        let residual = (m.norm_sq.sqrt() - delta).abs();
        if residual < best_residual {
            (best_alpha, best_residual) = (alpha, residual);
        }
        if residual <= opts.tol * scale {
            break;
        }
        if let Some(gap_tol) = gap_tol {
            let (upper, lower) = value_bounds(base, alpha, delta, &m);
            if upper - lower <= gap_tol * upper && residual <= ACCEPT_TOL * scale {
                return Ok(Core {
                    alpha,
                    s_value: upper,
                    branch: Branch::Newton,
                    iters,
                    residual,
                });
            }
        }
        let next = newton_next(alpha, &m, delta, &mut lo, &mut hi);
        if next == alpha {
            break;
        }
        alpha = next;
    }

    if best_residual > ACCEPT_TOL * scale {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual: best_residual,
        });
    }
    if best_alpha != alpha {
        v.fill_u(best_alpha, u);
    }
    Ok(Core {
        alpha: best_alpha,
        s_value: v.value_at(best_alpha, u),
        branch: Branch::Newton,
        iters,
        residual: best_residual,
    })
}

pub fn build_instance(ds: &MultiTaskDataset, ball: &DualBall, l: usize) -> Result<Qp1qcInstance> {
    ds.check_feature(l)?;
    if !ball.center.is_compatible(ds) {
        return Err(Error::DimensionMismatch("ball center does not match dataset".into()));
    }
    Ok(instance_unchecked(ds, ball, l))
}

fn instance_unchecked(ds: &MultiTaskDataset, ball: &DualBall, l: usize) -> Qp1qcInstance {
    let t_len = ds.n_tasks();
    let mut norms = Vec::with_capacity(t_len);
    let mut c = Vec::with_capacity(t_len);
    for (t, block) in ball.center.blocks().enumerate() {
        norms.push(ds.col_norm(t, l));
        c.push(dot(ds.column(t, l), block));
    }
    let a = norms.iter().map(|n| n * n).collect();
    let b = norms.iter().zip(&c).map(|(n, ci)| n * ci.abs()).collect();
    Qp1qcInstance {
        a,
        b,
        c,
        delta: ball.radius,
    }
}

/// `s_ℓ(λ, λ0) = max_{θ ∈ ball} g_ℓ(θ)`.
pub fn s_ell(ds: &MultiTaskDataset, ball: &DualBall, l: usize) -> Result<f64> {
    Ok(solve(&build_instance(ds, ball, l)?)?.s_value)
}

/// `s_ℓ` for every feature, evaluated concurrently.
pub fn all_s(ds: &MultiTaskDataset, ball: &DualBall) -> Result<Vec<f64>> {
    if !ball.center.is_compatible(ds) {
        return Err(Error::DimensionMismatch("ball center does not match dataset".into()));
    }
    let c = correlations(ds, &ball.center);
    scores_from_parts(ds, &[(1.0, &c)], ball.radius)
}

/// `⟨x_ℓ^(t), θ_t⟩` at `t·d + ℓ`; `θ` must match the dataset blocks.
pub(crate) fn correlations(ds: &MultiTaskDataset, theta: &DualPoint) -> Vec<f64> {
    let mut out = vec![0.0; ds.n_tasks() * ds.n_features()];
    ds.correlations_into(theta.values(), &mut out);
    out
}

/// Features scored together. Their Newton iterations run in lockstep with
/// task-major storage, so the arithmetic vectorizes across features.
const LANES: usize = 8;

struct ScoreScratch {
    t_len: usize,
    /// Entry t of lane k sits at `t·LANES + k`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    single: Vec<f64>,
}

impl ScoreScratch {
    fn new(t_len: usize) -> Self {
        Self {
            t_len,
            a: vec![0.0; LANES * t_len],
            b: vec![0.0; LANES * t_len],
            c: vec![0.0; LANES * t_len],
            single: vec![0.0; 4 * t_len],
        }
    }

    /// Loads features `first..first + n` from task-major norms and the center
    /// correlations `Σ w·v` over `center`.
    fn load(&mut self, norms: &[f64], center: &[(f64, &[f64])], first: usize, n: usize) {
        const K: usize = LANES;
        let d = norms.len() / self.t_len;
        for t in 0..self.t_len {
            let range = t * d + first..t * d + first + n;
            let c = &mut self.c[t * K..t * K + n];
            c.fill(0.0);
            for &(w, v) in center {
                for (c, v) in c.iter_mut().zip(&v[range.clone()]) {
                    *c += w * v;
                }
            }
            for (k, &norm) in norms[range].iter().enumerate() {
                self.a[t * K + k] = norm * norm;
                self.b[t * K + k] = norm * c[k].abs();
            }
        }
    }

    /// Scores loaded lane `k` on its own.
    fn score_one(&mut self, k: usize, delta: f64) -> Result<f64> {
        let t_len = self.t_len;
        let (a, rest) = self.single.split_at_mut(t_len);
        let (b, rest) = rest.split_at_mut(t_len);
        let (c, u) = rest.split_at_mut(t_len);
        for t in 0..t_len {
            a[t] = self.a[t * LANES + k];
            b[t] = self.b[t * LANES + k];
            c[t] = self.c[t * LANES + k];
        }
        let v = View { a, b, c, delta };
        Ok(solve_core(v, NewtonOptions::default(), Some(SCORE_GAP_TOL), u)?.s_value)
    }

    /// Scores all loaded lanes. Lanes that need the closed form, stall or run
    /// out of iterations are finished by [`Self::score_one`].
    fn score_lanes(&mut self, delta: f64, out: &mut [f64; LANES]) -> Result<()> {
        const K: usize = LANES;
        let t_len = self.t_len;
        let opts = NewtonOptions::default();
        let scale = delta.max(1.0);
        // parked lanes sit at α = ∞, where u(α) = 0
        let mut alpha = [f64::INFINITY; K];
        let (mut lo, mut hi, mut base) = ([0.0; K], [0.0; K], [0.0; K]);
        let mut pending = [false; K];
        let mut finished = [false; K];
        if delta > 0.0 {
            for k in 0..K {
                let scan = Scan::new((0..t_len).map(|t| (self.a[t * K + k], self.b[t * K + k])), delta);
                if scan.top_is_flat {
                    continue;
                }
                (lo[k], hi[k], alpha[k]) = scan.newton_start(delta);
                base[k] = (0..t_len).map(|t| self.c[t * K + k] * self.c[t * K + k]).sum();
                pending[k] = true;
            }
        }

        for _ in 0..opts.max_iters {
            if !pending.contains(&true) {
                break;
            }
            // α > 2ρ on every pending lane, so no denominator vanishes;
            // one array per sum keeps the lane loop vectorizable
            let (mut norm_sq, mut curvature, mut bu, mut au2) = ([0.0; K], [0.0; K], [0.0; K], [0.0; K]);
            for (a, b) in self.a.chunks_exact(K).zip(self.b.chunks_exact(K)) {
                for k in 0..K {
                    let inv = 1.0 / (alpha[k] - 2.0 * a[k]);
                    let u = 2.0 * b[k] * inv;
                    norm_sq[k] += u * u;
                    curvature[k] += u * u * inv;
                    bu[k] += b[k] * u;
                    au2[k] += a[k] * u * u;
                }
            }
            for k in 0..K {
                if !pending[k] {
                    continue;
                }
                let m = Moments {
                    norm_sq: norm_sq[k],
                    curvature: curvature[k],
                    bu: bu[k],
                    au2: au2[k],
                };
                let (upper, lower) = value_bounds(base[k], alpha[k], delta, &m);
                let residual = (m.norm_sq.sqrt() - delta).abs();
                let gap_closed = upper - lower <= SCORE_GAP_TOL * upper && residual <= ACCEPT_TOL * scale;
                if residual <= opts.tol * scale || gap_closed {
                    out[k] = upper;
                    (pending[k], finished[k]) = (false, true);
                    continue;
                }
                let next = newton_next(alpha[k], &m, delta, &mut lo[k], &mut hi[k]);
                if next == alpha[k] {
                    pending[k] = false;
                }
                alpha[k] = next;
            }
        }

        for (k, out) in out.iter_mut().enumerate() {
            if !finished[k] {
                *out = self.score_one(k, delta)?;
            }
        }
        Ok(())
    }
}

/// Scores of every feature from the task-major center correlations
/// `Σ w·v` over `center`.
pub(crate) fn scores_from_parts(ds: &MultiTaskDataset, center: &[(f64, &[f64])], delta: f64) -> Result<Vec<f64>> {
    scores_task_major(ds.n_tasks(), ds.col_norms(), center, delta)
}

fn scores_task_major(t_len: usize, norms: &[f64], center: &[(f64, &[f64])], delta: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; norms.len() / t_len];
    out.par_chunks_mut(LANES).enumerate().try_for_each_init(
        || ScoreScratch::new(t_len),
        |scratch, (g, out)| {
            scratch.load(norms, center, g * LANES, out.len());
            match out.try_into() {
                Ok(lanes) => scratch.score_lanes(delta, lanes),
                Err(_) => {
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = scratch.score_one(k, delta)?;
                    }
                    Ok(())
                }
            }
        },
    )?;
    Ok(out)
}
