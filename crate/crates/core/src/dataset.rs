//! Domain types shared by every other module: the multi-task dataset, the
//! row-sparse weight matrix, block-partitioned dual points, the lambda grid
//! and per-lambda screening masks.
//!
//! All types are immutable after construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense column-major matrix. Column `j` occupies `data[j * rows..(j + 1) * rows]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DesignMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DesignMatrix::from_col_major(raw.rows, raw.cols, raw.data)
    }
}

impl DesignMatrix {
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Ok(Self {
            rows: n,
            cols: d,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// `out = X w`, skipping zero entries of `w`.
    pub fn matvec(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                axpy(wj, self.column(j), out);
            }
        }
    }

    /// `out = Xᵀ r`.
    pub fn matvec_t(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        if self.rows == 0 {
            out.fill(0.0);
            return;
        }
        let mut blocks = self.data.chunks_exact(4 * self.rows);
        let mut outs = out.chunks_exact_mut(4);
        for (block, o) in (&mut blocks).zip(&mut outs) {
            o.copy_from_slice(&dot4(block, r));
        }
        for (col, o) in blocks.remainder().chunks_exact(self.rows).zip(outs.into_remainder()) {
            *o = dot(col, r);
        }
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for &j in keep {
            data.extend_from_slice(self.column(j));
        }
        Self {
            rows: self.rows,
            cols: keep.len(),
            data,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorize the reduction
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Dot products of `r` with the four consecutive columns stored in `block`.
#[inline]
fn dot4(block: &[f64], r: &[f64]) -> [f64; 4] {
    let n = r.len();
    debug_assert_eq!(block.len(), 4 * n);
    // each entry of r is loaded once for four columns
    let mut acc = [[0.0f64; 2]; 4];
    for i in (0..n - n % 2).step_by(2) {
        let (r0, r1) = (r[i], r[i + 1]);
        for (j, acc) in acc.iter_mut().enumerate() {
            acc[0] += block[j * n + i] * r0;
            acc[1] += block[j * n + i + 1] * r1;
        }
    }
    let mut out = [0.0; 4];
    for (j, o) in out.iter_mut().enumerate() {
        *o = acc[j][0] + acc[j][1];
        if n % 2 == 1 {
            *o += block[j * n + n - 1] * r[n - 1];
        }
    }
    out
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One learning task: design matrix `X_t` (N_t x d) and response `y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
}

impl Task {
    pub fn new(x: DesignMatrix, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }
}

/// Checks every dataset invariant: at least one task, d >= 1, N_t >= 1,
/// shared column count, matching response lengths, finite entries.
pub fn validate_dataset(tasks: &[Task]) -> Result<()> {
    let first = tasks.first().ok_or(Error::Empty("no tasks"))?;
    let d = first.x.cols();
    if d == 0 {
        return Err(Error::Empty("zero features"));
    }
    for (t, task) in tasks.iter().enumerate() {
        if task.x.rows() == 0 || task.y.is_empty() {
            return Err(Error::Empty("task without samples"));
        }
        if task.x.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "task {t} has {} columns, task 0 has {d}",
                task.x.cols()
            )));
        }
        if task.x.rows() != task.y.len() {
            return Err(Error::DimensionMismatch(format!(
                "task {t}: {} rows in X but {} responses",
                task.x.rows(),
                task.y.len()
            )));
        }
        if task.x.as_col_major().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("design matrix of task {t}")));
        }
        if task.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response of task {t}")));
        }
    }
    Ok(())
}

/// T tasks sharing d features. Column norms `‖x_ℓ^(t)‖` are cached at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset", into = "RawDataset")]
pub struct MultiTaskDataset {
    tasks: Vec<Task>,
    n_features: usize,
    /// `col_norms[t * d + ℓ] = ‖x_ℓ^(t)‖`
    col_norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    tasks: Vec<Task>,
}

impl TryFrom<RawDataset> for MultiTaskDataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        MultiTaskDataset::new(raw.tasks)
    }
}

impl From<MultiTaskDataset> for RawDataset {
    fn from(ds: MultiTaskDataset) -> Self {
        RawDataset { tasks: ds.tasks }
    }
}

impl MultiTaskDataset {
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        validate_dataset(&tasks)?;
        let d = tasks[0].x.cols();
        let mut col_norms = Vec::with_capacity(d * tasks.len());
        for task in &tasks {
            col_norms.extend((0..d).map(|l| norm(task.x.column(l))));
        }
        Ok(Self {
            tasks,
            n_features: d,
            col_norms,
        })
    }

    pub fn from_parts(parts: Vec<(DesignMatrix, Vec<f64>)>) -> Result<Self> {
        Self::new(parts.into_iter().map(|(x, y)| Task::new(x, y)).collect())
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, t: usize) -> &Task {
        &self.tasks[t]
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Total sample count N = Σ_t N_t.
    pub fn n_total(&self) -> usize {
        self.tasks.iter().map(Task::n_samples).sum()
    }

    pub fn block_lens(&self) -> Vec<usize> {
        self.tasks.iter().map(Task::n_samples).collect()
    }

    #[inline]
    pub fn column(&self, t: usize, l: usize) -> &[f64] {
        self.tasks[t].x.column(l)
    }

    #[inline]
    pub fn col_norm(&self, t: usize, l: usize) -> f64 {
        self.col_norms[t * self.n_features + l]
    }

    /// All column norms, `‖x_ℓ^(t)‖` at `t·d + ℓ`.
    pub(crate) fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// `out[t·d + ℓ] = ⟨x_ℓ^(t), r_t⟩` for a stacked `r`.
    pub(crate) fn correlations_into(&self, r: &[f64], out: &mut [f64]) {
        let d = self.n_features;
        let mut start = 0;
        for (task, out) in self.tasks.iter().zip(out.chunks_exact_mut(d)) {
            let n = task.n_samples();
            task.x.matvec_t(&r[start..start + n], out);
            start += n;
        }
    }

    pub fn check_feature(&self, l: usize) -> Result<()> {
        if l >= self.n_features {
            return Err(Error::IndexOutOfRange {
                index: l,
                len: self.n_features,
            });
        }
        Ok(())
    }

    /// Restricts every task to the listed features (column deletion, order kept).
    pub fn select_features(&self, keep: &[usize]) -> Self {
        let tasks: Vec<Task> = self
            .tasks
            .iter()
            .map(|task| Task::new(task.x.select_columns(keep), task.y.clone()))
            .collect();
        let d = self.n_features;
        let mut col_norms = Vec::with_capacity(keep.len() * tasks.len());
        for t in 0..tasks.len() {
            col_norms.extend(keep.iter().map(|&l| self.col_norms[t * d + l]));
        }
        Self {
            tasks,
            n_features: keep.len(),
            col_norms,
        }
    }

    /// ½ Σ_t ‖y_t − X_t w_t‖² + λ‖W‖_{2,1}
    pub fn objective(&self, w: &WeightMatrix, lambda: f64) -> f64 {
        self.loss(w) + lambda * w.l21_norm()
    }

    /// ½ Σ_t ‖y_t − X_t w_t‖²
    pub fn loss(&self, w: &WeightMatrix) -> f64 {
        let mut total = 0.0;
        for (t, task) in self.tasks.iter().enumerate() {
            let mut r = vec![0.0; task.n_samples()];
            task.x.matvec(w.column(t), &mut r);
            for (ri, yi) in r.iter_mut().zip(&task.y) {
                *ri = yi - *ri;
            }
            total += 0.5 * dot(&r, &r);
        }
        total
    }
}

/// Stacked response y = (y_1ᵀ, …, y_Tᵀ)ᵀ.
pub fn stack_response(ds: &MultiTaskDataset) -> DualPoint {
    let values = ds.tasks().iter().flat_map(|t| t.y.iter().copied()).collect();
    DualPoint {
        values,
        block_lens: ds.block_lens(),
    }
}

/// d x T weight matrix, stored column-major so each task's `w_t` is contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n_features: usize,
    n_tasks: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n_features: usize, n_tasks: usize) -> Self {
        Self {
            n_features,
            n_tasks,
            values: vec![0.0; n_features * n_tasks],
        }
    }

    pub fn from_col_major(n_features: usize, n_tasks: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_features * n_tasks {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_features}x{n_tasks} weight matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight matrix".into()));
        }
        Ok(Self {
            n_features,
            n_tasks,
            values,
        })
    }

    /// Builds from rows `w^ℓ`, each of length T.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.len();
        let t = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = vec![0.0; d * t];
        for (l, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != t {
                return Err(Error::DimensionMismatch(format!("row {l} has {} entries", row.len())));
            }
            for (k, &v) in row.iter().enumerate() {
                values[k * d + l] = v;
            }
        }
        Self::from_col_major(d, t, values)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_features..(t + 1) * self.n_features]
    }

    #[inline]
    pub fn get(&self, l: usize, t: usize) -> f64 {
        self.values[t * self.n_features + l]
    }

    pub fn row(&self, l: usize) -> Vec<f64> {
        (0..self.n_tasks).map(|t| self.get(l, t)).collect()
    }

    pub fn row_norm(&self, l: usize) -> f64 {
        (0..self.n_tasks)
            .map(|t| self.get(l, t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_features).map(|l| self.row_norm(l)).collect()
    }

    pub fn l21_norm(&self) -> f64 {
        self.row_norms().iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Number of rows whose Euclidean norm does not exceed `threshold`.
    pub fn count_zero_rows(&self, threshold: f64) -> usize {
        self.row_norms().iter().filter(|&&n| n <= threshold).count()
    }

    /// Rows listed in `keep`, in order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let d = keep.len();
        let mut values = vec![0.0; d * self.n_tasks];
        for t in 0..self.n_tasks {
            let col = self.column(t);
            for (i, &l) in keep.iter().enumerate() {
                values[t * d + i] = col[l];
            }
        }
        Self {
            n_features: d,
            n_tasks: self.n_tasks,
            values,
        }
    }

    /// Inverse of [`select_rows`](Self::select_rows): places the rows of
    /// `reduced` at `keep` in a zero d x T matrix.
    pub fn embed_rows(reduced: &WeightMatrix, keep: &[usize], n_features: usize) -> Self {
        assert_eq!(reduced.n_features, keep.len());
        let mut out = Self::zeros(n_features, reduced.n_tasks);
        for t in 0..reduced.n_tasks {
            let src = reduced.column(t);
            let dst = &mut out.values[t * n_features..(t + 1) * n_features];
            for (i, &l) in keep.iter().enumerate() {
                dst[l] = src[i];
            }
        }
        out
    }
}

/// A point of the dual space R^N, partitioned into per-task blocks θ_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    values: Vec<f64>,
    block_lens: Vec<usize>,
}

impl DualPoint {
    pub fn new(values: Vec<f64>, block_lens: Vec<usize>) -> Result<Self> {
        let total: usize = block_lens.iter().sum();
        if total != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "blocks sum to {total} but vector has length {}",
                values.len()
            )));
        }
        Ok(Self { values, block_lens })
    }

    pub fn zeros_like(ds: &MultiTaskDataset) -> Self {
        Self {
            values: vec![0.0; ds.n_total()],
            block_lens: ds.block_lens(),
        }
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Self {
        let block_lens = blocks.iter().map(Vec::len).collect();
        Self {
            values: blocks.concat(),
            block_lens,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block_lens(&self) -> &[usize] {
        &self.block_lens
    }

    pub fn n_blocks(&self) -> usize {
        self.block_lens.len()
    }

    pub fn block(&self, t: usize) -> &[f64] {
        let start: usize = self.block_lens[..t].iter().sum();
        &self.values[start..start + self.block_lens[t]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let mut start = 0;
        self.block_lens.iter().map(move |&len| {
            let b = &self.values[start..start + len];
            start += len;
            b
        })
    }

    /// True when the block partition matches the dataset's task sizes.
    pub fn is_compatible(&self, ds: &MultiTaskDataset) -> bool {
        self.block_lens.len() == ds.n_tasks()
            && self
                .block_lens
                .iter()
                .zip(ds.tasks())
                .all(|(&len, task)| len == task.n_samples())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            block_lens: self.block_lens.clone(),
        }
    }

    /// Same partition, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            values,
            block_lens: self.block_lens.clone(),
        }
    }
}

/// Strictly decreasing positive λ values whose first element is λ_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    /// Relative tolerance on `values[0] == lambda_max`.
    pub const LAMBDA_MAX_RTOL: f64 = 1e-12;

    pub fn new(values: Vec<f64>, lambda_max: f64) -> Result<Self> {
        let first = *values
            .first()
            .ok_or_else(|| Error::InvalidGrid("empty grid".into()))?;
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidGrid("values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGrid("values must be strictly decreasing".into()));
        }
        if (first - lambda_max).abs() > Self::LAMBDA_MAX_RTOL * lambda_max {
            return Err(Error::InvalidGrid(format!(
                "first value {first} does not match lambda_max {lambda_max}"
            )));
        }
        Ok(Self { values })
    }

    /// `points` values with λ/λ_max log-equispaced from 1 down to `min_ratio`,
    /// both endpoints exact.
    pub fn log_spaced(lambda_max: f64, points: usize, min_ratio: f64) -> Result<Self> {
        Self::new(
            log_spaced_ratios(points, min_ratio)?
                .into_iter()
                .map(|r| r * lambda_max)
                .collect(),
            lambda_max,
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }
}

/// λ/λ_max ratios `min_ratio^{k/(points-1)}`, k = 0..points.
pub fn log_spaced_ratios(points: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidGrid("need at least one grid point".into()));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) && points > 1 {
        return Err(Error::InvalidGrid(format!(
            "grid minimum must lie in (0, 1), got {min_ratio}"
        )));
    }
    if points == 1 {
        return Ok(vec![1.0]);
    }
    let last = points - 1;
    let log_min = min_ratio.ln();
    Ok((0..points)
        .map(|k| match k {
            0 => 1.0,
            k if k == last => min_ratio,
            k => (log_min * k as f64 / last as f64).exp(),
        })
        .collect())
}

/// Per-feature screening outcome at one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningMask {
    lambda: f64,
    inactive: Vec<bool>,
    scores: Vec<f64>,
}

impl ScreeningMask {
    /// `inactive[ℓ] = scores[ℓ] < 1`, strictly.
    pub fn from_scores(lambda: f64, scores: Vec<f64>) -> Self {
        let inactive = scores.iter().map(|&s| s < 1.0).collect();
        Self {
            lambda,
            inactive,
            scores,
        }
    }

    /// Closed-form regime λ ≥ λ_max: the whole solution is zero, every score
    /// is reported as 0.
    pub fn all_inactive(lambda: f64, n_features: usize) -> Self {
        Self::from_scores(lambda, vec![0.0; n_features])
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inactive(&self) -> &[bool] {
        &self.inactive
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn n_screened(&self) -> usize {
        self.inactive.iter().filter(|&&b| b).count()
    }

    /// Indices of features that survive screening.
    pub fn kept(&self) -> Vec<usize> {
        self.inactive
            .iter()
            .enumerate()
            .filter_map(|(l, &inactive)| (!inactive).then_some(l))
            .collect()
    }
}
