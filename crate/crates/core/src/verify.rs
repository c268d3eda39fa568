//! Invariant batteries run by `mtfl verify`.
//!
//! Each suite returns a list of named pass/fail checks. The path-based suites
//! use a coordinate-descent solve as the unscreened reference and the default
//! accelerated solver for the screened path, so the two sides never share a
//! solver.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dataset::{stack_response, DualPoint, LambdaGrid, MultiTaskDataset, WeightMatrix};
use crate::dual::{dual_ball, dual_from_primal, g_ell, lambda_max, ReferenceSolution};
use crate::error::{Error, Result};
use crate::qp1qc::{all_s, solve, solve_with, Branch, NewtonOptions, Qp1qcInstance};
use crate::screening::{solve_path, PathOptions, PathReport, ReferenceMode, ZERO_ROW_THRESHOLD};
use crate::solver::{duality_gap, Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Safety,
    Ball,
    Qp1qc,
    Gap,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Safety, Suite::Ball, Suite::Qp1qc, Suite::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Safety => "safety",
            Suite::Ball => "ball",
            Suite::Qp1qc => "qp1qc",
            Suite::Gap => "gap",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: Suite, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            suite,
            name,
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub grid_points: usize,
    pub grid_min: f64,
    pub kkt_tol: f64,
    pub cases: usize,
    pub sphere_samples: usize,
    pub ball_samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_points: 20,
            grid_min: 0.01,
            kkt_tol: 1e-8,
            cases: 1000,
            sphere_samples: 100_000,
            ball_samples: 200,
            seed: 0,
        }
    }
}

/// Runs the selected suites; `ds` may be `None` when only data-free suites
/// are requested.
pub fn run(ds: Option<&MultiTaskDataset>, suites: &[Suite], opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let needs_path = suites.iter().any(|s| *s != Suite::Qp1qc);
    let oracle = match (needs_path, ds) {
        (true, Some(ds)) => Some(oracle_path(ds, opts)?),
        (true, None) => return Err(Error::InvalidConfig("a dataset is required for the path suites".into())),
        (false, _) => None,
    };
    for &suite in suites {
        match suite {
            Suite::Qp1qc => checks.extend(qp1qc_suite(opts.cases, opts.sphere_samples, opts.seed)),
            Suite::Safety => checks.extend(safety_suite(ds.unwrap(), oracle.as_ref().unwrap(), opts)?),
            Suite::Ball => checks.extend(ball_suite(ds.unwrap(), oracle.as_ref().unwrap(), opts)?),
            Suite::Gap => checks.extend(gap_suite(ds.unwrap(), oracle.as_ref().unwrap())?),
        }
    }
    Ok(checks)
}

fn grid(ds: &MultiTaskDataset, opts: &VerifyOptions) -> Result<LambdaGrid> {
    LambdaGrid::log_spaced(lambda_max(ds)?.value, opts.grid_points, opts.grid_min)
}

fn oracle_config(kkt_tol: f64) -> SolverConfig {
    SolverConfig {
        kkt_tol,
        method: Method::Bcd,
        max_iters: 1_000_000,
        ..SolverConfig::default()
    }
}

fn oracle_path(ds: &MultiTaskDataset, opts: &VerifyOptions) -> Result<PathReport> {
    solve_path(ds, &grid(ds, opts)?, &oracle_config(opts.kkt_tol), &PathOptions::unscreened())
        .map_err(|f| f.error)
}

fn safety_suite(ds: &MultiTaskDataset, oracle: &PathReport, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let grid = grid(ds, opts)?;
    let cfg = SolverConfig {
        kkt_tol: opts.kkt_tol,
        max_iters: 1_000_000,
        ..SolverConfig::default()
    };
    let mut checks = Vec::new();
    for (name, mode) in [
        ("no screened nonzero rows (sequential)", ReferenceMode::Sequential),
        ("no screened nonzero rows (lambda_max)", ReferenceMode::LambdaMax),
    ] {
        let path_opts = PathOptions {
            reference: mode,
            ..PathOptions::default()
        };
        let screened = solve_path(ds, &grid, &cfg, &path_opts).map_err(|f| f.error)?;
        let violations: usize = screened
            .records
            .iter()
            .zip(&oracle.records)
            .map(|(s, o)| s.safety_violations(&o.weights, ZERO_ROW_THRESHOLD).len())
            .sum();
        checks.push(Check::new(
            Suite::Safety,
            name,
            violations == 0,
            format!(
                "{violations} violations over {} grid points, mean rejection ratio {:.4}",
                screened.records.len(),
                screened.mean_rejection_ratio().unwrap_or(f64::NAN)
            ),
        ));
        if mode == ReferenceMode::Sequential {
            let worst = screened
                .records
                .iter()
                .zip(&oracle.records)
                .map(|(s, o)| (s.objective - o.objective).abs() / o.objective.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            checks.push(Check::new(
                Suite::Safety,
                "screened objective equals unscreened",
                worst <= 1e-6,
                format!("max relative difference {worst:.3e}"),
            ));
        }
    }
    Ok(checks)
}

fn ball_suite(ds: &MultiTaskDataset, oracle: &PathReport, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed ^ 0xba11);
    let at_max = ReferenceSolution::at_lambda_max(ds)?;
    let mut worst_ratio: f64 = 0.0;
    let mut contained = true;
    let mut dominated = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 1..oracle.records.len() {
        let target = &oracle.records[k];
        let theta = dual_from_primal(ds, &target.weights, target.lambda)?;
        let prev = &oracle.records[k - 1];
        let sequential = ReferenceSolution::from_primal(ds, &prev.weights, prev.lambda)?;
        for reference in [&at_max, &sequential] {
            let ball = dual_ball(ds, reference, target.lambda)?;
            let dist = ball.distance_to_center(&theta);
            if dist > ball.radius * (1.0 + 1e-6) {
                contained = false;
            }
            if ball.radius > 0.0 {
                worst_ratio = worst_ratio.max(dist / ball.radius);
            }
        }
        // the screening scores bound g over random points of the sequential ball
        let ball = dual_ball(ds, &sequential, target.lambda)?;
        let scores = all_s(ds, &ball)?;
        for _ in 0..opts.ball_samples {
            let p = random_point_in_ball(&mut rng, &ball.center, ball.radius);
            let l = rng.random_range(0..ds.n_features());
            let g = g_ell(ds, &p, l)?;
            worst_excess = worst_excess.max(g - scores[l]);
            if g > scores[l] + 1e-9 {
                dominated = false;
            }
        }
    }
    Ok(vec![
        Check::new(
            Suite::Ball,
            "dual optimum inside both balls",
            contained,
            format!("max distance/radius {worst_ratio:.9}"),
        ),
        Check::new(
            Suite::Ball,
            "s_l dominates g_l inside the ball",
            dominated,
            format!("max g - s {worst_excess:.3e}"),
        ),
    ])
}

fn gap_suite(ds: &MultiTaskDataset, oracle: &PathReport) -> Result<Vec<Check>> {
    let mut min_gap = f64::INFINITY;
    let mut max_rel_gap: f64 = 0.0;
    for r in &oracle.records {
        let gap = duality_gap(ds, &r.weights, r.lambda)?;
        min_gap = min_gap.min(gap);
        max_rel_gap = max_rel_gap.max(gap / r.objective.abs().max(1.0));
    }
    let y = stack_response(ds);
    let zero = WeightMatrix::zeros(ds.n_features(), ds.n_tasks());
    let lm = lambda_max(ds)?.value;
    let theta_max: DualPoint = y.scaled(1.0 / lm);
    let feasible_at_max = crate::dual::dual_feasibility_violation(ds, &theta_max) <= 1e-12;
    let infeasible_below = crate::dual::dual_feasibility_violation(ds, &y.scaled(1.0 / (0.99 * lm))) > 0.0;
    Ok(vec![
        Check::new(
            Suite::Gap,
            "duality gap nonnegative",
            min_gap >= -1e-10,
            format!("min gap {min_gap:.3e}"),
        ),
        Check::new(
            Suite::Gap,
            "duality gap small at tolerance",
            max_rel_gap <= 1e-6,
            format!("max relative gap {max_rel_gap:.3e}"),
        ),
        Check::new(
            Suite::Gap,
            "y/lambda_max feasible, y/(0.99 lambda_max) not",
            feasible_at_max && infeasible_below && duality_gap(ds, &zero, lm)?.abs() <= 1e-10 * (1.0 + ds.loss(&zero)),
            format!("lambda_max = {lm:.12e}"),
        ),
    ])
}

fn random_point_in_ball(rng: &mut ChaCha20Rng, center: &DualPoint, radius: f64) -> DualPoint {
    let dir: Vec<f64> = (0..center.len()).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = radius * rng.random::<f64>().powf(1.0 / center.len() as f64) / norm;
    center.with_values(center.values().iter().zip(&dir).map(|(c, d)| c + scale * d).collect())
}

/// Random instance shaped like a real feature: column norms and inner
/// products from Gaussian vectors, radius log-uniform in [1e-2, 10].
pub fn random_instance(rng: &mut ChaCha20Rng, t_len: usize) -> Qp1qcInstance {
    let mut norms = Vec::with_capacity(t_len);
    let mut c = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let x: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut *rng));
        let o: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut *rng));
        norms.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        c.push(x.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>());
    }
    let delta = 10f64.powf(rng.random_range(-2.0..1.0));
    Qp1qcInstance::from_feature(&norms, c, delta).expect("valid by construction")
}

/// Largest objective over `samples` random points of the sphere `‖u‖ = Δ`.
pub fn sphere_oracle(rng: &mut ChaCha20Rng, inst: &Qp1qcInstance, samples: usize) -> f64 {
    let t_len = inst.n_tasks();
    let mut u = vec![0.0; t_len];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        for v in u.iter_mut() {
            *v = StandardNormal.sample(&mut *rng);
        }
        let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v *= inst.delta() / n);
        best = best.max(inst.objective(&u));
    }
    best
}

fn qp1qc_suite(cases: usize, samples: usize, seed: u64) -> Vec<Check> {
    const TASK_COUNTS: [usize; 4] = [1, 2, 3, 5];
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9191);
    let mut oracle_ok = 0;
    let mut t1_ok = 0;
    let mut t1_total = 0;
    let mut cert_ok = 0;
    let mut newton_total = 0;
    let mut newton_fast = 0;
    let mut newton_done = 0;
    for k in 0..cases {
        let t_len = TASK_COUNTS[k % TASK_COUNTS.len()];
        let inst = random_instance(&mut rng, t_len);
        let Ok(sol) = solve(&inst) else { continue };
        let oracle = sphere_oracle(&mut rng, &inst, samples);
        if sol.s_value >= oracle - 1e-9 && sol.s_value <= oracle + 1e-2 * (1.0 + oracle) {
            oracle_ok += 1;
        }
        if t_len == 1 {
            t1_total += 1;
            let exact = (inst.delta() * inst.a()[0].sqrt() + inst.c()[0].abs()).powi(2);
            if (sol.s_value - exact).abs() <= 1e-12 * exact.max(1.0) {
                t1_ok += 1;
            }
        }
        let psd = inst.a().iter().all(|a| sol.alpha_star - 2.0 * a >= -1e-12);
        let boundary = sol.boundary_residual <= 1e-10 * inst.delta().max(1.0);
        if psd && boundary {
            cert_ok += 1;
        }
        if sol.branch == Branch::Newton {
            newton_total += 1;
            let opts = NewtonOptions {
                tol: 1e-12,
                max_iters: 50,
            };
            if let Ok(s) = solve_with(&inst, opts) {
                if s.boundary_residual <= 1e-12 * inst.delta().max(1.0) {
                    newton_done += 1;
                    if s.newton_iters <= 10 {
                        newton_fast += 1;
                    }
                }
            }
        }
    }
    let frac = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    vec![
        Check::new(
            Suite::Qp1qc,
            "s_l within sphere-sampling bounds",
            oracle_ok == cases,
            format!("{oracle_ok}/{cases} instances"),
        ),
        Check::new(
            Suite::Qp1qc,
            "T=1 closed form",
            t1_ok == t1_total,
            format!("{t1_ok}/{t1_total} instances"),
        ),
        Check::new(
            Suite::Qp1qc,
            "PSD multiplier and boundary",
            cert_ok == cases,
            format!("{cert_ok}/{cases} instances"),
        ),
        Check::new(
            Suite::Qp1qc,
            "Newton converges within 10 iterations",
            frac(newton_fast, newton_total) >= 0.99 && newton_done == newton_total,
            format!("{newton_fast}/{newton_total} within 10, {newton_done}/{newton_total} within 50"),
        ),
    ]
}
