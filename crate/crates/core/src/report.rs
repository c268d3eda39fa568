//! CSV and JSON output for path and benchmark runs.
//!
//! Numbers are written like C's `%.12g`; column order is fixed.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::screening::{PathRecord, PathReport};

/// `printf("%.12g", v)`.
pub fn fmt_g(v: f64) -> String {
    fmt_g_prec(v, 12)
}

pub fn fmt_g_prec(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_g)
}

pub const PATH_HEADER: [&str; 12] = [
    "lambda",
    "lambda_rel",
    "reference_lambda",
    "n_screened",
    "n_truly_inactive",
    "rejection_ratio",
    "t_screen_s",
    "t_solve_s",
    "objective",
    "kkt_residual",
    "iterations",
    "status",
];

fn path_row(r: &PathRecord) -> Vec<String> {
    vec![
        fmt_g(r.lambda),
        fmt_g(r.lambda_rel),
        opt(r.reference_lambda),
        r.n_screened.to_string(),
        r.n_truly_inactive.to_string(),
        opt(r.rejection_ratio()),
        fmt_g(r.t_screen_s),
        fmt_g(r.t_solve_s),
        fmt_g(r.objective),
        fmt_g(r.kkt_residual),
        r.iterations.to_string(),
        "ok".into(),
    ]
}

/// One row per completed λ; when `failure` is given, a final row for the λ
/// that failed carries the status and leaves the numeric fields empty.
pub fn write_path_csv<W: Write>(
    out: W,
    report: &PathReport,
    failure: Option<(f64, &str)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATH_HEADER)?;
    for r in &report.records {
        w.write_record(path_row(r))?;
    }
    if let Some((lambda, status)) = failure {
        let mut row = vec![String::new(); PATH_HEADER.len()];
        row[0] = fmt_g(lambda);
        if report.lambda_max.is_finite() {
            row[1] = fmt_g(lambda / report.lambda_max);
        }
        row[PATH_HEADER.len() - 1] = status.to_string();
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const BENCH_HEADER: [&str; 7] = [
    "lambda_rel",
    "n_screened",
    "n_inactive_true",
    "rejection_ratio",
    "t_screen_s",
    "t_solve_s",
    "t_solve_noscreen_s",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub lambda_rel: f64,
    pub n_screened: usize,
    pub n_inactive_true: usize,
    pub rejection_ratio: Option<f64>,
    pub t_screen_s: f64,
    pub t_solve_s: f64,
    pub t_solve_noscreen_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTotals {
    pub t_total_with_dpc: f64,
    pub t_total_without_dpc: f64,
    pub t_screen_total: f64,
    pub speedup: f64,
    pub screening_overhead: f64,
    pub mean_rejection_ratio: Option<f64>,
}

impl BenchTotals {
    pub fn new(rows: &[BenchRow]) -> Self {
        let t_screen_total: f64 = rows.iter().map(|r| r.t_screen_s).sum();
        let with: f64 = t_screen_total + rows.iter().map(|r| r.t_solve_s).sum::<f64>();
        let without: f64 = rows.iter().map(|r| r.t_solve_noscreen_s).sum();
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.rejection_ratio).collect();
        Self {
            t_total_with_dpc: with,
            t_total_without_dpc: without,
            t_screen_total,
            speedup: without / with,
            screening_overhead: if with > 0.0 { t_screen_total / with } else { 0.0 },
            mean_rejection_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        }
    }
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_g(r.lambda_rel),
            r.n_screened.to_string(),
            r.n_inactive_true.to_string(),
            opt(r.rejection_ratio),
            fmt_g(r.t_screen_s),
            fmt_g(r.t_solve_s),
            fmt_g(r.t_solve_noscreen_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub cpu_model: String,
    pub threads: usize,
    pub library_version: &'static str,
    pub rng: &'static str,
}

impl Environment {
    pub fn capture() -> Self {
        Self {
            cpu_model: cpu_model(),
            threads: rayon::current_num_threads(),
            library_version: env!("CARGO_PKG_VERSION"),
            rng: crate::synth::RNG_NAME,
        }
    }
}

fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into())
}
