// Path timing with and without DPC; pass the feature count as an argument.

use mtfl_dpc::dual::lambda_max;
use mtfl_dpc::report::{write_bench_csv, BenchRow, BenchTotals};
use mtfl_dpc::screening::{solve_path, PathOptions};
use mtfl_dpc::{generate, LambdaGrid, SolverConfig, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let d: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic1, 10, 30, d, 1))?.dataset;
    let grid = LambdaGrid::log_spaced(lambda_max(&ds)?.value, 30, 0.01)?;
    let cfg = SolverConfig::with_tol(1e-6);

    let with = solve_path(&ds, &grid, &cfg, &PathOptions::default()).map_err(|f| f.error)?;
    let without = solve_path(&ds, &grid, &cfg, &PathOptions::unscreened()).map_err(|f| f.error)?;
    let rows: Vec<BenchRow> = with
        .records
        .iter()
        .zip(&without.records)
        .map(|(a, b)| BenchRow {
            lambda_rel: a.lambda_rel,
            n_screened: a.n_screened,
            n_inactive_true: b.n_truly_inactive,
            rejection_ratio: (b.n_truly_inactive > 0).then(|| a.n_screened as f64 / b.n_truly_inactive as f64),
            t_screen_s: a.t_screen_s,
            t_solve_s: a.t_solve_s,
            t_solve_noscreen_s: b.t_solve_s,
        })
        .collect();
    write_bench_csv(std::io::stdout().lock(), &rows)?;
    let totals = BenchTotals::new(&rows);
    println!(
        "# d = {d}: with DPC {:.3}s, without {:.3}s, speedup {:.2}x, screening overhead {:.2}%",
        totals.t_total_with_dpc,
        totals.t_total_without_dpc,
        totals.speedup,
        100.0 * totals.screening_overhead
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
