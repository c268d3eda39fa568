// Sequential DPC along a log-spaced λ grid, with and without screening.

use mtfl_dpc::dual::lambda_max;
use mtfl_dpc::screening::{solve_path, PathOptions};
use mtfl_dpc::{generate, LambdaGrid, SolverConfig, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let d: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic1, 5, 30, d, 3))?.dataset;
    let grid = LambdaGrid::log_spaced(lambda_max(&ds)?.value, 20, 0.05)?;
    let cfg = SolverConfig::with_tol(1e-8);

    let with = solve_path(&ds, &grid, &cfg, &PathOptions::default()).map_err(|f| f.error)?;
    let without = solve_path(&ds, &grid, &cfg, &PathOptions::unscreened()).map_err(|f| f.error)?;

    println!("{:>10} {:>9} {:>9} {:>9} {:>14}", "lambda/max", "screened", "inactive", "ratio", "objective gap");
    for (a, b) in with.records.iter().zip(&without.records) {
        println!(
            "{:10.4} {:9} {:9} {:9.3} {:14.2e}",
            a.lambda_rel,
            a.n_screened,
            b.n_truly_inactive,
            a.n_screened as f64 / b.n_truly_inactive.max(1) as f64,
            (a.objective - b.objective).abs() / b.objective
        );
    }
    println!(
        "time with DPC {:.3}s (screening {:.3}s), without {:.3}s",
        with.total_time(),
        with.total_screen_time(),
        without.total_time()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
