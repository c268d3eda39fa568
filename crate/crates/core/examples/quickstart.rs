// Generate a small problem, fit it at one λ and screen it with DPC.

use mtfl_dpc::dual::{lambda_max, ReferenceSolution};
use mtfl_dpc::screening::screen_at;
use mtfl_dpc::{fit, generate, SolverConfig, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let data = generate(&SynthConfig::new(SynthKind::Synthetic1, 4, 25, 300, 11))?;
    let ds = &data.dataset;
    let lm = lambda_max(ds)?;
    let lambda = 0.85 * lm.value;

    let mask = screen_at(ds, &ReferenceSolution::at_lambda_max(ds)?, lambda)?;
    let fitted = fit(ds, lambda, &SolverConfig::with_tol(1e-8))?;

    let nonzero = fitted.weights.row_norms().iter().filter(|&&n| n > 0.0).count();
    println!("lambda_max = {:.4} (feature {})", lm.value, lm.argmax);
    println!("lambda     = {lambda:.4}");
    println!("screened   = {} of {} features", mask.n_screened(), ds.n_features());
    println!("nonzero    = {nonzero} rows after {} iterations", fitted.iterations);
    println!("kkt        = {:.2e}", fitted.kkt_residual);
    for l in mask.kept().into_iter().take(5) {
        println!("  kept feature {l:4}: score {:.4}, row norm {:.4}", mask.scores()[l], fitted.weights.row_norm(l));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
