// The ball that provably contains the dual optimum θ*(λ), built from a
// solution at a larger λ0.

use mtfl_dpc::dual::{dual_ball, dual_from_primal, lambda_max, ReferenceSolution};
use mtfl_dpc::solver::Method;
use mtfl_dpc::{fit, generate, SolverConfig, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic2, 3, 20, 80, 5))?.dataset;
    let lm = lambda_max(&ds)?.value;
    let cfg = SolverConfig {
        method: Method::Bcd,
        ..SolverConfig::with_tol(1e-10)
    };

    let lambda0 = 0.6 * lm;
    let w0 = fit(&ds, lambda0, &cfg)?.weights;
    let sequential = ReferenceSolution::from_primal(&ds, &w0, lambda0)?;
    let at_max = ReferenceSolution::at_lambda_max(&ds)?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "lambda", "dist(max)", "radius(max)", "dist(seq)", "radius(seq)");
    for factor in [0.55, 0.5, 0.4, 0.3] {
        let lambda = factor * lm;
        let theta = dual_from_primal(&ds, &fit(&ds, lambda, &cfg)?.weights, lambda)?;
        let b_max = dual_ball(&ds, &at_max, lambda)?;
        let b_seq = dual_ball(&ds, &sequential, lambda)?;
        println!(
            "{factor:8.2} {:12.6} {:12.6} {:12.6} {:12.6}",
            b_max.distance_to_center(&theta),
            b_max.radius,
            b_seq.distance_to_center(&theta),
            b_seq.radius
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
