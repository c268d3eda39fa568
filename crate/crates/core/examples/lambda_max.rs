// λ_max: above it the solution is exactly zero and y/λ is dual feasible.

use mtfl_dpc::dataset::stack_response;
use mtfl_dpc::dual::{dual_feasibility_violation, lambda_max};
use mtfl_dpc::{fit, DesignMatrix, MultiTaskDataset, SolverConfig};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let ds = MultiTaskDataset::from_parts(vec![
        (DesignMatrix::from_rows(&[[1.0, 0.0]])?, vec![2.0]),
        (DesignMatrix::from_rows(&[[0.0, 1.0]])?, vec![1.0]),
    ])?;
    let lm = lambda_max(&ds)?;
    println!("lambda_max = {} attained by feature {}", lm.value, lm.argmax);

    let y = stack_response(&ds);
    for factor in [1.5, 1.0, 0.99, 0.5] {
        let lambda = factor * lm.value;
        let w = fit(&ds, lambda, &SolverConfig::with_tol(1e-12))?.weights;
        println!(
            "lambda = {factor:4} * lambda_max: W = 0 is {:5}, infeasibility of y/lambda = {:.4}",
            w.is_zero(),
            dual_feasibility_violation(&ds, &y.scaled(1.0 / lambda))
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
