// The per-feature subproblem: maximize g_ℓ over a ball of radius Δ.

use mtfl_dpc::qp1qc::{solve, Qp1qcInstance};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let cases = [
        ("single task", Qp1qcInstance::new(vec![1.0], vec![0.5], vec![0.5], 0.3)?),
        ("two tasks", Qp1qcInstance::new(vec![1.0, 4.0], vec![1.0, 1.0], vec![1.0, 0.5], 0.1)?),
        ("flat top set", Qp1qcInstance::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], 1.0)?),
        ("point ball", Qp1qcInstance::new(vec![2.0, 3.0], vec![1.0, 0.0], vec![0.7, 0.0], 0.0)?),
    ];
    for (name, inst) in cases {
        let sol = solve(&inst)?;
        println!(
            "{name:13} branch {:10} alpha* = {:10.6} s = {:.6} iterations {} |u*| - delta = {:.1e}",
            format!("{:?}", sol.branch),
            sol.alpha_star,
            sol.s_value,
            sol.newton_iters,
            sol.boundary_residual
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
