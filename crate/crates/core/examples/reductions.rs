// Weighted-loss and Frobenius-regularized variants mapped onto the plain model.

use mtfl_dpc::solver::{reduce_frobenius, reduce_weighted};
use mtfl_dpc::{fit, generate, SolverConfig, SynthConfig, SynthKind, WeightMatrix};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let data = generate(&SynthConfig::new(SynthKind::Synthetic1, 3, 15, 40, 8))?;
    let ds = &data.dataset;
    let w: &WeightMatrix = &data.truth;

    let weights = [0.5, 1.0, 4.0];
    let weighted = reduce_weighted(ds, &weights)?;
    let direct: f64 = (0..ds.n_tasks())
        .map(|t| {
            let task = ds.task(t);
            let mut fit_t = vec![0.0; task.n_samples()];
            task.x.matvec(w.column(t), &mut fit_t);
            let r: f64 = task.y.iter().zip(&fit_t).map(|(y, f)| (y - f).powi(2)).sum();
            r / (2.0 * weights[t])
        })
        .sum();
    println!("weighted loss {direct:.12} vs reduced loss {:.12}", weighted.loss(w));

    let rho = 0.3;
    let frob = reduce_frobenius(ds, rho)?;
    println!(
        "loss + rho|W|_F^2 {:.12} vs reduced loss {:.12}",
        ds.loss(w) + rho * w.frobenius_sq(),
        frob.loss(w)
    );

    let lambda = 5.0;
    let elastic = fit(&frob, lambda, &SolverConfig::with_tol(1e-8))?;
    println!(
        "elastic-net style fit at lambda {lambda}: {} nonzero rows",
        elastic.weights.row_norms().iter().filter(|&&n| n > 0.0).count()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
