// Synthetic benchmarks written to and read back from the directory format.

use mtfl_dpc::io::{load_dataset, load_weights, save_dataset, save_weights};
use mtfl_dpc::{generate, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let dir = std::env::temp_dir().join(format!("mtfl-synth-example-{}", std::process::id()));
    for kind in [SynthKind::Synthetic1, SynthKind::Synthetic2] {
        let cfg = SynthConfig::new(kind, 2, 500, 6, 21);
        let out = generate(&cfg)?;
        save_dataset(&dir, &out.dataset)?;
        save_weights(dir.join("truth.csv"), &out.truth)?;
        assert_eq!(load_dataset(&dir)?, out.dataset);
        assert_eq!(load_weights(dir.join("truth.csv"))?, out.truth);

        // correlation of neighbouring features, pooled over tasks
        let mut num = 0.0;
        let mut den0 = 0.0;
        let mut den1 = 0.0;
        for t in 0..cfg.n_tasks {
            let (a, b) = (out.dataset.column(t, 0), out.dataset.column(t, 1));
            num += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            den0 += a.iter().map(|x| x * x).sum::<f64>();
            den1 += b.iter().map(|x| x * x).sum::<f64>();
        }
        println!(
            "{kind:?}: corr(x0, x1) = {:.3}, support rows = {}",
            num / (den0 * den1).sqrt(),
            cfg.d - out.truth.count_zero_rows(0.0)
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
