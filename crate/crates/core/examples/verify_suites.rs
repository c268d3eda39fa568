// The invariant batteries behind `mtfl verify`, called as a library.

use mtfl_dpc::verify::{run, Suite, VerifyOptions};
use mtfl_dpc::{generate, SynthConfig, SynthKind};

pub fn run_example() -> mtfl_dpc::Result<()> {
    let ds = generate(&SynthConfig::new(SynthKind::Synthetic2, 4, 20, 120, 2))?.dataset;
    let opts = VerifyOptions {
        grid_points: 10,
        cases: 200,
        ..VerifyOptions::default()
    };
    let checks = run(Some(&ds), &Suite::ALL, &opts)?;
    for c in &checks {
        println!("{} {:7} {:45} {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
    }
    assert!(checks.iter().all(|c| c.passed));
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtfl_dpc::Result<()> {
    run_example()
}
