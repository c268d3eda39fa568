//! Multi-task feature learning with `ℓ2,1` regularization and the DPC safe
//! screening rule.
//!
//! The model is
//!
//! ```text
//! min_W  Σ_t ½‖y_t − X_t w_t‖² + λ‖W‖_{2,1}
//! ```
//!
//! over `W ∈ R^{d×T}`. DPC certifies, before solving at `λ`, that whole rows
//! of the optimal `W` are zero, so those features can be deleted from every
//! task. Start with [`screening::solve_path`] or the runnable programs in
//! `examples/`.

pub mod cli;
pub mod dataset;
pub mod dual;
pub mod error;
pub mod io;
pub mod qp1qc;
pub mod report;
pub mod screening;
pub mod solver;
pub mod synth;
pub mod verify;

pub use dataset::{DesignMatrix, DualPoint, LambdaGrid, MultiTaskDataset, ScreeningMask, Task, WeightMatrix};
pub use dual::{DualBall, ReferenceSolution};
pub use error::{Error, Result};
pub use qp1qc::{Qp1qcInstance, Qp1qcSolution};
pub use screening::{solve_path, PathOptions, PathReport};
pub use solver::{fit, SolverConfig};
pub use synth::{generate, SynthConfig, SynthKind};
