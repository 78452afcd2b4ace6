//! Experiment grids, end-to-end pipelines, identifiability checks and
//! graymap image demos on top of `upca-core`.

pub mod config;
pub mod grid;
pub mod images;
pub mod patches;
pub mod pgm;
pub mod pipeline;
pub mod theory_suite;

pub use config::{ExperimentGrid, SnrSetting};
pub use grid::{run_phase_transition, run_stage2_grid, CellResult, GridKind, GridReport};
pub use theory_suite::{run_theory_suite, TheoryReport, TheorySuiteConfig};
