//! Unlabeled principal component analysis.
//!
//! Recovers a low-rank matrix whose columns had their coordinates shuffled by
//! unknown per-column permutations. The pipeline has two stages: a robust
//! subspace estimate ([`stage1`]) followed by per-column regression without
//! correspondences ([`stage2`]). [`theory`] holds exhaustive checkers for the
//! identifiability results at desk scale, and [`datagen`] produces seeded
//! synthetic instances.

pub mod datagen;
pub mod error;
pub mod io;
pub mod numerics;
pub mod seed;
pub mod stage1;
pub mod stage2;
pub mod theory;

pub use datagen::{
    CorruptionSpec, GroundTruthBundle, ObservationPattern, OutlierModel, Permutation, Snr,
};
pub use error::{Error, Result};
pub use numerics::{DenseMatrix, SubspaceBasis, ThinSvd};
pub use stage1::{DpcpConfig, Stage1Method, SubspaceEstimate};
pub use stage2::{OutlierReport, RestorationMethod, RestorationResult, RestoreOptions};
