//! Exhaustive, desk-scale checks of the identifiability results for
//! unlabeled PCA and unlabeled matrix completion.

mod patterns;
mod power_sums;
mod unlabeled;

pub use patterns::{
    check_umc_hypothesis, degrees_of_freedom, is_relaxed_slmf, omega_power_sum_residual,
    GroupWitness, OmegaResidual, SlmfCheck, SlmfViolation, UmcCheck, MAX_PATTERN_COLUMNS,
    MAX_PATTERN_ROWS,
};
pub use power_sums::{
    multisets_equal_via_power_sums, pairwise_sum, power_sums, PowerSumSignature,
    DEFAULT_MULTISET_TOL,
};
pub use unlabeled::{
    canonical_factorization, enumerate_unlabeled_factorizations, max_scaled_residual,
    power_sum_residual, power_sum_scale, verify_theorem1, Factorization, Theorem1Report,
    UnlabeledEnumeration, UnlabeledSolution, ENUMERATION_LIMIT,
};
