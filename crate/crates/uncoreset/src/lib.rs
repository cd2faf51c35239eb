//! Coresets for range queries over uncertain point sets.
//!
//! Each uncertain point takes one of `k` discrete locations uniformly at
//! random. The library builds subsets that preserve expected counts,
//! threshold counts, and the full count distribution, by random sampling or
//! by iterated low-discrepancy halving, and verifies every guarantee against
//! exact brute-force oracles in rational arithmetic.
//!
//! Start with the runnable programs under `examples/`, or the `uncoreset`
//! binary for file-based workflows.

pub mod cli;
pub mod coresets;
pub mod datasets;
pub mod discrepancy;
pub mod exact;
pub mod lifting;
pub mod mergereduce;
pub mod model;
pub mod permutations;
pub mod queries;
pub mod ranges;
pub mod verify;

pub use coresets::{
    build_rc_disc, build_rc_sample, build_re_disc, build_re_sample, build_rq, rq_alpha,
    CoresetArtifact, CoresetKind, Method, MethodParams, RqParams, SampleParams,
};
pub use discrepancy::{
    eval_disc, exhaustive_coloring, find_coloring, re_disc, Coloring, ColoringBudget, DiscReport,
};
pub use exact::{parse_rat, ExtCoord, Rat};
pub use mergereduce::{coreset_size, merge_reduce, BuildTarget, GuaranteeKind, MergeReduceParams,
    SidePolicy,
};
pub use model::{CertifiedSet, PointId, Transversal, UncertainPoint, UncertainPointSet};
pub use permutations::{
    canonical_permutation_system, decompose_range, level_permutation_system, IntervalRef,
    PermutationSystem,
};
pub use queries::{brute_force_cdf, expected_fraction, rc_fraction, rq_cdf, CdfTable};
pub use ranges::{canonical_ranges, inclusion_prob, FamilyDescriptor, FamilyKind, Range};
pub use verify::{
    measure_rc_error, measure_re_error, quantization_check, variance_report, zero_bias_check,
    ErrorReport, QuantizationReport, VarianceReport,
};
