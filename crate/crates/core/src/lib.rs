//! Exact list colouring of complete multipartite graphs.

pub mod greedy;
pub mod instance;
pub mod matching;
pub mod saturation_audit;
pub mod solver;
pub mod transforms;
pub mod verifier;

pub use greedy::{three_phase, GreedyError, GreedyMode, GreedyTrace};
pub use instance::{
    check_colouring, derived_quantities, parse_instance, Colour, Colouring, ColouringVerdict,
    DerivedQuantities, Instance, InstanceError, InstanceFile, ListAssignment, PartStructure,
};
pub use matching::{
    build_b, build_bf, max_deficiency_set, max_matching, saturating_injection, AvailabilityGraph,
    DeficiencySet, Injection, Matching,
};
pub use saturation_audit::{audit_ledger, saturate, strong_set, AuditError, AuditLedger};
pub use solver::{
    brute_force_decide, decide, decide_with, is_k_choosable, list_chromatic_number, DecideResult,
    SolverConfig, Verdict,
};
pub use transforms::{
    classify_colours, convert_near_acceptable, extend_reduction, is_near_acceptable,
    reduce_common_colour, reduce_hall_violator, surjectivize, Conversion, ConversionPath,
    FrequencyReport, NearAcceptability, ReductionStep, TransformError,
};
pub use verifier::{
    canonical_assignments, search_non_choosable, verify_ohba, verify_structures,
    CanonicalEnumeration, VerdictCache, VerificationConfig, VerificationReport,
};
