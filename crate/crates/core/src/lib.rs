//! Assurance case assessment toolkit.

pub mod assessment;
pub mod evidence;
pub mod io;
pub mod lifecycle;
pub mod lint;
pub mod model;
pub mod radar;
pub mod report;
pub mod rollup;
pub mod score;

pub use model::{
    content_hash, traverse, validate_case, CaseScope, Claim, ClaimId, ClaimStatus, ContentDigest, ContentHash,
    CounterArgument, Evidence, EvidenceId, EvidenceKind, EvidenceLink, PersonRef, SafetyCase, TraversalError,
    TraversalOrder, ValidationReport, Violation, ViolationCode,
};
pub use score::Score;
