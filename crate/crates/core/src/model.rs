//! The in-memory safety case: scope, claim tree, evidence library and links.
//!
//! A [`SafetyCase`] is an immutable snapshot. Every accepted edit goes through
//! [`SafetyCase::mutate`], which produces a new snapshot whose version is
//! exactly one higher and which passes [`validate_case`].

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a claim, unique within a case.
    ClaimId
);
string_id!(
    /// Identifier of an evidence record, unique within a case.
    EvidenceId
);

/// An opaque reference to a person. Only the name and an active flag are kept.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonRef {
    pub name: String,
    #[serde(default = "default_true")]
    pub active: bool,
}

impl PersonRef {
    pub fn new(name: impl Into<String>) -> Self {
        PersonRef { name: name.into(), active: true }
    }

    /// Two references denote the same person when their names match,
    /// ignoring case and surrounding whitespace.
    pub fn same_person(&self, other: &PersonRef) -> bool {
        self.name.trim().eq_ignore_ascii_case(other.name.trim())
    }
}

fn default_true() -> bool {
    true
}

/// What the case is about: the system, its use-case and operating environment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseScope {
    pub system_description: String,
    pub application: String,
    pub environment: String,
    #[serde(default)]
    pub assumptions: Vec<String>,
}

impl CaseScope {
    /// One-line summary used for the tabular `Context` column.
    pub fn summary(&self) -> String {
        let mut lines = vec![
            format!("System: {}", self.system_description),
            format!("Application: {}", self.application),
            format!("Environment: {}", self.environment),
        ];
        lines.extend(self.assumptions.iter().map(|a| format!("Assumption: {a}")));
        lines.join("\n")
    }
}

/// Where a claim is in its authoring lifecycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    #[default]
    Drafted,
    EvidenceCollected,
    Narrated,
    Assessed,
}

/// A defeater raised against a claim, with its rejection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterArgument {
    pub text: String,
    #[serde(default)]
    pub rejection: Option<String>,
    #[serde(default)]
    pub rejection_evidence: Vec<EvidenceId>,
}

impl CounterArgument {
    pub fn has_rejection(&self) -> bool {
        self.rejection.as_deref().is_some_and(|r| !r.trim().is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub id: ClaimId,
    pub text: String,
    #[serde(default)]
    pub parent: Option<ClaimId>,
    #[serde(default)]
    pub children: Vec<ClaimId>,
    /// Spoke grouping used by the radar report, e.g. "Coverage Claims".
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub poc: Option<PersonRef>,
    #[serde(default)]
    pub counter_arguments: Vec<CounterArgument>,
    #[serde(default)]
    pub limitations: Vec<String>,
    #[serde(default)]
    pub justification_narrative: Option<String>,
    #[serde(default)]
    pub status: ClaimStatus,
}

impl Claim {
    pub fn new(id: impl Into<ClaimId>, text: impl Into<String>) -> Self {
        Claim {
            id: id.into(),
            text: text.into(),
            parent: None,
            children: Vec::new(),
            family: None,
            poc: None,
            counter_arguments: Vec::new(),
            limitations: Vec::new(),
            justification_narrative: None,
            status: ClaimStatus::Drafted,
        }
    }

    pub fn has_narrative(&self) -> bool {
        self.justification_narrative.as_deref().is_some_and(|n| !n.trim().is_empty())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Documents a process or design specification.
    Procedural,
    /// Shows a process being applied: results, metrics, use-case examples.
    Implementation,
}

impl fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceKind::Procedural => "procedural",
            EvidenceKind::Implementation => "implementation",
        })
    }
}

/// An artifact in the evidence library, with the record-keeping metadata
/// that evidence status scoring reads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evidence {
    pub id: EvidenceId,
    pub title: String,
    pub kind: EvidenceKind,
    #[serde(default)]
    pub uri: String,
    #[serde(default)]
    pub owner: Option<PersonRef>,
    #[serde(default)]
    pub owner_affiliated: bool,
    pub created: NaiveDate,
    #[serde(default)]
    pub last_review: Option<NaiveDate>,
    #[serde(default)]
    pub active_confirmed: bool,
    #[serde(default)]
    pub flagged_major_revision: bool,
    #[serde(default)]
    pub partially_outdated_flagged: bool,
    #[serde(default)]
    pub revision_history_documented: bool,
    #[serde(default)]
    pub approvals_documented: bool,
    #[serde(default)]
    pub controlled_environment: bool,
    /// `false` marks a placeholder for an artifact the POC confirmed is missing.
    #[serde(default = "default_true")]
    pub exists: bool,
}

impl Evidence {
    /// An existing record with unknown metadata: no owner, never reviewed,
    /// no control flags.
    pub fn stub(id: impl Into<EvidenceId>, title: impl Into<String>, kind: EvidenceKind, created: NaiveDate) -> Self {
        Evidence {
            id: id.into(),
            title: title.into(),
            kind,
            uri: String::new(),
            owner: None,
            owner_affiliated: false,
            created,
            last_review: None,
            active_confirmed: false,
            flagged_major_revision: false,
            partially_outdated_flagged: false,
            revision_history_documented: false,
            approvals_documented: false,
            controlled_environment: false,
            exists: true,
        }
    }

    fn any_status_flag(&self) -> bool {
        self.owner_affiliated
            || self.active_confirmed
            || self.flagged_major_revision
            || self.partially_outdated_flagged
            || self.revision_history_documented
            || self.approvals_documented
            || self.controlled_environment
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceLink {
    pub claim_id: ClaimId,
    pub evidence_id: EvidenceId,
    #[serde(default)]
    pub note: Option<String>,
}

impl EvidenceLink {
    pub fn new(claim_id: impl Into<ClaimId>, evidence_id: impl Into<EvidenceId>) -> Self {
        EvidenceLink { claim_id: claim_id.into(), evidence_id: evidence_id.into(), note: None }
    }
}

/// A structured argument supported by a body of evidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyCase {
    pub scope: CaseScope,
    pub claims: BTreeMap<ClaimId, Claim>,
    pub evidence: BTreeMap<EvidenceId, Evidence>,
    /// Kept sorted by (claim, evidence); see [`SafetyCase::normalize`].
    pub links: Vec<EvidenceLink>,
    pub version: u64,
}

/// Stable violation codes reported by [`validate_case`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyScopeField,
    EmptyId,
    EmptyClaimText,
    DuplicateClaimId,
    DuplicateEvidenceId,
    DuplicateLink,
    IdMismatch,
    NoRoot,
    MultipleRoots,
    UnknownParent,
    UnknownChild,
    DuplicateChild,
    ParentChildMismatch,
    Cycle,
    DanglingLink,
    UnknownRejectionEvidence,
    MissingRejection,
    MissingEvidenceHasMetadata,
    ReviewBeforeCreated,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::EmptyScopeField => "EMPTY_SCOPE_FIELD",
            ViolationCode::EmptyId => "EMPTY_ID",
            ViolationCode::EmptyClaimText => "EMPTY_CLAIM_TEXT",
            ViolationCode::DuplicateClaimId => "DUPLICATE_CLAIM_ID",
            ViolationCode::DuplicateEvidenceId => "DUPLICATE_EVIDENCE_ID",
            ViolationCode::DuplicateLink => "DUPLICATE_LINK",
            ViolationCode::IdMismatch => "ID_MISMATCH",
            ViolationCode::NoRoot => "NO_ROOT",
            ViolationCode::MultipleRoots => "MULTIPLE_ROOTS",
            ViolationCode::UnknownParent => "UNKNOWN_PARENT",
            ViolationCode::UnknownChild => "UNKNOWN_CHILD",
            ViolationCode::DuplicateChild => "DUPLICATE_CHILD",
            ViolationCode::ParentChildMismatch => "PARENT_CHILD_MISMATCH",
            ViolationCode::Cycle => "CYCLE",
            ViolationCode::DanglingLink => "DANGLING_LINK",
            ViolationCode::UnknownRejectionEvidence => "UNKNOWN_REJECTION_EVIDENCE",
            ViolationCode::MissingRejection => "MISSING_REJECTION",
            ViolationCode::MissingEvidenceHasMetadata => "MISSING_EVIDENCE_HAS_METADATA",
            ViolationCode::ReviewBeforeCreated => "REVIEW_BEFORE_CREATED",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Dotted path to the offending item, e.g. `claims.1.2.children`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { code, location: location.into(), message: message.into() });
    }

    fn finish(mut self) -> Self {
        self.violations.sort();
        self.violations.dedup();
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

impl SafetyCase {
    /// Builds a case from unordered parts. Duplicate identifiers cannot be
    /// represented in the keyed tables, so they are reported here.
    pub fn from_parts(
        scope: CaseScope,
        claims: Vec<Claim>,
        evidence: Vec<Evidence>,
        links: Vec<EvidenceLink>,
        version: u64,
    ) -> Result<SafetyCase, ValidationReport> {
        let mut report = ValidationReport::default();
        let mut claim_map = BTreeMap::new();
        for claim in claims {
            if claim_map.contains_key(&claim.id) {
                report.push(ViolationCode::DuplicateClaimId, format!("claims.{}", claim.id), "claim id appears more than once");
            } else {
                claim_map.insert(claim.id.clone(), claim);
            }
        }
        let mut evidence_map = BTreeMap::new();
        for ev in evidence {
            if evidence_map.contains_key(&ev.id) {
                report.push(ViolationCode::DuplicateEvidenceId, format!("evidence.{}", ev.id), "evidence id appears more than once");
            } else {
                evidence_map.insert(ev.id.clone(), ev);
            }
        }
        let mut case = SafetyCase { scope, claims: claim_map, evidence: evidence_map, links, version };
        let duplicate_links = case.normalize();
        for (claim, ev) in duplicate_links {
            report.push(ViolationCode::DuplicateLink, format!("links.{claim}.{ev}"), "link declared more than once");
        }
        if report.is_empty() {
            Ok(case)
        } else {
            Err(report.finish())
        }
    }

    /// Sorts links and drops exact duplicates by endpoint pair, returning the
    /// endpoint pairs that were duplicated.
    pub fn normalize(&mut self) -> Vec<(ClaimId, EvidenceId)> {
        self.links.sort();
        let mut dups = Vec::new();
        let mut seen = BTreeSet::new();
        self.links.retain(|l| {
            let key = (l.claim_id.clone(), l.evidence_id.clone());
            if seen.insert(key.clone()) {
                true
            } else {
                dups.push(key);
                false
            }
        });
        dups
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.get(id)
    }

    pub fn evidence_item(&self, id: &str) -> Option<&Evidence> {
        self.evidence.get(id)
    }

    /// Claims without a parent. A valid case has exactly one.
    pub fn roots(&self) -> Vec<&ClaimId> {
        self.claims.values().filter(|c| c.parent.is_none()).map(|c| &c.id).collect()
    }

    pub fn root(&self) -> Option<&ClaimId> {
        match self.roots().as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    /// Parent chain from the claim's parent up to the root. Stops on cycles.
    pub fn ancestors(&self, id: &str) -> Vec<ClaimId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cur = self.claims.get(id).and_then(|c| c.parent.clone());
        while let Some(p) = cur {
            if !seen.insert(p.clone()) {
                break;
            }
            cur = self.claims.get(&p).and_then(|c| c.parent.clone());
            out.push(p);
        }
        out
    }

    /// Evidence ids linked directly to a claim, in id order.
    pub fn linked_evidence(&self, claim: &str) -> Vec<&EvidenceId> {
        self.links.iter().filter(|l| l.claim_id.as_str() == claim).map(|l| &l.evidence_id).collect()
    }

    /// Claims that link a given evidence record, in id order.
    pub fn claims_linking(&self, evidence: &str) -> Vec<&ClaimId> {
        let mut out: Vec<&ClaimId> =
            self.links.iter().filter(|l| l.evidence_id.as_str() == evidence).map(|l| &l.claim_id).collect();
        out.sort();
        out.dedup();
        out
    }

    /// A case is finalized once every claim has reached the assessed stage.
    pub fn is_finalized(&self) -> bool {
        !self.claims.is_empty() && self.claims.values().all(|c| c.status == ClaimStatus::Assessed)
    }

    /// Applies an edit to a copy of this case. The result carries version + 1
    /// and must validate; otherwise the violations are returned and this
    /// snapshot is unaffected.
    pub fn mutate<F>(&self, edit: F) -> Result<SafetyCase, ValidationReport>
    where
        F: FnOnce(&mut SafetyCase),
    {
        let mut next = self.clone();
        edit(&mut next);
        next.version = self.version + 1;
        let dups = next.normalize();
        let mut report = validate_case(&next);
        for (claim, ev) in dups {
            report.push(ViolationCode::DuplicateLink, format!("links.{claim}.{ev}"), "link declared more than once");
        }
        if report.is_empty() {
            Ok(next)
        } else {
            Err(report.finish())
        }
    }
}

/// Checks every structural invariant of the case. Violations are data: an
/// empty report means the case is valid.
pub fn validate_case(case: &SafetyCase) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (field, value) in [
        ("system_description", &case.scope.system_description),
        ("application", &case.scope.application),
        ("environment", &case.scope.environment),
    ] {
        if value.trim().is_empty() {
            report.push(ViolationCode::EmptyScopeField, format!("scope.{field}"), "scope field must be non-empty");
        }
    }

    for (key, claim) in &case.claims {
        let loc = format!("claims.{key}");
        if key != &claim.id {
            report.push(ViolationCode::IdMismatch, &loc, format!("table key `{key}` differs from claim id `{}`", claim.id));
        }
        if claim.id.as_str().trim().is_empty() {
            report.push(ViolationCode::EmptyId, &loc, "claim id is empty");
        }
        if claim.text.trim().is_empty() {
            report.push(ViolationCode::EmptyClaimText, format!("{loc}.text"), "claim text is empty");
        }
        if let Some(parent) = &claim.parent {
            match case.claims.get(parent) {
                None => report.push(ViolationCode::UnknownParent, format!("{loc}.parent"), format!("unknown parent `{parent}`")),
                Some(p) if !p.children.contains(&claim.id) => report.push(
                    ViolationCode::ParentChildMismatch,
                    format!("{loc}.parent"),
                    format!("parent `{parent}` does not list `{}` as a child", claim.id),
                ),
                Some(_) => {}
            }
        }
        let mut seen = BTreeSet::new();
        for child in &claim.children {
            if !seen.insert(child) {
                report.push(ViolationCode::DuplicateChild, format!("{loc}.children"), format!("child `{child}` listed twice"));
                continue;
            }
            match case.claims.get(child) {
                None => report.push(ViolationCode::UnknownChild, format!("{loc}.children"), format!("unknown child `{child}`")),
                Some(c) if c.parent.as_ref() != Some(&claim.id) => report.push(
                    ViolationCode::ParentChildMismatch,
                    format!("{loc}.children"),
                    format!("child `{child}` names a different parent"),
                ),
                Some(_) => {}
            }
        }
        for (i, ca) in claim.counter_arguments.iter().enumerate() {
            for ev in &ca.rejection_evidence {
                if !case.evidence.contains_key(ev) {
                    report.push(
                        ViolationCode::UnknownRejectionEvidence,
                        format!("{loc}.counter_arguments.{i}.rejection_evidence"),
                        format!("unknown evidence `{ev}`"),
                    );
                }
            }
        }
    }

    let roots = case.roots();
    match roots.len() {
        0 if !case.claims.is_empty() => report.push(ViolationCode::NoRoot, "claims", "no claim is free of a parent"),
        0 => report.push(ViolationCode::NoRoot, "claims", "case has no claims"),
        1 => {}
        _ => {
            let names: Vec<&str> = roots.iter().map(|r| r.as_str()).collect();
            report.push(ViolationCode::MultipleRoots, "claims", format!("claims without parent: {}", names.join(", ")));
        }
    }

    // Every claim whose parent chain does not end at a root sits on a cycle
    // (or hangs off one).
    for id in case.claims.keys() {
        let mut seen = BTreeSet::new();
        let mut cur = Some(id.clone());
        while let Some(c) = cur {
            if !seen.insert(c.clone()) {
                report.push(ViolationCode::Cycle, format!("claims.{id}"), "claim is part of a parent cycle");
                break;
            }
            cur = case.claims.get(&c).and_then(|x| x.parent.clone());
        }
    }

    let mut seen_links = BTreeSet::new();
    for link in &case.links {
        let loc = format!("links.{}.{}", link.claim_id, link.evidence_id);
        if !seen_links.insert((&link.claim_id, &link.evidence_id)) {
            report.push(ViolationCode::DuplicateLink, &loc, "link declared more than once");
        }
        if !case.claims.contains_key(&link.claim_id) {
            report.push(ViolationCode::DanglingLink, &loc, format!("unknown claim `{}`", link.claim_id));
        }
        if !case.evidence.contains_key(&link.evidence_id) {
            report.push(ViolationCode::DanglingLink, &loc, format!("unknown evidence `{}`", link.evidence_id));
        }
    }

    for (key, ev) in &case.evidence {
        let loc = format!("evidence.{key}");
        if key != &ev.id {
            report.push(ViolationCode::IdMismatch, &loc, format!("table key `{key}` differs from evidence id `{}`", ev.id));
        }
        if ev.id.as_str().trim().is_empty() {
            report.push(ViolationCode::EmptyId, &loc, "evidence id is empty");
        }
        if !ev.exists && (ev.any_status_flag() || ev.last_review.is_some()) {
            report.push(
                ViolationCode::MissingEvidenceHasMetadata,
                &loc,
                "a missing-evidence placeholder cannot carry review metadata or status flags",
            );
        }
        if let Some(review) = ev.last_review {
            if review < ev.created {
                report.push(ViolationCode::ReviewBeforeCreated, format!("{loc}.last_review"), "last review precedes creation");
            }
        }
    }

    if case.is_finalized() {
        for claim in case.claims.values() {
            for (i, ca) in claim.counter_arguments.iter().enumerate() {
                if !ca.has_rejection() {
                    report.push(
                        ViolationCode::MissingRejection,
                        format!("claims.{}.counter_arguments.{i}", claim.id),
                        "finalized case retains a counter-argument without rejection",
                    );
                }
            }
        }
    }

    report.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalOrder {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraversalError {
    #[error("case has no single root claim")]
    NoSingleRoot,
    #[error("claim `{0}` is reachable twice; the claim graph is not a tree")]
    NotATree(ClaimId),
    #[error("child `{0}` does not exist")]
    UnknownChild(ClaimId),
    #[error("{0} claims are unreachable from the root")]
    Unreachable(usize),
}

/// Lists every claim exactly once, parents before children (`Pre`) or
/// children before parents (`Post`). Child order is preserved.
pub fn traverse(case: &SafetyCase, order: TraversalOrder) -> Result<Vec<ClaimId>, TraversalError> {
    let root = case.root().ok_or(TraversalError::NoSingleRoot)?.clone();
    let mut out = Vec::with_capacity(case.claims.len());
    let mut visited = BTreeSet::new();
    // (claim, children already expanded)
    let mut stack = vec![(root, false)];
    while let Some((id, expanded)) = stack.pop() {
        if expanded {
            out.push(id);
            continue;
        }
        if !visited.insert(id.clone()) {
            return Err(TraversalError::NotATree(id));
        }
        let claim = case.claims.get(&id).ok_or_else(|| TraversalError::UnknownChild(id.clone()))?;
        match order {
            TraversalOrder::Pre => {
                out.push(id.clone());
                for child in claim.children.iter().rev() {
                    stack.push((child.clone(), false));
                }
            }
            TraversalOrder::Post => {
                stack.push((id.clone(), true));
                for child in claim.children.iter().rev() {
                    stack.push((child.clone(), false));
                }
            }
        }
    }
    if out.len() != case.claims.len() {
        return Err(TraversalError::Unreachable(case.claims.len() - out.len()));
    }
    Ok(out)
}

/// Hex-encoded SHA-256 digest.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentDigest(pub String);

impl fmt::Display for ContentDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn digest_value(value: &serde_json::Value) -> ContentDigest {
    // serde_json::Value objects are BTreeMap-backed, so keys serialize sorted.
    let bytes = serde_json::to_vec(value).expect("json values always serialize");
    ContentDigest(hex::encode(Sha256::digest(&bytes)))
}

/// Items whose semantic content can be digested for change detection.
pub trait ContentHash {
    fn content_value(&self) -> serde_json::Value;

    fn content_hash(&self) -> ContentDigest {
        digest_value(&self.content_value())
    }
}

fn sorted_by_digest(values: Vec<serde_json::Value>) -> Vec<serde_json::Value> {
    let mut keyed: Vec<(ContentDigest, serde_json::Value)> = values.into_iter().map(|v| (digest_value(&v), v)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, v)| v).collect()
}

impl ContentHash for Claim {
    /// Text, child order, narrative, plus limitations and counter-arguments
    /// sorted by their own digests. Status, family, POC and anything about
    /// linked evidence are excluded.
    fn content_value(&self) -> serde_json::Value {
        let limitations = sorted_by_digest(self.limitations.iter().map(|l| serde_json::json!(l)).collect());
        let counters = sorted_by_digest(
            self.counter_arguments.iter().map(|c| serde_json::to_value(c).expect("serializable")).collect(),
        );
        serde_json::json!({
            "text": self.text,
            "children": self.children,
            "counter_arguments": counters,
            "limitations": limitations,
            "justification_narrative": self.justification_narrative,
        })
    }
}

impl ContentHash for Evidence {
    fn content_value(&self) -> serde_json::Value {
        serde_json::json!({
            "title": self.title,
            "kind": self.kind,
            "uri": self.uri,
        })
    }
}

/// Digest of an item's semantic content.
pub fn content_hash<T: ContentHash>(item: &T) -> ContentDigest {
    item.content_hash()
}
