//! Change detection between case versions and the staleness it causes.
//!
//! Classification is a mechanical proxy: content digests decide whether
//! something changed, and whitespace-only edits to claim text or narrative
//! are treated as minor. Staleness propagates upward only; a changed claim
//! invalidates its own assessment and every ancestor's, never a child's.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentLog, ClaimAssessment, LogEntry};
use crate::io::to_canonical_line;
use crate::model::{
    digest_value, traverse, ClaimId, ContentDigest, ContentHash, EvidenceId, SafetyCase, TraversalError, TraversalOrder,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    ClaimText,
    TreeStructure,
    EvidenceSet,
    EvidenceVersion,
    Scope,
    Narrative,
}

impl ChangeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChangeKind::ClaimText => "claim_text",
            ChangeKind::TreeStructure => "tree_structure",
            ChangeKind::EvidenceSet => "evidence_set",
            ChangeKind::EvidenceVersion => "evidence_version",
            ChangeKind::Scope => "scope",
            ChangeKind::Narrative => "narrative",
        }
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a change happened. Serialized as `scope`, `claim:<id>` or
/// `evidence:<id>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Location {
    Scope,
    Claim(ClaimId),
    Evidence(EvidenceId),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Scope => f.write_str("scope"),
            Location::Claim(id) => write!(f, "claim:{id}"),
            Location::Evidence(id) => write!(f, "evidence:{id}"),
        }
    }
}

impl From<Location> for String {
    fn from(l: Location) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for Location {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "scope" {
            Ok(Location::Scope)
        } else if let Some(id) = s.strip_prefix("claim:") {
            Ok(Location::Claim(id.into()))
        } else if let Some(id) = s.strip_prefix("evidence:") {
            Ok(Location::Evidence(id.into()))
        } else {
            Err(format!("unrecognized location `{s}`"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeItem {
    pub kind: ChangeKind,
    pub location: Location,
    pub old_hash: Option<ContentDigest>,
    pub new_hash: Option<ContentDigest>,
    /// Digests after whitespace normalization; equal for typo-level edits.
    pub old_normalized: Option<ContentDigest>,
    pub new_normalized: Option<ContentDigest>,
}

impl ChangeItem {
    fn new(kind: ChangeKind, location: Location, old: Option<serde_json::Value>, new: Option<serde_json::Value>) -> Self {
        ChangeItem {
            kind,
            location,
            old_hash: old.as_ref().map(digest_value),
            new_hash: new.as_ref().map(digest_value),
            old_normalized: old.map(|v| digest_value(&normalize_whitespace(v))),
            new_normalized: new.map(|v| digest_value(&normalize_whitespace(v))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub items: Vec<ChangeItem>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeClass {
    Substantial,
    Minor,
}

/// Collapses every whitespace run in every string to one space and trims.
fn normalize_whitespace(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::String(s) => Value::String(s.split_whitespace().collect::<Vec<_>>().join(" ")),
        Value::Array(items) => Value::Array(items.into_iter().map(normalize_whitespace).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize_whitespace(v))).collect()),
        other => other,
    }
}

fn text_part(claim: &crate::model::Claim) -> serde_json::Value {
    let mut v = claim.content_value();
    let map = v.as_object_mut().expect("claim content is an object");
    map.remove("children");
    map.remove("justification_narrative");
    v
}

fn narrative_part(claim: &crate::model::Claim) -> serde_json::Value {
    serde_json::json!(claim.justification_narrative)
}

fn structure_part(claim: &crate::model::Claim) -> serde_json::Value {
    serde_json::json!({ "parent": claim.parent, "children": claim.children })
}

fn links_of(case: &SafetyCase, claim: &str) -> serde_json::Value {
    serde_json::json!(case.linked_evidence(claim))
}

fn review_part(ev: &crate::model::Evidence) -> serde_json::Value {
    let mut v = serde_json::to_value(ev).expect("evidence serializes");
    let map = v.as_object_mut().expect("evidence is an object");
    for key in ["id", "title", "kind", "uri"] {
        map.remove(key);
    }
    v
}

/// Compares two versions of a case by content digests.
pub fn diff_cases(old: &SafetyCase, new: &SafetyCase) -> ChangeSet {
    let mut items = Vec::new();
    let scope_old = serde_json::to_value(&old.scope).expect("scope serializes");
    let scope_new = serde_json::to_value(&new.scope).expect("scope serializes");
    if digest_value(&scope_old) != digest_value(&scope_new) {
        items.push(ChangeItem::new(ChangeKind::Scope, Location::Scope, Some(scope_old), Some(scope_new)));
    }

    let claim_ids: BTreeSet<&ClaimId> = old.claims.keys().chain(new.claims.keys()).collect();
    for id in claim_ids {
        let loc = || Location::Claim(id.clone());
        match (old.claims.get(id), new.claims.get(id)) {
            (Some(a), Some(b)) => {
                let pairs = [
                    (ChangeKind::TreeStructure, structure_part(a), structure_part(b)),
                    (ChangeKind::ClaimText, text_part(a), text_part(b)),
                    (ChangeKind::Narrative, narrative_part(a), narrative_part(b)),
                    (ChangeKind::EvidenceSet, links_of(old, id.as_str()), links_of(new, id.as_str())),
                ];
                for (kind, x, y) in pairs {
                    if digest_value(&x) != digest_value(&y) {
                        items.push(ChangeItem::new(kind, loc(), Some(x), Some(y)));
                    }
                }
            }
            (Some(a), None) => items.push(ChangeItem::new(ChangeKind::TreeStructure, loc(), Some(structure_part(a)), None)),
            (None, Some(b)) => items.push(ChangeItem::new(ChangeKind::TreeStructure, loc(), None, Some(structure_part(b)))),
            (None, None) => unreachable!("id drawn from one of the maps"),
        }
    }

    let evidence_ids: BTreeSet<&EvidenceId> = old.evidence.keys().chain(new.evidence.keys()).collect();
    for id in evidence_ids {
        let loc = || Location::Evidence(id.clone());
        match (old.evidence.get(id), new.evidence.get(id)) {
            (Some(a), Some(b)) => {
                if a.content_hash() != b.content_hash() {
                    items.push(ChangeItem::new(ChangeKind::EvidenceSet, loc(), Some(a.content_value()), Some(b.content_value())));
                } else if digest_value(&review_part(a)) != digest_value(&review_part(b)) {
                    items.push(ChangeItem::new(ChangeKind::EvidenceVersion, loc(), Some(review_part(a)), Some(review_part(b))));
                }
            }
            (Some(a), None) => items.push(ChangeItem::new(ChangeKind::EvidenceSet, loc(), Some(a.content_value()), None)),
            (None, Some(b)) => items.push(ChangeItem::new(ChangeKind::EvidenceSet, loc(), None, Some(b.content_value()))),
            (None, None) => unreachable!("id drawn from one of the maps"),
        }
    }

    items.sort_by(|a, b| (&a.location, a.kind).cmp(&(&b.location, b.kind)));
    ChangeSet { items }
}

/// Whitespace-only edits to text or narrative and review-metadata updates
/// are minor; everything else is substantial.
pub fn classify(change: &ChangeItem) -> ChangeClass {
    match change.kind {
        ChangeKind::EvidenceVersion => ChangeClass::Minor,
        ChangeKind::ClaimText | ChangeKind::Narrative
            if change.old_normalized.is_some() && change.old_normalized == change.new_normalized =>
        {
            ChangeClass::Minor
        }
        _ => ChangeClass::Substantial,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    Hardware,
    Software,
    Odd,
    UseCase,
}

impl TriggerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TriggerKind::Hardware => "hardware",
            TriggerKind::Software => "software",
            TriggerKind::Odd => "odd",
            TriggerKind::UseCase => "use_case",
        }
    }
}

impl fmt::Display for TriggerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TriggerKind {
    type Err = LifecycleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hardware" => Ok(TriggerKind::Hardware),
            "software" => Ok(TriggerKind::Software),
            "odd" => Ok(TriggerKind::Odd),
            "use_case" | "use-case" => Ok(TriggerKind::UseCase),
            other => Err(LifecycleError::UnknownTriggerKind(other.to_string())),
        }
    }
}

/// A user-declared external event that calls for re-assessment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerEvent {
    pub id: String,
    pub kind: TriggerKind,
    pub description: String,
    /// Claim ids or family tags.
    pub affected: Vec<String>,
    pub raised_at: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("trigger `{trigger}` names `{target}`, which is neither a claim id nor a family tag")]
    UnknownTriggerTarget { trigger: String, target: String },
    #[error("trigger `{0}` has no affected claims")]
    EmptyTrigger(String),
    #[error("trigger id `{0}` already used")]
    DuplicateTrigger(String),
    #[error("unknown trigger kind `{0}` (expected hardware, software, odd or use_case)")]
    UnknownTriggerKind(String),
    #[error("trigger log line {line}: {message}")]
    MalformedTriggerLog { line: usize, message: String },
    #[error(transparent)]
    Traversal(#[from] TraversalError),
}

/// Claims a trigger targets, before ancestor propagation.
pub fn trigger_targets(case: &SafetyCase, trigger: &TriggerEvent) -> Result<BTreeSet<ClaimId>, LifecycleError> {
    if trigger.affected.is_empty() {
        return Err(LifecycleError::EmptyTrigger(trigger.id.clone()));
    }
    let mut out = BTreeSet::new();
    for target in &trigger.affected {
        if case.claims.contains_key(target.as_str()) {
            out.insert(ClaimId::from(target.as_str()));
            continue;
        }
        let family: Vec<&ClaimId> =
            case.claims.values().filter(|c| c.family.as_deref() == Some(target.as_str())).map(|c| &c.id).collect();
        if family.is_empty() {
            return Err(LifecycleError::UnknownTriggerTarget { trigger: trigger.id.clone(), target: target.clone() });
        }
        out.extend(family.into_iter().cloned());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum WorkItem {
    RescoreEvidence { evidence_id: EvidenceId },
    Reassess { claim_id: ClaimId, reasons: Vec<String> },
}

/// Result of a staleness pass.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StalenessOutcome {
    /// Claims whose current assessment becomes stale, in id order.
    pub newly_stale: Vec<ClaimId>,
    /// Evidence re-scoring first, then claims to re-assess, root last.
    pub worklist: Vec<WorkItem>,
}

impl StalenessOutcome {
    pub fn reassess_ids(&self) -> Vec<&ClaimId> {
        self.worklist
            .iter()
            .filter_map(|w| match w {
                WorkItem::Reassess { claim_id, .. } => Some(claim_id),
                WorkItem::RescoreEvidence { .. } => None,
            })
            .collect()
    }
}

/// Works out which assessments a set of changes and triggers invalidates.
///
/// `assessments` are the current records against `old`. Substantial changes
/// mark the changed claim and its ancestors (in either version); evidence
/// changes affect the claims linking that evidence; scope changes affect the
/// root. Minor changes only queue evidence re-scoring. Claims that were
/// already stale stay on the worklist.
pub fn mark_stale(
    old: &SafetyCase,
    new: &SafetyCase,
    assessments: &[ClaimAssessment],
    changes: &ChangeSet,
    triggers: &[TriggerEvent],
) -> Result<StalenessOutcome, LifecycleError> {
    let mut reasons: BTreeMap<ClaimId, BTreeSet<String>> = BTreeMap::new();
    let mut rescore: BTreeSet<EvidenceId> = BTreeSet::new();

    let touch = |claim: &ClaimId, reason: &str, reasons: &mut BTreeMap<ClaimId, BTreeSet<String>>| {
        let mut chain = vec![claim.clone()];
        chain.extend(old.ancestors(claim.as_str()));
        chain.extend(new.ancestors(claim.as_str()));
        for c in chain {
            reasons.entry(c).or_default().insert(reason.to_string());
        }
    };

    for item in &changes.items {
        if let Location::Evidence(id) = &item.location {
            if new.evidence.contains_key(id) {
                rescore.insert(id.clone());
            }
        }
        if classify(item) == ChangeClass::Minor {
            continue;
        }
        let reason = format!("{} change at {}", item.kind, item.location);
        let targets: BTreeSet<ClaimId> = match &item.location {
            Location::Scope => new.root().into_iter().chain(old.root()).cloned().collect(),
            Location::Claim(id) => BTreeSet::from([id.clone()]),
            Location::Evidence(id) => {
                old.claims_linking(id.as_str()).into_iter().chain(new.claims_linking(id.as_str())).cloned().collect()
            }
        };
        for t in &targets {
            touch(t, &reason, &mut reasons);
        }
    }
    for trigger in triggers {
        let reason = format!("{} trigger {}", trigger.kind, trigger.id);
        for t in trigger_targets(new, trigger)? {
            touch(&t, &reason, &mut reasons);
        }
    }

    let current: BTreeMap<&ClaimId, &ClaimAssessment> = assessments.iter().map(|a| (&a.claim_id, a)).collect();
    let newly_stale: Vec<ClaimId> = reasons
        .keys()
        .filter(|id| current.get(id).is_some_and(|a| !a.stale))
        .cloned()
        .collect();

    let mut worklist: Vec<WorkItem> =
        rescore.into_iter().map(|evidence_id| WorkItem::RescoreEvidence { evidence_id }).collect();
    for id in traverse(new, TraversalOrder::Post)? {
        let Some(a) = current.get(&id) else { continue };
        let why = reasons.get(&id);
        if why.is_some() || a.stale {
            let mut list: Vec<String> = why.map(|w| w.iter().cloned().collect()).unwrap_or_default();
            if a.stale && why.is_none() {
                list.push("previously marked stale".into());
            }
            worklist.push(WorkItem::Reassess { claim_id: id, reasons: list });
        }
    }
    Ok(StalenessOutcome { newly_stale, worklist })
}

/// Claims with stale current assessments, in post-order (root last).
pub fn reassessment_worklist(case: &SafetyCase, assessments: &[ClaimAssessment]) -> Result<Vec<ClaimId>, TraversalError> {
    let stale: BTreeSet<&ClaimId> = assessments.iter().filter(|a| a.stale).map(|a| &a.claim_id).collect();
    Ok(traverse(case, TraversalOrder::Post)?.into_iter().filter(|id| stale.contains(id)).collect())
}

/// Re-assessment tasks for every stale current assessment in the log, root
/// last, carrying the reason recorded with the latest stale mark.
pub fn log_worklist(case: &SafetyCase, log: &AssessmentLog) -> Result<Vec<WorkItem>, TraversalError> {
    let mut reasons: BTreeMap<&ClaimId, &str> = BTreeMap::new();
    for entry in log.entries() {
        if let LogEntry::Stale { claim_id, reason, .. } = entry {
            reasons.insert(claim_id, reason);
        }
    }
    let current = log.current_list();
    Ok(reassessment_worklist(case, &current)?
        .into_iter()
        .map(|id| {
            let why = reasons.get(&id).map(|r| r.to_string()).unwrap_or_else(|| "marked stale".into());
            WorkItem::Reassess { claim_id: id, reasons: vec![why] }
        })
        .collect())
}

/// Appends a stale mark to the log for every newly stale claim.
pub fn apply_staleness(log: &mut AssessmentLog, outcome: &StalenessOutcome) -> Vec<LogEntry> {
    let reasons: BTreeMap<&ClaimId, &Vec<String>> = outcome
        .worklist
        .iter()
        .filter_map(|w| match w {
            WorkItem::Reassess { claim_id, reasons } => Some((claim_id, reasons)),
            WorkItem::RescoreEvidence { .. } => None,
        })
        .collect();
    outcome
        .newly_stale
        .iter()
        .filter_map(|id| {
            let reason = reasons.get(id).map(|r| r.join("; ")).unwrap_or_else(|| "claim removed".into());
            log.mark_stale(id, reason).cloned()
        })
        .collect()
}

/// Append-only log of trigger events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TriggerLog {
    events: Vec<TriggerEvent>,
}

impl TriggerLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[TriggerEvent] {
        &self.events
    }

    /// Validates the event against the case and appends it.
    pub fn append(&mut self, case: &SafetyCase, event: TriggerEvent) -> Result<&TriggerEvent, LifecycleError> {
        if self.events.iter().any(|e| e.id == event.id) {
            return Err(LifecycleError::DuplicateTrigger(event.id));
        }
        trigger_targets(case, &event)?;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    /// A fresh id of the form `T<n>`.
    pub fn next_id(&self) -> String {
        let mut n = self.events.len() + 1;
        while self.events.iter().any(|e| e.id == format!("T{n}")) {
            n += 1;
        }
        format!("T{n}")
    }

    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| to_canonical_line(e) + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LifecycleError> {
        let mut log = TriggerLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: TriggerEvent = serde_json::from_str(line)
                .map_err(|e| LifecycleError::MalformedTriggerLog { line: i + 1, message: e.to_string() })?;
            if log.events.iter().any(|e| e.id == event.id) {
                return Err(LifecycleError::DuplicateTrigger(event.id));
            }
            log.events.push(event);
        }
        Ok(log)
    }
}
