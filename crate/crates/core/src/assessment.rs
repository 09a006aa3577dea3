//! Claim-support assessments: validation of assessor records, the
//! append-only assessment log, rubric guidance and assessor prompts.
//!
//! Scores are human judgments. Nothing here derives a claim score from
//! evidence; the engine only checks, stores and (elsewhere) aggregates them.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::io::canonical::to_canonical_line;
use crate::model::{ClaimId, PersonRef, SafetyCase};

/// The two claim-support dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Procedural,
    Implementation,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Procedural, Dimension::Implementation];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::Procedural => "procedural",
            Dimension::Implementation => "implementation",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "procedural" => Ok(Dimension::Procedural),
            "implementation" => Ok(Dimension::Implementation),
            other => Err(format!("unknown dimension `{other}`")),
        }
    }
}

/// A dimension's value on a record: a 0-3 score or "not applicable".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionValue {
    Score(u8),
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimAssessment {
    pub claim_id: ClaimId,
    #[serde(default)]
    pub procedural: Option<u8>,
    #[serde(default)]
    pub implementation: Option<u8>,
    #[serde(default)]
    pub procedural_na: bool,
    #[serde(default)]
    pub implementation_na: bool,
    #[serde(default)]
    pub na_justification: Option<String>,
    pub summary: String,
    /// One assessor, or several for a group-session consensus record.
    pub assessors: Vec<PersonRef>,
    pub assessed_at: NaiveDate,
    pub case_version: u64,
    /// Set on read when a later staleness mark covers this record.
    #[serde(default)]
    pub stale: bool,
}

impl ClaimAssessment {
    pub fn score(&self, dim: Dimension) -> Option<u8> {
        match dim {
            Dimension::Procedural => self.procedural,
            Dimension::Implementation => self.implementation,
        }
    }

    pub fn is_na(&self, dim: Dimension) -> bool {
        match dim {
            Dimension::Procedural => self.procedural_na,
            Dimension::Implementation => self.implementation_na,
        }
    }

    /// `None` only for records that fail [`ClaimAssessment::check_invariants`].
    pub fn value(&self, dim: Dimension) -> Option<DimensionValue> {
        match (self.score(dim), self.is_na(dim)) {
            (Some(s), false) => Some(DimensionValue::Score(s)),
            (None, true) => Some(DimensionValue::NotApplicable),
            _ => None,
        }
    }

    /// Field-level checks that need no case context.
    pub fn check_invariants(&self) -> Result<(), AssessmentError> {
        let violation = |field: &str, message: &str| {
            Err(AssessmentError::InvariantViolation { field: field.to_string(), message: message.to_string() })
        };
        for dim in Dimension::ALL {
            let (score_field, na_field) = match dim {
                Dimension::Procedural => ("procedural", "procedural_na"),
                Dimension::Implementation => ("implementation", "implementation_na"),
            };
            match (self.score(dim), self.is_na(dim)) {
                (Some(_), true) => return violation(na_field, "a dimension cannot be both scored and marked N/A"),
                (None, false) => return violation(score_field, "a dimension needs a score or an N/A mark"),
                (Some(s), false) if s > 3 => return violation(score_field, "scores range from 0 to 3"),
                _ => {}
            }
        }
        let na_used = self.procedural_na || self.implementation_na;
        if na_used && self.na_justification.as_deref().is_none_or(|j| j.trim().is_empty()) {
            return violation("na_justification", "an N/A dimension requires a justification");
        }
        if self.summary.trim().is_empty() {
            return violation("summary", "the summary explaining the scores is required");
        }
        if self.assessors.is_empty() || self.assessors.iter().any(|a| a.name.trim().is_empty()) {
            return violation("assessors", "at least one named assessor is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssessmentError {
    #[error("UNKNOWN_CLAIM: claim `{0}` does not exist")]
    UnknownClaim(ClaimId),
    #[error("STALE_VERSION: record judged case version {record}, current version is {current}")]
    StaleVersion { record: u64, current: u64 },
    #[error("INVARIANT_VIOLATION at `{field}`: {message}")]
    InvariantViolation { field: String, message: String },
    #[error("SELF_ASSESSMENT: assessor `{assessor}` is the claim's point of contact")]
    SelfAssessment { assessor: String },
}

impl AssessmentError {
    pub fn code(&self) -> &'static str {
        match self {
            AssessmentError::UnknownClaim(_) => "UNKNOWN_CLAIM",
            AssessmentError::StaleVersion { .. } => "STALE_VERSION",
            AssessmentError::InvariantViolation { .. } => "INVARIANT_VIOLATION",
            AssessmentError::SelfAssessment { .. } => "SELF_ASSESSMENT",
        }
    }
}

/// Checks a record against the case it claims to judge.
pub fn check_assessment(case: &SafetyCase, rec: &ClaimAssessment) -> Result<(), AssessmentError> {
    let claim = case.claim(rec.claim_id.as_str()).ok_or_else(|| AssessmentError::UnknownClaim(rec.claim_id.clone()))?;
    if rec.case_version != case.version {
        return Err(AssessmentError::StaleVersion { record: rec.case_version, current: case.version });
    }
    rec.check_invariants()?;
    if let Some(poc) = &claim.poc {
        if let Some(a) = rec.assessors.iter().find(|a| a.same_person(poc)) {
            return Err(AssessmentError::SelfAssessment { assessor: a.name.clone() });
        }
    }
    Ok(())
}

/// One line of the assessment log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogEntry {
    Assessment {
        seq: u64,
        record: ClaimAssessment,
    },
    /// Marks the claim's assessment current at `seq` as needing re-assessment.
    Stale {
        seq: u64,
        claim_id: ClaimId,
        reason: String,
    },
}

impl LogEntry {
    pub fn seq(&self) -> u64 {
        match self {
            LogEntry::Assessment { seq, .. } | LogEntry::Stale { seq, .. } => *seq,
        }
    }

    pub fn to_line(&self) -> String {
        to_canonical_line(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: sequence number {found}, expected {expected}")]
    Sequence { line: usize, expected: u64, found: u64 },
}

/// Append-only log of assessments and staleness marks. Entries are never
/// rewritten; supersession and staleness are new entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssessmentLog {
    entries: Vec<LogEntry>,
}

impl AssessmentLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of entries; used as the log's optimistic-concurrency version.
    pub fn head(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    fn push_assessment(&mut self, mut record: ClaimAssessment) -> &LogEntry {
        record.stale = false;
        let seq = self.head() + 1;
        self.entries.push(LogEntry::Assessment { seq, record });
        self.entries.last().expect("just pushed")
    }

    /// Appends a stale mark for a claim's current assessment. Returns `None`
    /// when the claim has no current, non-stale assessment.
    pub fn mark_stale(&mut self, claim_id: &ClaimId, reason: impl Into<String>) -> Option<&LogEntry> {
        let current = self.current_for(claim_id)?;
        if current.stale {
            return None;
        }
        let seq = self.head() + 1;
        self.entries.push(LogEntry::Stale { seq, claim_id: claim_id.clone(), reason: reason.into() });
        self.entries.last()
    }

    /// Every assessment ever recorded for a claim, oldest first.
    pub fn history(&self, claim_id: &str) -> Vec<&ClaimAssessment> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LogEntry::Assessment { record, .. } if record.claim_id.as_str() == claim_id => Some(record),
                _ => None,
            })
            .collect()
    }

    fn current_for(&self, claim_id: &ClaimId) -> Option<ClaimAssessment> {
        self.current().remove(claim_id)
    }

    /// The latest assessment per claim, with `stale` reflecting any later mark.
    pub fn current(&self) -> BTreeMap<ClaimId, ClaimAssessment> {
        let mut out: BTreeMap<ClaimId, ClaimAssessment> = BTreeMap::new();
        for entry in &self.entries {
            match entry {
                LogEntry::Assessment { record, .. } => {
                    let mut r = record.clone();
                    r.stale = false;
                    out.insert(r.claim_id.clone(), r);
                }
                LogEntry::Stale { claim_id, .. } => {
                    if let Some(r) = out.get_mut(claim_id) {
                        r.stale = true;
                    }
                }
            }
        }
        out
    }

    /// Current assessments as a list in claim-id order.
    pub fn current_list(&self) -> Vec<ClaimAssessment> {
        self.current().into_values().collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| e.to_line() + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut log = AssessmentLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry =
                serde_json::from_str(line).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
            let expected = log.head() + 1;
            if entry.seq() != expected {
                return Err(LogError::Sequence { line: i + 1, expected, found: entry.seq() });
            }
            if let LogEntry::Assessment { record, .. } = &entry {
                record.check_invariants().map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
            }
            log.entries.push(entry);
        }
        Ok(log)
    }
}

/// Validates and appends a record. Any earlier assessment of the same claim
/// is superseded but kept in the history.
pub fn record_assessment<'a>(
    case: &SafetyCase,
    log: &'a mut AssessmentLog,
    rec: ClaimAssessment,
) -> Result<&'a LogEntry, AssessmentError> {
    check_assessment(case, &rec)?;
    Ok(log.push_assessment(rec))
}

/// One rubric cell: a level's title and its guidance text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricCell {
    pub dimension: Dimension,
    pub level: u8,
    pub title: &'static str,
    pub guidance: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rubric level {0} is outside 0..=3")]
pub struct RubricLevelError(pub u8);

pub const LEVEL_TITLES: [&str; 4] = ["Insufficient Support", "Initial Support", "Adequate Support", "Strong Support"];

// Claim-support scoring guidance, one cell per dimension and level.
// Paragraphs are separated by a blank line.

const PROCEDURAL_0: &str = r#"Documentation on processes/ procedures has not been provided for any aspects of claim.

[Procedural evidence may not have been provided, or may be irrelevant to the satisfaction of the claim.]

No governance or oversight has been provided for any meaningful aspect of the claim."#;

const PROCEDURAL_1: &str = r#"Documentation on processes/procedures has only been provided for certain portions of the claim and/or is inapplicable to critical aspects of the claim.

Little or no oversight of processes/procedures has been provided for critical aspects of the claim (for example: reliance on individual or small teams efforts for process design without an approved policy or design document)."#;

const PROCEDURAL_2: &str = r#"Documentation on processes/procedures addresses core aspects of the claim, but may necessitate further clarity or detail.

Oversight and governance is established, with design aspects and/or procedural decisions under the oversight of key stakeholders at Director level or higher (or clearly defined delegate)."#;

const PROCEDURAL_3: &str = r#"Clear and complete documentation on processes/procedures is sufficient and is directly applicable to all aspects of the claim.

Oversight and governance is established, with design aspects and/or procedural decisions clearly aligned with broader company programs and goals (e.g., codified in company-level Objectives and Key Results (OKRs) or Product Requirement Documents (PRDs)."#;

const IMPLEMENTATION_0: &str = r#"Evidence of implementing any parts of the processes/ procedures above has not been provided.

When a process is not specified or required*, evidence of results or metrics relevant for any aspects of the claim is not available.

[Implementation evidence may not be attached, or may be irrelevant to the satisfaction of the claim.]"#;

const IMPLEMENTATION_1: &str = r#"Evidence of implementation of processes/procedures is sufficient for some, but not all critical aspects of the claim [it may not have been provided or may be irrelevant].

Process implementation is ad-hoc, dependent on individual effort, and/or not consistent with documentation provided.

When a process is not specified or required*, execution metrics and/or overall results may not support critical aspects of the claim."#;

const IMPLEMENTATION_2: &str = r#"Evidence of implementation of processes/procedures addresses core aspects of the claim, with applicable metrics and results that adequately support the claim.

Process implementation may demonstrate minor inconsistencies or known departures that are not always documented. When a process is not specified or required*, execution metrics and/or overall results still address core aspects of the claim."#;

const IMPLEMENTATION_3: &str = r#"Evidence of implementation consistently and appropriately follows processes/procedures documentation, covering all aspects of the claim. Uniform tracking of non-conformities is available and well documented.

Process implementation demonstrates a deliberate allocation of resources to focus on process optimization & improvement. Applicable metrics are aligned to company goals with tracked progress and trends toward continual improvement."#;

/// Guidance for one level of one dimension.
pub fn rubric_text(dimension: Dimension, level: u8) -> Result<RubricCell, RubricLevelError> {
    let guidance = match (dimension, level) {
        (Dimension::Procedural, 0) => PROCEDURAL_0,
        (Dimension::Procedural, 1) => PROCEDURAL_1,
        (Dimension::Procedural, 2) => PROCEDURAL_2,
        (Dimension::Procedural, 3) => PROCEDURAL_3,
        (Dimension::Implementation, 0) => IMPLEMENTATION_0,
        (Dimension::Implementation, 1) => IMPLEMENTATION_1,
        (Dimension::Implementation, 2) => IMPLEMENTATION_2,
        (Dimension::Implementation, 3) => IMPLEMENTATION_3,
        (_, l) => return Err(RubricLevelError(l)),
    };
    Ok(RubricCell { dimension, level, title: LEVEL_TITLES[level as usize], guidance })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text: String,
}

fn prompt(id: &str, text: &str) -> Prompt {
    Prompt { id: id.to_string(), text: text.to_string() }
}

/// Ordered checklist shown to an assessor before scoring a claim.
pub fn assessment_prompts(case: &SafetyCase, claim_id: &str) -> Result<Vec<Prompt>, AssessmentError> {
    let claim = case.claim(claim_id).ok_or_else(|| AssessmentError::UnknownClaim(ClaimId::from(claim_id)))?;
    let mut out = vec![
        prompt(
            "narrative",
            "Start from the justification narrative: which evidence and sub-claims does the POC rely on, and why?",
        ),
        prompt("coverage", "Coverage: which aspects of the claim (none, some critical, core, all) does the evidence address?"),
        prompt("relevance", "Relevance: does each linked artifact actually apply to this claim as worded?"),
        prompt(
            "governance",
            "Governance: what oversight exists over the processes behind this evidence, and is it aligned with company objectives?",
        ),
    ];
    if case.linked_evidence(claim_id).len() >= 2 {
        out.push(prompt(
            "consistency",
            "Consistency: do the linked artifacts agree with each other, or do any findings contradict or weaken one another?",
        ));
    }
    if !claim.children.is_empty() {
        out.push(prompt(
            "conservativeness",
            "Sub-claims: weigh conservatively how much the claim rests on each child; a weak child should not be averaged away.",
        ));
    }
    if !claim.counter_arguments.is_empty() {
        out.push(prompt("rejections", "Counter-arguments: is every defeater rejected with a rationale that holds up?"));
    }
    out.push(prompt(
        "dialectic",
        "Weaknesses: are there plausible objections to this claim that the argument does not address?",
    ));
    Ok(out)
}
