//! Advisory quality checks on claim wording, argument structure and
//! traceability. Lints never block parsing or assessment.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assessment::{ClaimAssessment, Dimension};
use crate::model::{ClaimId, EvidenceKind, SafetyCase};

/// Words that overstate a claim when they stand alone.
pub const OVERSTATEMENT_TOKENS: [&str; 3] = ["all", "any", "every"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LintRule {
    #[serde(rename = "L-OVERSTATE")]
    Overstate,
    #[serde(rename = "L-UNDEVELOPED")]
    Undeveloped,
    #[serde(rename = "L-ORPHAN-EVIDENCE")]
    OrphanEvidence,
    #[serde(rename = "L-NO-REJECTION")]
    NoRejection,
    #[serde(rename = "L-NO-NARRATIVE")]
    NoNarrative,
    #[serde(rename = "L-DUP-LINK")]
    DupLink,
    #[serde(rename = "L-NO-POC")]
    NoPoc,
    #[serde(rename = "L-KIND-GAP")]
    KindGap,
}

impl LintRule {
    pub const ALL: [LintRule; 8] = [
        LintRule::Overstate,
        LintRule::Undeveloped,
        LintRule::OrphanEvidence,
        LintRule::NoRejection,
        LintRule::NoNarrative,
        LintRule::DupLink,
        LintRule::NoPoc,
        LintRule::KindGap,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            LintRule::Overstate => "L-OVERSTATE",
            LintRule::Undeveloped => "L-UNDEVELOPED",
            LintRule::OrphanEvidence => "L-ORPHAN-EVIDENCE",
            LintRule::NoRejection => "L-NO-REJECTION",
            LintRule::NoNarrative => "L-NO-NARRATIVE",
            LintRule::DupLink => "L-DUP-LINK",
            LintRule::NoPoc => "L-NO-POC",
            LintRule::KindGap => "L-KIND-GAP",
        }
    }

    pub fn severity(&self) -> Severity {
        match self {
            LintRule::Undeveloped | LintRule::NoRejection => Severity::Error,
            LintRule::Overstate | LintRule::NoNarrative | LintRule::DupLink | LintRule::NoPoc => Severity::Warning,
            LintRule::OrphanEvidence | LintRule::KindGap => Severity::Info,
        }
    }
}

impl fmt::Display for LintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule: LintRule,
    pub severity: Severity,
    /// Claim or evidence id.
    pub location: String,
    pub message: String,
}

impl LintFinding {
    fn new(rule: LintRule, location: impl Into<String>, message: impl Into<String>) -> Self {
        LintFinding { rule, severity: rule.severity(), location: location.into(), message: message.into() }
    }

    fn sort_key(&self) -> (&str, &'static str, &str) {
        (&self.location, self.rule.id(), &self.message)
    }
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}] {}", self.severity, self.location, self.rule, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub case_version: u64,
    pub findings: Vec<LintFinding>,
}

impl LintReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, rule: LintRule) -> usize {
        self.findings.iter().filter(|f| f.rule == rule).count()
    }
}

/// Tokens are maximal runs of alphanumerics, hyphens and apostrophes, so
/// "all-weather" is one token and never matches "all".
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\'')).filter(|t| !t.is_empty())
}

/// Overstating tokens found in `text`, lower-cased, in order of appearance.
pub fn overstatements(text: &str) -> Vec<String> {
    tokens(text)
        .map(str::to_lowercase)
        .filter(|t| OVERSTATEMENT_TOKENS.contains(&t.as_str()))
        .collect()
}

/// Runs every rule that needs only the case itself.
pub fn lint_case(case: &SafetyCase) -> LintReport {
    lint_case_with(case, &[])
}

/// Runs all rules. `L-KIND-GAP` needs assessments and only fires for claims
/// that have one.
pub fn lint_case_with(case: &SafetyCase, assessments: &[ClaimAssessment]) -> LintReport {
    let mut findings = Vec::new();
    let assessed: BTreeMap<&ClaimId, &ClaimAssessment> = assessments.iter().map(|a| (&a.claim_id, a)).collect();

    for (id, claim) in &case.claims {
        let loc = id.as_str();
        let words = overstatements(&claim.text);
        if !words.is_empty() {
            let quoted: Vec<String> = words.iter().map(|w| format!("\"{w}\"")).collect();
            findings.push(LintFinding::new(
                LintRule::Overstate,
                loc,
                format!("claim text uses overstating word {}", quoted.join(", ")),
            ));
        }
        let linked = case.linked_evidence(loc);
        if claim.children.is_empty() && linked.is_empty() {
            findings.push(LintFinding::new(LintRule::Undeveloped, loc, "claim has neither sub-claims nor linked evidence"));
        }
        for (i, ca) in claim.counter_arguments.iter().enumerate() {
            if !ca.has_rejection() {
                findings.push(LintFinding::new(
                    LintRule::NoRejection,
                    loc,
                    format!("counter-argument {} has no rejection: {}", i + 1, excerpt(&ca.text)),
                ));
            }
        }
        if !claim.children.is_empty() && !claim.has_narrative() {
            findings.push(LintFinding::new(LintRule::NoNarrative, loc, "parent claim has no justification narrative"));
        }
        match &claim.poc {
            None => findings.push(LintFinding::new(LintRule::NoPoc, loc, "claim has no point of contact")),
            Some(p) if !p.active => findings.push(LintFinding::new(
                LintRule::NoPoc,
                loc,
                format!("point of contact {} is no longer active", p.name),
            )),
            Some(_) => {}
        }
        let ancestors = case.ancestors(loc);
        for ev in &linked {
            let dup: Vec<&str> = ancestors
                .iter()
                .filter(|a| case.linked_evidence(a.as_str()).contains(ev))
                .map(ClaimId::as_str)
                .collect();
            if !dup.is_empty() {
                findings.push(LintFinding::new(
                    LintRule::DupLink,
                    loc,
                    format!("evidence {ev} is also linked to ancestor {}", dup.join(", ")),
                ));
            }
        }
        if let Some(a) = assessed.get(id) {
            let kinds: Vec<EvidenceKind> =
                linked.iter().filter_map(|e| case.evidence_item(e.as_str())).map(|e| e.kind).collect();
            if let Some(first) = kinds.first().copied().filter(|k| kinds.iter().all(|x| x == k)) {
                let (missing_kind, dim) = match first {
                    EvidenceKind::Procedural => ("implementation", Dimension::Implementation),
                    EvidenceKind::Implementation => ("procedural", Dimension::Procedural),
                };
                if !a.is_na(dim) {
                    findings.push(LintFinding::new(
                        LintRule::KindGap,
                        loc,
                        format!("no {missing_kind} evidence linked but the {dim} dimension is not marked N/A"),
                    ));
                }
            }
        }
    }

    for id in case.evidence.keys() {
        if case.claims_linking(id.as_str()).is_empty() {
            findings.push(LintFinding::new(LintRule::OrphanEvidence, id.as_str(), "evidence is not linked to any claim"));
        }
    }

    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    LintReport { case_version: case.version, findings }
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 60;
    let t = text.trim();
    if t.chars().count() <= MAX {
        t.to_string()
    } else {
        let cut: String = t.chars().take(MAX).collect();
        format!("{}...", cut.trim_end())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::{CounterArgument, Evidence, EvidenceLink, PersonRef};

    fn clean_case() -> SafetyCase {
        let mut case = tree(&[("1", None), ("1.1", Some("1"))]);
        for c in case.claims.values_mut() {
            c.poc = Some(PersonRef::new("Pat"));
        }
        case.claims.get_mut("1").unwrap().justification_narrative = Some("Sub-claim covers it.".into());
        case.evidence.insert("E1".into(), Evidence::stub("E1", "Plan", EvidenceKind::Procedural, date("2024-01-01")));
        case.links.push(EvidenceLink::new("1.1", "E1"));
        case
    }

    #[test]
    fn clean_case_has_no_findings() {
        assert_eq!(lint_case(&clean_case()).findings, vec![]);
    }

    #[test]
    fn overstatement_word_boundaries() {
        assert_eq!(overstatements("The ADS handles all scenarios safely"), vec!["all"]);
        assert_eq!(overstatements("ANY fault; Every mode."), vec!["any", "every"]);
        assert!(overstatements("covers all-weather sensors").is_empty());
        assert!(overstatements("Everyone anywhere allows tall overall").is_empty());
        let mut case = clean_case();
        case.claims.get_mut("1.1").unwrap().text = "The ADS handles all scenarios safely".into();
        let r = lint_case(&case);
        assert_eq!(r.count(LintRule::Overstate), 1);
        assert_eq!(r.findings[0].location, "1.1");
        assert_eq!(r.findings[0].severity, Severity::Warning);
    }

    #[test]
    fn undeveloped_leaf_and_orphan_evidence() {
        let mut case = clean_case();
        case.links.clear();
        let r = lint_case(&case);
        assert_eq!(r.count(LintRule::Undeveloped), 1);
        assert_eq!(r.count(LintRule::OrphanEvidence), 1);
        assert!(r.has_errors());
    }

    #[test]
    fn missing_rejection_and_repair() {
        let mut case = clean_case();
        case.claims.get_mut("1.1").unwrap().counter_arguments =
            vec![CounterArgument { text: "Sensors may degrade".into(), rejection: None, rejection_evidence: vec![] }];
        let before = lint_case(&case);
        assert_eq!(before.count(LintRule::NoRejection), 1);
        case.claims.get_mut("1.1").unwrap().counter_arguments[0].rejection = Some("Degradation is monitored".into());
        let after = lint_case(&case);
        assert_eq!(after.findings, vec![]);
    }

    #[test]
    fn narrative_poc_and_dup_link() {
        let mut case = clean_case();
        case.claims.get_mut("1").unwrap().justification_narrative = None;
        case.claims.get_mut("1.1").unwrap().poc = None;
        case.links.push(EvidenceLink::new("1", "E1"));
        let r = lint_case(&case);
        let rules: Vec<_> = r.findings.iter().map(|f| (f.location.as_str(), f.rule)).collect();
        assert_eq!(rules, vec![("1", LintRule::NoNarrative), ("1.1", LintRule::DupLink), ("1.1", LintRule::NoPoc)]);
    }

    #[test]
    fn kind_gap_needs_assessment_without_na() {
        let case = clean_case();
        let mut a = ClaimAssessment {
            claim_id: "1.1".into(),
            procedural: Some(2),
            implementation: Some(2),
            procedural_na: false,
            implementation_na: false,
            na_justification: None,
            summary: "s".into(),
            assessors: vec![PersonRef::new("A")],
            assessed_at: date("2025-01-01"),
            case_version: 1,
            stale: false,
        };
        assert_eq!(lint_case_with(&case, std::slice::from_ref(&a)).count(LintRule::KindGap), 1);
        a.implementation = None;
        a.implementation_na = true;
        a.na_justification = Some("process-only claim".into());
        assert_eq!(lint_case_with(&case, &[a]).count(LintRule::KindGap), 0);
    }

    #[test]
    fn ordering_is_by_location_then_rule() {
        let mut case = tree(&[("1", None), ("1.1", Some("1")), ("1.2", Some("1"))]);
        case.claims.get_mut("1.2").unwrap().text = "Every hazard".into();
        let r = lint_case(&case);
        let keys: Vec<_> = r.findings.iter().map(|f| (f.location.clone(), f.rule.id())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(lint_case(&case), r);
    }
}
