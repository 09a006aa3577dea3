//! Assessment report assembly and Markdown rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::assessment::{ClaimAssessment, Dimension, DimensionValue};
use crate::evidence::{level_label, EvidenceHygieneReport};
use crate::io::to_canonical_json;
use crate::lifecycle::WorkItem;
use crate::lint::{LintFinding, LintReport, Severity};
use crate::model::{traverse, ClaimId, ContentDigest, SafetyCase, TraversalError, TraversalOrder};
use crate::rollup::{Override, RollupResult, RollupSource, RollupWarning, Strategy};
use crate::score::Score;

pub const SECTION_TITLES: [&str; 7] = [
    "Summary",
    "Findings",
    "Roll-up",
    "Evidence hygiene",
    "Lint findings",
    "Re-assessment worklist",
    "Suggested actions",
];

/// An authored follow-up item. Passed through verbatim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestedAction {
    pub location: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseIdentity {
    pub system_description: String,
    pub application: String,
    pub environment: String,
    pub root_claim: ClaimId,
    pub root_text: String,
    pub version: u64,
    pub canonical_hash: ContentDigest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub claims: usize,
    pub assessed: usize,
    pub stale: usize,
    pub unassessed: usize,
    pub root_procedural: Option<Score>,
    pub root_implementation: Option<Score>,
    pub low_scores: usize,
    pub evidence_items: usize,
    pub evidence_below_threshold: usize,
    pub lint_errors: usize,
    pub lint_warnings: usize,
    pub lint_info: usize,
}

/// A direct score below the threshold, with an excerpt of the claim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub claim_id: ClaimId,
    pub dimension: Dimension,
    pub score: u8,
    pub claim_excerpt: String,
}

/// How a direct assessment appears in the roll-up table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectCell {
    Unassessed,
    NotApplicable,
    Score(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollupRow {
    pub claim_id: ClaimId,
    pub depth: usize,
    pub text_excerpt: String,
    pub family: Option<String>,
    pub direct_procedural: DirectCell,
    pub direct_implementation: DirectCell,
    pub stale: bool,
    pub procedural_eff: Option<Score>,
    pub implementation_eff: Option<Score>,
    pub source: Option<RollupSource>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub case: CaseIdentity,
    pub as_of: NaiveDate,
    pub strategy: Strategy,
    pub threshold: u8,
    pub summary: ReportSummary,
    pub findings: Vec<Finding>,
    pub rollup: Vec<RollupRow>,
    pub overrides: Vec<Override>,
    pub rollup_warnings: Vec<RollupWarning>,
    pub hygiene: EvidenceHygieneReport,
    pub lints: Vec<LintFinding>,
    pub worklist: Vec<WorkItem>,
    pub suggested_actions: Vec<SuggestedAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("{input} was computed for case version {found}, but the case is at version {expected}")]
    VersionMismatch { input: &'static str, found: u64, expected: u64 },
    #[error(transparent)]
    Traversal(#[from] TraversalError),
}

/// Everything a report is assembled from.
#[derive(Clone, Copy, Debug)]
pub struct ReportInputs<'a> {
    pub case: &'a SafetyCase,
    pub assessments: &'a [ClaimAssessment],
    pub rollup: &'a RollupResult,
    pub hygiene: &'a EvidenceHygieneReport,
    pub lints: &'a LintReport,
    pub worklist: &'a [WorkItem],
    pub suggested_actions: &'a [SuggestedAction],
}

pub fn excerpt(text: &str, max: usize) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max {
        flat
    } else {
        let cut: String = flat.chars().take(max).collect();
        format!("{}...", cut.trim_end())
    }
}

const EXCERPT_LEN: usize = 80;

pub fn build_report(inputs: ReportInputs<'_>) -> Result<AssessmentReport, ReportError> {
    let case = inputs.case;
    let expected = case.version;
    for (input, found) in [
        ("roll-up", inputs.rollup.case_version),
        ("evidence hygiene", inputs.hygiene.case_version),
        ("lint report", inputs.lints.case_version),
    ] {
        if found != expected {
            return Err(ReportError::VersionMismatch { input, found, expected });
        }
    }

    let order = traverse(case, TraversalOrder::Pre)?;
    let root = order.first().cloned().unwrap_or_else(|| ClaimId::from(""));
    let latest: BTreeMap<&ClaimId, &ClaimAssessment> = inputs.assessments.iter().map(|a| (&a.claim_id, a)).collect();

    let direct = |a: Option<&&ClaimAssessment>, dim: Dimension| match a.and_then(|a| a.value(dim)) {
        None => DirectCell::Unassessed,
        Some(DimensionValue::NotApplicable) => DirectCell::NotApplicable,
        Some(DimensionValue::Score(s)) => DirectCell::Score(s),
    };
    let rollup_rows: Vec<RollupRow> = order
        .iter()
        .map(|id| {
            let claim = &case.claims[id];
            let node = inputs.rollup.nodes.get(id);
            let a = latest.get(id);
            RollupRow {
                claim_id: id.clone(),
                depth: case.ancestors(id.as_str()).len(),
                text_excerpt: excerpt(&claim.text, EXCERPT_LEN),
                family: claim.family.clone(),
                direct_procedural: direct(a, Dimension::Procedural),
                direct_implementation: direct(a, Dimension::Implementation),
                stale: a.is_some_and(|a| a.stale),
                procedural_eff: node.and_then(|n| n.procedural_eff.clone()),
                implementation_eff: node.and_then(|n| n.implementation_eff.clone()),
                source: node.and_then(|n| n.source),
            }
        })
        .collect();

    let findings: Vec<Finding> = inputs
        .rollup
        .low_score_register
        .iter()
        .map(|l| Finding {
            claim_id: l.claim_id.clone(),
            dimension: l.dimension,
            score: l.score,
            claim_excerpt: case.claim(l.claim_id.as_str()).map(|c| excerpt(&c.text, EXCERPT_LEN)).unwrap_or_default(),
        })
        .collect();

    let in_case = |a: &&&ClaimAssessment| case.claims.contains_key(&a.claim_id);
    let assessed = latest.values().filter(in_case).filter(|a| !a.stale).count();
    let stale = latest.values().filter(in_case).filter(|a| a.stale).count();
    let severity_count = |s: Severity| inputs.lints.findings.iter().filter(|f| f.severity == s).count();
    let summary = ReportSummary {
        claims: case.claims.len(),
        assessed,
        stale,
        unassessed: case.claims.len() - assessed - stale,
        root_procedural: inputs.rollup.effective(root.as_str(), Dimension::Procedural).cloned(),
        root_implementation: inputs.rollup.effective(root.as_str(), Dimension::Implementation).cloned(),
        low_scores: findings.len(),
        evidence_items: case.evidence.len(),
        evidence_below_threshold: inputs.hygiene.below_threshold.len(),
        lint_errors: severity_count(Severity::Error),
        lint_warnings: severity_count(Severity::Warning),
        lint_info: severity_count(Severity::Info),
    };

    Ok(AssessmentReport {
        case: CaseIdentity {
            system_description: case.scope.system_description.clone(),
            application: case.scope.application.clone(),
            environment: case.scope.environment.clone(),
            root_text: case.claims.get(&root).map(|c| c.text.clone()).unwrap_or_default(),
            root_claim: root,
            version: case.version,
            canonical_hash: case.canonical_hash(),
        },
        as_of: inputs.hygiene.as_of,
        strategy: inputs.rollup.strategy,
        threshold: inputs.rollup.threshold,
        summary,
        findings,
        rollup: rollup_rows,
        overrides: inputs.rollup.overrides.clone(),
        rollup_warnings: inputs.rollup.warnings.clone(),
        hygiene: inputs.hygiene.clone(),
        lints: inputs.lints.findings.clone(),
        worklist: inputs.worklist.to_vec(),
        suggested_actions: inputs.suggested_actions.to_vec(),
    })
}

/// Stable HTML anchor for a claim: `1.2.1` becomes `claim-1-2-1`.
pub fn claim_anchor(id: &str) -> String {
    let slug: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    format!("claim-{slug}")
}

fn claim_link(id: &ClaimId) -> String {
    format!("[{id}](#{})", claim_anchor(id.as_str()))
}

/// Exact value, plus a two-place decimal when it is not a whole number.
pub fn format_score(s: Option<&Score>) -> String {
    match s {
        None => "-".into(),
        Some(s) if s.is_integer() => s.to_string(),
        Some(s) => format!("{} ({s})", s.to_decimal_string(2)),
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}

fn direct_cell(c: &DirectCell, stale: bool) -> String {
    let base = match c {
        DirectCell::Unassessed => "-".to_string(),
        DirectCell::NotApplicable => "N/A".to_string(),
        DirectCell::Score(s) => s.to_string(),
    };
    if stale && *c != DirectCell::Unassessed {
        format!("{base} (stale)")
    } else {
        base
    }
}

fn source_label(s: Option<RollupSource>) -> &'static str {
    match s {
        None => "-",
        Some(RollupSource::Direct) => "direct",
        Some(RollupSource::Children) => "children",
        Some(RollupSource::Override) => "override",
        Some(RollupSource::Mixed) => "mixed",
    }
}

fn warning_text(w: &RollupWarning) -> String {
    match w {
        RollupWarning::StaleExcluded { claim_id } => format!("{}: stale assessment excluded", claim_link(claim_id)),
        RollupWarning::FutureVersionExcluded { claim_id, case_version } => {
            format!("{}: assessment for future case version {case_version} excluded", claim_link(claim_id))
        }
        RollupWarning::InvalidExcluded { claim_id, reason } => {
            format!("{}: invalid assessment excluded ({})", claim_link(claim_id), cell(reason))
        }
        RollupWarning::UnknownClaimExcluded { claim_id } => format!("{claim_id}: assessment for unknown claim excluded"),
        RollupWarning::NoValue { claim_id, dimension, reason } => {
            let why = match reason {
                crate::rollup::NoValueReason::Unassessed => "not assessed",
                crate::rollup::NoValueReason::NotApplicable => "marked N/A",
                crate::rollup::NoValueReason::NoContributingChildren => "no contributing sub-claims",
            };
            format!("{}: no {dimension} value ({why})", claim_link(claim_id))
        }
        RollupWarning::ZeroTotalWeight { claim_id, dimension } => {
            format!("{}: {dimension} weights sum to zero; uniform weights used", claim_link(claim_id))
        }
    }
}

pub fn render_markdown(report: &AssessmentReport) -> String {
    let mut out = String::new();
    let r = report;
    let _ = writeln!(out, "# Assessment report: {}", r.case.system_description);
    let _ = writeln!(out);
    let _ = writeln!(out, "- Application: {}", r.case.application);
    let _ = writeln!(out, "- Environment: {}", r.case.environment);
    let _ = writeln!(out, "- Root claim: {} {}", claim_link(&r.case.root_claim), r.case.root_text);
    let _ = writeln!(out, "- Case version: {}", r.case.version);
    let _ = writeln!(out, "- Case hash: `{}`", r.case.canonical_hash);
    let _ = writeln!(out, "- As of: {}", r.as_of);
    let _ = writeln!(out, "- Strategy: {}", r.strategy);
    let _ = writeln!(out, "- Threshold: {}", r.threshold);

    let s = &r.summary;
    let _ = writeln!(out, "\n## Summary\n");
    let _ = writeln!(out, "| Measure | Value |");
    let _ = writeln!(out, "| --- | --- |");
    for (k, v) in [
        ("Claims", s.claims.to_string()),
        ("Assessed (current)", s.assessed.to_string()),
        ("Assessed (stale)", s.stale.to_string()),
        ("Unassessed", s.unassessed.to_string()),
        ("Root procedural support", format_score(s.root_procedural.as_ref())),
        ("Root implementation support", format_score(s.root_implementation.as_ref())),
        ("Scores below threshold", s.low_scores.to_string()),
        ("Evidence items", s.evidence_items.to_string()),
        ("Evidence below threshold", s.evidence_below_threshold.to_string()),
        ("Lint errors / warnings / info", format!("{} / {} / {}", s.lint_errors, s.lint_warnings, s.lint_info)),
    ] {
        let _ = writeln!(out, "| {k} | {v} |");
    }

    let _ = writeln!(out, "\n## Findings\n");
    if r.findings.is_empty() {
        let _ = writeln!(out, "No findings: no direct score is below the threshold of {}.", r.threshold);
    } else {
        let _ = writeln!(out, "Direct scores below the threshold of {}. Overrides and weights do not remove entries.\n", r.threshold);
        let _ = writeln!(out, "| Claim | Dimension | Score | Claim text |");
        let _ = writeln!(out, "| --- | --- | --- | --- |");
        for f in &r.findings {
            let _ = writeln!(out, "| {} | {} | {} | {} |", claim_link(&f.claim_id), f.dimension, f.score, cell(&f.claim_excerpt));
        }
    }

    let _ = writeln!(out, "\n## Roll-up\n");
    let _ = writeln!(out, "| Claim | Text | Direct P | Direct I | Effective P | Effective I | Source |");
    let _ = writeln!(out, "| --- | --- | --- | --- | --- | --- | --- |");
    for row in &r.rollup {
        let _ = writeln!(
            out,
            "| <a id=\"{}\"></a>{} | {} | {} | {} | {} | {} | {} |",
            claim_anchor(row.claim_id.as_str()),
            row.claim_id,
            cell(&row.text_excerpt),
            direct_cell(&row.direct_procedural, row.stale),
            direct_cell(&row.direct_implementation, row.stale),
            format_score(row.procedural_eff.as_ref()),
            format_score(row.implementation_eff.as_ref()),
            source_label(row.source),
        );
    }
    if !r.overrides.is_empty() {
        let _ = writeln!(out, "\nOverrides:\n");
        for o in &r.overrides {
            let _ = writeln!(
                out,
                "- {} {} set to {} by {} on {}: {}",
                claim_link(&o.claim_id),
                o.dimension,
                o.value,
                o.author.name,
                o.date,
                cell(&o.rationale)
            );
        }
    }
    if !r.rollup_warnings.is_empty() {
        let _ = writeln!(out, "\nNotes:\n");
        for w in &r.rollup_warnings {
            let _ = writeln!(out, "- {}", warning_text(w));
        }
    }

    let h = &r.hygiene;
    let _ = writeln!(out, "\n## Evidence hygiene\n");
    let _ = writeln!(out, "| Level | Label | Count |");
    let _ = writeln!(out, "| --- | --- | --- |");
    for (level, count) in h.counts.iter().rev() {
        let _ = writeln!(out, "| {level} | {} | {count} |", level_label(*level));
    }
    if !h.scores.is_empty() {
        let _ = writeln!(out, "\n| Evidence | Score | Rule | Trace |");
        let _ = writeln!(out, "| --- | --- | --- | --- |");
        for sc in &h.scores {
            let trace: Vec<&str> = sc.rule_trace.iter().map(|t| t.id()).collect();
            let _ = writeln!(out, "| {} | {} | {} | {} |", sc.evidence_id, sc.score, sc.terminal_rule().id(), trace.join(", "));
        }
    }

    let _ = writeln!(out, "\n## Lint findings\n");
    if r.lints.is_empty() {
        let _ = writeln!(out, "No lint findings.");
    } else {
        let _ = writeln!(out, "| Location | Rule | Severity | Message |");
        let _ = writeln!(out, "| --- | --- | --- | --- |");
        for f in &r.lints {
            let _ = writeln!(out, "| {} | {} | {} | {} |", f.location, f.rule, f.severity, cell(&f.message));
        }
    }

    let _ = writeln!(out, "\n## Re-assessment worklist\n");
    if r.worklist.is_empty() {
        let _ = writeln!(out, "No re-assessment needed.");
    } else {
        for item in &r.worklist {
            match item {
                WorkItem::RescoreEvidence { evidence_id } => {
                    let _ = writeln!(out, "- Re-score evidence {evidence_id}");
                }
                WorkItem::Reassess { claim_id, reasons } => {
                    let _ = writeln!(out, "- Re-assess {}: {}", claim_link(claim_id), cell(&reasons.join("; ")));
                }
            }
        }
        let _ = writeln!(
            out,
            "\nChange classification compares content digests; whether a change is substantial still needs human confirmation."
        );
    }

    let _ = writeln!(out, "\n## Suggested actions\n");
    if r.suggested_actions.is_empty() {
        let _ = writeln!(out, "No suggested actions recorded.");
    } else {
        for a in &r.suggested_actions {
            let _ = writeln!(out, "- {}: {}", a.location, cell(&a.text));
        }
    }
    out
}

/// Structured form of the report.
pub fn render_json(report: &AssessmentReport) -> String {
    to_canonical_json(report)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Scoring(#[from] crate::evidence::ScoringError),
    #[error(transparent)]
    Rollup(#[from] crate::rollup::RollupError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Traversal(#[from] TraversalError),
}

/// Runs scoring, roll-up, lints and the log worklist, then assembles the
/// report.
pub fn analyze(
    case: &SafetyCase,
    log: &crate::assessment::AssessmentLog,
    as_of: NaiveDate,
    opts: &crate::rollup::RollupOptions,
    suggested_actions: &[SuggestedAction],
) -> Result<AssessmentReport, AnalysisError> {
    let assessments = log.current_list();
    let hygiene = crate::evidence::score_library(case, as_of)?;
    let rollup = crate::rollup::rollup(case, &assessments, opts)?;
    let lints = crate::lint::lint_case_with(case, &assessments);
    let worklist = crate::lifecycle::log_worklist(case, log)?;
    Ok(build_report(ReportInputs {
        case,
        assessments: &assessments,
        rollup: &rollup,
        hygiene: &hygiene,
        lints: &lints,
        worklist: &worklist,
        suggested_actions,
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::score_library;
    use crate::lint::lint_case;
    use crate::model::testutil::*;
    use crate::model::PersonRef;
    use crate::rollup::{rollup, RollupOptions};

    fn rec(claim: &str, p: u8, i: u8) -> ClaimAssessment {
        ClaimAssessment {
            claim_id: claim.into(),
            procedural: Some(p),
            implementation: Some(i),
            procedural_na: false,
            implementation_na: false,
            na_justification: None,
            summary: "s".into(),
            assessors: vec![PersonRef::new("A")],
            assessed_at: date("2025-06-01"),
            case_version: 1,
            stale: false,
        }
    }

    fn report_for(case: &SafetyCase, a: &[ClaimAssessment]) -> AssessmentReport {
        let r = rollup(case, a, &RollupOptions::default()).unwrap();
        let h = score_library(case, date("2025-06-30")).unwrap();
        let l = lint_case(case);
        build_report(ReportInputs {
            case,
            assessments: a,
            rollup: &r,
            hygiene: &h,
            lints: &l,
            worklist: &[],
            suggested_actions: &[],
        })
        .unwrap()
    }

    fn sections(md: &str) -> Vec<&str> {
        md.lines().filter_map(|l| l.strip_prefix("## ")).collect()
    }

    #[test]
    fn zero_score_becomes_a_finding() {
        let case = tree(&[("1", None), ("1.1", Some("1")), ("1.2", Some("1"))]);
        let a = [rec("1.1", 0, 3), rec("1.2", 3, 3)];
        let report = report_for(&case, &a);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].claim_id.as_str(), "1.1");
        let md = render_markdown(&report);
        assert_eq!(sections(&md), SECTION_TITLES.to_vec());
        assert!(md.contains("| [1.1](#claim-1-1) | procedural | 0 |"));
        assert!(md.contains("<a id=\"claim-1-1\"></a>1.1"));
    }

    #[test]
    fn all_threes_reports_no_findings() {
        let case = tree(&[("1", None), ("1.1", Some("1"))]);
        let report = report_for(&case, &[rec("1", 3, 3), rec("1.1", 3, 3)]);
        let md = render_markdown(&report);
        assert!(md.lines().any(|l| l.starts_with("No findings")));
        assert_eq!(sections(&md).len(), 7);
    }

    #[test]
    fn findings_are_in_claim_order() {
        let case = tree(&[("1", None), ("1.1", Some("1")), ("1.2", Some("1")), ("1.3", Some("1"))]);
        let report = report_for(&case, &[rec("1.3", 1, 3), rec("1.1", 0, 3), rec("1.2", 2, 1)]);
        let ids: Vec<_> = report.findings.iter().map(|f| f.claim_id.as_str()).collect();
        assert_eq!(ids, vec!["1.1", "1.2", "1.3"]);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let case = tree(&[("1", None)]);
        let r = rollup(&case, &[], &RollupOptions::default()).unwrap();
        let h = score_library(&case, date("2025-06-30")).unwrap();
        let mut l = lint_case(&case);
        l.case_version = 9;
        let err = build_report(ReportInputs {
            case: &case,
            assessments: &[],
            rollup: &r,
            hygiene: &h,
            lints: &l,
            worklist: &[],
            suggested_actions: &[],
        })
        .unwrap_err();
        assert!(matches!(err, ReportError::VersionMismatch { input: "lint report", found: 9, expected: 1 }));
    }

    #[test]
    fn rendering_is_deterministic() {
        let case = tree(&[("1", None), ("1.1", Some("1"))]);
        let report = report_for(&case, &[rec("1.1", 1, 2)]);
        assert_eq!(render_markdown(&report), render_markdown(&report.clone()));
        assert_eq!(render_json(&report), render_json(&report));
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(Some(&Score::new(5, 2))), "2.50 (5/2)");
        assert_eq!(format_score(Some(&Score::from_int(3))), "3");
        assert_eq!(format_score(None), "-");
        assert_eq!(claim_anchor("1.2.1"), "claim-1-2-1");
    }
}
