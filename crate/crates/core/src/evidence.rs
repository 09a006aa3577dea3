//! Evidence status scoring.
//!
//! Each record in the library is scored 0-3 from its record-keeping metadata
//! alone. The rules are evaluated in a fixed order and the first match wins:
//!
//! | rule | score | condition |
//! |------|-------|-----------|
//! | `R0`  | 0 | the artifact is a confirmed-missing placeholder |
//! | `R1a` | 1 | flagged by its POC as needing major revision |
//! | `R1b` | 1 | 12+ months old with no "still active" confirmation |
//! | `R1c` | 1 | no owner, or owner no longer affiliated |
//! | `R3`  | 3 | reviewed < 6 months ago, and revision history, approvals and controlled storage all documented |
//! | `R2`  | 2 | < 12 months old and time-stamped by a review or an active confirmation |
//! | `R_fallback` | 1 | anything else |
//!
//! Age is counted in whole calendar months from the last review (or from
//! creation when the record was never reviewed, in which case the active
//! confirmation is ignored).
//!
//! Scoring takes no claim assessment input: an evidence score never depends
//! on how the claims it supports were judged.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::model::{Evidence, EvidenceId, SafetyCase};

/// Scores below this are listed in the hygiene report.
pub const HYGIENE_THRESHOLD: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceRule {
    /// Informational: age measured from creation because no review is recorded.
    #[serde(rename = "N_AGE_FROM_CREATED")]
    AgeFromCreated,
    #[serde(rename = "R0")]
    Missing,
    #[serde(rename = "R1a")]
    MajorRevision,
    #[serde(rename = "R1b")]
    StaleUnconfirmed,
    #[serde(rename = "R1c")]
    NoAffiliatedOwner,
    #[serde(rename = "R3")]
    Exceeds,
    #[serde(rename = "R2")]
    Meets,
    #[serde(rename = "R_fallback")]
    Fallback,
}

impl EvidenceRule {
    pub fn id(&self) -> &'static str {
        match self {
            EvidenceRule::AgeFromCreated => "N_AGE_FROM_CREATED",
            EvidenceRule::Missing => "R0",
            EvidenceRule::MajorRevision => "R1a",
            EvidenceRule::StaleUnconfirmed => "R1b",
            EvidenceRule::NoAffiliatedOwner => "R1c",
            EvidenceRule::Exceeds => "R3",
            EvidenceRule::Meets => "R2",
            EvidenceRule::Fallback => "R_fallback",
        }
    }

    /// Score assigned when this rule terminates the cascade; `None` for notes.
    pub fn score(&self) -> Option<u8> {
        match self {
            EvidenceRule::AgeFromCreated => None,
            EvidenceRule::Missing => Some(0),
            EvidenceRule::MajorRevision
            | EvidenceRule::StaleUnconfirmed
            | EvidenceRule::NoAffiliatedOwner
            | EvidenceRule::Fallback => Some(1),
            EvidenceRule::Meets => Some(2),
            EvidenceRule::Exceeds => Some(3),
        }
    }
}

impl fmt::Display for EvidenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Table 3 level labels.
pub fn level_label(score: u8) -> &'static str {
    match score {
        0 => "MISSING",
        1 => "DOES NOT MEET EXPECTATIONS",
        2 => "MEETS EXPECTATIONS",
        3 => "EXCEEDS EXPECTATIONS",
        _ => "INVALID",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceStatusScore {
    pub evidence_id: EvidenceId,
    pub score: u8,
    /// Rules that fired, in order; the last one is terminal and fixes `score`.
    pub rule_trace: Vec<EvidenceRule>,
    pub as_of: NaiveDate,
}

impl EvidenceStatusScore {
    pub fn terminal_rule(&self) -> EvidenceRule {
        *self.rule_trace.last().expect("trace is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("evidence `{id}`: as-of date {as_of} precedes creation date {created}")]
    AsOfBeforeCreated { id: EvidenceId, as_of: NaiveDate, created: NaiveDate },
    #[error("evidence `{id}`: as-of date {as_of} precedes last review {review}")]
    AsOfBeforeReview { id: EvidenceId, as_of: NaiveDate, review: NaiveDate },
}

/// Whole calendar months elapsed: the largest `n` with `from + n months <= to`
/// (month-end dates clamp, so Jan 31 + 1 month is Feb 28/29).
pub fn whole_months_between(from: NaiveDate, to: NaiveDate) -> u32 {
    if to <= from {
        return 0;
    }
    let estimate = (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32;
    let mut n = estimate.max(0) as u32;
    while n > 0 && from.checked_add_months(Months::new(n)).is_none_or(|d| d > to) {
        n -= 1;
    }
    n
}

pub fn score_evidence(ev: &Evidence, as_of: NaiveDate) -> Result<EvidenceStatusScore, ScoringError> {
    let done = |mut trace: Vec<EvidenceRule>, rule: EvidenceRule| {
        trace.push(rule);
        Ok(EvidenceStatusScore {
            evidence_id: ev.id.clone(),
            score: rule.score().expect("terminal rule"),
            rule_trace: trace,
            as_of,
        })
    };

    if !ev.exists {
        return done(Vec::new(), EvidenceRule::Missing);
    }
    if as_of < ev.created {
        return Err(ScoringError::AsOfBeforeCreated { id: ev.id.clone(), as_of, created: ev.created });
    }
    if let Some(review) = ev.last_review {
        if as_of < review {
            return Err(ScoringError::AsOfBeforeReview { id: ev.id.clone(), as_of, review });
        }
    }

    let mut trace = Vec::new();
    let (age, time_stamped) = match ev.last_review {
        Some(review) => (whole_months_between(review, as_of), true),
        None => {
            trace.push(EvidenceRule::AgeFromCreated);
            (whole_months_between(ev.created, as_of), false)
        }
    };
    let active_confirmed = time_stamped && ev.active_confirmed;
    let owner_ok = ev.owner.is_some() && ev.owner_affiliated;

    if ev.flagged_major_revision {
        return done(trace, EvidenceRule::MajorRevision);
    }
    if age >= 12 && !active_confirmed {
        return done(trace, EvidenceRule::StaleUnconfirmed);
    }
    if !owner_ok {
        return done(trace, EvidenceRule::NoAffiliatedOwner);
    }
    let reconfirmed = active_confirmed || time_stamped;
    if age < 6
        && reconfirmed
        && ev.revision_history_documented
        && ev.approvals_documented
        && ev.controlled_environment
    {
        return done(trace, EvidenceRule::Exceeds);
    }
    if age < 12 && reconfirmed {
        return done(trace, EvidenceRule::Meets);
    }
    done(trace, EvidenceRule::Fallback)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceHygieneReport {
    pub case_version: u64,
    pub as_of: NaiveDate,
    /// Number of records at each score; keys 0..=3 are always present.
    pub counts: BTreeMap<u8, usize>,
    pub scores: Vec<EvidenceStatusScore>,
    /// Records scoring below [`HYGIENE_THRESHOLD`], in id order.
    pub below_threshold: Vec<EvidenceId>,
}

/// Scores every record in the library, linked or not, in id order.
pub fn score_library(case: &SafetyCase, as_of: NaiveDate) -> Result<EvidenceHygieneReport, ScoringError> {
    let scores = case.evidence.values().map(|ev| score_evidence(ev, as_of)).collect::<Result<Vec<_>, _>>()?;
    let mut counts: BTreeMap<u8, usize> = (0..=3).map(|s| (s, 0)).collect();
    for s in &scores {
        *counts.entry(s.score).or_default() += 1;
    }
    let below_threshold =
        scores.iter().filter(|s| s.score < HYGIENE_THRESHOLD).map(|s| s.evidence_id.clone()).collect();
    Ok(EvidenceHygieneReport { case_version: case.version, as_of, counts, scores, below_threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::{EvidenceKind, PersonRef};

    const AS_OF: &str = "2025-06-15";

    fn reviewed(months_ago: u32) -> Evidence {
        let as_of = date(AS_OF);
        let review = as_of.checked_sub_months(Months::new(months_ago)).unwrap();
        let mut ev = Evidence::stub("E1", "Test plan", EvidenceKind::Procedural, date("2020-01-01"));
        ev.last_review = Some(review);
        ev.owner = Some(PersonRef::new("Dana"));
        ev.owner_affiliated = true;
        ev
    }

    fn fully_controlled(mut ev: Evidence) -> Evidence {
        ev.revision_history_documented = true;
        ev.approvals_documented = true;
        ev.controlled_environment = true;
        ev
    }

    fn trace(s: &EvidenceStatusScore) -> Vec<&'static str> {
        s.rule_trace.iter().map(|r| r.id()).collect()
    }

    #[test]
    fn missing_scores_zero() {
        let mut ev = Evidence::stub("E0", "Placeholder", EvidenceKind::Implementation, date("2024-01-01"));
        ev.exists = false;
        let s = score_evidence(&ev, date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (0, vec!["R0"]));
    }

    #[test]
    fn old_unconfirmed_scores_one() {
        let s = score_evidence(&reviewed(13), date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (1, vec!["R1b"]));
    }

    #[test]
    fn eight_months_confirmed_meets() {
        let mut ev = reviewed(8);
        ev.active_confirmed = true;
        let s = score_evidence(&ev, date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (2, vec!["R2"]));
    }

    #[test]
    fn three_months_controlled_exceeds() {
        let s = score_evidence(&fully_controlled(reviewed(3)), date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (3, vec!["R3"]));
    }

    #[test]
    fn unaffiliated_owner_caps_at_one() {
        let mut ev = fully_controlled(reviewed(3));
        ev.owner_affiliated = false;
        let s = score_evidence(&ev, date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (1, vec!["R1c"]));
    }

    #[test]
    fn exactly_six_months_is_not_fresh() {
        let s = score_evidence(&fully_controlled(reviewed(6)), date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (2, vec!["R2"]));
        let s = score_evidence(&fully_controlled(reviewed(5)), date(AS_OF)).unwrap();
        assert_eq!(s.score, 3);
    }

    #[test]
    fn exactly_twelve_months_is_old() {
        let s = score_evidence(&reviewed(12), date(AS_OF)).unwrap();
        assert_eq!(trace(&s), vec!["R1b"]);
        let mut confirmed = reviewed(12);
        confirmed.active_confirmed = true;
        let s = score_evidence(&confirmed, date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (1, vec!["R_fallback"]));
    }

    #[test]
    fn major_revision_dominates() {
        let mut ev = fully_controlled(reviewed(1));
        ev.flagged_major_revision = true;
        assert_eq!(trace(&score_evidence(&ev, date(AS_OF)).unwrap()), vec!["R1a"]);
    }

    #[test]
    fn never_reviewed_fresh_artifact_falls_back() {
        let mut ev = fully_controlled(Evidence::stub("E1", "New doc", EvidenceKind::Procedural, date("2025-05-01")));
        ev.owner = Some(PersonRef::new("Dana"));
        ev.owner_affiliated = true;
        ev.active_confirmed = true;
        let s = score_evidence(&ev, date(AS_OF)).unwrap();
        assert_eq!((s.score, trace(&s)), (1, vec!["N_AGE_FROM_CREATED", "R_fallback"]));
    }

    #[test]
    fn partially_outdated_flag_still_meets() {
        let mut ev = reviewed(7);
        ev.partially_outdated_flagged = true;
        assert_eq!(score_evidence(&ev, date(AS_OF)).unwrap().score, 2);
    }

    #[test]
    fn as_of_before_created_is_input_error() {
        let ev = Evidence::stub("E1", "Doc", EvidenceKind::Procedural, date("2026-01-01"));
        assert!(matches!(score_evidence(&ev, date(AS_OF)), Err(ScoringError::AsOfBeforeCreated { .. })));
    }

    #[test]
    fn calendar_months() {
        assert_eq!(whole_months_between(date("2025-01-15"), date("2025-07-14")), 5);
        assert_eq!(whole_months_between(date("2025-01-15"), date("2025-07-15")), 6);
        assert_eq!(whole_months_between(date("2025-01-31"), date("2025-02-28")), 1);
        assert_eq!(whole_months_between(date("2024-03-31"), date("2025-03-30")), 11);
        assert_eq!(whole_months_between(date("2025-03-01"), date("2025-03-01")), 0);
    }

    #[test]
    fn library_counts_and_threshold() {
        let mut case = tree(&[("1", None)]);
        assert_eq!(score_library(&case, date(AS_OF)).unwrap().counts.values().sum::<usize>(), 0);

        let mut missing = Evidence::stub("E-missing", "Gap", EvidenceKind::Implementation, date("2024-01-01"));
        missing.exists = false;
        let mut fresh = fully_controlled(reviewed(2));
        fresh.id = "E-fresh".into();
        case.evidence.insert(missing.id.clone(), missing);
        case.evidence.insert(fresh.id.clone(), fresh);
        let report = score_library(&case, date(AS_OF)).unwrap();
        assert_eq!(report.counts, BTreeMap::from([(0, 1), (1, 0), (2, 0), (3, 1)]));
        assert_eq!(report.below_threshold, vec![EvidenceId::from("E-missing")]);
    }
}
