//! Random valid cases for property tests.

#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use proptest::collection::vec;
use proptest::prelude::*;

use casecred_core::assessment::ClaimAssessment;
use casecred_core::{
    CaseScope, Claim, ClaimId, CounterArgument, Evidence, EvidenceId, EvidenceKind, EvidenceLink, PersonRef, SafetyCase,
};

pub const WORDS: [&str; 16] = [
    "the", "planner", "covers", "all", "scenarios", "sensor", "faults", "are", "detected", "within", "budget", "any",
    "every", "all-weather", "overall", "braking",
];

pub const FAMILIES: [&str; 3] = ["Coverage", "Confidence", "Criterion"];

/// Small case budgets; failures are reported, not persisted.
pub fn config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases, failure_persistence: None, ..Default::default() }
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn base_date() -> NaiveDate {
    date("2023-01-01")
}

fn sentence() -> impl Strategy<Value = String> {
    vec(0..WORDS.len(), 2..8).prop_map(|ix| {
        let mut s = ix.iter().map(|i| WORDS[*i]).collect::<Vec<_>>().join(" ");
        s.push('.');
        s
    })
}

#[derive(Clone, Debug)]
pub struct ClaimSpec {
    pub parent: u32,
    pub text: String,
    pub narrative: Option<String>,
    pub limitations: Vec<String>,
    pub counters: Vec<(String, Option<String>)>,
    pub poc: Option<bool>,
    pub family: Option<u8>,
}

#[derive(Clone, Debug)]
pub struct EvidenceSpec {
    pub procedural: bool,
    pub created_offset: u64,
    pub review_offset: Option<u64>,
    pub owner: Option<bool>,
    pub flags: [bool; 6],
    pub exists: bool,
}

fn claim_spec() -> impl Strategy<Value = ClaimSpec> {
    (
        any::<u32>(),
        sentence(),
        proptest::option::of(sentence()),
        vec(sentence(), 0..3),
        vec((sentence(), proptest::option::of(sentence())), 0..3),
        proptest::option::of(any::<bool>()),
        proptest::option::of(0u8..3),
    )
        .prop_map(|(parent, text, narrative, limitations, counters, poc, family)| ClaimSpec {
            parent,
            text,
            narrative,
            limitations,
            counters,
            poc,
            family,
        })
}

fn evidence_spec() -> impl Strategy<Value = EvidenceSpec> {
    (
        any::<bool>(),
        0u64..600,
        proptest::option::of(0u64..300),
        proptest::option::of(any::<bool>()),
        any::<[bool; 6]>(),
        proptest::bool::weighted(0.9),
    )
        .prop_map(|(procedural, created_offset, review_offset, owner, flags, exists)| EvidenceSpec {
            procedural,
            created_offset,
            review_offset,
            owner,
            flags,
            exists,
        })
}

/// Claims, evidence and link pairs, ready to assemble.
#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub claims: Vec<ClaimSpec>,
    pub evidence: Vec<EvidenceSpec>,
    pub links: Vec<(u32, u32)>,
}

pub fn case_spec(max_claims: usize) -> impl Strategy<Value = CaseSpec> {
    (vec(claim_spec(), 1..=max_claims), vec(evidence_spec(), 0..8), vec((any::<u32>(), any::<u32>()), 0..12))
        .prop_map(|(claims, evidence, links)| CaseSpec { claims, evidence, links })
}

pub struct Parts {
    pub scope: CaseScope,
    pub claims: Vec<Claim>,
    pub evidence: Vec<Evidence>,
    pub links: Vec<EvidenceLink>,
}

/// Dotted ids: the root is "1" and the k-th child of "p" is "p.k".
pub fn parts(spec: &CaseSpec) -> Parts {
    let n = spec.claims.len();
    let mut ids: Vec<ClaimId> = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in spec.claims.iter().enumerate() {
        if i == 0 {
            ids.push(ClaimId::from("1"));
            parent.push(None);
        } else {
            let p = c.parent as usize % i;
            children[p].push(i);
            ids.push(ClaimId::from(format!("{}.{}", ids[p], children[p].len()).as_str()));
            parent.push(Some(p));
        }
    }
    let claims = spec
        .claims
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut c = Claim::new(ids[i].clone(), s.text.clone());
            c.parent = parent[i].map(|p| ids[p].clone());
            c.children = children[i].iter().map(|k| ids[*k].clone()).collect();
            c.justification_narrative = s.narrative.clone();
            c.limitations = s.limitations.clone();
            c.counter_arguments = s
                .counters
                .iter()
                .map(|(text, rejection)| CounterArgument { text: text.clone(), rejection: rejection.clone(), rejection_evidence: vec![] })
                .collect();
            c.poc = s.poc.map(|active| PersonRef { name: format!("Owner {i}"), active });
            c.family = s.family.map(|f| FAMILIES[f as usize].to_string());
            c
        })
        .collect();
    let evidence: Vec<Evidence> = spec
        .evidence
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let kind = if s.procedural { EvidenceKind::Procedural } else { EvidenceKind::Implementation };
            let created = base_date() + Days::new(s.created_offset);
            let mut ev = Evidence::stub(format!("E{:02}", i + 1).as_str(), format!("Record {}", i + 1), kind, created);
            if s.exists {
                ev.last_review = s.review_offset.map(|d| created + Days::new(d));
                ev.owner = s.owner.map(|_| PersonRef::new(format!("Keeper {i}")));
                ev.owner_affiliated = s.owner.unwrap_or(false);
                ev.flagged_major_revision = s.flags[0];
                ev.active_confirmed = s.flags[1];
                ev.partially_outdated_flagged = s.flags[2];
                ev.revision_history_documented = s.flags[3];
                ev.approvals_documented = s.flags[4];
                ev.controlled_environment = s.flags[5];
            } else {
                ev.exists = false;
            }
            ev
        })
        .collect();
    let mut links: Vec<EvidenceLink> = Vec::new();
    if !evidence.is_empty() {
        for (c, e) in &spec.links {
            let claim = ids[*c as usize % n].clone();
            let ev: EvidenceId = evidence[*e as usize % evidence.len()].id.clone();
            if !links.iter().any(|l| l.claim_id == claim && l.evidence_id == ev) {
                links.push(EvidenceLink::new(claim, ev));
            }
        }
    }
    Parts {
        scope: CaseScope {
            system_description: "Generated system".into(),
            application: "Generated application".into(),
            environment: "Generated environment".into(),
            assumptions: vec!["Generated assumption.".into()],
        },
        claims,
        evidence,
        links,
    }
}

pub fn build(spec: &CaseSpec) -> SafetyCase {
    let p = parts(spec);
    SafetyCase::from_parts(p.scope, p.claims, p.evidence, p.links, 1).expect("generated parts are consistent")
}

pub fn arb_case(max_claims: usize) -> impl Strategy<Value = SafetyCase> {
    case_spec(max_claims).prop_map(|s| build(&s))
}

/// One record per claim with the given scores.
pub fn assess_all(case: &SafetyCase, procedural: u8, implementation: u8) -> Vec<ClaimAssessment> {
    case.claims
        .keys()
        .map(|id| ClaimAssessment {
            claim_id: id.clone(),
            procedural: Some(procedural),
            implementation: Some(implementation),
            procedural_na: false,
            implementation_na: false,
            na_justification: None,
            summary: "Reviewed.".into(),
            assessors: vec![PersonRef::new("Assessor")],
            assessed_at: date("2025-06-20"),
            case_version: case.version,
            stale: false,
        })
        .collect()
}
