mod common;

use chrono::{Days, Months};
use proptest::prelude::*;

use casecred_core::evidence::{score_evidence, score_library};
use casecred_core::lint::{lint_case, LintRule};
use casecred_core::{Evidence, EvidenceKind, PersonRef};

use common::{arb_case, base_date, date};

fn favorable(months_old: u32) -> Evidence {
    let as_of = date("2025-06-30");
    let mut ev = Evidence::stub("E1", "Record", EvidenceKind::Implementation, base_date());
    ev.last_review = Some(as_of - Months::new(months_old));
    ev.owner = Some(PersonRef::new("Keeper"));
    ev.owner_affiliated = true;
    ev.active_confirmed = true;
    ev.revision_history_documented = true;
    ev.approvals_documented = true;
    ev.controlled_environment = true;
    ev
}

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn scoring_is_total_and_deterministic(case in arb_case(5), days in 0u64..900) {
        let as_of = date("2025-01-01") + Days::new(days);
        for ev in case.evidence.values() {
            let reference_date = ev.last_review.unwrap_or(ev.created);
            if as_of < reference_date {
                prop_assert!(score_evidence(ev, as_of).is_err() || !ev.exists);
                continue;
            }
            let a = score_evidence(ev, as_of).unwrap();
            let b = score_evidence(ev, as_of).unwrap();
            prop_assert_eq!(&a, &b);
            let terminal = *a.rule_trace.last().unwrap();
            prop_assert_eq!(terminal.score(), Some(a.score));
            prop_assert!(a.rule_trace[..a.rule_trace.len() - 1].iter().all(|r| r.score().is_none()));
        }
    }

    #[test]
    fn library_counts_cover_every_record(case in arb_case(5)) {
        let report = score_library(&case, date("2026-01-01")).unwrap();
        prop_assert_eq!(report.counts.values().sum::<usize>(), case.evidence.len());
        prop_assert_eq!(report.scores.len(), case.evidence.len());
    }

    #[test]
    fn freshness_never_improves_with_age(a in 0u32..30, b in 0u32..30, partial in any::<bool>()) {
        let (young, old) = (a.min(b), a.max(b));
        let as_of = date("2025-06-30");
        let mut y = favorable(young);
        let mut o = favorable(old);
        y.partially_outdated_flagged = partial;
        o.partially_outdated_flagged = partial;
        prop_assert!(score_evidence(&o, as_of).unwrap().score <= score_evidence(&y, as_of).unwrap().score);
    }

    #[test]
    fn lint_is_deterministic(case in arb_case(20)) {
        prop_assert_eq!(lint_case(&case), lint_case(&case.clone()));
    }

    #[test]
    fn undeveloped_only_on_bare_leaves(case in arb_case(20)) {
        for f in lint_case(&case).findings.iter().filter(|f| f.rule == LintRule::Undeveloped) {
            let claim = &case.claims[f.location.as_str()];
            prop_assert!(claim.children.is_empty());
            prop_assert!(case.linked_evidence(f.location.as_str()).is_empty());
        }
    }

    #[test]
    fn adding_a_rejection_removes_exactly_one_finding(case in arb_case(20), pick in any::<u32>()) {
        let open: Vec<(String, usize)> = case
            .claims
            .iter()
            .flat_map(|(id, c)| {
                c.counter_arguments
                    .iter()
                    .enumerate()
                    .filter(|(_, ca)| !ca.has_rejection())
                    .map(move |(i, _)| (id.to_string(), i))
            })
            .collect();
        prop_assume!(!open.is_empty());
        let (id, idx) = &open[pick as usize % open.len()];
        let mut repaired = case.clone();
        repaired.claims.get_mut(id.as_str()).unwrap().counter_arguments[*idx].rejection =
            Some("Rejected on test data.".into());
        let before = lint_case(&case).findings;
        let after = lint_case(&repaired).findings;
        prop_assert!(after.iter().all(|f| before.contains(f)));
        let removed: Vec<_> = before.iter().filter(|f| !after.contains(f)).collect();
        prop_assert_eq!(removed.len(), 1);
        prop_assert_eq!(removed[0].rule, LintRule::NoRejection);
        prop_assert_eq!(&removed[0].location, id);
        let expected_prefix = format!("counter-argument {} ", idx + 1);
        prop_assert!(removed[0].message.starts_with(&expected_prefix));
    }
}
