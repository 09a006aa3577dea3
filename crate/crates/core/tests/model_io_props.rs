mod common;

use chrono::NaiveDate;
use proptest::prelude::*;

use casecred_core::io::{export_tabular, import_tabular, parse_case, read_csv, serialize_case, write_csv};
use casecred_core::{content_hash, traverse, validate_case, EvidenceLink, SafetyCase, TraversalOrder, ViolationCode};

use common::{arb_case, case_spec, parts};

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn generated_cases_are_valid(case in arb_case(25)) {
        let report = validate_case(&case);
        prop_assert!(report.is_empty(), "{}", report);
    }

    #[test]
    fn tree_has_one_more_claim_than_edges(case in arb_case(25)) {
        let edges: usize = case.claims.values().map(|c| c.children.len()).sum();
        prop_assert_eq!(case.claims.len(), edges + 1);
        for order in [TraversalOrder::Pre, TraversalOrder::Post] {
            let mut seen = traverse(&case, order).unwrap();
            prop_assert_eq!(seen.len(), case.claims.len());
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), case.claims.len());
        }
    }

    #[test]
    fn dangling_link_is_reported(case in arb_case(10)) {
        let mut broken = case.clone();
        broken.links.push(EvidenceLink::new("1", "NOPE"));
        prop_assert!(validate_case(&broken).has(ViolationCode::DanglingLink));
    }

    #[test]
    fn limitation_order_does_not_change_claim_hash(case in arb_case(10)) {
        for claim in case.claims.values() {
            let mut reversed = claim.clone();
            reversed.limitations.reverse();
            prop_assert_eq!(content_hash(claim), content_hash(&reversed));
        }
    }

    #[test]
    fn canonical_round_trip_is_byte_identity(case in arb_case(25)) {
        let bytes = serialize_case(&case);
        let back = parse_case(&bytes).unwrap();
        prop_assert_eq!(&back, &case);
        prop_assert_eq!(serialize_case(&back), bytes);
    }

    #[test]
    fn insertion_order_does_not_change_bytes(spec in case_spec(15), seed in any::<u64>()) {
        let a = parts(&spec);
        let mut b = parts(&spec);
        // Deterministic shuffle from the seed.
        let rotate = |len: usize| if len == 0 { 0 } else { (seed as usize) % len };
        let r = rotate(b.claims.len());
        b.claims.rotate_left(r);
        b.claims.reverse();
        let r = rotate(b.evidence.len());
        b.evidence.rotate_left(r);
        b.links.reverse();
        let x = SafetyCase::from_parts(a.scope, a.claims, a.evidence, a.links, 1).unwrap();
        let y = SafetyCase::from_parts(b.scope, b.claims, b.evidence, b.links, 1).unwrap();
        prop_assert_eq!(serialize_case(&x), serialize_case(&y));
    }

    #[test]
    fn tabular_round_trip_keeps_argument(case in arb_case(15)) {
        let csv = write_csv(&export_tabular(&case));
        let back = import_tabular(&read_csv(csv.as_bytes()).unwrap(), NaiveDate::from_ymd_opt(2025, 1, 1).unwrap()).unwrap();
        prop_assert_eq!(back.claims.len(), case.claims.len());
        for (id, c) in &case.claims {
            let b = &back.claims[id];
            prop_assert_eq!(&b.parent, &c.parent);
            prop_assert_eq!(&b.children, &c.children);
            prop_assert_eq!(&b.text, &c.text);
            prop_assert_eq!(&b.justification_narrative, &c.justification_narrative);
            prop_assert_eq!(&b.limitations, &c.limitations);
            prop_assert_eq!(&b.counter_arguments, &c.counter_arguments);
        }
    }
}
