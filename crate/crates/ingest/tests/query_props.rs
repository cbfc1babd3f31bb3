use std::collections::HashSet;

use contrarag_ingest::{formulate_queries, merge_dedup, Tier};
use proptest::prelude::*;

proptest! {
    #[test]
    fn merge_is_duplicate_free_subset(lists in prop::collection::vec(prop::collection::vec("[1-9][0-9]{0,3}", 0..20), 0..5)) {
        let merged = merge_dedup(&lists);
        let union: HashSet<&String> = lists.iter().flatten().collect();
        let unique: HashSet<&String> = merged.iter().collect();
        prop_assert_eq!(unique.len(), merged.len());
        prop_assert_eq!(unique, union);
        // first-seen order
        let mut seen = HashSet::new();
        let expected: Vec<&String> = lists.iter().flatten().filter(|p| seen.insert(*p)).collect();
        prop_assert_eq!(merged.iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn tier_two_restricts_title(name in "[A-Z]{3,12}", terms in prop::collection::vec("[a-z]{2,8}", 1..5)) {
        let q = formulate_queries(&name, &format!("How do I use {name}?"), &terms);
        prop_assert_eq!(q.len(), 3);
        prop_assert_eq!(q[1].tier, Tier::ProximityTerms);
        let title = format!("{}[ti]", name);
        prop_assert!(q[1].expression.contains(&title));
        prop_assert!(q[1].expression.contains("~25"));
        prop_assert!(q.iter().all(|f| !f.expression.is_empty() && f.expression.ends_with("english[la]")));
    }
}
