//! Temporal-citation balanced selection of at most twenty abstracts per query.
//!
//! Years are stratified (when there are at least twenty distinct ones), each
//! year's documents are ordered by citation count, and documents are then taken
//! round-robin across years, oldest year first.

use std::collections::BTreeMap;

use crate::corpus::{Document, EvidencePool, PoolStage, MAX_SELECTED};

/// Number of years kept by stratification.
pub const TARGET_YEARS: usize = 20;
/// Minimum spacing between greedily sampled years.
pub const YEAR_GAP: i32 = 3;

/// All candidate documents of one publication year, best-cited first.
#[derive(Debug, Clone)]
pub struct YearStratum<'a> {
    pub year: i32,
    pub ranked_docs: Vec<&'a Document>,
}

impl<'a> YearStratum<'a> {
    fn new(year: i32, mut docs: Vec<&'a Document>) -> Self {
        docs.sort_by(|a, b| {
            b.citations()
                .cmp(&a.citations())
                .then_with(|| a.pmid_key().cmp(&b.pmid_key()))
        });
        YearStratum {
            year,
            ranked_docs: docs,
        }
    }
}

/// Pick `target` years spread over the full range of `years`.
///
/// A greedy pass from the earliest year keeps every year at least `gap` after
/// the previously kept one. Short passes are topped up with the most recent
/// unused years; long passes are thinned to evenly spaced picks that keep the
/// first and the latest year. The result is sorted ascending.
///
/// Callers pass at least `target` distinct years; with fewer, every year is
/// returned.
pub fn stratified_sample_years(years: &[i32], target: usize, gap: i32) -> Vec<i32> {
    let mut sorted = years.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if target == 0 {
        return Vec::new();
    }
    if sorted.len() <= target {
        return sorted;
    }

    let mut greedy = vec![sorted[0]];
    for &y in &sorted[1..] {
        if y - greedy[greedy.len() - 1] >= gap {
            greedy.push(y);
        }
    }

    let max_year = sorted[sorted.len() - 1];
    let mut picked = if greedy.len() >= target {
        let n = greedy.len();
        let mut thinned: Vec<i32> = (0..target)
            .map(|i| {
                let pos = (i as f64 * (n - 1) as f64 / (target - 1).max(1) as f64).round();
                greedy[pos as usize]
            })
            .collect();
        // The latest greedy year sits within `gap` of the maximum, so the
        // swap keeps the spacing with the previous pick.
        let last = thinned.len() - 1;
        thinned[last] = max_year;
        thinned
    } else {
        let mut filled = greedy;
        for &y in sorted.iter().rev() {
            if filled.len() == target {
                break;
            }
            if !filled.contains(&y) {
                filled.push(y);
            }
        }
        filled
    };
    picked.sort_unstable();
    picked
}

/// Year histogram of a pool, for audit output.
pub fn year_histogram(docs: &[Document]) -> BTreeMap<i32, usize> {
    let mut hist = BTreeMap::new();
    for d in docs {
        *hist.entry(d.year()).or_insert(0) += 1;
    }
    hist
}

/// Build the per-year strata the round-robin draws from.
pub fn strata(pool: &EvidencePool) -> Vec<YearStratum<'_>> {
    let mut by_year: BTreeMap<i32, Vec<&Document>> = BTreeMap::new();
    for d in &pool.documents {
        by_year.entry(d.year()).or_default().push(d);
    }
    let years: Vec<i32> = by_year.keys().copied().collect();
    let keep = if years.len() >= TARGET_YEARS {
        stratified_sample_years(&years, TARGET_YEARS, YEAR_GAP)
    } else {
        years
    };
    keep.into_iter()
        .map(|y| YearStratum::new(y, by_year.remove(&y).unwrap_or_default()))
        .collect()
}

/// Select up to [`MAX_SELECTED`] documents from a raw pool, returned in
/// selection order.
pub fn select_balanced(pool: &EvidencePool) -> EvidencePool {
    let strata = strata(pool);
    let mut cursors = vec![0usize; strata.len()];
    let mut chosen: Vec<Document> = Vec::with_capacity(MAX_SELECTED.min(pool.len()));

    'rounds: loop {
        let mut progressed = false;
        for (stratum, cursor) in strata.iter().zip(cursors.iter_mut()) {
            if chosen.len() == MAX_SELECTED {
                break 'rounds;
            }
            if let Some(doc) = stratum.ranked_docs.get(*cursor) {
                chosen.push((*doc).clone());
                *cursor += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    EvidencePool {
        query: pool.query,
        documents: chosen,
        stage: PoolStage::Selected,
    }
}
