use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{segment_sentences, CorpusError};

/// Upper bound on the size of a selected evidence pool.
pub const MAX_SELECTED: usize = 20;
/// Earliest publication year accepted for a document.
pub const MIN_YEAR: i32 = 1900;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Medicine {
    pub id: u32,
    /// Registered name, uppercase.
    pub name: String,
}

/// The six consumer-oriented information needs asked about every medicine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySlot {
    Indications,
    PreUseWarnings,
    DrugInteractions,
    Dosage,
    OnTreatmentGuidance,
    AdverseEffects,
}

impl QuerySlot {
    pub const ALL: [QuerySlot; 6] = [
        QuerySlot::Indications,
        QuerySlot::PreUseWarnings,
        QuerySlot::DrugInteractions,
        QuerySlot::Dosage,
        QuerySlot::OnTreatmentGuidance,
        QuerySlot::AdverseEffects,
    ];

    pub fn key(self) -> &'static str {
        match self {
            QuerySlot::Indications => "indications",
            QuerySlot::PreUseWarnings => "pre_use_warnings",
            QuerySlot::DrugInteractions => "drug_interactions",
            QuerySlot::Dosage => "dosage",
            QuerySlot::OnTreatmentGuidance => "on_treatment_guidance",
            QuerySlot::AdverseEffects => "adverse_effects",
        }
    }

    /// Standard phrasing of the question for a medicine name.
    pub fn question(self, medicine: &str) -> String {
        match self {
            QuerySlot::Indications => format!("Why am I using {medicine}?"),
            QuerySlot::PreUseWarnings => format!("What should I know before I use {medicine}?"),
            QuerySlot::DrugInteractions => {
                format!("What if I am taking other medicines with {medicine}?")
            }
            QuerySlot::Dosage => format!("How do I use {medicine}?"),
            QuerySlot::OnTreatmentGuidance => {
                format!("What should I know while using {medicine}?")
            }
            QuerySlot::AdverseEffects => format!("Are there any side effects of {medicine}?"),
        }
    }
}

impl FromStr for QuerySlot {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuerySlot::ALL
            .into_iter()
            .find(|slot| slot.key() == s)
            .ok_or_else(|| CorpusError::invalid("query slot", s))
    }
}

/// Identifies a query as `(medicine, slot)`. Rendered as `"<medicine_id>/<slot>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryId {
    pub medicine_id: u32,
    pub slot: QuerySlot,
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.medicine_id, self.slot.key())
    }
}

impl FromStr for QueryId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, slot) = s
            .split_once('/')
            .ok_or_else(|| CorpusError::invalid("query reference", s))?;
        let medicine_id = id
            .parse()
            .map_err(|_| CorpusError::invalid("query reference", s))?;
        Ok(QueryId {
            medicine_id,
            slot: slot.parse()?,
        })
    }
}

impl Serialize for QueryId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QueryId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryInstance {
    pub medicine_id: u32,
    pub slot: QuerySlot,
    pub text: String,
    /// Ground-truth answer; empty when none was available.
    pub reference_answer: String,
}

impl QueryInstance {
    /// Query for `medicine` using the standard phrasing of `slot`.
    pub fn standard(medicine: &Medicine, slot: QuerySlot, reference_answer: String) -> Self {
        QueryInstance {
            medicine_id: medicine.id,
            slot,
            text: slot.question(&medicine.name),
            reference_answer,
        }
    }

    pub fn id(&self) -> QueryId {
        QueryId {
            medicine_id: self.medicine_id,
            slot: self.slot,
        }
    }

    pub fn has_reference(&self) -> bool {
        !self.reference_answer.trim().is_empty()
    }
}

/// One abstract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pmid: String,
    year: i32,
    citations: u64,
    text: String,
    sentences: Vec<String>,
}

impl Document {
    pub fn new(
        pmid: impl Into<String>,
        year: i32,
        citations: u64,
        text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let pmid = pmid.into();
        let text = text.into();
        if pmid.trim().is_empty() {
            return Err(CorpusError::invalid("document", "empty pmid"));
        }
        let current = current_year();
        if !(MIN_YEAR..=current).contains(&year) {
            return Err(CorpusError::invalid(
                "document",
                format!("pmid {pmid}: year {year} outside [{MIN_YEAR}, {current}]"),
            ));
        }
        if text.trim().is_empty() {
            return Err(CorpusError::invalid(
                "document",
                format!("pmid {pmid}: empty abstract"),
            ));
        }
        let sentences = segment_sentences(&text);
        Ok(Document {
            pmid,
            year,
            citations,
            text,
            sentences,
        })
    }

    pub fn pmid(&self) -> &str {
        &self.pmid
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn citations(&self) -> u64 {
        self.citations
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    /// Numeric pmid for tie-breaking; non-numeric ids sort after numeric ones.
    pub fn pmid_key(&self) -> (u64, &str) {
        pmid_order_key(&self.pmid)
    }
}

pub(crate) fn pmid_order_key(pmid: &str) -> (u64, &str) {
    (pmid.parse::<u64>().unwrap_or(u64::MAX), pmid)
}

fn current_year() -> i32 {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    // 365.2425-day Gregorian year; off by at most a day around New Year.
    1970 + (secs / 31_556_952) as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolStage {
    Raw,
    Selected,
}

/// Candidate documents for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidencePool {
    pub query: QueryId,
    pub documents: Vec<Document>,
    pub stage: PoolStage,
}

impl EvidencePool {
    pub fn raw(query: QueryId, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let pool = EvidencePool {
            query,
            documents,
            stage: PoolStage::Raw,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.pmid()) {
                return Err(CorpusError::Integrity(format!(
                    "duplicate pmid {} in pool {}",
                    doc.pmid(),
                    self.query
                )));
            }
        }
        if self.stage == PoolStage::Selected && self.documents.len() > MAX_SELECTED {
            return Err(CorpusError::Integrity(format!(
                "selected pool {} holds {} documents (max {MAX_SELECTED})",
                self.query,
                self.documents.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, pmid: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.pmid() == pmid)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub medicines: Vec<Medicine>,
    pub queries: Vec<QueryInstance>,
    pub pools: BTreeMap<QueryId, EvidencePool>,
}

impl Corpus {
    pub fn medicine(&self, id: u32) -> Option<&Medicine> {
        self.medicines.iter().find(|m| m.id == id)
    }

    pub fn query(&self, id: QueryId) -> Option<&QueryInstance> {
        self.queries.iter().find(|q| q.id() == id)
    }

    pub fn pool(&self, id: QueryId) -> Option<&EvidencePool> {
        self.pools.get(&id)
    }

    pub fn document_count(&self) -> usize {
        self.pools.values().map(EvidencePool::len).sum()
    }

    /// Check every type invariant and cross-reference.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for m in &self.medicines {
            if m.name.trim().is_empty() {
                return Err(CorpusError::invalid(
                    "medicine",
                    format!("id {} has empty name", m.id),
                ));
            }
            if !ids.insert(m.id) {
                return Err(CorpusError::Integrity(format!(
                    "duplicate medicine id {}",
                    m.id
                )));
            }
        }

        let mut per_medicine: BTreeMap<u32, HashSet<QuerySlot>> = BTreeMap::new();
        for q in &self.queries {
            let medicine = self.medicine(q.medicine_id).ok_or_else(|| {
                CorpusError::Integrity(format!("query {} references unknown medicine", q.id()))
            })?;
            if !q
                .text
                .to_lowercase()
                .contains(&medicine.name.to_lowercase())
            {
                return Err(CorpusError::invalid(
                    "query",
                    format!("{} text does not mention {}", q.id(), medicine.name),
                ));
            }
            if !per_medicine
                .entry(q.medicine_id)
                .or_default()
                .insert(q.slot)
            {
                return Err(CorpusError::Integrity(format!(
                    "duplicate query {}",
                    q.id()
                )));
            }
        }
        for m in &self.medicines {
            let n = per_medicine.get(&m.id).map_or(0, HashSet::len);
            if n != QuerySlot::ALL.len() {
                return Err(CorpusError::Integrity(format!(
                    "medicine {} has {n} queries, expected 6",
                    m.name
                )));
            }
        }

        for (id, pool) in &self.pools {
            if *id != pool.query {
                return Err(CorpusError::Integrity(format!("pool key {id} mismatch")));
            }
            if self.query(*id).is_none() {
                return Err(CorpusError::Integrity(format!(
                    "pool references unknown query {id}"
                )));
            }
            pool.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_id_round_trips_through_text() {
        for slot in QuerySlot::ALL {
            let id = QueryId {
                medicine_id: 42,
                slot,
            };
            assert_eq!(id.to_string().parse::<QueryId>().unwrap(), id);
        }
        assert!("42".parse::<QueryId>().is_err());
        assert!("x/dosage".parse::<QueryId>().is_err());
        assert!("1/unknown".parse::<QueryId>().is_err());
    }

    #[test]
    fn standard_questions_mention_the_medicine() {
        let m = Medicine {
            id: 1,
            name: "ABACAVIR".into(),
        };
        let texts: Vec<String> = QuerySlot::ALL.iter().map(|s| s.question(&m.name)).collect();
        assert_eq!(texts[0], "Why am I using ABACAVIR?");
        assert_eq!(texts[5], "Are there any side effects of ABACAVIR?");
        assert!(texts.iter().all(|t| t.contains("ABACAVIR")));
    }

    #[test]
    fn document_rejects_bad_fields() {
        assert!(Document::new("", 2000, 0, "Text.").is_err());
        assert!(Document::new("1", 1899, 0, "Text.").is_err());
        assert!(Document::new("1", 3000, 0, "Text.").is_err());
        assert!(Document::new("1", 2000, 0, "  ").is_err());
        let d = Document::new("1", 2000, 3, "One. Two.").unwrap();
        assert_eq!(d.sentences(), ["One.", "Two."]);
    }

    #[test]
    fn pool_rejects_duplicates_and_oversize() {
        let q = QueryId {
            medicine_id: 1,
            slot: QuerySlot::Dosage,
        };
        let d = Document::new("7", 2000, 0, "Text.").unwrap();
        assert!(EvidencePool::raw(q, vec![d.clone(), d]).is_err());

        let docs: Vec<Document> = (0..21)
            .map(|i| Document::new(i.to_string(), 2000, 0, "Text.").unwrap())
            .collect();
        let pool = EvidencePool {
            query: q,
            documents: docs,
            stage: PoolStage::Selected,
        };
        assert!(pool.validate().is_err());
    }

    #[test]
    fn pmid_key_orders_numerically() {
        let mut ids = vec!["100", "20", "3", "abc"];
        ids.sort_by_key(|p| pmid_order_key(p));
        assert_eq!(ids, ["3", "20", "100", "abc"]);
    }
}
