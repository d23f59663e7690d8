//! Okapi BM25 over review text, and the identity pointwise ranker.
//!
//! ```text
//! idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(D) = sum_t idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |D| / avgdl))
//! ```
//!
//! Corpus statistics are built per candidate list; the query is the list's
//! query text.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::eval::ListScorer;
use crate::metrics::{compute_ranks, RankMap};
use crate::{CandidateList, Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercase, split on every non-alphanumeric character, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub doc_freq: BTreeMap<String, usize>,
    pub avg_doc_len: f64,
}

impl CorpusStats {
    pub fn build<D: AsRef<[String]>>(docs: &[D]) -> Self {
        let mut doc_freq = BTreeMap::new();
        let mut total_len = 0usize;
        for doc in docs {
            let doc = doc.as_ref();
            total_len += doc.len();
            let distinct: BTreeSet<&String> = doc.iter().collect();
            for t in distinct {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let avg_doc_len = if docs.is_empty() {
            0.0
        } else {
            total_len as f64 / docs.len() as f64
        };
        Self {
            doc_count: docs.len(),
            doc_freq,
            avg_doc_len,
        }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25 {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25 {
    fn default() -> Self {
        Self { k1: DEFAULT_K1, b: DEFAULT_B }
    }
}

impl Bm25 {
    pub fn score(&self, query: &[String], doc: &[String], stats: &CorpusStats) -> Result<f64> {
        if stats.doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        let len_norm = if stats.avg_doc_len > 0.0 {
            doc.len() as f64 / stats.avg_doc_len
        } else {
            0.0
        };
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in doc {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut total = 0.0;
        for term in query {
            let f = tf.get(term.as_str()).copied().unwrap_or(0) as f64;
            if f == 0.0 {
                continue;
            }
            total += stats.idf(term) * f * (self.k1 + 1.0) / (f + self.k1 * (1.0 - self.b + self.b * len_norm));
        }
        Ok(total)
    }

    /// BM25 of the list's query against each item's text, statistics taken
    /// over the list itself.
    pub fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>> {
        let query = list
            .query
            .as_deref()
            .ok_or_else(|| Error::MissingText(list.group_id.clone()))?;
        let docs = list
            .items
            .iter()
            .map(|i| i.text.as_deref().map(tokenize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MissingText(list.group_id.clone()))?;
        let stats = CorpusStats::build(&docs);
        let q = tokenize(query);
        docs.iter().map(|d| self.score(&q, d, &stats)).collect()
    }
}

/// Free-function form with the default `k1 = 1.2`, `b = 0.75`.
pub fn bm25_score(query: &[String], doc: &[String], stats: &CorpusStats) -> Result<f64> {
    Bm25::default().score(query, doc, stats)
}

impl ListScorer for Bm25 {
    fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>> {
        Bm25::score_list(self, list)
    }
}

/// Ranking by the stored point scores.
pub fn rank_pointwise(list: &CandidateList) -> Result<RankMap> {
    compute_ranks(&list.point_scores())
}
