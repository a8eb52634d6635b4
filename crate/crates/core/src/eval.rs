//! Retrieval evaluation: Euclidean nearest neighbors over an embedded
//! corpus, precision at fixed cut-offs judged by collection membership or by
//! shared content terms, and per-term entropy across collections.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // resolves float math in no_std builds
use num_traits::Float;

use crate::corpus::Corpus;
use crate::textprep::{preprocess, StopwordTable};

/// The report cut-offs used throughout.
pub const CUTOFFS: [usize; 7] = [1, 2, 3, 5, 10, 50, 100];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoreTag {
    Crnn,
    Baseline,
}

impl fmt::Display for StoreTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoreTag::Crnn => "crnn",
            StoreTag::Baseline => "baseline",
        })
    }
}

/// Dense `n x dim` embedding matrix addressed by record ordinal.
#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    data: Vec<f64>,
    dim: usize,
    tag: StoreTag,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    NonFinite { ordinal: usize },
    BadShape { got: usize, want: usize },
    KTooLarge { k: usize, max: usize },
    NoMatches,
    StoreCorpusMismatch { store: usize, corpus: usize },
    EmptyStore,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NonFinite { ordinal } => write!(f, "non-finite vector at ordinal {ordinal}"),
            EvalError::BadShape { got, want } => write!(f, "data length {got} is not a multiple of dim (expected {want})"),
            EvalError::KTooLarge { k, max } => write!(f, "k={k} exceeds the {max} available neighbors"),
            EvalError::NoMatches => write!(f, "term matched no records"),
            EvalError::StoreCorpusMismatch { store, corpus } => {
                write!(f, "store has {store} vectors but corpus has {corpus} records")
            }
            EvalError::EmptyStore => write!(f, "store holds no vectors"),
        }
    }
}

impl EmbeddingStore {
    pub fn new(data: Vec<f64>, dim: usize, tag: StoreTag) -> Result<Self, EvalError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(EvalError::BadShape { got: data.len(), want: dim.max(1) });
        }
        for (i, chunk) in data.chunks(dim).enumerate() {
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(EvalError::NonFinite { ordinal: i });
            }
        }
        Ok(EmbeddingStore { data, dim, tag })
    }

    pub fn from_f32(data: &[f32], dim: usize, tag: StoreTag) -> Result<Self, EvalError> {
        Self::new(data.iter().map(|&v| v as f64).collect(), dim, tag)
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> StoreTag {
        self.tag
    }

    pub fn vector(&self, ordinal: usize) -> &[f64] {
        &self.data[ordinal * self.dim..][..self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// f64 accumulation in index order; the ordering contract for all retrieval.
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

/// The `k` nearest neighbors of `query` by Euclidean distance, query
/// excluded, distance ties broken toward the smaller ordinal. Exact brute
/// force; errors when `k` exceeds `n - 1`.
pub fn knn(store: &EmbeddingStore, query: usize, k: usize) -> Result<Vec<usize>, EvalError> {
    let n = store.len();
    if n == 0 {
        return Err(EvalError::EmptyStore);
    }
    if k > n - 1 {
        return Err(EvalError::KTooLarge { k, max: n - 1 });
    }
    let mut order: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != query)
        .map(|j| (squared_distance(store.vector(query), store.vector(j)), j))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(k).map(|(_, j)| j).collect())
}

/// Mean precision at every cut-off for a query set under a relevance
/// predicate. Cut-offs larger than `n - 1` are clamped to `n - 1` (the
/// precision denominator is the clamped depth) and flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionSummary {
    pub cutoffs: Vec<usize>,
    /// Mean over queries of per-query precision, one entry per cut-off.
    pub means: Vec<f64>,
    /// Per-query precision rows (query-major), for report drill-down.
    pub per_query: Vec<Vec<f64>>,
    pub queries: Vec<usize>,
    pub clamped: bool,
}

pub fn precision_at_k(
    store: &EmbeddingStore,
    queries: &[usize],
    relevant: &dyn Fn(usize, usize) -> bool,
    cutoffs: &[usize],
) -> Result<PrecisionSummary, EvalError> {
    let n = store.len();
    if n < 2 {
        return Err(EvalError::EmptyStore);
    }
    let max_depth = n - 1;
    let deepest = cutoffs.iter().copied().max().unwrap_or(0).min(max_depth);
    let clamped = cutoffs.iter().any(|&k| k > max_depth);
    let mut per_query = Vec::with_capacity(queries.len());
    for &q in queries {
        let neighbors = knn(store, q, deepest)?;
        let mut row = Vec::with_capacity(cutoffs.len());
        let mut hits = 0usize;
        let mut scanned = 0usize;
        let mut cut_iter = cutoffs.iter();
        let mut next_cut = cut_iter.next();
        for (pos, &r) in neighbors.iter().enumerate() {
            if relevant(q, r) {
                hits += 1;
            }
            scanned = pos + 1;
            while let Some(&k) = next_cut {
                if k.min(max_depth) == scanned {
                    row.push(hits as f64 / scanned as f64);
                    next_cut = cut_iter.next();
                } else {
                    break;
                }
            }
        }
        // cut-offs beyond the scanned depth (possible only when neighbors
        // is shorter than every remaining clamped cut-off)
        while let Some(&_k) = next_cut {
            row.push(if scanned == 0 { 0.0 } else { hits as f64 / scanned as f64 });
            next_cut = cut_iter.next();
        }
        per_query.push(row);
    }
    let mut means = vec![0.0; cutoffs.len()];
    if !queries.is_empty() {
        for row in &per_query {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= queries.len() as f64;
        }
    }
    Ok(PrecisionSummary {
        cutoffs: cutoffs.to_vec(),
        means,
        per_query,
        queries: queries.to_vec(),
        clamped,
    })
}

/// One evaluation term and the records whose normalized metadata contains it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermQueries {
    pub term: String,
    /// Matched record ordinals, ascending.
    pub records: Vec<usize>,
}

/// Terms usable as retrieval criteria (≥ 2 matches each) plus the excluded
/// rest with their match counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TermQuerySet {
    pub terms: Vec<TermQueries>,
    pub excluded: Vec<(String, usize)>,
}

/// Matches each candidate term against every record's concatenated metadata
/// after full text normalization on both sides; a term that does not survive
/// normalization as exactly one token can never match and is excluded with
/// count 0.
pub fn build_term_queries(
    corpus: &Corpus,
    stopwords: &StopwordTable,
    terms: &[String],
) -> TermQuerySet {
    let record_tokens: Vec<BTreeSet<String>> = corpus
        .records()
        .iter()
        .map(|r| preprocess(&r.concat_metadata(), stopwords).tokens.into_iter().collect())
        .collect();
    let mut out = TermQuerySet::default();
    for raw in terms {
        let normalized = preprocess(raw, stopwords).tokens;
        if normalized.len() != 1 {
            out.excluded.push((raw.clone(), 0));
            continue;
        }
        let token = &normalized[0];
        let records: Vec<usize> = record_tokens
            .iter()
            .enumerate()
            .filter(|(_, set)| set.contains(token))
            .map(|(i, _)| i)
            .collect();
        if records.len() >= 2 {
            out.terms.push(TermQueries { term: token.clone(), records });
        } else {
            out.excluded.push((raw.clone(), records.len()));
        }
    }
    out
}

/// Shannon entropy (bits) of the matched records' distribution across
/// collections.
pub fn term_entropy(records: &[usize], corpus: &Corpus) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoMatches);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &ord in records {
        *counts.entry(corpus.get(ord).collection_id.as_str()).or_insert(0) += 1;
    }
    let total = records.len() as f64;
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / total;
        h -= p * p.log2();
    }
    // -0.0 from the single-collection case
    Ok(h.max(0.0))
}

/// Per-term results inside an [`EvalReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct TermEval {
    pub term: String,
    pub records: usize,
    pub precision: Vec<f64>,
    pub entropy: f64,
}

/// Full evaluation of one store against one corpus: the collection
/// criterion over all records and the term criterion over each usable term.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub tag: StoreTag,
    pub dim: usize,
    pub cutoffs: Vec<usize>,
    pub collection: PrecisionSummary,
    pub terms: Vec<TermEval>,
    /// Macro average over terms at each cut-off (empty when no terms).
    pub term_means: Vec<f64>,
    pub excluded_terms: Vec<(String, usize)>,
    pub clamped: bool,
}

pub fn evaluate(
    store: &EmbeddingStore,
    corpus: &Corpus,
    term_queries: &TermQuerySet,
    cutoffs: &[usize],
) -> Result<EvalReport, EvalError> {
    if store.len() != corpus.len() {
        return Err(EvalError::StoreCorpusMismatch { store: store.len(), corpus: corpus.len() });
    }
    let all: Vec<usize> = (0..corpus.len()).collect();
    let same_collection =
        |q: usize, r: usize| corpus.get(q).collection_id == corpus.get(r).collection_id;
    let collection = precision_at_k(store, &all, &same_collection, cutoffs)?;
    let mut clamped = collection.clamped;

    let mut terms = Vec::with_capacity(term_queries.terms.len());
    for tq in &term_queries.terms {
        let members: BTreeSet<usize> = tq.records.iter().copied().collect();
        let relevant = |_q: usize, r: usize| members.contains(&r);
        let summary = precision_at_k(store, &tq.records, &relevant, cutoffs)?;
        clamped |= summary.clamped;
        terms.push(TermEval {
            term: tq.term.clone(),
            records: tq.records.len(),
            precision: summary.means,
            entropy: term_entropy(&tq.records, corpus)?,
        });
    }
    let mut term_means = Vec::new();
    if !terms.is_empty() {
        term_means = vec![0.0; cutoffs.len()];
        for t in &terms {
            for (m, v) in term_means.iter_mut().zip(&t.precision) {
                *m += v;
            }
        }
        for m in term_means.iter_mut() {
            *m /= terms.len() as f64;
        }
    }
    Ok(EvalReport {
        tag: store.tag(),
        dim: store.dim(),
        cutoffs: cutoffs.to_vec(),
        collection,
        terms,
        term_means,
        excluded_terms: term_queries.excluded.clone(),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;
    use alloc::string::ToString;

    fn store_1d(vals: &[f64]) -> EmbeddingStore {
        EmbeddingStore::new(vals.to_vec(), 1, StoreTag::Crnn).unwrap()
    }

    fn record(id: &str, coll: &str, title: &str) -> Record {
        let mut r = Record::new(id.to_string(), coll.to_string());
        r.title = Some(title.to_string());
        r
    }

    #[test]
    fn knn_on_a_line() {
        let store = store_1d(&[0.0, 1.0, 5.0]);
        assert_eq!(knn(&store, 0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn knn_tie_prefers_smaller_ordinal() {
        // ordinals 3 and 7 are duplicates; query sits elsewhere
        let mut vals = vec![9.0; 8];
        vals[0] = 0.0;
        vals[3] = 2.0;
        vals[7] = 2.0;
        let store = store_1d(&vals);
        let got = knn(&store, 0, 2).unwrap();
        assert_eq!(got, vec![3, 7]);
    }

    #[test]
    fn knn_excludes_the_query_itself() {
        let store = store_1d(&[0.0, 0.0, 3.0]);
        let got = knn(&store, 0, 2).unwrap();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn knn_rejects_k_beyond_neighbors() {
        let store = store_1d(&[0.0, 1.0]);
        assert_eq!(knn(&store, 0, 2), Err(EvalError::KTooLarge { k: 2, max: 1 }));
    }

    #[test]
    fn store_rejects_non_finite_values() {
        let err = EmbeddingStore::new(vec![0.0, f64::NAN], 1, StoreTag::Baseline).unwrap_err();
        assert_eq!(err, EvalError::NonFinite { ordinal: 1 });
    }

    #[test]
    fn single_collection_is_all_relevant() {
        let store = store_1d(&[0.0, 1.0, 2.0, 4.0]);
        let queries: Vec<usize> = (0..4).collect();
        let all = |_q: usize, _r: usize| true;
        let got = precision_at_k(&store, &queries, &all, &[1, 2, 3]).unwrap();
        assert_eq!(got.means, vec![1.0, 1.0, 1.0]);
        assert!(!got.clamped);
    }

    #[test]
    fn oversized_cutoffs_clamp_and_flag() {
        let store = store_1d(&[0.0, 1.0, 2.0]);
        let queries = vec![0usize];
        let rel = |_q: usize, r: usize| r == 1;
        let got = precision_at_k(&store, &queries, &rel, &[1, 10]).unwrap();
        assert!(got.clamped);
        // depth clamps to 2: neighbors [1, 2], one relevant
        assert_eq!(got.per_query[0], vec![1.0, 0.5]);
    }

    #[test]
    fn hand_computed_precision() {
        // query 0 at origin; relevant = {1, 3}; order by distance: 1, 2, 3
        let store = store_1d(&[0.0, 1.0, 2.0, 3.0]);
        let rel = |_q: usize, r: usize| r == 1 || r == 3;
        let got = precision_at_k(&store, &[0], &rel, &[1, 2, 3]).unwrap();
        assert_eq!(got.per_query[0], vec![1.0, 0.5, 2.0 / 3.0]);
    }

    #[test]
    fn entropy_hand_cases() {
        let mut corpus = Corpus::new();
        for (i, coll) in ["a", "a", "a", "a", "b", "c", "d"].iter().enumerate() {
            corpus.push(record(&alloc::format!("r{i}"), coll, "x")).unwrap();
        }
        // all four in one collection
        assert!((term_entropy(&[0, 1, 2, 3], &corpus).unwrap() - 0.0).abs() < 1e-9);
        // uniform over four collections
        assert!((term_entropy(&[0, 4, 5, 6], &corpus).unwrap() - 2.0).abs() < 1e-9);
        // 3:1 over two collections
        let h = term_entropy(&[0, 1, 2, 4], &corpus).unwrap();
        assert!((h - 0.8112781244591328).abs() < 1e-9);
        assert_eq!(term_entropy(&[], &corpus), Err(EvalError::NoMatches));
    }

    #[test]
    fn term_queries_require_two_matches_and_survive_normalization() {
        let mut corpus = Corpus::new();
        corpus.push(record("r0", "c1", "Violin concerto")).unwrap();
        corpus.push(record("r1", "c1", "violin sonata")).unwrap();
        corpus.push(record("r2", "c2", "field recording")).unwrap();
        let stops = StopwordTable::bundled();
        let terms = vec![
            "Violin".to_string(),
            "sonata".to_string(),
            "the".to_string(), // stopword: normalizes to nothing
        ];
        let got = build_term_queries(&corpus, &stops, &terms);
        assert_eq!(got.terms.len(), 1);
        assert_eq!(got.terms[0].term, "violin");
        assert_eq!(got.terms[0].records, vec![0, 1]);
        // "sonata" matches once, "the" cannot match at all
        assert_eq!(got.excluded, vec![("sonata".to_string(), 1), ("the".to_string(), 0)]);
    }

    #[test]
    fn evaluate_reports_both_criteria() {
        let mut corpus = Corpus::new();
        corpus.push(record("r0", "c1", "violin music")).unwrap();
        corpus.push(record("r1", "c1", "violin piece")).unwrap();
        corpus.push(record("r2", "c2", "traffic noise")).unwrap();
        corpus.push(record("r3", "c2", "traffic jam")).unwrap();
        // clusters: {0,1} near zero, {2,3} near ten
        let store = store_1d(&[0.0, 0.1, 10.0, 10.1]);
        let stops = StopwordTable::bundled();
        let tq = build_term_queries(&corpus, &stops, &["violin".to_string(), "traffic".to_string()]);
        let report = evaluate(&store, &corpus, &tq, &[1, 2]).unwrap();
        assert_eq!(report.collection.means, vec![1.0, 0.5]);
        assert_eq!(report.terms.len(), 2);
        assert_eq!(report.terms[0].precision, vec![1.0, 0.5]);
        assert!((report.terms[0].entropy - 0.0).abs() < 1e-12);
        assert_eq!(report.term_means, vec![1.0, 0.5]);
    }

    #[test]
    fn mismatched_store_and_corpus_is_an_error() {
        let mut corpus = Corpus::new();
        corpus.push(record("r0", "c1", "x")).unwrap();
        let store = store_1d(&[0.0, 1.0]);
        let err = evaluate(&store, &corpus, &TermQuerySet::default(), &[1]).unwrap_err();
        assert!(matches!(err, EvalError::StoreCorpusMismatch { .. }));
    }
}
