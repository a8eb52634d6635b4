//! TF-IDF weighting and truncated-SVD topic space.
//!
//! Documents (token lists) become columns of a sparse m×n weight matrix with
//! `w = tf · (ln((1+n)/(1+df)) + 1)` — raw term frequency times smoothed
//! idf, so corpus-wide terms are down-weighted but never fully discarded.
//! A truncated SVD `W ≈ U_l Σ_l V_lᵀ` yields per-record topic loadings
//! (rows of `V_l`), which are L2-normalized and compared by cosine.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // resolves float math in no_std builds
use num_traits::Float;

use crate::mat::{self, Mat};
use crate::rng::Rng;
use crate::textprep::TokenList;

/// Dense SVD (Gram + Jacobi) is used up to this size of the smaller matrix
/// side; beyond it the randomized subspace method takes over.
const DENSE_SIDE_LIMIT: usize = 512;
/// Randomized SVD sketch width beyond the requested rank.
const OVERSAMPLING: usize = 10;
/// Randomized SVD power iterations.
const POWER_ITERS: usize = 4;
/// Singular values below `σ_max ·` this are treated as numerical rank
/// deficiency and dropped. The Gram eigensolve can only resolve σ down to
/// about `σ_max · √(p·ε)` (squared conditioning), so the effective cutoff
/// is the larger of the two.
const RANK_TOL: f64 = 1e-12;

/// Term → ordinal mapping with document frequencies. Ordinals are assigned
/// in first-occurrence order and are contiguous.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermIndex {
    terms: BTreeMap<String, usize>,
    by_ordinal: Vec<String>,
    df: Vec<u32>,
}

impl TermIndex {
    pub fn len(&self) -> usize {
        self.by_ordinal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_ordinal.is_empty()
    }

    pub fn ordinal(&self, term: &str) -> Option<usize> {
        self.terms.get(term).copied()
    }

    pub fn term(&self, ordinal: usize) -> &str {
        &self.by_ordinal[ordinal]
    }

    pub fn df(&self, ordinal: usize) -> u32 {
        self.df[ordinal]
    }

    /// Rebuild from parallel term/df lists (ordinal = list position); used
    /// when loading a persisted model.
    pub fn from_parts(terms: Vec<String>, df: Vec<u32>) -> Self {
        assert_eq!(terms.len(), df.len());
        let map = terms.iter().cloned().zip(0..).collect();
        TermIndex { terms: map, by_ordinal: terms, df }
    }
}

/// Sparse m×n weight matrix, stored by document column; entries are
/// `(term ordinal, weight)` sorted by ordinal, weights ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfMatrix {
    pub num_terms: usize,
    pub num_docs: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl TfidfMatrix {
    pub fn col(&self, doc: usize) -> &[(usize, f64)] {
        &self.cols[doc]
    }

    /// Dense m×n copy (small instances and tests).
    pub fn to_dense(&self) -> Mat {
        let mut w = Mat::zeros(self.num_terms, self.num_docs);
        for (c, col) in self.cols.iter().enumerate() {
            for &(t, v) in col {
                w.set(t, c, v);
            }
        }
        w
    }

    /// Interpret a dense matrix as a weight matrix (rows = terms).
    pub fn from_dense(w: &Mat) -> Self {
        let cols = (0..w.cols)
            .map(|c| {
                (0..w.rows).filter(|&r| w.get(r, c) != 0.0).map(|r| (r, w.get(r, c))).collect()
            })
            .collect();
        TfidfMatrix { num_terms: w.rows, num_docs: w.cols, cols }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.cols.iter().flatten().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// `out[m] += W · x[n]`.
    fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        for (c, col) in self.cols.iter().enumerate() {
            let xc = x[c];
            for &(t, v) in col {
                out[t] += v * xc;
            }
        }
    }

    /// `out[n] = Wᵀ · y[m]`.
    fn t_matvec(&self, y: &[f64], out: &mut [f64]) {
        for (c, col) in self.cols.iter().enumerate() {
            out[c] = col.iter().map(|&(t, v)| v * y[t]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LsiError {
    /// No document contains any token.
    EmptyCorpus,
    RankTooLarge { requested: usize, max: usize },
    DidNotConverge(usize),
    TopicOutOfRange { topic: usize, num_topics: usize },
}

impl fmt::Display for LsiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LsiError::EmptyCorpus => write!(f, "all documents are empty"),
            LsiError::RankTooLarge { requested, max } => {
                write!(f, "rank {requested} exceeds min(m, n) = {max}")
            }
            LsiError::DidNotConverge(sweeps) => {
                write!(f, "eigensolver did not converge within {sweeps} sweeps")
            }
            LsiError::TopicOutOfRange { topic, num_topics } => {
                write!(f, "topic {topic} out of range (model has {num_topics})")
            }
        }
    }
}

/// Build the term index and weight matrix over tokenized documents.
pub fn build_tfidf(docs: &[TokenList]) -> Result<(TermIndex, TfidfMatrix), LsiError> {
    let n = docs.len();
    let mut terms: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_ordinal: Vec<String> = Vec::new();
    let mut df: Vec<u32> = Vec::new();
    let mut counts: Vec<BTreeMap<usize, u32>> = Vec::with_capacity(n);
    for doc in docs {
        let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
        for tok in &doc.tokens {
            let ordinal = *terms.entry(tok.clone()).or_insert_with(|| {
                by_ordinal.push(tok.clone());
                df.push(0);
                by_ordinal.len() - 1
            });
            *tf.entry(ordinal).or_insert(0) += 1;
        }
        for &ordinal in tf.keys() {
            df[ordinal] += 1;
        }
        counts.push(tf);
    }
    if by_ordinal.is_empty() {
        return Err(LsiError::EmptyCorpus);
    }
    let idf: Vec<f64> =
        df.iter().map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0).collect();
    let cols = counts
        .into_iter()
        .map(|tf| tf.into_iter().map(|(t, c)| (t, c as f64 * idf[t])).collect())
        .collect();
    let w = TfidfMatrix { num_terms: by_ordinal.len(), num_docs: n, cols };
    Ok((TermIndex { terms, by_ordinal, df }, w))
}

/// Whether record loadings keep the Σ scaling before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SigmaScale {
    /// Rows of V_l, then L2-normalized.
    #[default]
    None,
    /// Rows of V_l·Σ_l, then L2-normalized.
    Sigma,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SvdMethod {
    /// Dense when the smaller matrix side is ≤ 512, randomized otherwise.
    #[default]
    Auto,
    Dense,
    Randomized,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FitOptions {
    pub method: SvdMethod,
    pub scale: SigmaScale,
    /// Seeds the sketch matrix of the randomized path; unused by the dense
    /// path but always recorded for reproducibility.
    pub seed: u64,
}

/// Truncated SVD of the weight matrix.
///
/// `record_vectors` rows are unit length except for empty documents, whose
/// rows stay all-zero and are flagged in `zero_records`. Topic signs are
/// canonical: the largest-magnitude term loading of each topic is positive.
#[derive(Clone, Debug)]
pub struct LsiModel {
    pub num_topics: usize,
    /// Non-increasing, all above the rank tolerance.
    pub singular_values: Vec<f64>,
    /// m×l left singular vectors U_l.
    pub term_factors: Mat,
    /// n×l raw right loadings V_l (unnormalized).
    pub record_loadings: Mat,
    /// n×l normalized per `scale`; the rows compared by cosine.
    pub record_vectors: Mat,
    pub zero_records: Vec<bool>,
    pub scale: SigmaScale,
    pub seed: u64,
}

/// Factorize `w` into at most `l` topics. Fewer topics are returned when the
/// numerical rank is lower.
pub fn fit_lsi(w: &TfidfMatrix, l: usize, opts: &FitOptions) -> Result<LsiModel, LsiError> {
    let (m, n) = (w.num_terms, w.num_docs);
    let p = m.min(n);
    if l == 0 || l > p {
        return Err(LsiError::RankTooLarge { requested: l, max: p });
    }
    let dense = match opts.method {
        SvdMethod::Auto => p <= DENSE_SIDE_LIMIT,
        SvdMethod::Dense => true,
        SvdMethod::Randomized => false,
    };
    let (mut u, sigma, mut v) =
        if dense { svd_dense(w, l)? } else { svd_randomized(w, l, opts.seed)? };
    canonicalize_signs(&mut u, &mut v);

    let kept = sigma.len();
    let mut record_vectors = v.clone();
    let mut zero_records = vec![false; n];
    for i in 0..n {
        let row = &mut record_vectors.data[i * kept..(i + 1) * kept];
        if opts.scale == SigmaScale::Sigma {
            for (x, s) in row.iter_mut().zip(&sigma) {
                *x *= s;
            }
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        } else {
            row.fill(0.0);
            zero_records[i] = true;
        }
    }
    Ok(LsiModel {
        num_topics: kept,
        singular_values: sigma,
        term_factors: u,
        record_loadings: v,
        record_vectors,
        zero_records,
        scale: opts.scale,
        seed: opts.seed,
    })
}

impl LsiModel {
    pub fn num_records(&self) -> usize {
        self.record_vectors.rows
    }

    pub fn num_terms(&self) -> usize {
        self.term_factors.rows
    }

    /// Normalized topic vector of one record (all-zero for empty documents).
    pub fn record_vector(&self, i: usize) -> &[f64] {
        self.record_vectors.row(i)
    }

    /// Cosine similarity of two records; `None` flags an undefined value
    /// (either document was empty). Callers needing the plain-number
    /// contract use `.unwrap_or(0.0)`.
    pub fn cosine(&self, i: usize, j: usize) -> Option<f64> {
        if self.zero_records[i] || self.zero_records[j] {
            return None;
        }
        if i == j {
            return Some(1.0);
        }
        let d = mat::dot(self.record_vectors.row(i), self.record_vectors.row(j));
        Some(d.clamp(-1.0, 1.0))
    }

    /// The `k` terms with largest absolute loading on `topic`, sign
    /// preserved, descending by magnitude; ties by term ordinal. Returns
    /// `(term ordinal, signed weight)`; `k > m` clamps to all terms.
    pub fn top_topic_terms(&self, topic: usize, k: usize) -> Result<Vec<(usize, f64)>, LsiError> {
        if topic >= self.num_topics {
            return Err(LsiError::TopicOutOfRange { topic, num_topics: self.num_topics });
        }
        let m = self.term_factors.rows;
        let mut order: Vec<usize> = (0..m).collect();
        let weight = |t: usize| self.term_factors.get(t, topic);
        order.sort_by(|&a, &b| {
            weight(b).abs().partial_cmp(&weight(a).abs()).unwrap().then(a.cmp(&b))
        });
        Ok(order.into_iter().take(k.min(m)).map(|t| (t, weight(t))).collect())
    }

    /// Relative Frobenius error ‖W − U_l Σ_l V_lᵀ‖ / ‖W‖. Materializes a
    /// dense m×n difference; intended for small instances and tests.
    pub fn reconstruction_error(&self, w: &TfidfMatrix) -> f64 {
        let (m, n, l) = (w.num_terms, w.num_docs, self.num_topics);
        let mut v_sigma = self.record_loadings.clone();
        for i in 0..n {
            for (x, s) in v_sigma.data[i * l..(i + 1) * l].iter_mut().zip(&self.singular_values)
            {
                *x *= s;
            }
        }
        let mut recon = Mat::zeros(m, n);
        mat::matmul_nt(&self.term_factors.data, &v_sigma.data, &mut recon.data, m, l, n);
        for (c, col) in w.cols.iter().enumerate() {
            for &(t, val) in col {
                let cell = recon.data[t * n + c];
                recon.data[t * n + c] = cell - val;
            }
        }
        let denom = w.frobenius_norm();
        if denom == 0.0 {
            0.0
        } else {
            recon.frobenius_norm() / denom
        }
    }
}

/// Exact SVD through the Gram matrix of the smaller side.
fn svd_dense(w: &TfidfMatrix, l: usize) -> Result<(Mat, Vec<f64>, Mat), LsiError> {
    let (m, n) = (w.num_terms, w.num_docs);
    if m <= n {
        // G = W·Wᵀ, eigenvectors are the left singular vectors.
        let mut g = Mat::zeros(m, m);
        for col in &w.cols {
            for &(t1, v1) in col {
                for &(t2, v2) in col {
                    let cell = g.get(t1, t2);
                    g.set(t1, t2, cell + v1 * v2);
                }
            }
        }
        let (vals, vecs) = eigen(&g)?;
        let (sigma, u) = keep_above_rank_tol(vals, vecs, l)?;
        // v_k = Wᵀ u_k / σ_k
        let kept = sigma.len();
        let mut v = Mat::zeros(n, kept);
        let mut uk = vec![0.0; m];
        let mut vk = vec![0.0; n];
        for k in 0..kept {
            for t in 0..m {
                uk[t] = u.get(t, k);
            }
            w.t_matvec(&uk, &mut vk);
            for c in 0..n {
                v.set(c, k, vk[c] / sigma[k]);
            }
        }
        Ok((u, sigma, v))
    } else {
        // G = Wᵀ·W, eigenvectors are the right singular vectors.
        let mut g = Mat::zeros(n, n);
        for c1 in 0..n {
            for c2 in c1..n {
                let d = sparse_col_dot(w.col(c1), w.col(c2));
                g.set(c1, c2, d);
                g.set(c2, c1, d);
            }
        }
        let (vals, vecs) = eigen(&g)?;
        let (sigma, v) = keep_above_rank_tol(vals, vecs, l)?;
        // u_k = W v_k / σ_k
        let kept = sigma.len();
        let mut u = Mat::zeros(m, kept);
        let mut vk = vec![0.0; n];
        let mut uk = vec![0.0; m];
        for k in 0..kept {
            for c in 0..n {
                vk[c] = v.get(c, k);
            }
            uk.fill(0.0);
            w.matvec_add(&vk, &mut uk);
            for t in 0..m {
                u.set(t, k, uk[t] / sigma[k]);
            }
        }
        Ok((u, sigma, v))
    }
}

/// Randomized subspace iteration: Gaussian sketch, power iterations with
/// re-orthonormalization, then an exact SVD of the projected matrix.
fn svd_randomized(w: &TfidfMatrix, l: usize, seed: u64) -> Result<(Mat, Vec<f64>, Mat), LsiError> {
    let (m, n) = (w.num_terms, w.num_docs);
    let r = (l + OVERSAMPLING).min(m.min(n));
    let mut rng = Rng::from_seed(seed);
    let mut omega = Mat::zeros(n, r);
    for x in omega.data.iter_mut() {
        *x = rng.normal();
    }
    let mut y = Mat::zeros(m, r);
    let mut xcol = vec![0.0; n];
    let mut ycol = vec![0.0; m];
    for j in 0..r {
        for c in 0..n {
            xcol[c] = omega.get(c, j);
        }
        ycol.fill(0.0);
        w.matvec_add(&xcol, &mut ycol);
        for t in 0..m {
            y.set(t, j, ycol[t]);
        }
    }
    mat::orthonormalize_columns(&mut y);
    let mut z = Mat::zeros(n, r);
    for _ in 0..POWER_ITERS {
        for j in 0..r {
            for t in 0..m {
                ycol[t] = y.get(t, j);
            }
            w.t_matvec(&ycol, &mut xcol);
            for c in 0..n {
                z.set(c, j, xcol[c]);
            }
        }
        mat::orthonormalize_columns(&mut z);
        for j in 0..r {
            for c in 0..n {
                xcol[c] = z.get(c, j);
            }
            ycol.fill(0.0);
            w.matvec_add(&xcol, &mut ycol);
            for t in 0..m {
                y.set(t, j, ycol[t]);
            }
        }
        mat::orthonormalize_columns(&mut y);
    }
    // B = Qᵀ·W  (r×n), exact SVD of B via its r×r Gram matrix.
    let mut b = Mat::zeros(r, n);
    for j in 0..r {
        for t in 0..m {
            ycol[t] = y.get(t, j);
        }
        w.t_matvec(&ycol, &mut xcol);
        for c in 0..n {
            b.set(j, c, xcol[c]);
        }
    }
    let mut bbt = Mat::zeros(r, r);
    mat::matmul_nt(&b.data, &b.data, &mut bbt.data, r, n, r);
    let (vals, vecs) = eigen(&bbt)?;
    let (sigma, ub) = keep_above_rank_tol(vals, vecs, l)?;
    let kept = sigma.len();
    let mut u = Mat::zeros(m, kept);
    mat::matmul_nn(&y.data, &ub.data, &mut u.data, m, r, kept);
    // v_k = Bᵀ ub_k / σ_k
    let mut v = Mat::zeros(n, kept);
    for k in 0..kept {
        for c in 0..n {
            let mut s = 0.0;
            for j in 0..r {
                s += b.get(j, c) * ub.get(j, k);
            }
            v.set(c, k, s / sigma[k]);
        }
    }
    Ok((u, sigma, v))
}

fn eigen(g: &Mat) -> Result<(Vec<f64>, Mat), LsiError> {
    mat::eigen_symmetric(g, 60).map_err(LsiError::DidNotConverge)
}

/// Convert Gram eigenvalues to singular values, keep the top `l` above the
/// relative rank tolerance, and slice the matching eigenvector columns.
fn keep_above_rank_tol(
    vals: Vec<f64>,
    vecs: Mat,
    l: usize,
) -> Result<(Vec<f64>, Mat), LsiError> {
    let sigma_all: Vec<f64> = vals.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let sigma_max = sigma_all.first().copied().unwrap_or(0.0);
    if sigma_max <= 0.0 {
        return Err(LsiError::EmptyCorpus);
    }
    // true zeros of a rank-deficient matrix surface from the Gram
    // eigensolve as σ ≈ √(ε)·σ_max; anything at that level is null-space
    // noise whose eigenvectors are arbitrary, so it must not be kept
    let gram_floor = (vecs.rows as f64 * f64::EPSILON).sqrt();
    let tol = sigma_max * RANK_TOL.max(gram_floor);
    let kept = sigma_all.iter().take(l).filter(|&&s| s > tol).count();
    let sigma = sigma_all[..kept].to_vec();
    let rows = vecs.rows;
    let mut cols = Mat::zeros(rows, kept);
    for k in 0..kept {
        for row in 0..rows {
            cols.set(row, k, vecs.get(row, k));
        }
    }
    Ok((sigma, cols))
}

/// Flip topic signs so each U column's largest-magnitude entry is positive
/// (first index on ties); V columns flip in lockstep.
fn canonicalize_signs(u: &mut Mat, v: &mut Mat) {
    for k in 0..u.cols {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for t in 0..u.rows {
            let a = u.get(t, k).abs();
            if a > best_abs {
                best_abs = a;
                best = t;
            }
        }
        if u.get(best, k) < 0.0 {
            for t in 0..u.rows {
                let x = u.get(t, k);
                u.set(t, k, -x);
            }
            for c in 0..v.rows {
                let x = v.get(c, k);
                v.set(c, k, -x);
            }
        }
    }
}

fn sparse_col_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}
