//! Online triplet selection within a training batch.
//!
//! Every batch item is an anchor candidate. Relatedness — either cosine over
//! topic vectors or plain collection membership — splits the other items
//! into positive and negative candidates; the emitted triple pairs the
//! anchor with its *closest* positive and *closest* negative in embedding
//! space (squared Euclidean, ties to the smallest index). Anchors missing
//! either candidate set are dropped and counted.
//!
//! Distances are accumulated in f64 in fixed index order regardless of the
//! embedding float width, so selection is reproducible across platforms and
//! testable by exact comparison.

use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

use crate::lsi::LsiModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiningStrategy {
    /// Positive when cosine relatedness >= `pos_threshold`, negative when
    /// < `neg_threshold`; records without a defined topic vector are in
    /// neither set.
    Lsi,
    /// Positive = same collection, negative = any other collection.
    Collection,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiningConfig {
    pub strategy: MiningStrategy,
    pub pos_threshold: f64,
    pub neg_threshold: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { strategy: MiningStrategy::Lsi, pos_threshold: 0.8, neg_threshold: 0.5 }
    }
}

/// Relatedness data for one batch.
pub enum BatchRelatedness<'a> {
    /// Row-major `n x n` cosine entries; `None` marks pairs involving a
    /// record whose relatedness is undefined.
    Cosines(&'a [Option<f64>]),
    /// Collection label per batch item.
    Collections(&'a [usize]),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletBatch {
    /// `(anchor, positive, negative)` batch indices, one per kept anchor,
    /// in anchor order.
    pub triples: Vec<(usize, usize, usize)>,
    /// Anchors skipped because a candidate set was empty.
    pub anchors_dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MiningError {
    /// The configured strategy does not match the relatedness data handed in.
    StrategyMismatch { strategy: MiningStrategy, got: &'static str },
    BadShape { what: &'static str, got: usize, want: usize },
}

impl fmt::Display for MiningError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MiningError::StrategyMismatch { strategy, got } => {
                write!(f, "strategy {strategy:?} cannot use {got} relatedness data")
            }
            MiningError::BadShape { what, got, want } => {
                write!(f, "{what}: got {got}, expected {want}")
            }
        }
    }
}

/// Mines one triple per eligible anchor. `emb` holds the batch embeddings
/// row-major (`n` rows of `dim`).
pub fn mine<F: Float>(
    emb: &[F],
    dim: usize,
    rel: &BatchRelatedness<'_>,
    cfg: &MiningConfig,
) -> Result<TripletBatch, MiningError> {
    let n = match (cfg.strategy, rel) {
        (MiningStrategy::Lsi, BatchRelatedness::Cosines(c)) => {
            let n = int_sqrt(c.len());
            if n * n != c.len() {
                return Err(MiningError::BadShape { what: "cosine matrix", got: c.len(), want: n * n });
            }
            n
        }
        (MiningStrategy::Collection, BatchRelatedness::Collections(labels)) => labels.len(),
        (MiningStrategy::Lsi, BatchRelatedness::Collections(_)) => {
            return Err(MiningError::StrategyMismatch { strategy: cfg.strategy, got: "collection" })
        }
        (MiningStrategy::Collection, BatchRelatedness::Cosines(_)) => {
            return Err(MiningError::StrategyMismatch { strategy: cfg.strategy, got: "cosine" })
        }
    };
    if emb.len() != n * dim {
        return Err(MiningError::BadShape { what: "embeddings", got: emb.len(), want: n * dim });
    }

    let mut out = TripletBatch::default();
    for a in 0..n {
        let mut best_pos: Option<(f64, usize)> = None;
        let mut best_neg: Option<(f64, usize)> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            let side = match rel {
                BatchRelatedness::Cosines(c) => match c[a * n + j] {
                    Some(cos) if cos >= cfg.pos_threshold => Side::Pos,
                    Some(cos) if cos < cfg.neg_threshold => Side::Neg,
                    _ => Side::Neither,
                },
                BatchRelatedness::Collections(labels) => {
                    if labels[j] == labels[a] {
                        Side::Pos
                    } else {
                        Side::Neg
                    }
                }
            };
            if matches!(side, Side::Neither) {
                continue;
            }
            let d2 = squared_distance(&emb[a * dim..][..dim], &emb[j * dim..][..dim]);
            let slot = match side {
                Side::Pos => &mut best_pos,
                Side::Neg => &mut best_neg,
                Side::Neither => unreachable!(),
            };
            // ascending j plus strict improvement = smallest index on ties
            if slot.map_or(true, |(best, _)| d2 < best) {
                *slot = Some((d2, j));
            }
        }
        match (best_pos, best_neg) {
            (Some((_, p)), Some((_, ng))) => out.triples.push((a, p, ng)),
            _ => out.anchors_dropped += 1,
        }
    }
    Ok(out)
}

enum Side {
    Pos,
    Neg,
    Neither,
}

/// f64 accumulation in index order, whatever the embedding type.
fn squared_distance<F: Float>(a: &[F], b: &[F]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let d = a[i].to_f64().unwrap() - b[i].to_f64().unwrap();
        acc += d * d;
    }
    acc
}

fn int_sqrt(len: usize) -> usize {
    let mut n = 0usize;
    while (n + 1) * (n + 1) <= len {
        n += 1;
    }
    n
}

/// Batch cosine matrix for [`MiningStrategy::Lsi`]: entry `(i, j)` is the
/// model cosine between `items[i]` and `items[j]` (`None` where undefined).
pub fn relatedness_matrix(model: &LsiModel, items: &[usize]) -> Vec<Option<f64>> {
    let n = items.len();
    let mut out = Vec::with_capacity(n * n);
    for &i in items {
        for &j in items {
            out.push(model.cosine(i, j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg_lsi() -> MiningConfig {
        MiningConfig::default()
    }

    #[test]
    fn closest_candidates_win() {
        // anchor 0: positives {1, 2}, negative {3}; item 2 is nearer
        let emb = vec![0.0f64, 5.0, 1.0, 10.0];
        let cos = vec![
            Some(1.0), Some(0.9), Some(0.95), Some(0.1),
            Some(0.9), Some(1.0), Some(0.9), Some(0.1),
            Some(0.95), Some(0.9), Some(1.0), Some(0.1),
            Some(0.1), Some(0.1), Some(0.1), Some(1.0),
        ];
        let got = mine(&emb, 1, &BatchRelatedness::Cosines(&cos), &cfg_lsi()).unwrap();
        assert_eq!(got.triples[0], (0, 2, 3));
        // item 3 relates to nothing at >= 0.8, so it cannot anchor a triple
        assert_eq!(got.triples.len(), 3);
        assert_eq!(got.anchors_dropped, 1);
    }

    #[test]
    fn threshold_edges_are_inclusive_exclusive() {
        // cos = 0.8 is a positive; cos = 0.5 is neither; cos just below 0.5 is a negative
        let emb = vec![0.0f64, 1.0, 2.0, 3.0];
        let cos = vec![
            Some(1.0), Some(0.8), Some(0.5), Some(0.499),
            Some(0.8), Some(1.0), Some(0.0), Some(0.0),
            Some(0.5), Some(0.0), Some(1.0), Some(0.0),
            Some(0.499), Some(0.0), Some(0.0), Some(1.0),
        ];
        let got = mine(&emb, 1, &BatchRelatedness::Cosines(&cos), &cfg_lsi()).unwrap();
        // anchor 0: pos = {1}, neg = {3} (2 is in neither set)
        assert_eq!(got.triples[0], (0, 1, 3));
    }

    #[test]
    fn undefined_relatedness_is_in_neither_set() {
        let emb = vec![0.0f64, 1.0, 2.0];
        let cos = vec![
            Some(1.0), None, Some(0.9),
            None, None, None,
            Some(0.9), None, Some(1.0),
        ];
        let got = mine(&emb, 1, &BatchRelatedness::Cosines(&cos), &cfg_lsi()).unwrap();
        // no negatives anywhere -> every anchor dropped
        assert!(got.triples.is_empty());
        assert_eq!(got.anchors_dropped, 3);
    }

    #[test]
    fn distance_ties_take_the_smaller_index() {
        // items 1 and 2 are both positives at identical distance from 0
        let emb = vec![0.0f64, 0.0, 1.0, 0.0, -1.0, 0.0, 5.0, 5.0];
        let labels = vec![0usize, 0, 0, 1];
        let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
        let got = mine(&emb, 2, &BatchRelatedness::Collections(&labels), &cfg).unwrap();
        assert_eq!(got.triples[0], (0, 1, 3));
    }

    #[test]
    fn collection_strategy_splits_by_label() {
        let emb = vec![0.0f64, 1.0, 2.0, 3.0];
        let labels = vec![7usize, 7, 9, 9];
        let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
        let got = mine(&emb, 1, &BatchRelatedness::Collections(&labels), &cfg).unwrap();
        assert_eq!(got.triples, vec![(0, 1, 2), (1, 0, 2), (2, 3, 1), (3, 2, 1)]);
    }

    #[test]
    fn single_collection_drops_every_anchor() {
        let emb = vec![0.0f64, 1.0];
        let labels = vec![4usize, 4];
        let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
        let got = mine(&emb, 1, &BatchRelatedness::Collections(&labels), &cfg).unwrap();
        assert!(got.triples.is_empty());
        assert_eq!(got.anchors_dropped, 2);
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let labels = vec![0usize];
        let err = mine(&[0.0f64], 1, &BatchRelatedness::Collections(&labels), &cfg_lsi()).unwrap_err();
        assert!(matches!(err, MiningError::StrategyMismatch { .. }));
        let cos = vec![Some(1.0)];
        let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
        let err = mine(&[0.0f64], 1, &BatchRelatedness::Cosines(&cos), &cfg).unwrap_err();
        assert!(matches!(err, MiningError::StrategyMismatch { .. }));
    }

    #[test]
    fn shape_errors_are_reported() {
        let cos = vec![Some(1.0), Some(0.0), Some(0.0)]; // not square
        assert!(matches!(
            mine(&[0.0f64], 1, &BatchRelatedness::Cosines(&cos), &cfg_lsi()),
            Err(MiningError::BadShape { .. })
        ));
        let labels = vec![0usize, 1];
        let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
        assert!(matches!(
            mine(&[0.0f64; 3], 2, &BatchRelatedness::Collections(&labels), &cfg),
            Err(MiningError::BadShape { .. })
        ));
    }

    #[test]
    fn empty_batch_mines_nothing() {
        let got = mine(&[] as &[f64], 4, &BatchRelatedness::Cosines(&[]), &cfg_lsi()).unwrap();
        assert!(got.triples.is_empty());
        assert_eq!(got.anchors_dropped, 0);
    }
}
