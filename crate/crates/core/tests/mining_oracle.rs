//! Triplet selection against an independently written brute-force oracle:
//! enumerate candidate sets by filtering, collect *all* candidate distances,
//! then resolve the minimum and its tie-break in a separate pass. Exact
//! equality is required — selection must not depend on how the search is
//! organized.

use xmodal_core::mining::{mine, BatchRelatedness, MiningConfig, MiningStrategy, TripletBatch};
use xmodal_core::rng::Rng;

/// Squared Euclidean distance, f64 accumulation in index order (the
/// arithmetic contract shared with the library so ties are bit-identical).
fn d2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        acc += d * d;
    }
    acc
}

fn oracle_pick(cands: &[(f64, usize)]) -> Option<usize> {
    let min = cands.iter().map(|&(d, _)| d).fold(f64::INFINITY, f64::min);
    cands
        .iter()
        .filter(|&&(d, _)| d == min)
        .map(|&(_, j)| j)
        .min()
}

fn oracle(
    emb: &[f32],
    dim: usize,
    rel: &BatchRelatedness<'_>,
    cfg: &MiningConfig,
) -> TripletBatch {
    let n = match rel {
        BatchRelatedness::Cosines(c) => (c.len() as f64).sqrt().round() as usize,
        BatchRelatedness::Collections(l) => l.len(),
    };
    let mut out = TripletBatch::default();
    for a in 0..n {
        let mut pos: Vec<(f64, usize)> = Vec::new();
        let mut neg: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if j == a {
                continue;
            }
            let bucket = match rel {
                BatchRelatedness::Cosines(c) => match c[a * n + j] {
                    None => None,
                    Some(v) if v >= cfg.pos_threshold => Some(&mut pos),
                    Some(v) if v < cfg.neg_threshold => Some(&mut neg),
                    Some(_) => None,
                },
                BatchRelatedness::Collections(l) => {
                    Some(if l[j] == l[a] { &mut pos } else { &mut neg })
                }
            };
            if let Some(bucket) = bucket {
                bucket.push((d2(&emb[a * dim..][..dim], &emb[j * dim..][..dim]), j));
            }
        }
        match (oracle_pick(&pos), oracle_pick(&neg)) {
            (Some(p), Some(g)) => out.triples.push((a, p, g)),
            _ => out.anchors_dropped += 1,
        }
    }
    out
}

/// Batches engineered toward the awkward corners: duplicated embeddings
/// (distance ties), cosines exactly at both thresholds, undefined entries,
/// single-item and single-collection batches.
#[test]
fn lsi_strategy_matches_oracle_over_500_batches() {
    let mut rng = Rng::from_seed(0xA11CE);
    let cfg = MiningConfig::default();
    for batch_no in 0..500 {
        let n = 1 + rng.next_below(32);
        let dim = 1 + rng.next_below(8);
        let mut emb: Vec<f32> = (0..n * dim).map(|_| rng.uniform(-2.0, 2.0) as f32).collect();
        // clone some rows to force exact distance ties
        for _ in 0..n / 3 {
            let (src, dst) = (rng.next_below(n), rng.next_below(n));
            let row: Vec<f32> = emb[src * dim..][..dim].to_vec();
            emb[dst * dim..][..dim].copy_from_slice(&row);
        }
        let mut cos: Vec<Option<f64>> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    cos.push(Some(1.0));
                    continue;
                }
                cos.push(match rng.next_below(10) {
                    0 => None,
                    1 => Some(0.8),   // exactly the positive threshold
                    2 => Some(0.5),   // exactly the negative threshold
                    3 => Some(1.0),
                    _ => Some(rng.uniform(-1.0, 1.0)),
                });
            }
        }
        let rel = BatchRelatedness::Cosines(&cos);
        let got = mine(&emb, dim, &rel, &cfg).unwrap();
        let want = oracle(&emb, dim, &rel, &cfg);
        assert_eq!(got, want, "batch {batch_no} (n={n}, dim={dim})");
    }
}

#[test]
fn collection_strategy_matches_oracle_over_500_batches() {
    let mut rng = Rng::from_seed(0xB0B);
    let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
    for batch_no in 0..500 {
        let n = 1 + rng.next_below(32);
        let dim = 1 + rng.next_below(8);
        let mut emb: Vec<f32> = (0..n * dim).map(|_| rng.uniform(-2.0, 2.0) as f32).collect();
        for _ in 0..n / 3 {
            let (src, dst) = (rng.next_below(n), rng.next_below(n));
            let row: Vec<f32> = emb[src * dim..][..dim].to_vec();
            emb[dst * dim..][..dim].copy_from_slice(&row);
        }
        // 1..=3 collections; sometimes everything collapses into one
        let n_coll = 1 + rng.next_below(3);
        let labels: Vec<usize> = (0..n).map(|_| rng.next_below(n_coll)).collect();
        let rel = BatchRelatedness::Collections(&labels);
        let got = mine(&emb, dim, &rel, &cfg).unwrap();
        let want = oracle(&emb, dim, &rel, &cfg);
        assert_eq!(got, want, "batch {batch_no} (n={n}, dim={dim})");
    }
}

/// Mining consumes only distances, so a permutation of embedding dimensions
/// (an isometry) must select identical triples.
#[test]
fn dimension_permutation_does_not_change_selection() {
    let mut rng = Rng::from_seed(77);
    let (n, dim) = (12usize, 6usize);
    let emb: Vec<f32> = (0..n * dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    let mut perm: Vec<f32> = vec![0.0; n * dim];
    for i in 0..n {
        for j in 0..dim {
            perm[i * dim + (dim - 1 - j)] = emb[i * dim + j];
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let cfg = MiningConfig { strategy: MiningStrategy::Collection, ..MiningConfig::default() };
    let a = mine(&emb, dim, &BatchRelatedness::Collections(&labels), &cfg).unwrap();
    let b = mine(&perm, dim, &BatchRelatedness::Collections(&labels), &cfg).unwrap();
    assert_eq!(a, b);
}

/// Raising the positive threshold can only shrink candidate sets, so the
/// set of anchors that survive can only shrink.
#[test]
fn stricter_positive_threshold_never_adds_anchors() {
    let mut rng = Rng::from_seed(5150);
    let (n, dim) = (20usize, 4usize);
    let emb: Vec<f32> = (0..n * dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    let mut cos: Vec<Option<f64>> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            cos.push(if i == j { Some(1.0) } else { Some(rng.uniform(0.0, 1.0)) });
        }
    }
    let rel = BatchRelatedness::Cosines(&cos);
    let loose = mine(&emb, dim, &rel, &MiningConfig { pos_threshold: 0.6, ..MiningConfig::default() }).unwrap();
    let strict = mine(&emb, dim, &rel, &MiningConfig { pos_threshold: 0.9, ..MiningConfig::default() }).unwrap();
    let loose_anchors: Vec<usize> = loose.triples.iter().map(|t| t.0).collect();
    for t in &strict.triples {
        assert!(loose_anchors.contains(&t.0));
    }
    assert!(strict.anchors_dropped >= loose.anchors_dropped);
}
