//! Retrieval against independently written double-loop oracles, plus the
//! isometry property. The oracles use selection-by-repeated-scan instead of
//! a sort so the tie rule is enforced by explicitly different code.

use xmodal_core::eval::{knn, precision_at_k, EmbeddingStore, StoreTag};
use xmodal_core::mat::{orthonormalize_columns, Mat};
use xmodal_core::rng::Rng;

fn d2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

/// Repeatedly scans for the closest unclaimed neighbor; on exact distance
/// ties the ascending scan keeps the first (smallest) ordinal.
fn oracle_knn(store: &EmbeddingStore, query: usize, k: usize) -> Vec<usize> {
    let n = store.len();
    let mut taken = vec![false; n];
    taken[query] = true;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let d = d2(store.vector(query), store.vector(j));
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        let (_, j) = best.unwrap();
        taken[j] = true;
        out.push(j);
    }
    out
}

fn random_store(rng: &mut Rng, n: usize, dim: usize) -> EmbeddingStore {
    let data: Vec<f64> = (0..n * dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
    EmbeddingStore::new(data, dim, StoreTag::Crnn).unwrap()
}

#[test]
fn knn_matches_double_loop_oracle() {
    let mut rng = Rng::from_seed(0xE7A1);
    for trial in 0..60 {
        let n = 2 + rng.next_below(199); // up to 200 records
        let dim = 1 + rng.next_below(32);
        let mut store = random_store(&mut rng, n, dim);
        // duplicate a few vectors so ties actually occur
        if n >= 4 {
            let mut data = store.data().to_vec();
            for _ in 0..n / 4 {
                let (src, dst) = (rng.next_below(n), rng.next_below(n));
                let row: Vec<f64> = data[src * dim..][..dim].to_vec();
                data[dst * dim..][..dim].copy_from_slice(&row);
            }
            store = EmbeddingStore::new(data, dim, StoreTag::Crnn).unwrap();
        }
        for _ in 0..4 {
            let q = rng.next_below(n);
            let k = 1 + rng.next_below(n - 1);
            assert_eq!(
                knn(&store, q, k).unwrap(),
                oracle_knn(&store, q, k),
                "trial {trial}: n={n} dim={dim} q={q} k={k}"
            );
        }
    }
}

#[test]
fn precision_matches_double_loop_oracle() {
    let mut rng = Rng::from_seed(0xBEEF);
    let cutoffs = [1usize, 2, 3, 5, 10, 50, 100];
    for trial in 0..25 {
        let n = 2 + rng.next_below(120);
        let dim = 1 + rng.next_below(16);
        let store = random_store(&mut rng, n, dim);
        let labels: Vec<usize> = (0..n).map(|_| rng.next_below(4)).collect();
        let queries: Vec<usize> = (0..n).collect();
        let labels_for_rel = labels.clone();
        let rel = move |q: usize, r: usize| labels_for_rel[q] == labels_for_rel[r];
        let got = precision_at_k(&store, &queries, &rel, &cutoffs).unwrap();

        // oracle: per query and cutoff, full scan from scratch
        for (qi, &q) in queries.iter().enumerate() {
            for (ci, &k) in cutoffs.iter().enumerate() {
                let depth = k.min(n - 1);
                let neigh = oracle_knn(&store, q, depth);
                let hits = neigh.iter().filter(|&&r| labels[q] == labels[r]).count();
                let want = hits as f64 / depth as f64;
                assert!(
                    (got.per_query[qi][ci] - want).abs() < 1e-15,
                    "trial {trial} q={q} k={k}: {} vs {want}",
                    got.per_query[qi][ci]
                );
            }
        }
    }
}

/// Distances are preserved by any rotation + translation of the whole
/// store, so retrieval results must be identical. Guard: stores whose
/// distinct pair distances come closer than 1e-9 are resampled, because an
/// isometry applied in floating point perturbs distances by ~1e-15 and
/// could otherwise legitimately reorder near-ties.
#[test]
fn precision_is_isometry_invariant() {
    let cutoffs = [1usize, 2, 3, 5, 10];
    let mut seed = 0u64;
    let mut done = 0;
    while done < 5 {
        seed += 1;
        let mut rng = Rng::from_seed(seed);
        let n = 30 + rng.next_below(30);
        let dim = 2 + rng.next_below(6);
        let store = random_store(&mut rng, n, dim);

        let mut gaps_ok = true;
        'queries: for q in 0..n {
            let mut ds: Vec<f64> = (0..n).filter(|&j| j != q).map(|j| d2(store.vector(q), store.vector(j))).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in ds.windows(2) {
                if w[1] - w[0] != 0.0 && w[1] - w[0] < 1e-9 {
                    gaps_ok = false;
                    break 'queries;
                }
            }
        }
        if !gaps_ok {
            continue;
        }

        // random rotation via orthonormalized gaussian matrix, plus a shift
        let mut q_mat = Mat::zeros(dim, dim);
        for v in q_mat.data.iter_mut() {
            *v = rng.normal();
        }
        orthonormalize_columns(&mut q_mat);
        let shift: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let mut moved = vec![0.0; n * dim];
        for i in 0..n {
            for r in 0..dim {
                let mut acc = shift[r];
                for c in 0..dim {
                    acc += q_mat.get(r, c) * store.vector(i)[c];
                }
                moved[i * dim + r] = acc;
            }
        }
        let moved = EmbeddingStore::new(moved, dim, StoreTag::Crnn).unwrap();

        let labels: Vec<usize> = (0..n).map(|_| rng.next_below(3)).collect();
        let queries: Vec<usize> = (0..n).collect();
        let l1 = labels.clone();
        let l2 = labels.clone();
        let a = precision_at_k(&store, &queries, &move |q, r| l1[q] == l1[r], &cutoffs).unwrap();
        let b = precision_at_k(&moved, &queries, &move |q, r| l2[q] == l2[r], &cutoffs).unwrap();
        assert_eq!(a.per_query, b.per_query, "seed {seed}");
        done += 1;
    }
}
