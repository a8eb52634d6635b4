//! Margin triplet loss over squared Euclidean distances.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Result of one loss evaluation over a batch of embeddings.
pub struct TripletLossOut<F> {
    /// Sum over triples of `max(0, d_ap2 - d_an2 + margin)`.
    pub loss: F,
    /// Number of triples with a strictly positive hinge argument.
    pub active: usize,
    /// Gradient with respect to every embedding row, same layout as `emb`.
    pub d_emb: Vec<F>,
}

/// `emb` holds `rows` embeddings of width `dim`; each triple indexes
/// (anchor, positive, negative) rows. Inactive triples (hinge argument
/// `<= 0`) contribute zero loss and zero gradient.
pub fn triplet_loss<F: Float>(
    emb: &[F],
    dim: usize,
    triples: &[(usize, usize, usize)],
    margin: F,
) -> TripletLossOut<F> {
    let mut out = TripletLossOut { loss: F::zero(), active: 0, d_emb: vec![F::zero(); emb.len()] };
    let two = F::one() + F::one();
    for &(a, p, n) in triples {
        let (ra, rp, rn) = (&emb[a * dim..][..dim], &emb[p * dim..][..dim], &emb[n * dim..][..dim]);
        let mut d_ap2 = F::zero();
        let mut d_an2 = F::zero();
        for j in 0..dim {
            let dp = ra[j] - rp[j];
            let dn = ra[j] - rn[j];
            d_ap2 = d_ap2 + dp * dp;
            d_an2 = d_an2 + dn * dn;
        }
        let hinge = d_ap2 - d_an2 + margin;
        if hinge > F::zero() {
            out.loss = out.loss + hinge;
            out.active += 1;
            for j in 0..dim {
                let ga = two * (rn[j] - rp[j]);
                let gp = two * (rp[j] - ra[j]);
                let gn = two * (ra[j] - rn[j]);
                out.d_emb[a * dim + j] = out.d_emb[a * dim + j] + ga;
                out.d_emb[p * dim + j] = out.d_emb[p * dim + j] + gp;
                out.d_emb[n * dim + j] = out.d_emb[n * dim + j] + gn;
            }
        }
    }
    out
}
