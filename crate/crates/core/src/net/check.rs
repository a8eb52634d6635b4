//! Finite-difference verification of the whole model's analytic gradients.
//!
//! Builds an f64 model, runs one training-mode forward/backward through the
//! margin triplet loss, then re-measures sampled parameter coordinates with
//! central differences. The margin is chosen large enough that every hinge
//! is strictly active, so the loss has no hinge kinks at the evaluation
//! point and the comparison is well-posed.
//!
//! Max pooling makes the loss only piecewise-smooth: a finite-difference
//! interval that straddles an argmax flip measures a mixture of two smooth
//! branches and is meaningless. Each coordinate is therefore measured with
//! the largest step (starting at 1e-5) at which both probe points select
//! identical pooling paths; coordinates that stay unstable even at the
//! smallest step are swapped for freshly sampled ones. Steps never shrink
//! below ~1.2e-6, which keeps the subtraction noise of the difference
//! quotient well under the pass threshold.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::net::loss::triplet_loss;
use crate::net::{Crnn, CrnnConfig, NetError};
use crate::rng::Rng;

/// Largest (preferred) central-difference step; halved while pooling flips.
const STEP: f64 = 1e-5;
const STEP_HALVINGS: usize = 3;
/// Hinge margin; embeddings live in (-1, 1) per component, so squared
/// distances are bounded well below this and every triple stays active.
const MARGIN: f64 = 30.0;
/// Relative-error denominator floor, so coordinates whose true gradient is
/// tiny are judged on (scaled) absolute error instead of blowing up.
const DENOM_FLOOR: f64 = 1e-3;

pub struct GradCheckReport {
    /// Worst `|numeric - analytic| / max(|numeric| + |analytic|, 1e-3)`.
    pub max_rel_err: f64,
    pub coords_checked: usize,
    pub tensors_checked: usize,
    /// Coordinates abandoned because pooling flipped at every step size.
    pub kink_skips: usize,
    /// Named tensors whose analytic gradient was identically zero — a sign
    /// of a severed backward path. Expected to be empty.
    pub zero_grad_tensors: Vec<String>,
    /// Named tensors for which no stable coordinate could be measured.
    /// Expected to be empty.
    pub unchecked_tensors: Vec<String>,
}

/// Checks up to `samples_per_tensor` coordinates of every named parameter
/// tensor (all coordinates for tensors at most that large). Deterministic in
/// `seed`: model init, input data and coordinate choices all derive from it.
pub fn finite_difference_check(
    config: &CrnnConfig,
    seed: u64,
    samples_per_tensor: usize,
) -> Result<GradCheckReport, NetError> {
    let batch = 4usize;
    // roles overlap on purpose: item 0 is an anchor and a negative, item 2
    // a negative and a positive, so gradient accumulation is exercised
    let triples = [(0usize, 1usize, 2usize), (3, 2, 0)];
    let mut model: Crnn<f64> = Crnn::new(config.clone(), seed)?;
    let mut in_rng = Rng::from_seed(seed).derive(0x1);
    let input: Vec<f64> = (0..batch * config.bands * config.frames())
        .map(|_| in_rng.uniform(-8.0, 0.0))
        .collect();
    let dim = config.embedding_dim();

    let emb = model.forward(&input, batch, true)?;
    let out = triplet_loss(&emb, dim, &triples, MARGIN);
    debug_assert_eq!(out.active, triples.len());
    model.zero_grads();
    model.backward(&out.d_emb)?;

    let mut names: Vec<(String, usize)> = Vec::new();
    let mut grads: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    model.visit_params(&mut |n, t| {
        names.push((String::from(n), t.len()));
        grads.insert(String::from(n), t.grad.clone());
    });

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        coords_checked: 0,
        tensors_checked: names.len(),
        kink_skips: 0,
        zero_grad_tensors: names
            .iter()
            .filter(|(n, _)| grads[n].iter().all(|&g| g == 0.0))
            .map(|(n, _)| n.clone())
            .collect(),
        unchecked_tensors: Vec::new(),
    };

    let mut coord_rng = Rng::from_seed(seed).derive(0x2);
    for (name, len) in &names {
        let target = (*len).min(samples_per_tensor);
        let mut measured = 0usize;
        let mut tried: Vec<usize> = Vec::new();
        // exhaust small tensors coordinate by coordinate; sample large ones,
        // allowing a few redraws when a coordinate sits on a pooling kink
        let budget = if *len <= samples_per_tensor { *len } else { samples_per_tensor * 8 };
        for attempt in 0..budget {
            if measured >= target {
                break;
            }
            let ci = if *len <= samples_per_tensor {
                attempt
            } else {
                let mut c = coord_rng.next_below(*len);
                while tried.contains(&c) {
                    c = coord_rng.next_below(*len);
                }
                c
            };
            tried.push(ci);
            match measure_coord(&mut model, name, ci, &input, batch, &triples)? {
                Some(numeric) => {
                    let analytic = grads[name][ci];
                    let rel =
                        (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(DENOM_FLOOR);
                    if rel > report.max_rel_err {
                        report.max_rel_err = rel;
                    }
                    report.coords_checked += 1;
                    measured += 1;
                }
                None => report.kink_skips += 1,
            }
        }
        if measured == 0 {
            report.unchecked_tensors.push(name.clone());
        }
    }
    Ok(report)
}

/// Central difference at the largest kink-free step, or `None` when pooling
/// flips at every candidate step.
fn measure_coord(
    model: &mut Crnn<f64>,
    name: &str,
    ci: usize,
    input: &[f64],
    batch: usize,
    triples: &[(usize, usize, usize)],
) -> Result<Option<f64>, NetError> {
    let orig = param_get(model, name, ci);
    let mut h = STEP;
    for _ in 0..=STEP_HALVINGS {
        param_set(model, name, ci, orig + h);
        let (up, fp_up) = loss_at(model, input, batch, triples)?;
        param_set(model, name, ci, orig - h);
        let (down, fp_down) = loss_at(model, input, batch, triples)?;
        param_set(model, name, ci, orig);
        if fp_up == fp_down {
            return Ok(Some((up - down) / (2.0 * h)));
        }
        h *= 0.5;
    }
    Ok(None)
}

fn loss_at(
    model: &mut Crnn<f64>,
    input: &[f64],
    batch: usize,
    triples: &[(usize, usize, usize)],
) -> Result<(f64, u64), NetError> {
    let dim = model.config.embedding_dim();
    let emb = model.forward(input, batch, true)?;
    let fp = model.pool_selection_fingerprint();
    Ok((triplet_loss(&emb, dim, triples, MARGIN).loss, fp))
}

fn param_get(model: &mut Crnn<f64>, name: &str, idx: usize) -> f64 {
    let mut v = 0.0;
    model.visit_params(&mut |n, t| {
        if n == name {
            v = t.data[idx];
        }
    });
    v
}

fn param_set(model: &mut Crnn<f64>, name: &str, idx: usize, value: f64) {
    model.visit_params(&mut |n, t| {
        if n == name {
            t.data[idx] = value;
        }
    });
}
