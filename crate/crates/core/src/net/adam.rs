//! Adam optimizer with per-tensor moment slots keyed by parameter name.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::net::c;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment buffers plus the shared step counter. Slots are
/// created lazily the first time a parameter name is seen, so the same
/// optimizer works across model configurations.
pub struct Adam<F> {
    pub t: u64,
    slots: BTreeMap<String, (Vec<F>, Vec<F>)>,
}

impl<F: Float> Adam<F> {
    pub fn new() -> Self {
        Adam { t: 0, slots: BTreeMap::new() }
    }

    /// Starts the next step: bumps the step counter and returns it.
    /// Call once per batch, then [`Adam::update`] for every parameter.
    pub fn begin_step(&mut self) -> u64 {
        self.t += 1;
        self.t
    }

    /// Applies one Adam update to `data` from `grad` using this parameter's
    /// moment slots. Must run after [`Adam::begin_step`] for the current batch.
    pub fn update(&mut self, name: &str, data: &mut [F], grad: &[F], cfg: &AdamConfig) {
        let (m, v) = self
            .slots
            .entry(name.to_string())
            .or_insert_with(|| (vec![F::zero(); data.len()], vec![F::zero(); data.len()]));
        debug_assert_eq!(m.len(), data.len());
        let b1 = c::<F>(cfg.beta1);
        let b2 = c::<F>(cfg.beta2);
        let lr = c::<F>(cfg.lr);
        let eps = c::<F>(cfg.epsilon);
        let t = self.t as i32;
        let corr1 = F::one() - b1.powi(t);
        let corr2 = F::one() - b2.powi(t);
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (F::one() - b1) * g;
            v[i] = b2 * v[i] + (F::one() - b2) * g * g;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// Slot names in sorted order (for serialization).
    pub fn names(&self) -> Vec<&str> {
        self.slots.keys().map(|s| s.as_str()).collect()
    }

    pub fn slot(&self, name: &str) -> Option<(&[F], &[F])> {
        self.slots.get(name).map(|(m, v)| (m.as_slice(), v.as_slice()))
    }

    /// Installs a slot verbatim (for checkpoint restore).
    pub fn set_slot(&mut self, name: &str, m: Vec<F>, v: Vec<F>) {
        self.slots.insert(name.to_string(), (m, v));
    }
}

impl<F: Float> Default for Adam<F> {
    fn default() -> Self {
        Self::new()
    }
}
