//! Parameter/activation container with a paired gradient buffer.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Dense tensor; `grad` always has the same length as `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Float> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![F::zero(); len], grad: vec![F::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}
