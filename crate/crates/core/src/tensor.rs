//! Dense multidimensional array of `f64` values.

use crate::error::{Error, Result};

/// Row-major dense tensor. The first axis is the batch axis wherever a batch
/// is involved, so per-sample slices are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Internal(format!(
                "tensor shape {:?} needs {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Number of elements per batch entry (product of all but the first axis).
    pub fn per_sample(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Contiguous slice of batch entry `b`; the tensor's first axis is the batch.
    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.per_sample();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.per_sample();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }
}
