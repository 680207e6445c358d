//! Synthetic labeled datasets for the oracle trainer. The scores themselves
//! never see labels; these exist only to produce ground-truth accuracies.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Spiral,
    Moons,
    Gaussians,
}

impl DatasetKind {
    pub fn parse(text: &str) -> Result<DatasetKind> {
        match text {
            "spiral" => Ok(DatasetKind::Spiral),
            "moons" => Ok(DatasetKind::Moons),
            "gaussians" => Ok(DatasetKind::Gaussians),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected spiral, moons or gaussians)"
            ))),
        }
    }
}

/// Two-dimensional points with class labels, class-major order, balanced up
/// to remainder.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Spiral arm parameterization used for class `c` of `k` at position
/// `t ∈ [0, 1]`: radius 0.2 + 0.8t, angle 3πt plus the class offset.
pub fn spiral_point(c: usize, k: usize, t: f64) -> (f64, f64) {
    let r = 0.2 + 0.8 * t;
    let theta = 2.0 * std::f64::consts::PI * (c as f64) / (k as f64)
        + 3.0 * std::f64::consts::PI * t;
    (r * theta.cos(), r * theta.sin())
}

fn moon_point(c: usize, t: f64) -> (f64, f64) {
    // Two interleaved half circles, centered at the origin.
    let a = std::f64::consts::PI * t;
    match c {
        0 => (a.cos() - 0.5, a.sin() - 0.25),
        _ => (0.5 - a.cos(), 0.25 - a.sin()),
    }
}

fn gaussian_mean(c: usize, k: usize) -> (f64, f64) {
    let theta = 2.0 * std::f64::consts::PI * (c as f64) / (k as f64);
    (2.0 * theta.cos(), 2.0 * theta.sin())
}

/// Deterministic balanced dataset of `n` points over `classes` classes.
/// `noise` is the standard deviation of isotropic jitter (the spread itself
/// for `gaussians`).
pub fn make_dataset(
    kind: DatasetKind,
    n: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    if n < classes {
        return Err(Error::Config(format!(
            "cannot balance {n} points over {classes} classes"
        )));
    }
    if kind == DatasetKind::Moons && classes != 2 {
        return Err(Error::Config("moons is a two-class dataset".into()));
    }
    let mut rng = rng_from(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let m = n / classes + usize::from(c < n % classes);
        for i in 0..m {
            let t = if m == 1 { 0.5 } else { i as f64 / (m - 1) as f64 };
            let (x, y) = match kind {
                DatasetKind::Spiral => spiral_point(c, classes, t),
                DatasetKind::Moons => moon_point(c, t),
                DatasetKind::Gaussians => gaussian_mean(c, classes),
            };
            let jitter_x: f64 = rng.sample(StandardNormal);
            let jitter_y: f64 = rng.sample(StandardNormal);
            data.push(x + noise * jitter_x);
            data.push(y + noise * jitter_y);
            labels.push(c);
        }
    }
    Ok(Dataset {
        inputs: Tensor::from_vec(&[labels.len(), 2], data)?,
        labels,
        classes,
    })
}
