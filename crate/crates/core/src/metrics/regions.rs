//! Distinct activation-pattern counting.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::schedule::{init_for_repeat, MetricConfig, SeedSchedule};
use crate::nn::{ActivationSignature, Network};
use crate::rng::normal_tensor;
use crate::tensor::Tensor;

const CHUNK: usize = 256;

/// Distinct signature counts per initialization repeat and their mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionReport {
    pub counts: Vec<u64>,
    pub r_hat: f64,
    pub samples_used: usize,
    /// Zero means the architecture has a single affine region by construction.
    pub relu_units: usize,
}

/// Streaming distinct-count over signatures: buckets by the 64-bit hash,
/// resolves collisions by exact comparison inside the bucket.
#[derive(Default)]
pub struct DistinctCounter {
    buckets: HashMap<u64, Vec<ActivationSignature>>,
}

impl DistinctCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true when the signature was not seen before.
    pub fn insert(&mut self, sig: &ActivationSignature) -> bool {
        let bucket = self.buckets.entry(sig.hash64()).or_default();
        if bucket.iter().any(|s| s == sig) {
            false
        } else {
            bucket.push(sig.clone());
            true
        }
    }

    pub fn count(&self) -> u64 {
        self.buckets.values().map(|b| b.len() as u64).sum()
    }
}

/// Distinct count over an in-memory signature list.
pub fn count_distinct_signatures(sigs: &[ActivationSignature]) -> u64 {
    let mut counter = DistinctCounter::new();
    for s in sigs {
        counter.insert(s);
    }
    counter.count()
}

pub fn count_regions(
    template: &Network,
    cfg: &MetricConfig,
    schedule: &SeedSchedule,
) -> Result<RegionReport> {
    count_regions_with_inputs(template, cfg, schedule, None)
}

/// For each repeat: re-initialize, push every sample through the network and
/// count distinct activation signatures. One fixed sample set is reused
/// across repeats (lower variance between repeats); pass `inputs` to override
/// the synthetic standard-normal draw.
pub fn count_regions_with_inputs(
    template: &Network,
    cfg: &MetricConfig,
    schedule: &SeedSchedule,
    inputs: Option<&Tensor>,
) -> Result<RegionReport> {
    if cfg.region_samples < 1 {
        return Err(Error::Config("region_samples must be >= 1".into()));
    }
    if cfg.repeats < 1 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let samples = match inputs {
        Some(t) => {
            if t.shape().len() != template.input_shape().len() + 1
                || t.shape()[1..] != *template.input_shape()
            {
                return Err(Error::Config(format!(
                    "provided inputs have per-sample shape {:?}, network expects {:?}",
                    &t.shape()[1..],
                    template.input_shape()
                )));
            }
            t.clone()
        }
        None => {
            let mut shape = vec![cfg.region_samples];
            shape.extend_from_slice(template.input_shape());
            normal_tensor(&shape, schedule.data_seed("region", None))
        }
    };
    let n = samples.shape()[0];
    let mut net = template.clone();
    let mut counts = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        init_for_repeat(&mut net, schedule, "region", r);
        if net.relu_units() == 0 {
            counts.push(1);
            continue;
        }
        let mut counter = DistinctCounter::new();
        let mut start = 0;
        while start < n {
            let stop = (start + CHUNK).min(n);
            let chunk = slice_samples(&samples, start, stop)?;
            let (_, sigs) = net.forward(&chunk)?;
            for s in &sigs {
                counter.insert(s);
            }
            start = stop;
        }
        counts.push(counter.count());
    }
    let r_hat = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    Ok(RegionReport {
        counts,
        r_hat,
        samples_used: n,
        relu_units: template.relu_units(),
    })
}

fn slice_samples(t: &Tensor, start: usize, stop: usize) -> Result<Tensor> {
    let per = t.per_sample();
    let mut shape = vec![stop - start];
    shape.extend_from_slice(&t.shape()[1..]);
    Tensor::from_vec(&shape, t.data()[start * per..stop * per].to_vec())
}
