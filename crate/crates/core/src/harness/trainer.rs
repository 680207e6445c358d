//! Plain full-batch gradient descent with cross-entropy, used as the
//! ground-truth accuracy oracle for correlation studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::dataset::Dataset;
use crate::nn::Network;
use crate::rng::{derive_seed, rng_from};
use crate::space::{decode, ArchId, SpaceConfig};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Held-out fraction, split deterministically from the seed.
    pub test_fraction: f64,
    /// Stop once the loss changes by less than this between epochs.
    pub loss_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr: 0.1,
            seed: 0,
            test_fraction: 0.25,
            loss_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
    /// Loss went non-finite; accuracy is recorded as 0.
    pub diverged: bool,
}

/// Decodes and trains a single-path architecture, returning held-out
/// accuracy. Deterministic in (architecture, dataset, config).
pub fn train_oracle(
    space: &SpaceConfig,
    arch: &ArchId,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    let mut net = decode(space, arch.as_str())?.build_network()?;
    train_network(&mut net, ds, cfg)
}

/// Trains an already-built network in place.
pub fn train_network(net: &mut Network, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    if net.classes() != ds.classes {
        return Err(Error::Config(format!(
            "network has {} classes, dataset {}",
            net.classes(),
            ds.classes
        )));
    }
    if ds.len() < 2 {
        return Err(Error::Config("dataset too small to split".into()));
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = rng_from(derive_seed(cfg.seed, &["split"]));
        order.shuffle(&mut rng);
    }
    let n_test = ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let train = gather(ds, train_idx)?;
    let test = gather(ds, test_idx)?;

    net.init_with_seed(derive_seed(cfg.seed, &["init"]));

    let diverged_result = |epochs_run: usize| TrainResult {
        test_accuracy: 0.0,
        train_accuracy: 0.0,
        epochs_run,
        final_loss: f64::NAN,
        diverged: true,
    };

    let mut prev_loss = f64::INFINITY;
    let mut loss = f64::NAN;
    let mut epochs_run = 0;
    let n_train = train.labels.len();
    let mut grad = vec![0.0; net.param_total()];
    for epoch in 0..cfg.epochs {
        let fwd = match net.eval(&train.inputs, true, false) {
            Ok(fwd) => fwd,
            // Overflowing parameters surface as non-finite logits.
            Err(Error::NonFinite(_)) => return Ok(diverged_result(epoch)),
            Err(e) => return Err(e),
        };
        let mut total_loss = 0.0;
        grad.fill(0.0);
        for s in 0..n_train {
            let logits = fwd.logits.sample(s);
            let (sample_loss, mut cot) = cross_entropy(logits, train.labels[s]);
            total_loss += sample_loss;
            for c in cot.iter_mut() {
                *c /= n_train as f64;
            }
            net.backward_sample(&fwd, s, &cot, &mut grad);
        }
        loss = total_loss / n_train as f64;
        if !loss.is_finite() {
            return Ok(diverged_result(epoch));
        }
        net.apply_update(&grad, -cfg.lr);
        epochs_run = epoch + 1;
        if (prev_loss - loss).abs() < cfg.loss_tol {
            break;
        }
        prev_loss = loss;
    }

    let evaluated = accuracy(net, &test).and_then(|t| accuracy(net, &train).map(|tr| (t, tr)));
    match evaluated {
        Ok((test_accuracy, train_accuracy)) => Ok(TrainResult {
            test_accuracy,
            train_accuracy,
            epochs_run,
            final_loss: if epochs_run == 0 { f64::NAN } else { loss },
            diverged: false,
        }),
        // The final update may have pushed the parameters over the edge.
        Err(Error::NonFinite(_)) => Ok(diverged_result(epochs_run)),
        Err(e) => Err(e),
    }
}

fn gather(ds: &Dataset, idx: &[usize]) -> Result<Dataset> {
    let per = ds.inputs.per_sample();
    let mut data = Vec::with_capacity(idx.len() * per);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        data.extend_from_slice(ds.inputs.sample(i));
        labels.push(ds.labels[i]);
    }
    let mut shape = vec![idx.len()];
    shape.extend_from_slice(&ds.inputs.shape()[1..]);
    Ok(Dataset {
        inputs: Tensor::from_vec(&shape, data)?,
        labels,
        classes: ds.classes,
    })
}

/// Loss and d(loss)/d(logits) for one sample, computed via a stable
/// log-sum-exp.
fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let sum_exp: f64 = logits.iter().map(|&z| (z - m).exp()).sum();
    let log_z = m + sum_exp.ln();
    let loss = log_z - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_z).exp()).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

fn accuracy(net: &Network, ds: &Dataset) -> Result<f64> {
    let (logits, _) = net.forward(&ds.inputs)?;
    let mut hits = 0usize;
    for s in 0..ds.labels.len() {
        let row = logits.sample(s);
        let mut best = 0usize;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == ds.labels[s] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{make_dataset, DatasetKind};
    use crate::space::preset;

    #[test]
    fn separable_gaussians_reach_high_accuracy() {
        let space = preset("toy-mlp").unwrap();
        let ds = make_dataset(DatasetKind::Gaussians, 80, 2, 0.3, 3).unwrap();
        let arch = ArchId::from("e0:zero|e1:skip|e2:zero");
        let cfg = TrainConfig {
            epochs: 400,
            lr: 0.2,
            seed: 1,
            ..TrainConfig::default()
        };
        let res = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        assert!(!res.diverged);
        assert!(
            res.test_accuracy >= 0.95,
            "linear path should separate antipodal gaussians, got {}",
            res.test_accuracy
        );
    }

    #[test]
    fn zero_epochs_is_roughly_chance() {
        // Spiral arms interleave, so any untrained decision boundary splits
        // each class roughly in half (antipodal gaussians would not: a random
        // linear boundary gets them all right or all wrong).
        let space = preset("toy-mlp").unwrap();
        let ds = make_dataset(DatasetKind::Spiral, 200, 2, 0.1, 4).unwrap();
        let arch = ArchId::from("e0:linear_relu|e1:skip|e2:skip");
        let cfg = TrainConfig {
            epochs: 0,
            seed: 2,
            ..TrainConfig::default()
        };
        let res = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        assert_eq!(res.epochs_run, 0);
        // Untrained accuracy sits within wide binomial noise of 1/2.
        assert!(res.test_accuracy > 0.15 && res.test_accuracy < 0.85);
    }

    #[test]
    fn training_is_deterministic() {
        let space = preset("toy-mlp").unwrap();
        let ds = make_dataset(DatasetKind::Spiral, 60, 2, 0.1, 5).unwrap();
        let arch = ArchId::from("e0:linear_relu|e1:linear_relu|e2:linear_relu");
        let cfg = TrainConfig {
            epochs: 50,
            seed: 7,
            ..TrainConfig::default()
        };
        let a = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        let b = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        assert_eq!(a.test_accuracy, b.test_accuracy);
        assert_eq!(a.final_loss, b.final_loss);
        assert_eq!(a.epochs_run, b.epochs_run);
    }

    #[test]
    fn absurd_learning_rate_is_flagged_as_divergence() {
        let space = preset("toy-mlp").unwrap();
        let ds = make_dataset(DatasetKind::Spiral, 60, 2, 0.1, 8).unwrap();
        let arch = ArchId::from("e0:linear_relu|e1:linear_relu|e2:linear_relu");
        let cfg = TrainConfig {
            epochs: 200,
            lr: 1e9,
            seed: 9,
            ..TrainConfig::default()
        };
        let res = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        assert!(res.diverged);
        assert_eq!(res.test_accuracy, 0.0);
    }

    #[test]
    fn all_zero_architecture_stays_at_chance_without_diverging() {
        let space = preset("toy-mlp").unwrap();
        let ds = make_dataset(DatasetKind::Gaussians, 40, 2, 0.2, 6).unwrap();
        let arch = ArchId::from("e0:zero|e1:zero|e2:zero");
        let cfg = TrainConfig {
            epochs: 20,
            seed: 3,
            ..TrainConfig::default()
        };
        let res = train_oracle(&space, &arch, &ds, &cfg).unwrap();
        assert!(!res.diverged);
        assert!(res.final_loss.is_finite());
    }
}
