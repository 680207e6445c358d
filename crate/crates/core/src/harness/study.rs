//! End-to-end correlation study: score architectures, obtain ground-truth
//! accuracies (oracle training or an ingested table) and report Kendall taus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::bench::BenchmarkTable;
use crate::harness::dataset::{make_dataset, DatasetKind};
use crate::harness::kendall::kendall_tau;
use crate::harness::trainer::{train_oracle, TrainConfig};
use crate::metrics::{score, MetricConfig, SeedSchedule};
use crate::rng::derive_seed;
use crate::space::{decode, sample_archs, space_size, ArchId, SpaceConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Architectures to study; the space is enumerated when it is smaller.
    pub max_archs: usize,
    pub metric: MetricConfig,
    pub train: TrainConfig,
    pub dataset: DatasetKind,
    pub dataset_size: usize,
    pub noise: f64,
    pub base_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            max_archs: 32,
            metric: MetricConfig {
                batch_size: 16,
                region_samples: 1000,
                repeats: 3,
                ..MetricConfig::default()
            },
            train: TrainConfig::default(),
            dataset: DatasetKind::Spiral,
            dataset_size: 200,
            noise: 0.12,
            base_seed: 0,
        }
    }
}

/// Kendall taus of κ, R̂ and the combined rank score against accuracy.
/// The combined score per architecture is rank(κ ascending) plus
/// rank(R̂ descending), so a *negative* tau_combined means the combined
/// ranking prefers accurate architectures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub tau_kappa: f64,
    pub tau_r: f64,
    pub tau_combined: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub arch: ArchId,
    #[serde(with = "crate::metrics::kappa_repr")]
    pub kappa: f64,
    pub r_hat: f64,
    pub combined_rank: f64,
    pub accuracy: f64,
}

/// Scores and trains every studied architecture. Deterministic end to end
/// for a fixed config.
pub fn correlation_study(
    space: &SpaceConfig,
    cfg: &StudyConfig,
) -> Result<(CorrelationReport, Vec<StudyRow>)> {
    let archs = pick_archs(space, cfg.max_archs, cfg.base_seed)?;
    let ds = make_dataset(
        cfg.dataset,
        cfg.dataset_size,
        space.stacking.classes,
        cfg.noise,
        derive_seed(cfg.base_seed, &["study-data"]),
    )?;
    let rows: Vec<(f64, f64, f64)> = archs
        .par_iter()
        .map(|arch| {
            let net = decode(space, arch.as_str())?.build_network()?;
            let schedule = SeedSchedule::per_arch(cfg.base_seed, arch);
            let (ntk, regions) = score(&net, &cfg.metric, &schedule)?;
            let train_cfg = TrainConfig {
                seed: derive_seed(cfg.base_seed, &[arch.as_str(), "train"]),
                ..cfg.train.clone()
            };
            let trained = train_oracle(space, arch, &ds, &train_cfg)?;
            let acc = if trained.diverged {
                0.0
            } else {
                trained.test_accuracy
            };
            Ok((ntk.kappa_mean, regions.r_hat, acc))
        })
        .collect::<Result<_>>()?;
    assemble(archs, rows)
}

/// Same report, but accuracies come from an ingested table instead of oracle
/// training. Only table rows are studied.
pub fn correlation_with_benchmark(
    space: &SpaceConfig,
    table: &BenchmarkTable,
    metric: &MetricConfig,
    base_seed: u64,
) -> Result<(CorrelationReport, Vec<StudyRow>)> {
    let archs: Vec<ArchId> = table.iter().map(|(a, _)| a.clone()).collect();
    if archs.len() < 10 {
        return Err(Error::Insufficient(format!(
            "correlation study needs at least 10 architectures, table has {}",
            archs.len()
        )));
    }
    let rows: Vec<(f64, f64, f64)> = archs
        .par_iter()
        .map(|arch| {
            let net = decode(space, arch.as_str())?.build_network()?;
            let schedule = SeedSchedule::per_arch(base_seed, arch);
            let (ntk, regions) = score(&net, metric, &schedule)?;
            let acc = table.get(arch).map(|(t, _)| t).unwrap_or(0.0);
            Ok((ntk.kappa_mean, regions.r_hat, acc))
        })
        .collect::<Result<_>>()?;
    assemble(archs, rows)
}

fn pick_archs(space: &SpaceConfig, max_archs: usize, seed: u64) -> Result<Vec<ArchId>> {
    if max_archs < 10 {
        return Err(Error::Insufficient(
            "correlation study needs at least 10 architectures".into(),
        ));
    }
    let size = space_size(space);
    let n = (max_archs as u128).min(size) as usize;
    if n < 10 {
        return Err(Error::Insufficient(format!(
            "space holds only {size} architectures; at least 10 are needed"
        )));
    }
    sample_archs(space, n, derive_seed(seed, &["study-archs"]))
}

fn assemble(
    archs: Vec<ArchId>,
    rows: Vec<(f64, f64, f64)>,
) -> Result<(CorrelationReport, Vec<StudyRow>)> {
    let n = archs.len();
    let kappas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let r_hats: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let accs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let combined = combined_ranks(&kappas, &r_hats);
    let report = CorrelationReport {
        tau_kappa: kendall_tau(&kappas, &accs)?,
        tau_r: kendall_tau(&r_hats, &accs)?,
        tau_combined: kendall_tau(&combined, &accs)?,
        n,
    };
    let out = archs
        .into_iter()
        .enumerate()
        .map(|(i, arch)| StudyRow {
            arch,
            kappa: kappas[i],
            r_hat: r_hats[i],
            combined_rank: combined[i],
            accuracy: accs[i],
        })
        .collect();
    Ok((report, out))
}

/// rank(κ ascending) + rank(R̂ descending); low is good on both axes.
pub fn combined_ranks(kappas: &[f64], r_hats: &[f64]) -> Vec<f64> {
    let n = kappas.len();
    let mut by_kappa: Vec<usize> = (0..n).collect();
    by_kappa.sort_by(|&a, &b| kappas[a].total_cmp(&kappas[b]).then(a.cmp(&b)));
    let mut by_r: Vec<usize> = (0..n).collect();
    by_r.sort_by(|&a, &b| r_hats[b].total_cmp(&r_hats[a]).then(a.cmp(&b)));
    let mut combined = vec![0.0; n];
    for (pos, &i) in by_kappa.iter().enumerate() {
        combined[i] += pos as f64;
    }
    for (pos, &i) in by_r.iter().enumerate() {
        combined[i] += pos as f64;
    }
    combined
}
