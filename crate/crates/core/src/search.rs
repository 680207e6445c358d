//! Pruning-by-importance search.
//!
//! Starting from the full supernet, every round measures how removing each
//! still-prunable operator changes the two scores, ranks all operators
//! globally (Δκ descending, ΔR ascending), combines the two ranks and prunes
//! the rank-minimizing operator on every edge. The loop ends when the
//! supernet is single-path. With the once-per-round baseline this costs at
//! most |O|·E + 1 evaluations per round instead of |O|^E total.
//!
//! All candidate evaluations within one round use the shared seed schedule,
//! so the same input batches and per-parameter weights back every delta.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    count_regions_with_inputs, kappa_delta, kappa_with_inputs, score_with_inputs, MetricConfig,
    SeedSchedule,
};
use crate::rng::derive_seed;
use crate::space::{build_supernet, space_size, ArchId, SpaceConfig, SuperNet};
use crate::tensor::Tensor;

/// How the two rank scores combine into one importance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// s = s_κ + s_R (default).
    SumRank,
    /// s = min(s_κ, s_R): prune by the worst case.
    MinRank,
    /// s = max(s_κ, s_R): prune by the best case.
    MaxRank,
    /// s = Δκ + ΔR on the raw values, no ranking.
    RawSum,
}

impl Strategy {
    pub fn parse(text: &str) -> Result<Strategy> {
        match text {
            "sum-rank" => Ok(Strategy::SumRank),
            "min-rank" => Ok(Strategy::MinRank),
            "max-rank" => Ok(Strategy::MaxRank),
            "raw-sum" => Ok(Strategy::RawSum),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected sum-rank, min-rank, max-rank or raw-sum)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::SumRank => "sum-rank",
            Strategy::MinRank => "min-rank",
            Strategy::MaxRank => "max-rank",
            Strategy::RawSum => "raw-sum",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub region_samples: usize,
    pub repeats: usize,
    pub base_seed: u64,
    /// Parallelism hint; candidate evaluations within a round are
    /// independent, results are reduced in order either way.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::SumRank,
            batch_size: 32,
            region_samples: 3000,
            repeats: 3,
            base_seed: 0,
            jobs: None,
        }
    }
}

impl SearchConfig {
    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            batch_size: self.batch_size,
            region_samples: self.region_samples,
            repeats: self.repeats,
            ..MetricConfig::default()
        }
    }
}

/// Score deltas for one prunable operator.
#[derive(Debug, Clone, Copy)]
pub struct DeltaRow {
    pub edge: usize,
    /// Operator index in the space registry.
    pub op: usize,
    /// Position in the edge's current candidate list.
    pub cand_pos: usize,
    pub delta_kappa: f64,
    pub delta_r: f64,
}

#[derive(Debug, Clone)]
pub struct ImportanceRow {
    pub edge: usize,
    pub op: usize,
    pub cand_pos: usize,
    pub delta_kappa: f64,
    pub delta_r: f64,
    pub s_kappa: usize,
    pub s_r: usize,
    pub s: f64,
}

/// Global importance ranking of every evaluated operator. Rank ties are
/// broken by (edge, operator) order.
#[derive(Debug, Clone)]
pub struct ImportanceTable {
    pub rows: Vec<ImportanceRow>,
    pub strategy: Strategy,
}

/// Assigns rank scores: s_κ is the row's position in the list sorted by Δκ
/// descending, s_R its position sorted by ΔR ascending.
pub fn build_importance(deltas: &[DeltaRow], strategy: Strategy) -> ImportanceTable {
    let n = deltas.len();
    let mut by_kappa: Vec<usize> = (0..n).collect();
    by_kappa.sort_by(|&a, &b| {
        deltas[b]
            .delta_kappa
            .total_cmp(&deltas[a].delta_kappa)
            .then_with(|| (deltas[a].edge, deltas[a].op).cmp(&(deltas[b].edge, deltas[b].op)))
    });
    let mut by_r: Vec<usize> = (0..n).collect();
    by_r.sort_by(|&a, &b| {
        deltas[a]
            .delta_r
            .total_cmp(&deltas[b].delta_r)
            .then_with(|| (deltas[a].edge, deltas[a].op).cmp(&(deltas[b].edge, deltas[b].op)))
    });
    let mut s_kappa = vec![0usize; n];
    let mut s_r = vec![0usize; n];
    for (pos, &idx) in by_kappa.iter().enumerate() {
        s_kappa[idx] = pos;
    }
    for (pos, &idx) in by_r.iter().enumerate() {
        s_r[idx] = pos;
    }
    let rows = deltas
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let s = match strategy {
                Strategy::SumRank => (s_kappa[i] + s_r[i]) as f64,
                Strategy::MinRank => s_kappa[i].min(s_r[i]) as f64,
                Strategy::MaxRank => s_kappa[i].max(s_r[i]) as f64,
                Strategy::RawSum => d.delta_kappa + d.delta_r,
            };
            ImportanceRow {
                edge: d.edge,
                op: d.op,
                cand_pos: d.cand_pos,
                delta_kappa: d.delta_kappa,
                delta_r: d.delta_r,
                s_kappa: s_kappa[i],
                s_r: s_r[i],
                s,
            }
        })
        .collect();
    ImportanceTable { rows, strategy }
}

impl ImportanceTable {
    /// The s-minimizing operator of each edge present in the table (ties go
    /// to the earlier row, i.e. the lower operator index).
    pub fn argmin_per_edge(&self) -> Vec<&ImportanceRow> {
        let mut best: Vec<&ImportanceRow> = Vec::new();
        for row in &self.rows {
            match best.iter_mut().find(|r| r.edge == row.edge) {
                Some(slot) => {
                    if row.s < slot.s {
                        *slot = row;
                    }
                }
                None => best.push(row),
            }
        }
        best
    }
}

/// One pruning-round log entry. Round 0 is the unpruned supernet. Wall time
/// is measured but not serialized, keeping trajectory files byte-identical
/// across reruns with the same seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub round: usize,
    pub supernet: String,
    #[serde(with = "crate::metrics::kappa_repr")]
    pub kappa_mean: f64,
    pub r_hat: f64,
    pub pruned: Vec<(String, String)>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub final_arch: ArchId,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Metric evaluations per trajectory record: 1 for the round-0 baseline,
    /// then (candidates evaluated) + 1 for every pruning round.
    pub evals_per_round: Vec<usize>,
}

/// Fixed input tensors shared by every evaluation of one search run.
struct SharedInputs {
    region: Tensor,
}

fn make_shared_inputs(template_shape: &[usize], cfg: &SearchConfig) -> SharedInputs {
    let schedule = SeedSchedule::shared(cfg.base_seed);
    let mut shape = vec![cfg.region_samples];
    shape.extend_from_slice(template_shape);
    SharedInputs {
        region: crate::rng::normal_tensor(&shape, schedule.data_seed("region", None)),
    }
}

/// κ mean and R̂ of one supernet state under the shared schedule.
fn evaluate_supernet(
    net: &SuperNet,
    cfg: &SearchConfig,
    shared: &SharedInputs,
) -> Result<(f64, f64)> {
    let network = net.build_network()?;
    let schedule = SeedSchedule::shared(cfg.base_seed);
    let metric_cfg = cfg.metric_config();
    let ntk = kappa_with_inputs(&network, &metric_cfg, &schedule, None)?;
    let regions = count_regions_with_inputs(&network, &metric_cfg, &schedule, Some(&shared.region))?;
    Ok((ntk.kappa_mean, regions.r_hat))
}

/// Δκ and ΔR for pruning one operator: baseline minus the pruned supernet's
/// scores, computed under the shared schedule so the change isolates the
/// removed operator.
pub fn delta_metrics(
    net: &SuperNet,
    edge: usize,
    cand_pos: usize,
    baseline: (f64, f64),
    cfg: &SearchConfig,
) -> Result<(f64, f64)> {
    let shared = make_shared_inputs(&net.space().stacking.input_shape, cfg);
    delta_metrics_inner(net, edge, cand_pos, baseline, cfg, &shared)
}

fn delta_metrics_inner(
    net: &SuperNet,
    edge: usize,
    cand_pos: usize,
    baseline: (f64, f64),
    cfg: &SearchConfig,
    shared: &SharedInputs,
) -> Result<(f64, f64)> {
    let pruned = net.prune_operator(edge, cand_pos)?;
    let (k, r) = evaluate_supernet(&pruned, cfg, shared)?;
    Ok((kappa_delta(baseline.0, k), baseline.1 - r))
}

struct RoundOutcome {
    net: SuperNet,
    record: TrajectoryRecord,
    evals: usize,
}

/// One outer-loop round: evaluate every prunable operator, rank globally,
/// prune the per-edge argmin. Edges already at the floor are skipped.
fn prune_round(
    net: &SuperNet,
    round: usize,
    baseline: (f64, f64),
    cfg: &SearchConfig,
    shared: &SharedInputs,
) -> Result<RoundOutcome> {
    let start = Instant::now();
    let floor = net.target();
    let mut todo: Vec<(usize, usize, usize)> = Vec::new();
    for e in 0..net.edge_count() {
        if net.candidates(e).len() > floor {
            for (pos, &op) in net.candidates(e).iter().enumerate() {
                todo.push((e, op, pos));
            }
        }
    }
    let deltas: Vec<DeltaRow> = todo
        .par_iter()
        .map(|&(edge, op, cand_pos)| {
            let (dk, dr) = delta_metrics_inner(net, edge, cand_pos, baseline, cfg, shared)?;
            Ok(DeltaRow {
                edge,
                op,
                cand_pos,
                delta_kappa: dk,
                delta_r: dr,
            })
        })
        .collect::<Result<_>>()?;
    let table = build_importance(&deltas, cfg.strategy);

    let mut next = net.clone();
    let mut pruned_names = Vec::new();
    for row in table.argmin_per_edge() {
        let pos = next
            .candidates(row.edge)
            .iter()
            .position(|&o| o == row.op)
            .ok_or_else(|| Error::Internal("selected operator vanished".to_string()))?;
        next = next.prune_operator(row.edge, pos)?;
        pruned_names.push((
            format!("e{}", row.edge),
            net.space().operators[row.op].name.clone(),
        ));
    }
    let (k, r) = evaluate_supernet(&next, cfg, shared)?;
    let record = TrajectoryRecord {
        round,
        supernet: next.code(),
        kappa_mean: k,
        r_hat: r,
        pruned: pruned_names,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(RoundOutcome {
        net: next,
        record,
        evals: deltas.len() + 1,
    })
}

/// Runs the pruning loop to a single-path architecture. On a space with |O|
/// candidates per edge and target k this takes exactly |O| − k rounds.
/// Deterministic for a fixed base seed.
pub fn run_search(space: &SpaceConfig, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let mut net = build_supernet(space)?;
    let shared = make_shared_inputs(&space.stacking.input_shape, cfg);
    let start = Instant::now();
    let baseline = evaluate_supernet(&net, cfg, &shared)?;
    let mut trajectory = vec![TrajectoryRecord {
        round: 0,
        supernet: net.code(),
        kappa_mean: baseline.0,
        r_hat: baseline.1,
        pruned: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
    }];
    let mut evals_per_round = vec![1usize];
    let mut baseline = baseline;
    let mut round = 1;
    while !net.is_single_path() {
        let outcome = prune_round(&net, round, baseline, cfg, &shared)?;
        baseline = (outcome.record.kappa_mean, outcome.record.r_hat);
        net = outcome.net;
        trajectory.push(outcome.record);
        evals_per_round.push(outcome.evals);
        round += 1;
    }
    Ok(SearchOutcome {
        final_arch: net.encode()?,
        trajectory,
        evals_per_round,
    })
}

#[derive(Debug, Clone)]
pub struct BaselineRow {
    pub arch: ArchId,
    pub kappa: f64,
    pub r_hat: f64,
    pub rank_sum: usize,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub best: ArchId,
    pub rows: Vec<BaselineRow>,
    /// True when the budget exceeded the space size and was clipped.
    pub clipped: bool,
}

/// Comparison baseline: samples `budget` distinct single-path architectures
/// uniformly, scores each under its own per-architecture schedule and returns
/// the one minimizing rank(κ ascending) + rank(R̂ descending).
pub fn random_search_baseline(
    space: &SpaceConfig,
    budget: usize,
    seed: u64,
    metric_cfg: &MetricConfig,
) -> Result<BaselineOutcome> {
    if budget < 1 {
        return Err(Error::Config("budget must be >= 1".into()));
    }
    space.validate()?;
    let size = space_size(space);
    let clipped = (budget as u128) > size;
    let n = if clipped { size as usize } else { budget };
    let archs = crate::space::sample_archs(space, n, derive_seed(seed, &["random-search"]))?;

    let scores: Vec<(f64, f64)> = archs
        .par_iter()
        .map(|arch| {
            let net = crate::space::decode(space, arch.as_str())?.build_network()?;
            let schedule = SeedSchedule::per_arch(seed, arch);
            let (ntk, regions) = score_with_inputs(&net, metric_cfg, &schedule, None, None)?;
            Ok((ntk.kappa_mean, regions.r_hat))
        })
        .collect::<Result<_>>()?;

    let m = archs.len();
    let mut by_kappa: Vec<usize> = (0..m).collect();
    by_kappa.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0).then(a.cmp(&b)));
    let mut by_r: Vec<usize> = (0..m).collect();
    by_r.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1).then(a.cmp(&b)));
    let mut rank_sum = vec![0usize; m];
    for (pos, &i) in by_kappa.iter().enumerate() {
        rank_sum[i] += pos;
    }
    for (pos, &i) in by_r.iter().enumerate() {
        rank_sum[i] += pos;
    }
    let best_idx = (0..m).min_by_key(|&i| (rank_sum[i], i)).unwrap();
    let rows = (0..m)
        .map(|i| BaselineRow {
            arch: archs[i].clone(),
            kappa: scores[i].0,
            r_hat: scores[i].1,
            rank_sum: rank_sum[i],
        })
        .collect();
    Ok(BaselineOutcome {
        best: archs[best_idx].clone(),
        rows,
        clipped,
    })
}
