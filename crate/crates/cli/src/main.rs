//! `tenas`: score architectures at initialization, prune supernets down to a
//! single path, and run desk-scale correlation studies.
//!
//! stdout carries only each command's primary result; progress and warnings
//! go to stderr; machine-readable outputs land in a per-run directory next to
//! its manifest.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tenas::error::Error;
use tenas::harness::{
    correlation_study, correlation_with_benchmark, ingest_benchmark, train_test_tau, DatasetKind,
    StudyConfig, TrainConfig,
};
use tenas::metrics::{kappa_to_json, MetricConfig, SeedSchedule};
use tenas::search::{run_search, SearchConfig, Strategy};
use tenas::space::{self, SpaceConfig};

use manifest::RunManifest;

const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Parser)]
#[command(name = "tenas", version, about = "Training-free architecture scoring and search")]
struct Cli {
    /// Parallel worker threads (defaults to the core count).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct MetricArgs {
    /// NTK mini-batch size.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Inputs sampled for region counting.
    #[arg(long, default_value_t = 3000)]
    region_samples: usize,
    /// Independent re-initializations per measurement.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            batch_size: self.batch_size,
            region_samples: self.region_samples,
            repeats: self.repeats,
            ..MetricConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Prune a supernet to a single-path architecture.
    Search {
        /// Space config file or preset name (toy-mlp, nasbench201-like, darts-like).
        #[arg(long)]
        space: String,
        /// Base seed (falls back to $TENAS_SEED, then 0).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_strategy, default_value = "sum-rank")]
        strategy: Strategy,
        #[arg(long)]
        target_ops_per_edge: Option<usize>,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Score one architecture: NTK condition number, region count, cell stats.
    Score {
        #[arg(long)]
        space: String,
        /// Architecture id, e.g. "e0:conv3x3|e1:skip|...".
        #[arg(long)]
        arch: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        target_ops_per_edge: Option<usize>,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Correlate the two scores with ground-truth accuracy.
    Correlate {
        #[arg(long)]
        space: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Architectures to study (enumerates smaller spaces).
        #[arg(long, default_value_t = 32)]
        archs: usize,
        /// Oracle-training dataset: spiral, moons or gaussians.
        #[arg(long, value_parser = parse_dataset, default_value = "spiral")]
        dataset: DatasetKind,
        /// Accuracy table (arch_id,test_accuracy[,train_accuracy] CSV);
        /// replaces oracle training.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// List every single-path architecture of a space.
    Enumerate {
        #[arg(long)]
        space: String,
        #[arg(long)]
        target_ops_per_edge: Option<usize>,
        /// Enumerate even past the one-million-architecture cap.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn parse_strategy(text: &str) -> Result<Strategy, String> {
    Strategy::parse(text).map_err(|e| e.to_string())
}

fn parse_dataset(text: &str) -> Result<DatasetKind, String> {
    DatasetKind::parse(text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("tenas: could not size the thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("tenas: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 = bad input or configuration, 3 = internal invariant violation.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Internal(_) | Error::NotSymmetric { .. } | Error::PruneBelowFloor { .. } => 3,
        _ => 2,
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("TENAS_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn load_space(text: &str, target_override: Option<usize>) -> Result<SpaceConfig, Error> {
    let mut cfg = match space::preset(text) {
        Some(cfg) => cfg,
        None => {
            let raw = std::fs::read_to_string(text)
                .map_err(|e| Error::Io(format!("read space config {text}: {e}")))?;
            SpaceConfig::from_json(&raw)?
        }
    };
    if let Some(t) = target_override {
        cfg.target_ops_per_edge = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Run directories are keyed by command, space label and seed, so a repeated
/// invocation overwrites its previous outputs with identical bytes.
fn run_dir(out_dir: &Path, cmd: &str, space_label: &str, seed: u64) -> Result<PathBuf, Error> {
    let stem = Path::new(space_label)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| space_label.to_string());
    let dir = out_dir.join(format!("{cmd}-{stem}-seed{seed}"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Io(format!("create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Search {
            space,
            seed,
            strategy,
            target_ops_per_edge,
            metric,
            out_dir,
        } => cmd_search(space, seed, strategy, target_ops_per_edge, metric, out_dir),
        Cmd::Score {
            space,
            arch,
            seed,
            target_ops_per_edge,
            metric,
            out_dir,
        } => cmd_score(space, arch, seed, target_ops_per_edge, metric, out_dir),
        Cmd::Correlate {
            space,
            seed,
            archs,
            dataset,
            benchmark,
            metric,
            out_dir,
        } => cmd_correlate(space, seed, archs, dataset, benchmark, metric, out_dir),
        Cmd::Enumerate {
            space,
            target_ops_per_edge,
            force,
            out_dir,
        } => cmd_enumerate(space, target_ops_per_edge, force, out_dir),
    }
}

fn cmd_search(
    space_label: String,
    seed: Option<u64>,
    strategy: Strategy,
    target_override: Option<usize>,
    metric: MetricArgs,
    out_dir: PathBuf,
) -> Result<(), Error> {
    let seed = resolve_seed(seed);
    let space_cfg = load_space(&space_label, target_override)?;
    let search_cfg = SearchConfig {
        strategy,
        batch_size: metric.batch_size,
        region_samples: metric.region_samples,
        repeats: metric.repeats,
        base_seed: seed,
        jobs: None,
    };
    let dir = run_dir(&out_dir, "search", &space_label, seed)?;
    let mut man = RunManifest::begin(
        "search",
        &space_label,
        serde_json::to_value(&search_cfg).unwrap(),
        seed,
    );
    man.write(&dir)?;

    eprintln!("searching `{space_label}` with strategy {}", strategy.name());
    let outcome = run_search(&space_cfg, &search_cfg)?;
    for rec in &outcome.trajectory {
        eprintln!(
            "round {}: kappa_mean = {}, r_hat = {:.2}, pruned {} op(s) in {:.2}s",
            rec.round,
            rec.kappa_mean,
            rec.r_hat,
            rec.pruned.len(),
            rec.wall_time
        );
    }

    let jsonl_path = dir.join("trajectory.jsonl");
    let mut jsonl = String::new();
    for rec in &outcome.trajectory {
        jsonl.push_str(&serde_json::to_string(rec).unwrap());
        jsonl.push('\n');
    }
    std::fs::write(&jsonl_path, jsonl)
        .map_err(|e| Error::Io(format!("write {}: {e}", jsonl_path.display())))?;

    let csv_path = dir.join("trajectory.csv");
    let mut csv = String::from("# manifest: manifest.json\nround,kappa_mean,r_hat\n");
    for rec in &outcome.trajectory {
        csv.push_str(&format!("{},{},{}\n", rec.round, rec.kappa_mean, rec.r_hat));
    }
    std::fs::write(&csv_path, csv)
        .map_err(|e| Error::Io(format!("write {}: {e}", csv_path.display())))?;

    man.finish(&dir, &["trajectory.jsonl", "trajectory.csv"])?;
    println!("{}", outcome.final_arch);
    Ok(())
}

fn cmd_score(
    space_label: String,
    arch_text: String,
    seed: Option<u64>,
    target_override: Option<usize>,
    metric: MetricArgs,
    out_dir: PathBuf,
) -> Result<(), Error> {
    let seed = resolve_seed(seed);
    let space_cfg = load_space(&space_label, target_override)?;
    let arch_net = space::decode(&space_cfg, &arch_text)?;
    let arch = arch_net.encode()?;
    let dir = run_dir(&out_dir, "score", &space_label, seed)?;
    let mut man = RunManifest::begin(
        "score",
        &space_label,
        serde_json::json!({
            "arch": arch.as_str(),
            "metric": metric.config(),
        }),
        seed,
    );
    man.write(&dir)?;

    let network = arch_net.build_network()?;
    let schedule = SeedSchedule::per_arch(seed, &arch);
    let (ntk, regions) = tenas::metrics::score(&network, &metric.config(), &schedule)?;
    let (depth, width) = arch_net.depth_width()?;
    let report = serde_json::json!({
        "arch": arch.as_str(),
        "kappa_mean": kappa_to_json(ntk.kappa_mean),
        "kappa_per_repeat": ntk
            .kappas()
            .iter()
            .map(|&k| kappa_to_json(k))
            .collect::<Vec<_>>(),
        "r_hat": regions.r_hat,
        "counts": regions.counts,
        "relu_units": regions.relu_units,
        "depth": depth,
        "width": width,
    });
    man.finish(&dir, &[])?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_correlate(
    space_label: String,
    seed: Option<u64>,
    archs: usize,
    dataset: DatasetKind,
    benchmark: Option<PathBuf>,
    metric: MetricArgs,
    out_dir: PathBuf,
) -> Result<(), Error> {
    let seed = resolve_seed(seed);
    let space_cfg = load_space(&space_label, None)?;
    let dir = run_dir(&out_dir, "correlate", &space_label, seed)?;
    let mut man = RunManifest::begin(
        "correlate",
        &space_label,
        serde_json::json!({
            "archs": archs,
            "dataset": dataset,
            "benchmark": benchmark.as_ref().map(|p| p.display().to_string()),
            "metric": metric.config(),
        }),
        seed,
    );
    man.write(&dir)?;

    let (report, rows) = match &benchmark {
        Some(path) => {
            let ingest = ingest_benchmark(path, &space_cfg)?;
            for w in &ingest.warnings {
                eprintln!("benchmark: {w}");
            }
            eprintln!("benchmark: {} usable rows", ingest.table.len());
            if let Some(tau) = train_test_tau(&ingest.table) {
                eprintln!("benchmark: kendall tau(train_accuracy, test_accuracy) = {tau:.4}");
            }
            correlation_with_benchmark(&space_cfg, &ingest.table, &metric.config(), seed)?
        }
        None => {
            let cfg = StudyConfig {
                max_archs: archs,
                metric: metric.config(),
                train: TrainConfig::default(),
                dataset,
                base_seed: seed,
                ..StudyConfig::default()
            };
            correlation_study(&space_cfg, &cfg)?
        }
    };

    let csv_path = dir.join("study.csv");
    let mut csv = String::from("# manifest: manifest.json\narch_id,kappa,r_hat,combined_rank,accuracy\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.arch, row.kappa, row.r_hat, row.combined_rank, row.accuracy
        ));
    }
    std::fs::write(&csv_path, csv)
        .map_err(|e| Error::Io(format!("write {}: {e}", csv_path.display())))?;
    man.finish(&dir, &["study.csv"])?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn cmd_enumerate(
    space_label: String,
    target_override: Option<usize>,
    force: bool,
    out_dir: PathBuf,
) -> Result<(), Error> {
    let space_cfg = load_space(&space_label, target_override)?;
    let size = space::space_size(&space_cfg);
    if size > ENUMERATION_CAP && !force {
        return Err(Error::TooLarge(format!(
            "space holds {size} architectures (cap {ENUMERATION_CAP}); pass --force to enumerate anyway"
        )));
    }
    let dir = run_dir(&out_dir, "enumerate", &space_label, 0)?;
    let mut man = RunManifest::begin(
        "enumerate",
        &space_label,
        serde_json::json!({ "force": force, "size": size.to_string() }),
        0,
    );
    man.write(&dir)?;
    let ids = space::enumerate(&space_cfg)?;
    let mut out = String::new();
    for id in &ids {
        out.push_str(id.as_str());
        out.push('\n');
    }
    man.finish(&dir, &[])?;
    print!("{out}");
    Ok(())
}
