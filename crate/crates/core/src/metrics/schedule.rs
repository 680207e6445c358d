//! Seed schedules, measurement configuration, the bundled score entry point
//! and the raw tensor file format.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ntk::{kappa_with_inputs, NtkReport};
use crate::metrics::regions::{count_regions_with_inputs, RegionReport};
use crate::nn::{JacobianMode, Network};
use crate::rng::derive_seed;
use crate::space::ArchId;
use crate::tensor::Tensor;

/// Knobs shared by both measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    pub batch_size: usize,
    pub region_samples: usize,
    pub repeats: usize,
    #[serde(default = "default_mode")]
    pub ntk_mode: JacobianMode,
}

fn default_mode() -> JacobianMode {
    JacobianMode::SumLogits
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            batch_size: 32,
            region_samples: 3000,
            repeats: 3,
            ntk_mode: JacobianMode::SumLogits,
        }
    }
}

/// How seeds derive for (metric, repeat, tensor) triples.
///
/// * `PerArch` keys every seed on the architecture id, so two distinct
///   architectures share no derived seeds. Used for standalone scoring.
/// * `Shared` keys seeds on parameter names only, so networks that share an
///   operator get bit-identical weights for it. Candidate evaluations inside
///   one pruning round use this: the delta then isolates the removed
///   operator, and pruning a Zero operator changes nothing at all.
#[derive(Debug, Clone)]
pub enum SeedSchedule {
    PerArch { base: u64, arch: String },
    Shared { base: u64 },
}

impl SeedSchedule {
    pub fn per_arch(base: u64, arch: &ArchId) -> Self {
        SeedSchedule::PerArch {
            base,
            arch: arch.as_str().to_string(),
        }
    }

    pub fn shared(base: u64) -> Self {
        SeedSchedule::Shared { base }
    }

    pub fn param_seed(&self, metric: &str, repeat: usize, tensor: &str) -> u64 {
        match self {
            SeedSchedule::PerArch { base, arch } => {
                let rm = derive_seed(*base, &[arch, metric, &repeat.to_string()]);
                derive_seed(rm, &["param", tensor])
            }
            SeedSchedule::Shared { base } => derive_seed(
                *base,
                &["shared", metric, "param", &repeat.to_string(), tensor],
            ),
        }
    }

    pub fn data_seed(&self, metric: &str, repeat: Option<usize>) -> u64 {
        match self {
            SeedSchedule::PerArch { base, arch } => match repeat {
                Some(r) => {
                    let rm = derive_seed(*base, &[arch, metric, &r.to_string()]);
                    derive_seed(rm, &["data"])
                }
                None => derive_seed(*base, &[arch, metric, "data"]),
            },
            SeedSchedule::Shared { base } => match repeat {
                Some(r) => derive_seed(*base, &["shared", metric, "data", &r.to_string()]),
                None => derive_seed(*base, &["shared", metric, "data"]),
            },
        }
    }
}

/// Re-initializes a network for one measurement repeat under the schedule.
pub fn init_for_repeat(net: &mut Network, schedule: &SeedSchedule, metric: &str, repeat: usize) {
    net.init_params(|name| schedule.param_seed(metric, repeat, name));
}

/// Both measurements with one seed schedule. Deterministic for a fixed
/// schedule; cost is independent of the size of the architecture space.
pub fn score(
    template: &Network,
    cfg: &MetricConfig,
    schedule: &SeedSchedule,
) -> Result<(NtkReport, RegionReport)> {
    score_with_inputs(template, cfg, schedule, None, None)
}

pub fn score_with_inputs(
    template: &Network,
    cfg: &MetricConfig,
    schedule: &SeedSchedule,
    ntk_inputs: Option<&Tensor>,
    region_inputs: Option<&Tensor>,
) -> Result<(NtkReport, RegionReport)> {
    let ntk = kappa_with_inputs(template, cfg, schedule, ntk_inputs)?;
    let regions = count_regions_with_inputs(template, cfg, schedule, region_inputs)?;
    Ok((ntk, regions))
}

/// Writes a tensor as an ASCII shape line (`dims space-separated\n`) followed
/// by raw little-endian f64 data.
pub fn write_tensor_file(path: &Path, t: &Tensor) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("create {}: {e}", path.display())))?;
    let header: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    f.write_all(header.join(" ").as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::Io(format!("write {}: {e}", path.display())))?;
    let mut bytes = Vec::with_capacity(t.numel() * 8);
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&bytes)
        .map_err(|e| Error::Io(format!("write {}: {e}", path.display())))
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor> {
    let mut f = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("open {}: {e}", path.display())))?;
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)
        .map_err(|e| Error::Io(format!("read {}: {e}", path.display())))?;
    let nl = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Io(format!("{}: missing shape header", path.display())))?;
    let header = std::str::from_utf8(&raw[..nl])
        .map_err(|_| Error::Io(format!("{}: shape header is not UTF-8", path.display())))?;
    let shape: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Io(format!("{}: bad dimension `{t}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let body = &raw[nl + 1..];
    let expect: usize = shape.iter().product();
    if body.len() != expect * 8 {
        return Err(Error::Io(format!(
            "{}: expected {} bytes of f64 data, got {}",
            path.display(),
            expect * 8,
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Io(format!(
            "{}: data contains non-finite values",
            path.display()
        )));
    }
    Tensor::from_vec(&shape, data)
}
