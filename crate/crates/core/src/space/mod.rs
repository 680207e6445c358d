//! Cell-based search spaces: DAG topology with per-edge candidate operator
//! sets, supernet construction, pruning, architecture encoding and cell
//! statistics.

mod build;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

fn default_input_nodes() -> Vec<usize> {
    vec![0]
}

fn default_target() -> usize {
    1
}

/// One directed cell edge; `from < to` keeps the graph acyclic by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
}

/// Candidate operator kinds assignable to an edge. Channel counts and strides
/// come from the edge's position in the stacked network, not from the
/// operator itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpKind {
    Zero,
    Skip,
    Relu,
    Conv {
        kernel: usize,
        #[serde(default = "default_true")]
        relu: bool,
    },
    SepConv { kernel: usize },
    DilConv { kernel: usize },
    AvgPool { kernel: usize },
    MaxPool { kernel: usize },
    Linear {
        #[serde(default = "default_true")]
        relu: bool,
    },
}

impl OpKind {
    pub fn is_zero(&self) -> bool {
        matches!(self, OpKind::Zero)
    }

    fn needs_image(&self) -> bool {
        matches!(
            self,
            OpKind::Conv { .. }
                | OpKind::SepConv { .. }
                | OpKind::DilConv { .. }
                | OpKind::AvgPool { .. }
                | OpKind::MaxPool { .. }
        )
    }

    fn needs_vector(&self) -> bool {
        matches!(self, OpKind::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: OpKind,
}

/// How cells stack into a scorable network: a parameter-bearing stem feeds
/// `cells` copies of the cell; cells listed in `reductions` halve the spatial
/// size and double the channel count; a global average pool (images only)
/// feeds a bias-free linear classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stacking {
    pub cells: usize,
    pub channels: usize,
    #[serde(default)]
    pub reductions: Vec<usize>,
    pub input_shape: Vec<usize>,
    pub classes: usize,
    /// Biases on stem and operator layers (the classifier never has one).
    #[serde(default = "default_true")]
    pub bias: bool,
    /// Insert batch standardization after parameter-bearing operators.
    /// Statistics are constants under differentiation.
    #[serde(default)]
    pub norm: bool,
}

/// JSON-compatible description of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub nodes: usize,
    #[serde(default = "default_input_nodes")]
    pub input_nodes: Vec<usize>,
    #[serde(default)]
    pub output_node: Option<usize>,
    pub edges: Vec<EdgeSpec>,
    pub operators: Vec<OperatorSpec>,
    pub stacking: Stacking,
    #[serde(default = "default_target")]
    pub target_ops_per_edge: usize,
}

impl SpaceConfig {
    pub fn output(&self) -> usize {
        self.output_node.unwrap_or(self.nodes - 1)
    }

    pub fn is_image(&self) -> bool {
        self.stacking.input_shape.len() == 3
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        self.operators.iter().position(|o| o.name == name)
    }

    pub fn from_json(text: &str) -> Result<SpaceConfig> {
        let cfg: SpaceConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad space JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space config serializes")
    }

    /// Structural validation: acyclic ordered edges, connected intermediate
    /// nodes, unique operator names compatible with the input rank.
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Config("a cell needs at least 2 nodes".into()));
        }
        let output = self.output();
        if output != self.nodes - 1 {
            return Err(Error::Config(format!(
                "output node must be the last node ({}), got {output}",
                self.nodes - 1
            )));
        }
        if self.input_nodes.is_empty() {
            return Err(Error::Config("at least one input node is required".into()));
        }
        for &i in &self.input_nodes {
            if i >= self.nodes {
                return Err(Error::Config(format!("input node {i} out of range")));
            }
            if i == output {
                return Err(Error::Config("output node cannot be an input".into()));
            }
        }
        if self.edges.is_empty() {
            return Err(Error::Config("a cell needs at least one edge".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.from >= e.to {
                return Err(Error::Config(format!(
                    "edge {}->{} is not forward (from < to rules out cycles)",
                    e.from, e.to
                )));
            }
            if e.to >= self.nodes {
                return Err(Error::Config(format!("edge {}->{} out of range", e.from, e.to)));
            }
            if self.input_nodes.contains(&e.to) {
                return Err(Error::Config(format!(
                    "edge {}->{} ends at an input node",
                    e.from, e.to
                )));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::Config(format!("duplicate edge {}->{}", e.from, e.to)));
            }
        }

        // Reachability: every intermediate node must sit on an input-to-output
        // path; otherwise it is an orphan.
        let n = self.nodes;
        let mut from_input = vec![false; n];
        for &i in &self.input_nodes {
            from_input[i] = true;
        }
        for to in 0..n {
            for e in self.edges.iter().filter(|e| e.to == to) {
                if from_input[e.from] {
                    from_input[to] = true;
                }
            }
        }
        let output_has_edges = self.edges.iter().any(|e| e.to == output);
        let mut to_output = vec![false; n];
        to_output[output] = true;
        if !output_has_edges {
            // The output aggregates every intermediate node directly.
            for (i, reaches) in to_output.iter_mut().enumerate() {
                if !self.input_nodes.contains(&i) && i != output {
                    *reaches = true;
                }
            }
        }
        for from in (0..n).rev() {
            for e in self.edges.iter().filter(|e| e.from == from) {
                if to_output[e.to] {
                    to_output[from] = true;
                }
            }
        }
        for i in 0..n {
            let intermediate = !self.input_nodes.contains(&i) && i != output;
            if intermediate && (!from_input[i] || !to_output[i]) {
                return Err(Error::Config(format!(
                    "node {i} is not on any input-to-output path"
                )));
            }
        }
        if !output_has_edges {
            let has_intermediate = (0..n).any(|i| !self.input_nodes.contains(&i) && i != output);
            if !has_intermediate {
                return Err(Error::Config(
                    "output node has no incoming edges and no intermediate nodes to aggregate"
                        .into(),
                ));
            }
        }
        if output_has_edges && !from_input[output] {
            return Err(Error::Config("output node is unreachable".into()));
        }

        if self.operators.is_empty() {
            return Err(Error::Config("operator list is empty".into()));
        }
        let mut names = std::collections::HashSet::new();
        for opspec in &self.operators {
            if opspec.name.is_empty()
                || !opspec
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Config(format!(
                    "operator name `{}` may only use [a-zA-Z0-9_-]",
                    opspec.name
                )));
            }
            if !names.insert(opspec.name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate operator name `{}`",
                    opspec.name
                )));
            }
        }
        if self.target_ops_per_edge < 1 || self.target_ops_per_edge > self.operators.len() {
            return Err(Error::Config(format!(
                "target_ops_per_edge must be in 1..={}",
                self.operators.len()
            )));
        }

        let st = &self.stacking;
        if st.cells < 1 || st.channels < 1 || st.classes < 1 {
            return Err(Error::Config("cells, channels and classes must be >= 1".into()));
        }
        match st.input_shape.len() {
            1 => {
                if st.input_shape[0] == 0 {
                    return Err(Error::Config("input dimension must be >= 1".into()));
                }
                if !st.reductions.is_empty() {
                    return Err(Error::Config(
                        "reduction cells are only defined for image inputs".into(),
                    ));
                }
                if let Some(opspec) = self.operators.iter().find(|o| o.kind.needs_image()) {
                    return Err(Error::Config(format!(
                        "operator `{}` needs an image input shape",
                        opspec.name
                    )));
                }
            }
            3 => {
                if st.input_shape.contains(&0) {
                    return Err(Error::Config("image dimensions must be >= 1".into()));
                }
                if let Some(opspec) = self.operators.iter().find(|o| o.kind.needs_vector()) {
                    return Err(Error::Config(format!(
                        "operator `{}` needs a vector input shape",
                        opspec.name
                    )));
                }
                for &r in &st.reductions {
                    if r >= st.cells {
                        return Err(Error::Config(format!("reduction index {r} out of range")));
                    }
                }
            }
            _ => {
                return Err(Error::Config(
                    "input_shape must be [dim] or [channels, height, width]".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Canonical single-path architecture string: `e0:op|e1:op|...` with the
/// retained operator names per edge in edge order (several names joined by
/// `+` when the target is above one).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchId(String);

impl ArchId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArchId {
    fn from(s: &str) -> Self {
        ArchId(s.to_string())
    }
}

/// A supernet: the cell topology plus the still-unpruned candidate operators
/// on every edge. Values are immutable; pruning returns a new supernet.
#[derive(Debug, Clone)]
pub struct SuperNet {
    space: Arc<SpaceConfig>,
    /// Per edge: retained operator indices into the space's registry, in
    /// registry order.
    candidates: Vec<Vec<usize>>,
}

/// Builds the full supernet with every operator on every edge.
pub fn build_supernet(cfg: &SpaceConfig) -> Result<SuperNet> {
    cfg.validate()?;
    let all: Vec<usize> = (0..cfg.operators.len()).collect();
    Ok(SuperNet {
        space: Arc::new(cfg.clone()),
        candidates: vec![all; cfg.edges.len()],
    })
}

impl SuperNet {
    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    pub fn edge_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidates(&self, edge: usize) -> &[usize] {
        &self.candidates[edge]
    }

    /// Total number of (edge, operator) slots still present.
    pub fn slots(&self) -> usize {
        self.candidates.iter().map(|c| c.len()).sum()
    }

    pub fn target(&self) -> usize {
        self.space.target_ops_per_edge
    }

    /// Removes the candidate at position `op_index` of `edge`'s list.
    /// Rejected if the edge would fall below the target floor.
    pub fn prune_operator(&self, edge: usize, op_index: usize) -> Result<SuperNet> {
        if edge >= self.candidates.len() {
            return Err(Error::Config(format!("edge e{edge} out of range")));
        }
        if self.candidates[edge].len() <= self.target() {
            return Err(Error::PruneBelowFloor {
                edge,
                floor: self.target(),
            });
        }
        if op_index >= self.candidates[edge].len() {
            return Err(Error::Config(format!(
                "operator index {op_index} out of range on edge e{edge}"
            )));
        }
        let mut next = self.clone();
        next.candidates[edge].remove(op_index);
        Ok(next)
    }

    /// True iff every edge holds exactly the target number of operators.
    pub fn is_single_path(&self) -> bool {
        let t = self.target();
        self.candidates.iter().all(|c| c.len() == t)
    }

    /// Pipe-joined encoding of the current candidate sets. Equals the
    /// [`ArchId`] encoding once single-path.
    pub fn code(&self) -> String {
        self.candidates
            .iter()
            .enumerate()
            .map(|(e, ops)| {
                let names: Vec<&str> = ops
                    .iter()
                    .map(|&o| self.space.operators[o].name.as_str())
                    .collect();
                format!("e{e}:{}", names.join("+"))
            })
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn encode(&self) -> Result<ArchId> {
        if !self.is_single_path() {
            return Err(Error::Config(
                "only single-path networks have an architecture id".into(),
            ));
        }
        Ok(ArchId(self.code()))
    }

    /// Longest input-to-output path length and the number of input-connected
    /// intermediate edges, both counting only non-Zero edges. Requires a
    /// single-path architecture.
    pub fn depth_width(&self) -> Result<(usize, usize)> {
        if !self.is_single_path() {
            return Err(Error::Config(
                "depth/width are defined for single-path architectures".into(),
            ));
        }
        let cfg = self.space();
        let active: Vec<bool> = (0..cfg.edges.len())
            .map(|e| {
                self.candidates[e]
                    .iter()
                    .any(|&o| !cfg.operators[o].kind.is_zero())
            })
            .collect();
        let output = cfg.output();
        let mut dist: Vec<Option<usize>> = vec![None; cfg.nodes];
        for &i in &cfg.input_nodes {
            dist[i] = Some(0);
        }
        for to in 0..cfg.nodes {
            for (eid, e) in cfg.edges.iter().enumerate().filter(|(_, e)| e.to == to) {
                if !active[eid] {
                    continue;
                }
                if let Some(d) = dist[e.from] {
                    dist[to] = Some(dist[to].map_or(d + 1, |cur| cur.max(d + 1)));
                }
            }
        }
        let output_has_edges = cfg.edges.iter().any(|e| e.to == output);
        let depth = if output_has_edges {
            dist[output].unwrap_or(0)
        } else {
            // Fixed aggregation links from intermediates count as one
            // connection each.
            (0..cfg.nodes)
                .filter(|&i| !cfg.input_nodes.contains(&i) && i != output)
                .filter_map(|i| dist[i])
                .max()
                .map_or(0, |d| d + 1)
        };
        let width = cfg
            .edges
            .iter()
            .enumerate()
            .filter(|(eid, e)| {
                active[*eid] && cfg.input_nodes.contains(&e.from) && e.to != output
            })
            .count();
        Ok((depth, width))
    }
}

/// Parses an [`ArchId`]-style string against a space, validating operator
/// names, edge count and per-edge arity.
pub fn decode(cfg: &SpaceConfig, text: &str) -> Result<SuperNet> {
    cfg.validate()?;
    let parts: Vec<&str> = text.split('|').collect();
    if parts.len() != cfg.edges.len() {
        return Err(Error::Decode(format!(
            "expected {} edges, got {}",
            cfg.edges.len(),
            parts.len()
        )));
    }
    let mut candidates = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        let (head, ops_text) = part
            .split_once(':')
            .ok_or_else(|| Error::Decode(format!("edge {i}: missing `:` in `{part}`")))?;
        if head != format!("e{i}") {
            return Err(Error::Decode(format!(
                "edge {i}: expected label `e{i}`, got `{head}`"
            )));
        }
        let mut ops = Vec::new();
        for name in ops_text.split('+') {
            let idx = cfg
                .op_index(name)
                .ok_or_else(|| Error::Decode(format!("edge {i}: unknown operator `{name}`")))?;
            if ops.contains(&idx) {
                return Err(Error::Decode(format!(
                    "edge {i}: operator `{name}` listed twice"
                )));
            }
            ops.push(idx);
        }
        if ops.len() != cfg.target_ops_per_edge {
            return Err(Error::Decode(format!(
                "edge {i}: expected {} operator(s), got {}",
                cfg.target_ops_per_edge,
                ops.len()
            )));
        }
        ops.sort_unstable();
        candidates.push(ops);
    }
    Ok(SuperNet {
        space: Arc::new(cfg.clone()),
        candidates,
    })
}

/// Number of single-path architectures: the product over edges of
/// C(|operators|, target).
pub fn space_size(cfg: &SpaceConfig) -> u128 {
    let k = cfg.target_ops_per_edge;
    let per_edge = choose(cfg.operators.len(), k);
    let mut total: u128 = 1;
    for _ in &cfg.edges {
        total = total.saturating_mul(per_edge);
    }
    total
}

fn choose(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    num
}

/// All single-path architectures of the space in deterministic order.
pub fn enumerate(cfg: &SpaceConfig) -> Result<Vec<ArchId>> {
    cfg.validate()?;
    let k = cfg.target_ops_per_edge;
    let per_edge: Vec<Vec<usize>> = k_subsets(cfg.operators.len(), k);
    let mut out = Vec::new();
    let mut stack: Vec<usize> = vec![0; cfg.edges.len()];
    loop {
        let code = stack
            .iter()
            .enumerate()
            .map(|(e, &choice)| {
                let names: Vec<&str> = per_edge[choice]
                    .iter()
                    .map(|&o| cfg.operators[o].name.as_str())
                    .collect();
                format!("e{e}:{}", names.join("+"))
            })
            .collect::<Vec<_>>()
            .join("|");
        out.push(ArchId(code));
        // Odometer increment over per-edge choices.
        let mut i = stack.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            stack[i] += 1;
            if stack[i] < per_edge.len() {
                break;
            }
            stack[i] = 0;
        }
    }
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Draws `n` distinct single-path architectures uniformly, deterministic in
/// `seed`. Small spaces are enumerated and shuffled; large ones are sampled
/// with rejection.
pub fn sample_archs(cfg: &SpaceConfig, n: usize, seed: u64) -> Result<Vec<ArchId>> {
    use rand::seq::SliceRandom;
    cfg.validate()?;
    let size = space_size(cfg);
    if (n as u128) > size {
        return Err(Error::Insufficient(format!(
            "requested {n} distinct architectures from a space of {size}"
        )));
    }
    if size <= 4096 {
        let mut all = enumerate(cfg)?;
        let mut rng = crate::rng::rng_from(crate::rng::derive_seed(seed, &["arch-sample"]));
        all.shuffle(&mut rng);
        all.truncate(n);
        return Ok(all);
    }
    let mut rng = crate::rng::rng_from(crate::rng::derive_seed(seed, &["arch-sample"]));
    let k = cfg.target_ops_per_edge;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let code = cfg
            .edges
            .iter()
            .enumerate()
            .map(|(e, _)| {
                let mut picked =
                    rand::seq::index::sample(&mut rng, cfg.operators.len(), k).into_vec();
                picked.sort_unstable();
                let names: Vec<&str> = picked
                    .iter()
                    .map(|&o| cfg.operators[o].name.as_str())
                    .collect();
                format!("e{e}:{}", names.join("+"))
            })
            .collect::<Vec<_>>()
            .join("|");
        if seen.insert(code.clone()) {
            out.push(ArchId(code));
        }
    }
    Ok(out)
}

/// Built-in space presets.
pub fn preset(name: &str) -> Option<SpaceConfig> {
    match name {
        "toy-mlp" => Some(toy_mlp()),
        "nasbench201-like" => Some(nasbench201_like()),
        "darts-like" => Some(darts_like()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["toy-mlp", "nasbench201-like", "darts-like"];

fn op(name: &str, kind: OpKind) -> OperatorSpec {
    OperatorSpec {
        name: name.to_string(),
        kind,
    }
}

/// Three edges, four operators, vector inputs: 64 architectures.
fn toy_mlp() -> SpaceConfig {
    SpaceConfig {
        nodes: 3,
        input_nodes: vec![0],
        output_node: None,
        edges: vec![
            EdgeSpec { from: 0, to: 1 },
            EdgeSpec { from: 0, to: 2 },
            EdgeSpec { from: 1, to: 2 },
        ],
        operators: vec![
            op("zero", OpKind::Zero),
            op("skip", OpKind::Skip),
            op("relu", OpKind::Relu),
            op("linear_relu", OpKind::Linear { relu: true }),
        ],
        stacking: Stacking {
            cells: 1,
            channels: 16,
            reductions: vec![],
            input_shape: vec![2],
            classes: 2,
            bias: true,
            norm: false,
        },
        target_ops_per_edge: 1,
    }
}

/// Four nodes, six edges, five operators; desk-scale stacking.
fn nasbench201_like() -> SpaceConfig {
    SpaceConfig {
        nodes: 4,
        input_nodes: vec![0],
        output_node: None,
        edges: vec![
            EdgeSpec { from: 0, to: 1 },
            EdgeSpec { from: 0, to: 2 },
            EdgeSpec { from: 1, to: 2 },
            EdgeSpec { from: 0, to: 3 },
            EdgeSpec { from: 1, to: 3 },
            EdgeSpec { from: 2, to: 3 },
        ],
        operators: vec![
            op("zero", OpKind::Zero),
            op("skip", OpKind::Skip),
            op(
                "conv1x1",
                OpKind::Conv {
                    kernel: 1,
                    relu: true,
                },
            ),
            op(
                "conv3x3",
                OpKind::Conv {
                    kernel: 3,
                    relu: true,
                },
            ),
            op("avgpool3x3", OpKind::AvgPool { kernel: 3 }),
        ],
        stacking: Stacking {
            cells: 3,
            channels: 8,
            reductions: vec![1],
            input_shape: vec![3, 8, 8],
            classes: 10,
            bias: true,
            norm: false,
        },
        target_ops_per_edge: 1,
    }
}

/// Seven nodes (two inputs, four intermediates, one aggregation output),
/// fourteen searchable edges, eight operators, two retained per edge. Both
/// cell inputs are fed by the previous stage.
fn darts_like() -> SpaceConfig {
    let mut edges = Vec::new();
    for to in 2..6 {
        for from in 0..to {
            edges.push(EdgeSpec { from, to });
        }
    }
    SpaceConfig {
        nodes: 7,
        input_nodes: vec![0, 1],
        output_node: None,
        edges,
        operators: vec![
            op("zero", OpKind::Zero),
            op("skip", OpKind::Skip),
            op("sepconv3x3", OpKind::SepConv { kernel: 3 }),
            op("sepconv5x5", OpKind::SepConv { kernel: 5 }),
            op("dilconv3x3", OpKind::DilConv { kernel: 3 }),
            op("dilconv5x5", OpKind::DilConv { kernel: 5 }),
            op("maxpool3x3", OpKind::MaxPool { kernel: 3 }),
            op("avgpool3x3", OpKind::AvgPool { kernel: 3 }),
        ],
        stacking: Stacking {
            cells: 2,
            channels: 4,
            reductions: vec![1],
            input_shape: vec![3, 8, 8],
            classes: 10,
            bias: true,
            norm: false,
        },
        target_ops_per_edge: 2,
    }
}
