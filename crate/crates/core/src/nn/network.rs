//! Static instruction graph: construction, batched forward evaluation and
//! activation-signature capture.
//!
//! A network is a list of primitive instructions in topological order; the
//! value produced by instruction `i` has id `i`. Parameters live in a flat,
//! deterministically ordered list so that Jacobian column `α` is well
//! defined. Batched tensors carry the batch on the first axis.

use crate::error::{Error, Result};
use crate::nn::layer::kaiming_std;
use crate::rng::{fill_normal, rng_from, stable_hash};
use crate::tensor::Tensor;

pub type ValueId = usize;
pub type ParamId = usize;

#[derive(Debug, Clone)]
pub enum ParamInit {
    Kaiming { fan_in: usize },
    Zero,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    pub init: ParamInit,
}

/// Ordered view of all parameters: `(name, tensor)` pairs plus the total
/// element count `P`.
#[derive(Debug, Clone)]
pub struct ParamSet {
    pub entries: Vec<(String, Tensor)>,
    pub total_count: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Prim {
    Input,
    /// Emits zeros of the instruction's output shape.
    Zeros,
    Conv {
        w: ParamId,
        b: Option<ParamId>,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        groups: usize,
    },
    Linear {
        w: ParamId,
        b: Option<ParamId>,
    },
    Relu {
        unit_offset: usize,
    },
    AvgPool {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    GlobalAvgPool,
    /// Spatial subsample by `stride` plus zero-padding of channels up to the
    /// output channel count. Parameter-free reduction used by skip and pool
    /// operators on shape-changing edges.
    Reduce {
        stride: usize,
    },
    /// Elementwise sum of all inputs (equal shapes).
    Sum,
    /// Channel-wise standardization by batch statistics. The statistics are
    /// treated as constants during differentiation.
    BatchNorm {
        eps: f64,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Instr {
    pub prim: Prim,
    pub inputs: Vec<ValueId>,
    /// Per-sample output shape (no batch axis).
    pub out_shape: Vec<usize>,
    #[allow(dead_code)] // diagnostic context, kept in Debug dumps
    pub label: String,
}

/// One bit per ReLU unit of the network, for a single sample: bit = 1 iff the
/// unit's pre-activation is strictly positive (exact zeros count as inactive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationSignature {
    words: Vec<u64>,
    len: usize,
}

impl ActivationSignature {
    pub fn new(len: usize) -> Self {
        ActivationSignature {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// 64-bit content hash; distinct-signature counting buckets by this and
    /// resolves collisions by exact comparison.
    pub fn hash64(&self) -> u64 {
        let mut bytes: Vec<u8> = Vec::with_capacity(self.words.len() * 8 + 8);
        for w in &self.words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        bytes.extend_from_slice(&(self.len as u64).to_le_bytes());
        stable_hash(&[&bytes])
    }
}

/// Result of one batched evaluation.
pub(crate) struct Forward {
    pub values: Vec<Option<Tensor>>,
    pub logits: Tensor,
    pub signatures: Vec<ActivationSignature>,
    /// Per-instruction batch statistics (mean, var) for BatchNorm nodes.
    pub bn_stats: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) input_shape: Vec<usize>,
    pub(crate) classes: usize,
    pub(crate) instrs: Vec<Instr>,
    pub(crate) params: Vec<Param>,
    pub(crate) param_offsets: Vec<usize>,
    pub(crate) param_total: usize,
    pub(crate) relu_units: usize,
    pub(crate) output: ValueId,
    last_use: Vec<usize>,
}

/// Jacobian rows are samples (or sample×class pairs); columns follow the
/// parameter order of [`Network::param_set`].
pub type JacobianMatrix = crate::linalg::Matrix;

pub struct NetworkBuilder {
    input_shape: Vec<usize>,
    instrs: Vec<Instr>,
    params: Vec<Param>,
    relu_units: usize,
}

impl NetworkBuilder {
    /// Starts a network whose single input has the given per-sample shape
    /// (rank 1 for vectors, rank 3 `[channels, height, width]` for images).
    pub fn new(input_shape: &[usize]) -> (Self, ValueId) {
        assert!(
            input_shape.len() == 1 || input_shape.len() == 3,
            "input must be a vector or a CHW image"
        );
        let b = NetworkBuilder {
            input_shape: input_shape.to_vec(),
            instrs: vec![Instr {
                prim: Prim::Input,
                inputs: vec![],
                out_shape: input_shape.to_vec(),
                label: "input".to_string(),
            }],
            params: Vec::new(),
            relu_units: 0,
        };
        (b, 0)
    }

    pub fn value_shape(&self, v: ValueId) -> &[usize] {
        &self.instrs[v].out_shape
    }

    fn push(&mut self, prim: Prim, inputs: Vec<ValueId>, out_shape: Vec<usize>, label: String) -> ValueId {
        self.instrs.push(Instr {
            prim,
            inputs,
            out_shape,
            label,
        });
        self.instrs.len() - 1
    }

    fn add_param(&mut self, name: String, shape: &[usize], init: ParamInit) -> ParamId {
        self.params.push(Param {
            name,
            tensor: Tensor::zeros(shape),
            init,
        });
        self.params.len() - 1
    }

    /// Grouped, dilated 2-D convolution. Padding defaults to the value that
    /// preserves spatial size at stride 1 for the given kernel and dilation.
    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        &mut self,
        x: ValueId,
        label: &str,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        groups: usize,
        bias: bool,
    ) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        assert_eq!(shape.len(), 3, "conv needs a CHW input at `{label}`");
        let (in_ch, h, w) = (shape[0], shape[1], shape[2]);
        assert!(in_ch % groups == 0 && out_ch.is_multiple_of(groups));
        let pad = dilation * (kernel - 1) / 2;
        let oh = (h + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
        let ow = (w + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
        let cin_g = in_ch / groups;
        let fan_in = cin_g * kernel * kernel;
        let w_id = self.add_param(
            format!("{label}.weight"),
            &[out_ch, cin_g, kernel, kernel],
            ParamInit::Kaiming { fan_in },
        );
        let b_id = bias.then(|| {
            self.add_param(format!("{label}.bias"), &[out_ch], ParamInit::Zero)
        });
        self.push(
            Prim::Conv {
                w: w_id,
                b: b_id,
                kernel,
                stride,
                pad,
                dilation,
                groups,
            },
            vec![x],
            vec![out_ch, oh, ow],
            label.to_string(),
        )
    }

    pub fn linear(&mut self, x: ValueId, label: &str, out: usize, bias: bool) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        assert_eq!(shape.len(), 1, "linear needs a vector input at `{label}`");
        let input = shape[0];
        let w_id = self.add_param(
            format!("{label}.weight"),
            &[out, input],
            ParamInit::Kaiming { fan_in: input },
        );
        let b_id = bias.then(|| self.add_param(format!("{label}.bias"), &[out], ParamInit::Zero));
        self.push(
            Prim::Linear { w: w_id, b: b_id },
            vec![x],
            vec![out],
            label.to_string(),
        )
    }

    pub fn relu(&mut self, x: ValueId, label: &str) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        let units: usize = shape.iter().product();
        let offset = self.relu_units;
        self.relu_units += units;
        self.push(
            Prim::Relu {
                unit_offset: offset,
            },
            vec![x],
            shape,
            label.to_string(),
        )
    }

    pub fn avg_pool(&mut self, x: ValueId, label: &str, kernel: usize, stride: usize) -> ValueId {
        self.pool(x, label, kernel, stride, false)
    }

    pub fn max_pool(&mut self, x: ValueId, label: &str, kernel: usize, stride: usize) -> ValueId {
        self.pool(x, label, kernel, stride, true)
    }

    fn pool(&mut self, x: ValueId, label: &str, kernel: usize, stride: usize, max: bool) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        assert_eq!(shape.len(), 3, "pool needs a CHW input at `{label}`");
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let pad = (kernel - 1) / 2;
        let oh = (h + 2 * pad - kernel) / stride + 1;
        let ow = (w + 2 * pad - kernel) / stride + 1;
        let prim = if max {
            Prim::MaxPool {
                kernel,
                stride,
                pad,
            }
        } else {
            Prim::AvgPool {
                kernel,
                stride,
                pad,
            }
        };
        self.push(prim, vec![x], vec![c, oh, ow], label.to_string())
    }

    pub fn global_avg_pool(&mut self, x: ValueId, label: &str) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        assert_eq!(shape.len(), 3, "global pool needs a CHW input at `{label}`");
        self.push(Prim::GlobalAvgPool, vec![x], vec![shape[0]], label.to_string())
    }

    /// Zeros of an arbitrary per-sample shape (the `Zero` operator).
    pub fn zeros(&mut self, shape: &[usize], label: &str) -> ValueId {
        self.push(Prim::Zeros, vec![], shape.to_vec(), label.to_string())
    }

    /// Subsamples spatially by `stride` and zero-pads channels to `out_ch`.
    pub fn reduce(&mut self, x: ValueId, label: &str, stride: usize, out_ch: usize) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        assert_eq!(shape.len(), 3, "reduce needs a CHW input at `{label}`");
        let (in_ch, h, w) = (shape[0], shape[1], shape[2]);
        assert!(out_ch >= in_ch, "reduce cannot drop channels at `{label}`");
        let oh = h.div_ceil(stride);
        let ow = w.div_ceil(stride);
        self.push(
            Prim::Reduce { stride },
            vec![x],
            vec![out_ch, oh, ow],
            label.to_string(),
        )
    }

    pub fn sum(&mut self, xs: &[ValueId], label: &str) -> ValueId {
        assert!(!xs.is_empty(), "sum needs at least one input at `{label}`");
        let shape = self.value_shape(xs[0]).to_vec();
        for &x in xs {
            assert_eq!(self.value_shape(x), &shape[..], "sum inputs differ at `{label}`");
        }
        if xs.len() == 1 {
            return xs[0];
        }
        self.push(Prim::Sum, xs.to_vec(), shape, label.to_string())
    }

    pub fn batch_norm(&mut self, x: ValueId, label: &str) -> ValueId {
        let shape = self.value_shape(x).to_vec();
        self.push(Prim::BatchNorm { eps: 1e-5 }, vec![x], shape, label.to_string())
    }

    /// Seals the graph; `logits` must be a vector-shaped value.
    pub fn finish(self, logits: ValueId) -> Result<Network> {
        let out_shape = self.instrs[logits].out_shape.clone();
        if out_shape.len() != 1 {
            return Err(Error::Internal(format!(
                "logits must be a vector, got shape {out_shape:?}"
            )));
        }
        let classes = out_shape[0];
        let mut last_use = vec![0usize; self.instrs.len()];
        for (i, instr) in self.instrs.iter().enumerate() {
            for &v in &instr.inputs {
                last_use[v] = last_use[v].max(i);
            }
        }
        last_use[logits] = usize::MAX;
        let mut param_offsets = Vec::with_capacity(self.params.len());
        let mut total = 0usize;
        for p in &self.params {
            param_offsets.push(total);
            total += p.tensor.numel();
        }
        Ok(Network {
            input_shape: self.input_shape,
            classes,
            instrs: self.instrs,
            params: self.params,
            param_offsets,
            param_total: total,
            relu_units: self.relu_units,
            output: logits,
            last_use,
        })
    }
}

impl Network {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn relu_units(&self) -> usize {
        self.relu_units
    }

    pub fn param_total(&self) -> usize {
        self.param_total
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn param_set(&self) -> ParamSet {
        ParamSet {
            entries: self
                .params
                .iter()
                .map(|p| (p.name.clone(), p.tensor.clone()))
                .collect(),
            total_count: self.param_total,
        }
    }

    /// Initializes every parameter from a per-tensor seed. Weights get
    /// Kaiming draws; biases are zeroed. Deterministic in the seed function.
    pub fn init_params<F: Fn(&str) -> u64>(&mut self, seed_for: F) {
        for p in &mut self.params {
            match p.init {
                ParamInit::Kaiming { fan_in } => {
                    let mut rng = rng_from(seed_for(&p.name));
                    fill_normal(&mut rng, kaiming_std(fan_in), p.tensor.data_mut());
                }
                ParamInit::Zero => {
                    p.tensor.data_mut().fill(0.0);
                }
            }
        }
    }

    pub fn init_with_seed(&mut self, seed: u64) {
        self.init_params(|name| crate::rng::derive_seed(seed, &[name]));
    }

    pub fn set_all_params_zero(&mut self) {
        for p in &mut self.params {
            p.tensor.data_mut().fill(0.0);
        }
    }

    pub fn param_data(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.tensor)
    }

    pub fn set_param_data(&mut self, name: &str, data: &[f64]) -> Result<()> {
        let p = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Internal(format!("no parameter named `{name}`")))?;
        if p.tensor.numel() != data.len() {
            return Err(Error::Internal(format!(
                "parameter `{name}` has {} elements, got {}",
                p.tensor.numel(),
                data.len()
            )));
        }
        p.tensor.data_mut().copy_from_slice(data);
        Ok(())
    }

    /// In-place update `θ += factor · g` with `g` in flat parameter order.
    pub fn apply_update(&mut self, grad: &[f64], factor: f64) {
        debug_assert_eq!(grad.len(), self.param_total);
        let mut off = 0;
        for p in &mut self.params {
            for v in p.tensor.data_mut() {
                *v += factor * grad[off];
                off += 1;
            }
        }
    }

    /// Multiplies every parameter by `c` (used by scale-invariance checks).
    pub fn scale_params(&mut self, c: f64) {
        for p in &mut self.params {
            p.tensor.scale(c);
        }
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let shape = batch.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::ShapeMismatch {
                layer: "input".to_string(),
                expected: self.input_shape.clone(),
                got: shape.get(1..).map(|s| s.to_vec()).unwrap_or_default(),
            });
        }
        if !batch.all_finite() {
            return Err(Error::ShapeMismatch {
                layer: "input".to_string(),
                expected: self.input_shape.clone(),
                got: shape[1..].to_vec(),
            });
        }
        Ok(shape[0])
    }

    /// Forward pass: logits of shape `[batch, classes]` plus one activation
    /// signature per sample. Pure in (parameters, inputs).
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Vec<ActivationSignature>)> {
        let fwd = self.eval(batch, false, true)?;
        Ok((fwd.logits, fwd.signatures))
    }

    pub(crate) fn eval(&self, batch: &Tensor, retain: bool, capture: bool) -> Result<Forward> {
        let b_count = self.check_batch(batch)?;
        let mut values: Vec<Option<Tensor>> = vec![None; self.instrs.len()];
        let mut bn_stats: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; self.instrs.len()];
        let mut signatures = if capture {
            vec![ActivationSignature::new(self.relu_units); b_count]
        } else {
            Vec::new()
        };

        for (i, instr) in self.instrs.iter().enumerate() {
            let mut out_shape = Vec::with_capacity(instr.out_shape.len() + 1);
            out_shape.push(b_count);
            out_shape.extend_from_slice(&instr.out_shape);
            let out = match &instr.prim {
                Prim::Input => batch.clone(),
                Prim::Zeros => Tensor::zeros(&out_shape),
                Prim::Conv {
                    w,
                    b,
                    kernel,
                    stride,
                    pad,
                    dilation,
                    groups,
                } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    self.conv_forward(
                        x, &out_shape, *w, *b, *kernel, *stride, *pad, *dilation, *groups,
                    )
                }
                Prim::Linear { w, b } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    self.linear_forward(x, &out_shape, *w, *b)
                }
                Prim::Relu { unit_offset } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    let mut out = Tensor::zeros(&out_shape);
                    let n = x.per_sample();
                    #[allow(clippy::needless_range_loop)] // s indexes three buffers
                    for s in 0..b_count {
                        let xs = x.sample(s);
                        let os = out.sample_mut(s);
                        for u in 0..n {
                            if xs[u] > 0.0 {
                                os[u] = xs[u];
                                if capture {
                                    signatures[s].set(unit_offset + u);
                                }
                            }
                        }
                    }
                    out
                }
                Prim::AvgPool {
                    kernel,
                    stride,
                    pad,
                } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    pool_forward(x, &out_shape, *kernel, *stride, *pad, false)
                }
                Prim::MaxPool {
                    kernel,
                    stride,
                    pad,
                } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    pool_forward(x, &out_shape, *kernel, *stride, *pad, true)
                }
                Prim::GlobalAvgPool => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    let (c, h, w) = chw(x.shape());
                    let mut out = Tensor::zeros(&out_shape);
                    for s in 0..b_count {
                        let xs = x.sample(s);
                        let os = out.sample_mut(s);
                        for ci in 0..c {
                            let mut acc = 0.0;
                            for p in 0..h * w {
                                acc += xs[ci * h * w + p];
                            }
                            os[ci] = acc / (h * w) as f64;
                        }
                    }
                    out
                }
                Prim::Reduce { stride } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    let (in_ch, h, w) = chw(x.shape());
                    let (oc, oh, ow) = (instr.out_shape[0], instr.out_shape[1], instr.out_shape[2]);
                    let mut out = Tensor::zeros(&out_shape);
                    for s in 0..b_count {
                        let xs = x.sample(s);
                        let os = out.sample_mut(s);
                        for ci in 0..oc.min(in_ch) {
                            for hh in 0..oh {
                                for ww in 0..ow {
                                    os[(ci * oh + hh) * ow + ww] =
                                        xs[(ci * h + hh * stride) * w + ww * stride];
                                }
                            }
                        }
                    }
                    out
                }
                Prim::Sum => {
                    let mut out = values[instr.inputs[0]].as_ref().unwrap().clone();
                    for &v in &instr.inputs[1..] {
                        let x = values[v].as_ref().unwrap();
                        for (o, xi) in out.data_mut().iter_mut().zip(x.data()) {
                            *o += xi;
                        }
                    }
                    out
                }
                Prim::BatchNorm { eps } => {
                    let x = values[instr.inputs[0]].as_ref().unwrap();
                    let (out, mean, var) = batch_norm_forward(x, &out_shape, *eps);
                    bn_stats[i] = Some((mean, var));
                    out
                }
            };
            values[i] = Some(out);
            if !retain {
                for &v in &instr.inputs {
                    if self.last_use[v] == i {
                        values[v] = None;
                    }
                }
            }
        }

        let logits = values[self.output].as_ref().unwrap().clone();
        if !logits.all_finite() {
            return Err(Error::NonFinite(
                "logits (parameters may have overflowed)".to_string(),
            ));
        }
        Ok(Forward {
            values,
            logits,
            signatures,
            bn_stats,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_forward(
        &self,
        x: &Tensor,
        out_shape: &[usize],
        w: ParamId,
        b: Option<ParamId>,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        groups: usize,
    ) -> Tensor {
        let b_count = out_shape[0];
        let (in_ch, h, wd) = chw(x.shape());
        let (out_ch, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
        let weight = self.params[w].tensor.data();
        let bias = b.map(|id| self.params[id].tensor.data());
        let cin_g = in_ch / groups;
        let cout_g = out_ch / groups;
        let mut out = Tensor::zeros(out_shape);
        for s in 0..b_count {
            let xs = x.sample(s);
            let os = out.sample_mut(s);
            for oc in 0..out_ch {
                let g = oc / cout_g;
                let base_w = oc * cin_g * kernel * kernel;
                let bias_v = bias.map_or(0.0, |bv| bv[oc]);
                for ohh in 0..oh {
                    for oww in 0..ow {
                        let mut acc = bias_v;
                        for icl in 0..cin_g {
                            let ic = g * cin_g + icl;
                            for kh in 0..kernel {
                                let ih = (ohh * stride + kh * dilation) as isize - pad as isize;
                                if ih < 0 || ih >= h as isize {
                                    continue;
                                }
                                for kw in 0..kernel {
                                    let iw = (oww * stride + kw * dilation) as isize - pad as isize;
                                    if iw < 0 || iw >= wd as isize {
                                        continue;
                                    }
                                    acc += weight[base_w + (icl * kernel + kh) * kernel + kw]
                                        * xs[(ic * h + ih as usize) * wd + iw as usize];
                                }
                            }
                        }
                        os[(oc * oh + ohh) * ow + oww] = acc;
                    }
                }
            }
        }
        out
    }

    fn linear_forward(&self, x: &Tensor, out_shape: &[usize], w: ParamId, b: Option<ParamId>) -> Tensor {
        let b_count = out_shape[0];
        let out_dim = out_shape[1];
        let in_dim = x.per_sample();
        let weight = self.params[w].tensor.data();
        let bias = b.map(|id| self.params[id].tensor.data());
        let mut out = Tensor::zeros(out_shape);
        for s in 0..b_count {
            let xs = x.sample(s);
            let os = out.sample_mut(s);
            for o in 0..out_dim {
                let mut acc = bias.map_or(0.0, |bv| bv[o]);
                let row = &weight[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    acc += row[i] * xs[i];
                }
                os[o] = acc;
            }
        }
        out
    }
}

pub(crate) fn chw(batched_shape: &[usize]) -> (usize, usize, usize) {
    (batched_shape[1], batched_shape[2], batched_shape[3])
}

fn pool_forward(
    x: &Tensor,
    out_shape: &[usize],
    kernel: usize,
    stride: usize,
    pad: usize,
    max: bool,
) -> Tensor {
    let b_count = out_shape[0];
    let (c, h, w) = chw(x.shape());
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut out = Tensor::zeros(out_shape);
    for s in 0..b_count {
        let xs = x.sample(s);
        let os = out.sample_mut(s);
        for ci in 0..c {
            for ohh in 0..oh {
                for oww in 0..ow {
                    let mut acc = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for kh in 0..kernel {
                        let ih = (ohh * stride + kh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        for kw in 0..kernel {
                            let iw = (oww * stride + kw) as isize - pad as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            let v = xs[(ci * h + ih as usize) * w + iw as usize];
                            sum += v;
                            count += 1;
                            if v > acc {
                                acc = v;
                            }
                        }
                    }
                    os[(ci * oh + ohh) * ow + oww] = if max {
                        acc
                    } else {
                        sum / count.max(1) as f64
                    };
                }
            }
        }
    }
    out
}

fn batch_norm_forward(x: &Tensor, out_shape: &[usize], eps: f64) -> (Tensor, Vec<f64>, Vec<f64>) {
    let b_count = out_shape[0];
    let per = x.per_sample();
    // Channel axis is the first per-sample axis for both vectors and images.
    let channels = x.shape()[1];
    let spatial = per / channels;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    let denom = (b_count * spatial) as f64;
    for s in 0..b_count {
        let xs = x.sample(s);
        for c in 0..channels {
            for p in 0..spatial {
                mean[c] += xs[c * spatial + p];
            }
        }
    }
    for m in &mut mean {
        *m /= denom;
    }
    for s in 0..b_count {
        let xs = x.sample(s);
        for c in 0..channels {
            for p in 0..spatial {
                let d = xs[c * spatial + p] - mean[c];
                var[c] += d * d;
            }
        }
    }
    for v in &mut var {
        *v /= denom;
    }
    let mut out = Tensor::zeros(out_shape);
    for s in 0..b_count {
        let xs = x.sample(s);
        let os = out.sample_mut(s);
        for c in 0..channels {
            let inv = 1.0 / (var[c] + eps).sqrt();
            for p in 0..spatial {
                os[c * spatial + p] = (xs[c * spatial + p] - mean[c]) * inv;
            }
        }
    }
    (out, mean, var)
}
