//! Per-sample reverse-mode differentiation over the instruction graph.
//!
//! Each Jacobian row is produced by one backward pass seeded with a cotangent
//! over the logits. The ReLU subgradient at exactly zero is zero, matching
//! the activation-signature convention.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::nn::network::{chw, Forward, JacobianMatrix, Network, Prim};
use crate::tensor::Tensor;

/// How logits enter the Jacobian: one row per sample (gradient of the sum of
/// that sample's logits) or one row per (sample, class) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    SumLogits,
    PerLogit,
}

impl Network {
    /// N×P Jacobian: row `n` is the gradient, in flat parameter order, of the
    /// sum over classes of sample `n`'s logits. One backward pass per sample.
    pub fn per_sample_jacobian(&self, batch: &Tensor) -> Result<JacobianMatrix> {
        self.jacobian(batch, JacobianMode::SumLogits)
    }

    pub fn jacobian(&self, batch: &Tensor, mode: JacobianMode) -> Result<JacobianMatrix> {
        let fwd = self.eval(batch, true, false)?;
        let b_count = batch.shape()[0];
        let rows = match mode {
            JacobianMode::SumLogits => b_count,
            JacobianMode::PerLogit => b_count * self.classes,
        };
        let mut jac = Matrix::zeros(rows, self.param_total);
        let mut row_buf = vec![0.0; self.param_total];
        for s in 0..b_count {
            match mode {
                JacobianMode::SumLogits => {
                    let cot = vec![1.0; self.classes];
                    row_buf.fill(0.0);
                    self.backward_sample(&fwd, s, &cot, &mut row_buf);
                    for (j, v) in row_buf.iter().enumerate() {
                        jac.set(s, j, *v);
                    }
                }
                JacobianMode::PerLogit => {
                    for c in 0..self.classes {
                        let mut cot = vec![0.0; self.classes];
                        cot[c] = 1.0;
                        row_buf.fill(0.0);
                        self.backward_sample(&fwd, s, &cot, &mut row_buf);
                        for (j, v) in row_buf.iter().enumerate() {
                            jac.set(s * self.classes + c, j, *v);
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Accumulates into `pgrad` the gradient of `cotangent · logits(sample)`
    /// with respect to every parameter. `fwd` must come from a retained eval.
    pub(crate) fn backward_sample(
        &self,
        fwd: &Forward,
        sample: usize,
        cotangent: &[f64],
        pgrad: &mut [f64],
    ) {
        debug_assert_eq!(cotangent.len(), self.classes);
        debug_assert_eq!(pgrad.len(), self.param_total);
        let mut vgrad: Vec<Option<Vec<f64>>> = vec![None; self.instrs.len()];
        vgrad[self.output] = Some(cotangent.to_vec());

        for i in (0..self.instrs.len()).rev() {
            let Some(g) = vgrad[i].take() else { continue };
            let instr = &self.instrs[i];
            match &instr.prim {
                Prim::Input | Prim::Zeros => {}
                Prim::Conv {
                    w,
                    b,
                    kernel,
                    stride,
                    pad,
                    dilation,
                    groups,
                } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let xs = x.sample(sample);
                    let (in_ch, h, wd) = chw(x.shape());
                    let (out_ch, oh, ow) =
                        (instr.out_shape[0], instr.out_shape[1], instr.out_shape[2]);
                    let cin_g = in_ch / groups;
                    let cout_g = out_ch / groups;
                    let weight = self.params[*w].tensor.data();
                    let w_off = self.param_offsets[*w];
                    let gin = ensure(&mut vgrad[instr.inputs[0]], x.per_sample());
                    for oc in 0..out_ch {
                        let grp = oc / cout_g;
                        let base_w = oc * cin_g * kernel * kernel;
                        for ohh in 0..oh {
                            for oww in 0..ow {
                                let go = g[(oc * oh + ohh) * ow + oww];
                                if go == 0.0 {
                                    continue;
                                }
                                if let Some(bid) = b {
                                    pgrad[self.param_offsets[*bid] + oc] += go;
                                }
                                for icl in 0..cin_g {
                                    let ic = grp * cin_g + icl;
                                    for kh in 0..*kernel {
                                        let ih = (ohh * stride + kh * dilation) as isize
                                            - *pad as isize;
                                        if ih < 0 || ih >= h as isize {
                                            continue;
                                        }
                                        for kw in 0..*kernel {
                                            let iw = (oww * stride + kw * dilation) as isize
                                                - *pad as isize;
                                            if iw < 0 || iw >= wd as isize {
                                                continue;
                                            }
                                            let xi =
                                                (ic * h + ih as usize) * wd + iw as usize;
                                            let wi =
                                                base_w + (icl * kernel + kh) * kernel + kw;
                                            gin[xi] += weight[wi] * go;
                                            pgrad[w_off + wi] += xs[xi] * go;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Prim::Linear { w, b } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let xs = x.sample(sample);
                    let in_dim = x.per_sample();
                    let out_dim = instr.out_shape[0];
                    let weight = self.params[*w].tensor.data();
                    let w_off = self.param_offsets[*w];
                    let gin = ensure(&mut vgrad[instr.inputs[0]], in_dim);
                    for o in 0..out_dim {
                        let go = g[o];
                        if go == 0.0 {
                            continue;
                        }
                        if let Some(bid) = b {
                            pgrad[self.param_offsets[*bid] + o] += go;
                        }
                        let row = &weight[o * in_dim..(o + 1) * in_dim];
                        for iidx in 0..in_dim {
                            gin[iidx] += row[iidx] * go;
                            pgrad[w_off + o * in_dim + iidx] += xs[iidx] * go;
                        }
                    }
                }
                Prim::Relu { .. } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let xs = x.sample(sample);
                    let gin = ensure(&mut vgrad[instr.inputs[0]], xs.len());
                    for u in 0..xs.len() {
                        if xs[u] > 0.0 {
                            gin[u] += g[u];
                        }
                    }
                }
                Prim::AvgPool {
                    kernel,
                    stride,
                    pad,
                } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let (c, h, w) = chw(x.shape());
                    let (oh, ow) = (instr.out_shape[1], instr.out_shape[2]);
                    let gin = ensure(&mut vgrad[instr.inputs[0]], x.per_sample());
                    for ci in 0..c {
                        for ohh in 0..oh {
                            for oww in 0..ow {
                                let go = g[(ci * oh + ohh) * ow + oww];
                                if go == 0.0 {
                                    continue;
                                }
                                let mut cells = Vec::with_capacity(kernel * kernel);
                                for kh in 0..*kernel {
                                    let ih = (ohh * stride + kh) as isize - *pad as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    for kw in 0..*kernel {
                                        let iw = (oww * stride + kw) as isize - *pad as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        cells.push((ci * h + ih as usize) * w + iw as usize);
                                    }
                                }
                                let share = go / cells.len() as f64;
                                for idx in cells {
                                    gin[idx] += share;
                                }
                            }
                        }
                    }
                }
                Prim::MaxPool {
                    kernel,
                    stride,
                    pad,
                } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let xs = x.sample(sample);
                    let (c, h, w) = chw(x.shape());
                    let (oh, ow) = (instr.out_shape[1], instr.out_shape[2]);
                    let gin = ensure(&mut vgrad[instr.inputs[0]], x.per_sample());
                    for ci in 0..c {
                        for ohh in 0..oh {
                            for oww in 0..ow {
                                let go = g[(ci * oh + ohh) * ow + oww];
                                if go == 0.0 {
                                    continue;
                                }
                                // Gradient routes to the first maximal cell.
                                let mut best = f64::NEG_INFINITY;
                                let mut best_idx = None;
                                for kh in 0..*kernel {
                                    let ih = (ohh * stride + kh) as isize - *pad as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    for kw in 0..*kernel {
                                        let iw = (oww * stride + kw) as isize - *pad as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        let idx = (ci * h + ih as usize) * w + iw as usize;
                                        if xs[idx] > best {
                                            best = xs[idx];
                                            best_idx = Some(idx);
                                        }
                                    }
                                }
                                if let Some(idx) = best_idx {
                                    gin[idx] += go;
                                }
                            }
                        }
                    }
                }
                Prim::GlobalAvgPool => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let (c, h, w) = chw(x.shape());
                    let gin = ensure(&mut vgrad[instr.inputs[0]], x.per_sample());
                    let inv = 1.0 / (h * w) as f64;
                    for ci in 0..c {
                        let gc = g[ci] * inv;
                        if gc == 0.0 {
                            continue;
                        }
                        for p in 0..h * w {
                            gin[ci * h * w + p] += gc;
                        }
                    }
                }
                Prim::Reduce { stride } => {
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let (in_ch, h, w) = chw(x.shape());
                    let (oc, oh, ow) =
                        (instr.out_shape[0], instr.out_shape[1], instr.out_shape[2]);
                    let gin = ensure(&mut vgrad[instr.inputs[0]], x.per_sample());
                    for ci in 0..oc.min(in_ch) {
                        for hh in 0..oh {
                            for ww in 0..ow {
                                gin[(ci * h + hh * stride) * w + ww * stride] +=
                                    g[(ci * oh + hh) * ow + ww];
                            }
                        }
                    }
                }
                Prim::Sum => {
                    for &v in &instr.inputs {
                        let n = g.len();
                        let gin = ensure(&mut vgrad[v], n);
                        for (gi, gv) in gin.iter_mut().zip(&g) {
                            *gi += gv;
                        }
                    }
                }
                Prim::BatchNorm { eps } => {
                    let (_, var) = fwd.bn_stats[i].as_ref().unwrap();
                    let x = fwd.values[instr.inputs[0]].as_ref().unwrap();
                    let per = x.per_sample();
                    let channels = x.shape()[1];
                    let spatial = per / channels;
                    let gin = ensure(&mut vgrad[instr.inputs[0]], per);
                    for c in 0..channels {
                        let inv = 1.0 / (var[c] + eps).sqrt();
                        for p in 0..spatial {
                            gin[c * spatial + p] += g[c * spatial + p] * inv;
                        }
                    }
                }
            }
        }
    }
}

fn ensure(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    if slot.is_none() {
        *slot = Some(vec![0.0; len]);
    }
    slot.as_mut().unwrap()
}
