//! Realizes a supernet (or single-path architecture) as an evaluable network.
//!
//! Multi-candidate edges compute the unweighted sum of all candidate outputs;
//! there are no architecture weights because nothing is trained. Node values
//! are the sums of their incoming edge outputs. The classifier is bias-free
//! so an architecture whose cells pass nothing through has an exactly zero
//! Jacobian.

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkBuilder, ValueId};
use crate::space::{OpKind, SpaceConfig, SuperNet};

struct OpCtx {
    in_ch: usize,
    out_ch: usize,
    stride: usize,
    bias: bool,
    norm: bool,
}

impl SuperNet {
    /// Builds the stacked network realizing the current candidate sets.
    pub fn build_network(&self) -> Result<Network> {
        let cfg = self.space();
        let st = &cfg.stacking;
        let image = cfg.is_image();
        let (mut b, input) = NetworkBuilder::new(&st.input_shape);
        let mut cur = if image {
            b.conv(input, "stem", st.channels, 3, 1, 1, 1, st.bias)
        } else {
            b.linear(input, "stem", st.channels, st.bias)
        };
        if st.norm {
            cur = b.batch_norm(cur, "stem.norm");
        }
        let mut ch = st.channels;
        for cell in 0..st.cells {
            let reduction = st.reductions.contains(&cell);
            cur = self.build_cell(&mut b, cfg, cell, cur, ch, reduction)?;
            if reduction {
                ch *= 2;
            }
        }
        let feat = if image {
            b.global_avg_pool(cur, "gap")
        } else {
            cur
        };
        let logits = b.linear(feat, "head", st.classes, false);
        b.finish(logits)
    }

    fn build_cell(
        &self,
        b: &mut NetworkBuilder,
        cfg: &SpaceConfig,
        cell: usize,
        cell_in: ValueId,
        in_ch: usize,
        reduction: bool,
    ) -> Result<ValueId> {
        let out_ch = if reduction { in_ch * 2 } else { in_ch };
        let output = cfg.output();
        let mut vals: Vec<Option<ValueId>> = vec![None; cfg.nodes];
        for &i in &cfg.input_nodes {
            vals[i] = Some(cell_in);
        }
        for to in 0..cfg.nodes {
            let mut contribs = Vec::new();
            for (eid, e) in cfg.edges.iter().enumerate().filter(|(_, e)| e.to == to) {
                let from_val = vals[e.from].ok_or_else(|| {
                    Error::Internal(format!("node {} evaluated before its inputs", e.from))
                })?;
                let from_is_input = cfg.input_nodes.contains(&e.from);
                let ctx = OpCtx {
                    in_ch: if from_is_input { in_ch } else { out_ch },
                    out_ch,
                    stride: if reduction && from_is_input { 2 } else { 1 },
                    bias: cfg.stacking.bias,
                    norm: cfg.stacking.norm,
                };
                for &op in self.candidates(eid) {
                    let label = format!("c{cell}.e{eid}.{}", cfg.operators[op].name);
                    contribs.push(apply_operator(
                        b,
                        &cfg.operators[op].kind,
                        from_val,
                        &label,
                        &ctx,
                    ));
                }
            }
            if !contribs.is_empty() {
                vals[to] = Some(b.sum(&contribs, &format!("c{cell}.n{to}")));
            }
        }
        match vals[output] {
            Some(v) => Ok(v),
            None => {
                // No searchable edges into the output: aggregate every
                // intermediate node directly.
                let inter: Vec<ValueId> = (0..cfg.nodes)
                    .filter(|&i| !cfg.input_nodes.contains(&i) && i != output)
                    .filter_map(|i| vals[i])
                    .collect();
                if inter.is_empty() {
                    return Err(Error::Internal(format!(
                        "cell {cell} produced no output value"
                    )));
                }
                Ok(b.sum(&inter, &format!("c{cell}.out")))
            }
        }
    }
}

fn apply_operator(
    b: &mut NetworkBuilder,
    kind: &OpKind,
    x: ValueId,
    label: &str,
    ctx: &OpCtx,
) -> ValueId {
    let adapts = ctx.stride != 1 || ctx.in_ch != ctx.out_ch;
    match kind {
        OpKind::Zero => {
            let shape = b.value_shape(x).to_vec();
            let out_shape = if shape.len() == 3 {
                vec![
                    ctx.out_ch,
                    shape[1].div_ceil(ctx.stride),
                    shape[2].div_ceil(ctx.stride),
                ]
            } else {
                vec![ctx.out_ch]
            };
            b.zeros(&out_shape, label)
        }
        OpKind::Skip => {
            if adapts {
                b.reduce(x, label, ctx.stride, ctx.out_ch)
            } else {
                x
            }
        }
        OpKind::Relu => {
            let y = if adapts {
                b.reduce(x, &format!("{label}.adapt"), ctx.stride, ctx.out_ch)
            } else {
                x
            };
            b.relu(y, label)
        }
        OpKind::Conv { kernel, relu } => {
            let mut y = b.conv(x, label, ctx.out_ch, *kernel, ctx.stride, 1, 1, ctx.bias);
            if ctx.norm {
                y = b.batch_norm(y, &format!("{label}.norm"));
            }
            if *relu {
                y = b.relu(y, &format!("{label}.relu"));
            }
            y
        }
        OpKind::SepConv { kernel } => {
            let dw = b.conv(
                x,
                &format!("{label}.dw"),
                ctx.in_ch,
                *kernel,
                ctx.stride,
                1,
                ctx.in_ch,
                false,
            );
            let mut y = b.conv(dw, &format!("{label}.pw"), ctx.out_ch, 1, 1, 1, 1, ctx.bias);
            if ctx.norm {
                y = b.batch_norm(y, &format!("{label}.norm"));
            }
            b.relu(y, &format!("{label}.relu"))
        }
        OpKind::DilConv { kernel } => {
            let dw = b.conv(
                x,
                &format!("{label}.dw"),
                ctx.in_ch,
                *kernel,
                ctx.stride,
                2,
                ctx.in_ch,
                false,
            );
            let mut y = b.conv(dw, &format!("{label}.pw"), ctx.out_ch, 1, 1, 1, 1, ctx.bias);
            if ctx.norm {
                y = b.batch_norm(y, &format!("{label}.norm"));
            }
            b.relu(y, &format!("{label}.relu"))
        }
        OpKind::AvgPool { kernel } => {
            let y = b.avg_pool(x, label, *kernel, ctx.stride);
            if ctx.in_ch != ctx.out_ch {
                b.reduce(y, &format!("{label}.pad"), 1, ctx.out_ch)
            } else {
                y
            }
        }
        OpKind::MaxPool { kernel } => {
            let y = b.max_pool(x, label, *kernel, ctx.stride);
            if ctx.in_ch != ctx.out_ch {
                b.reduce(y, &format!("{label}.pad"), 1, ctx.out_ch)
            } else {
                y
            }
        }
        OpKind::Linear { relu } => {
            let mut y = b.linear(x, label, ctx.out_ch, ctx.bias);
            if ctx.norm {
                y = b.batch_norm(y, &format!("{label}.norm"));
            }
            if *relu {
                y = b.relu(y, &format!("{label}.relu"));
            }
            y
        }
    }
}
