//! Operator kinds and their parameter initialization.

use crate::rng::{fill_normal, rng_from};
use crate::tensor::Tensor;

/// The operator vocabulary. Convolutions pad to preserve spatial size at
/// stride 1; `Zero` emits zeros of the edge's output shape; `Skip` is the
/// identity (realized as subsample + channel zero-pad when the edge reduces).
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Zero,
    Skip,
    Relu,
    Conv {
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        padding: usize,
    },
    /// Depthwise k×k followed by pointwise 1×1.
    SepConv {
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
    },
    /// Dilation-2 depthwise k×k followed by pointwise 1×1.
    DilConv {
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
    },
    AvgPool { kernel: usize },
    MaxPool { kernel: usize },
    Linear { input: usize, output: usize },
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerKind::Conv { .. }
                | LayerKind::SepConv { .. }
                | LayerKind::DilConv { .. }
                | LayerKind::Linear { .. }
        )
    }
}

/// Weight std is sqrt(2 / fan_in); fan_in counts input channels per group
/// times the kernel area (a plain `in` for fully connected layers).
pub fn kaiming_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

pub(crate) fn kaiming_tensor(shape: &[usize], fan_in: usize, seed: u64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    let mut rng = rng_from(seed);
    fill_normal(&mut rng, kaiming_std(fan_in), t.data_mut());
    t
}

/// Parameter tensors for one layer, in a fixed order, deterministic in
/// `seed`. Weights are N(0, 2/fan_in); biases start at zero. Parameter-free
/// kinds yield an empty list.
pub fn kaiming_init(layer: &LayerKind, seed: u64) -> Vec<(String, Tensor)> {
    match layer {
        LayerKind::Conv {
            kernel,
            in_ch,
            out_ch,
            ..
        } => {
            let fan_in = in_ch * kernel * kernel;
            vec![
                (
                    "weight".to_string(),
                    kaiming_tensor(&[*out_ch, *in_ch, *kernel, *kernel], fan_in, seed),
                ),
                ("bias".to_string(), Tensor::zeros(&[*out_ch])),
            ]
        }
        LayerKind::SepConv {
            kernel,
            in_ch,
            out_ch,
            ..
        }
        | LayerKind::DilConv {
            kernel,
            in_ch,
            out_ch,
            ..
        } => {
            // Depthwise has one input channel per group.
            let dw_fan_in = kernel * kernel;
            vec![
                (
                    "dw.weight".to_string(),
                    kaiming_tensor(&[*in_ch, 1, *kernel, *kernel], dw_fan_in, seed),
                ),
                (
                    "pw.weight".to_string(),
                    kaiming_tensor(
                        &[*out_ch, *in_ch, 1, 1],
                        *in_ch,
                        seed.wrapping_add(1),
                    ),
                ),
                ("pw.bias".to_string(), Tensor::zeros(&[*out_ch])),
            ]
        }
        LayerKind::Linear { input, output } => vec![
            (
                "weight".to_string(),
                kaiming_tensor(&[*output, *input], *input, seed),
            ),
            ("bias".to_string(), Tensor::zeros(&[*output])),
        ],
        _ => Vec::new(),
    }
}
