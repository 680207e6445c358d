//! Minimal neural-network kernel: layer kinds, Kaiming initialization, a
//! static instruction graph with batched forward evaluation that captures
//! ReLU activation signatures, and per-sample reverse-mode parameter
//! Jacobians.

mod autodiff;
mod layer;
mod network;

pub use autodiff::JacobianMode;
pub use layer::{kaiming_init, LayerKind};
pub use network::{
    ActivationSignature, JacobianMatrix, Network, NetworkBuilder, Param, ParamInit, ParamSet,
    ValueId,
};
