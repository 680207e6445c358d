//! Training-free scoring and search for cell-based neural architecture spaces.
//!
//! Candidate architectures are ranked at random initialization by two
//! label-free measurements:
//!
//! * the condition number of the finite-width neural tangent kernel
//!   (a trainability signal, smaller is better), and
//! * the number of distinct ReLU activation patterns observed over sampled
//!   inputs (an expressivity signal, larger is better).
//!
//! On top of the two scores, [`search`] implements an operator-pruning loop
//! over a supernet: every round each edge of the cell drops its
//! least-important candidate operator until the network is single-path.
//! [`harness`] provides desk-scale validation tools: synthetic datasets, a
//! small gradient-descent trainer used as a ground-truth oracle, Kendall-tau
//! rank correlation, and an exact two-dimensional region counter.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod search;
pub mod space;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
