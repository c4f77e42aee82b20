//! Tensor-network contraction simulator for Sycamore/Zuchongzhi-style random
//! quantum circuits.
//!
//! The pipeline is split into the following modules:
//!
//! - [`circuit`]: gate matrices, device topologies with ABCD coupler patterns,
//!   seeded circuit generation and the circuit/topology text formats.
//! - [`tensor`]: dense complex tensors over binary indices, the
//!   permute-then-multiply reference contraction and the fused
//!   permute-multiply kernel used for skewed contractions.
//! - [`network`]: circuit to tensor-network mapping and rank-based
//!   simplification.
//! - [`order`]: contraction trees, cost accounting, partition-based order
//!   search, slicing with subtree reconfiguration.
//! - [`engine`]: sliced, parallel execution of contraction plans.
//! - [`analysis`]: statevector oracle, XEB estimation, Porter-Thomas checks
//!   and frugal rejection sampling.
//!
//! With the `parallel` feature (on by default) slices and kernel blocks are
//! distributed with rayon; without it every loop runs on the calling thread.

pub mod analysis;
pub mod circuit;
pub mod engine;
pub mod network;
pub mod order;
pub mod parallel;
pub mod rng;
pub mod tensor;

pub use num_complex::{Complex32, Complex64};
