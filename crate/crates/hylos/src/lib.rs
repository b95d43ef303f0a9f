//! Hylos: a contract-bounded spatial transaction kernel and replay harness.
//!
//! Scene state is a typed, immutable operability graph. Every durable change
//! flows through a `SpatialTransaction`: admissibility checks, lowering to a
//! graph mutation, invariant protection, effect diffs, and a hash-chained
//! commit log. On top of the kernel sit derived causal views with scripted
//! repair policies, a model-native artifact lab (ingestion, handle
//! Jacobians, latent repair, cycle consistency), a dual-stream constrained
//! decoding guardrail over a toy block world, and the replay benchmark
//! harness with its metric suite.
//!
//! Start with the `examples/` directory: one runnable example per major
//! capability.

pub mod actuators;
pub mod artifact;
pub mod bench;
pub mod canonical;
pub mod causal;
pub mod effects;
pub mod error;
pub mod fixtures;
pub mod guardrail;
pub mod math;
pub mod scene;
pub mod txn;

pub use error::{Error, Result};
