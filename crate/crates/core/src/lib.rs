//! Random-walk learning on graphs.
//!
//! A single model token walks over a communication graph and takes one SGD
//! step with the local data of each node it visits. The crate provides the
//! graph families, synthetic datasets, the Metropolis-Hastings transition
//! kernels (uniform, Lipschitz-weighted, mixed), the Lévy-jump kernel and the
//! MHLJ composite, Markov-chain diagnostics, and the training engine.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod data;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod matrix;
pub mod scalar;
pub mod walker;

pub use chain::{ChainStats, PowerOptions, VisitDiagnostics};
pub use data::{DataSpec, LossModel, NodeDataset, Placement, ProblemInstance, Variance};
pub use error::{Error, Result};
pub use graph::{Graph, Topology};
pub use kernels::{JumpParams, KernelKind, TransitionKernel};
pub use matrix::DenseMatrix;
pub use scalar::Real;
pub use walker::{
    RunResult, StartNode, Strategy, SwitchRule, PjSchedule, TraceRecord, Trainer, TrainerConfig,
};

pub type Instance = ProblemInstance<f64>;
pub type Kernel = TransitionKernel<f64>;
pub type Stats = ChainStats<f64>;
pub type Config = TrainerConfig<f64>;
pub type Run = RunResult<f64>;
pub type Record = TraceRecord<f64>;

pub type Instance32 = ProblemInstance<f32>;
pub type Kernel32 = TransitionKernel<f32>;
pub type Config32 = TrainerConfig<f32>;
pub type Run32 = RunResult<f32>;
