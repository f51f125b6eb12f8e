//! Deterministic simulator for decentralized federated learning (DFL).
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: CSV ingestion, train/validation/test splits, label-skew
//!   partitioning and the KL-divergence measure of non-IID degree.
//! - [`models`]: L2-regularized linear SVM and logistic regression, SGD
//!   training and estimation of the objective constants (μ, L, σ_k, G, Z).
//! - [`topology`]: linear, ring, star and mesh graphs with node roles.
//! - [`engine`]: the six deployments as explicit event schedules and their
//!   deterministic execution.
//! - [`metrics`]: convergence detection from loss traces, binary and macro F1.
//! - [`bounds`]: closed-form convergence upper bounds and their comparison
//!   against measured loss gaps.
//!
//! Every stochastic step is driven by an explicit `u64` seed, so a run is a
//! pure function of its configuration and input data.

pub mod bounds;
pub mod data;
pub mod engine;
mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod topology;

pub use bounds::{BoundInputs, BoundReport, BoundReportEntry};
pub use data::{Allocation, ClientDataset, Dataset, LabelColumn, SkewSpec};
pub use engine::{DeploymentConfig, DeploymentKind, RunResult, ScheduleEvent};
pub use error::{Error, Result};
pub use metrics::{ConvergenceCriterion, TraceEntry, TrainingTrace};
pub use models::{ModelKind, ModelSpec, ObjectiveStats, ParamVector};
pub use topology::{NodeRole, Strategy, TopologyGraph, TopologyKind};
