//! Numerical laboratory for comparing empirical risk minimization (ERM) and
//! Midpoint Mixup on synthetic multi-view data.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: feature dictionaries, the patch-based multi-view distribution,
//!   the simple linear setting, feature ablation, the degenerate
//!   single-noise-class instance and the Dirichlet spurious-feature injection.
//! - [`network`]: the polynomially smoothed ReLU and the two-layer network
//!   `g^y(x) = sum_r sum_p act(<w_{y,r}, x^(p)>)` with analytic gradients.
//! - [`losses`]: softmax, the ERM / Mixup / Midpoint Mixup objectives and
//!   their exact gradients.
//! - [`trainer`]: full-batch gradient descent with per-iteration
//!   weight-feature correlation statistics.
//! - [`diagnostics`]: feature-learning reports, alignment gaps, gradient
//!   certification, the monotonicity verifier, linear gradient probes and the
//!   linear-separability probe.
//! - [`config`] and [`experiment`]: the line-based experiment config, seeded
//!   streams, and the artifact-writing runners behind the `mixview` binary.

pub mod config;
pub mod data;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod linalg;
pub mod losses;
pub mod network;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

pub use data::{
    CoefficientLaw, DataConfig, DataPoint, Example, FeatureDictionary, SimplePoint, VectorDataset,
};
pub use losses::{MixingKind, MixingSpec, Objective, PairMode};
pub use network::{Activation, NetworkConfig, Weights};
pub use trainer::{TrainConfig, TrajectoryRecord};
