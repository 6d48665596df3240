//! Scaling-law analytics for experiment logs.
//!
//! `scalelaws` fits the joint law `L(N, D) = E + A·N^-alpha + B·D^-beta`, its
//! single-axis marginals, compute frontiers, loss-to-loss transfer laws, and
//! fine-tuning transfer laws to logged training runs, and derives the
//! analytics that follow from the fitted parameters: compute-optimal
//! allocation, iso-loss contours, excess-loss reduction ratios, curve
//! crossovers, overfitting extent, and minimum-data requirements.
//!
//! The crate is organized as:
//! - [`model`]: domain types and closed-form evaluation (pure, no fitting);
//! - [`fit`]: the multi-start damped least-squares engine and fit reports;
//! - [`transfer`]: loss-to-loss and fine-tuning transfer fits (log-space OLS);
//! - [`allocate`]: compute budgets, optimal allocation, contours, crossovers;
//! - [`synth`]: deterministic synthetic-data generation and brute-force
//!   oracles used to verify the closed forms;
//! - [`pipeline`]: CSV ingestion, batch fitting, and report/plot-data export.

pub mod allocate;
pub mod error;
pub mod fit;
pub mod model;
pub mod pipeline;
mod rng;
mod serde_util;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use fit::{FitConfig, FitReport, ResidualSpace, RobustLoss};
pub use model::{
    Axis, ComputeModel, FrontierLaw, JointLaw, LossToLossLaw, MarginalLaw, Observation, Split,
    TransferLaw,
};
