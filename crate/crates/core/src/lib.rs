//! Nonparametric regression under covariate shift with a design-adaptive
//! two-sample local k-nearest-neighbour regressor.
//!
//! The crate is organised bottom-up:
//!
//! - [`geom`]: point sets and exact k-NN queries (kd-tree plus a brute-force
//!   oracle).
//! - [`distributions`]: the parametric covariate laws (Pareto, exponential,
//!   uniform, product Pareto, log-corrected Pareto) with densities, samplers,
//!   ball masses, the `zeta` radius function and local-mass diagnostics.
//! - [`transfer`]: the transfer function `T(P, Q, gamma) = E_Q[p(X)^-gamma]`,
//!   integrability-index brackets and related divergence bounds.
//! - [`estimator`]: the `l`-NN plug-in density estimator and the local k-NN
//!   regressor whose neighbour counts adapt to the estimated density.
//! - [`rates`]: the rate calculus (configurations, wedge and accelerated
//!   regimes, phase grids and sample-size paths).
//! - [`harness`]: Monte Carlo experiments, regression test functions and
//!   log-log slope fitting.
//!
//! Shared numerical helpers live in [`quad`].

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod distributions;
pub mod error;
pub mod estimator;
pub mod geom;
pub mod harness;
pub mod quad;
pub mod rates;
pub mod serde_f64;
pub mod transfer;

pub use distributions::{ClosedFormIndices, DistributionFamily, HolderFunction, NoiseSpec};
pub use error::{Error, Result};
pub use estimator::{LabeledSample, NeighborFunctionConfig, Prediction, TrainedEstimator};
pub use geom::{NeighborIndex, NeighborResult, Point, PointSet};
pub use harness::{ExperimentConfig, RiskEstimate, SlopeFit};
pub use rates::{Configuration, RateMode, RateParams, Regime, RegimeReport};
pub use transfer::{IndexEstimate, TransferEvaluation, TransferMethod};
