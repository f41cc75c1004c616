//! Distance-based comparison of asset-pricing factor models.
//!
//! Mispricing under a model is summarized by a Gaussian distribution of its
//! alphas. Models are ranked by the quadratic Wasserstein distance between
//! the point mass at zero (dogmatic belief in the model) and the data-based
//! distribution, alongside the GRS test and mean-absolute-alpha statistics.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod dataio;
pub mod regression;
pub mod bayes;
pub mod synth;
pub mod transport;
pub mod metrics;
pub mod equiv;
pub mod format;

pub use error::{Error, Result};

pub use bayes::{GaussianDist, PriorSpec};
pub use dataio::{CrossSection, Dataset, ModelSpec, ReturnsPanel};
pub use linalg::SymMatrix;
pub use metrics::{MetricsReport, RankTable};
pub use regression::{GrsResult, RegressionFit};
pub use transport::DistanceBreakdown;
