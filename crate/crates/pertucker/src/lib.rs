//! Personalized Tucker decomposition of multi-source tensor data.
//!
//! Data from N sources is modeled as a shared *global* Tucker component plus
//! a per-source *local* component whose factor matrices are constrained to
//! be orthogonal to the global ones in a chosen set of modes. The solver is
//! a proximal-regularized block coordinate descent in which every update has
//! a closed form (a truncated symmetric eigendecomposition of a Gram
//! matrix). On top of the fitted local components sit three application
//! heads: a generative classifier, an anomaly-monitoring statistic with a
//! control limit, and subspace clustering of sources.
//!
//! Modules:
//! - [`tensor`]: dense K-mode tensors, unfolding, mode products.
//! - [`pten`]: the PTEN v1 binary tensor file format.
//! - [`linalg`]: factor matrices, truncated eigendecomposition, projections.
//! - [`tucker`]: standard Tucker (HOSVD + HOOI) and the single-decomposition
//!   baselines.
//! - [`engine`]: the personalized fit itself.
//! - [`container`]: model container serialization and trace CSV export.
//! - [`apps`]: classification, monitoring, clustering.
//! - [`simgen`]: synthetic pattern/planted data generators.
//! - [`metrics`]: evaluation against ground truth, convergence-rate fits.
//! - [`mod@bench`]: reproducible experiment protocols and their CSV
//!   summaries.

pub mod apps;
pub mod bench;
pub mod container;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pten;
pub mod seeding;
pub mod simgen;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use linalg::FactorMatrix;
pub use tensor::{Matrix, Tensor};
