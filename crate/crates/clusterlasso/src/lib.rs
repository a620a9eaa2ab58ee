//! Feature selection for discrete-response expression data: cluster the data
//! with a full-covariance Gaussian mixture (the number of components picked by
//! BIC), then solve an l1-penalized least-squares path inside each cluster and
//! rank features by the order in which their coefficients activate along the
//! path.
//!
//! The crate is organized around the stages of that pipeline:
//!
//! * [`data`]: CSV parsing, ordinal label encoding, standardization, and
//!   row/column sub-matrix views.
//! * [`pca`]: principal component analysis used both for visualization and as
//!   a low-dimensional front end to the mixture scan.
//! * [`gmm`]: the Gaussian mixture model and its EM fitter.
//! * [`modelsel`]: BIC, the scan over the number of components, and the
//!   `log(bic - min + 1)` display transform.
//! * [`lasso`]: coordinate descent, the LARS homotopy, KKT verification, and
//!   coefficient paths over a descending lambda grid.
//! * [`pipeline`]: the end-to-end orchestration plus a seeded single-index
//!   synthetic data generator.
//! * [`plot`]: dependency-free SVG rendering of path and BIC curves.
//! * [`oracles`]: slow reference implementations that the test suites use to
//!   cross-check the fast ones.
//!
//! A narrative guide with runnable examples lives in the `book/` directory of
//! the repository; its code blocks are compiled and run as doc-tests (see
//! `guide.rs`).

pub mod data;
pub mod gmm;
pub mod lasso;
pub mod modelsel;
pub mod oracles;
pub mod pca;
pub mod pipeline;
pub mod plot;
pub mod rng;

#[cfg(doctest)]
mod guide;
