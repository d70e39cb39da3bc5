//! Node-wise feature propagation precompute for scalable graph learning.
//!
//! The crate covers the whole precompute path:
//!
//! - [`graph`]: canonical undirected CSR storage, degrees, self-loops, components.
//! - [`correction`]: degree-targeted edge masking of high-degree nodes.
//! - [`encoding`]: weight-free local node context encodings (degree, eigenvector,
//!   cluster connectivity) combined into per-node kernel coefficients.
//! - [`propagation`]: the node-wise operator `D^(r-1) A D^(-r)` and k-step
//!   weighted propagation of a feature block.
//! - [`spectral`]: stationary distribution, second eigenvalue and per-node
//!   convergence bounds of the random-walk operator.
//! - [`dense`]: dense reference arithmetic used as an oracle on small graphs.
//! - [`probe`]: a softmax-regression probe over propagated features.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); hop-weight
//! schedules additionally accept exact rationals through [`Weight`]. The
//! aliases at the crate root fix the scalar to `f64`, which is what the file
//! formats and the CLI use.

pub mod correction;
pub mod dense;
pub mod encoding;
pub mod error;
pub mod generate;
pub mod graph;
pub mod io;
pub mod probe;
pub mod propagation;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Scalar, Weight};

/// Exact rational used for hop-weight arithmetic.
pub type Rational = num_rational::BigRational;

pub type Graph = graph::SparseGraph<f64>;
pub type Graph32 = graph::SparseGraph<f32>;
pub type Features = graph::FeatureMatrix<f64>;
pub type Features32 = graph::FeatureMatrix<f32>;
pub type Kernel = encoding::KernelCoefficients<f64>;
pub type Operator = propagation::NodeWiseOperator<f64>;
pub type PropagationSettings = propagation::PropagationConfig<f64>;
pub type Dense = dense::DenseMatrix<f64>;
pub type Report = spectral::ConvergenceReport<f64>;
pub type Probe = probe::ProbeModel<f64>;
