//! Discrete and continuous entropies of probability densities, the exact
//! window decomposition that links them, and the binned EPR-steering witness
//! built on top of it.
//!
//! Every integral is a composite trapezoid sum on a uniform grid, and window
//! edges are required to fall on grid nodes. Under that rule the window
//! decomposition `h = Σ P h_l + H` holds to rounding and the bounds between
//! continuous and binned quantities hold without quadrature slack.

// `!(x > 0.0)` style tests are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connection;
pub mod corpus;
pub mod discretize;
pub mod entropy;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod steering;

pub use connection::{
    conditional_mi_probe, gap_suite, jensen_gaps, refine_convergence, vector_gap, verify_connection,
    ConnectionReport, GapReport, GapRow, InequalityId, ProbeReport,
};
pub use discretize::{bin_density, window_conditional};
pub use entropy::{
    conditional_entropy_differential, conditional_entropy_discrete, differential_entropy,
    discrete_entropy, mutual_information_differential, mutual_information_discrete, EntropyValue,
    LogBase,
};
pub use error::{Error, Result};
pub use gaussian::{analytic_entropies, momentum_joint, position_joint, BiphotonParams};
pub use grid::{Axis, BinAxis, BinningSpec, Diagnostics, GridDensity, Histogram};
pub use steering::{
    continuous_steering_lhs, discrete_steering_test, per_axis_vs_vector, steering_bin_scan,
    SteeringReport,
};
