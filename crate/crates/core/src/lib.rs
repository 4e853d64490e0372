//! Numerical Finsler geometry.
//!
//! A [`FinslerStructure`] wraps a parsed expression `F(x, y)`. Everything
//! else is derived from truncated Taylor expansions of `F` at a point of the
//! slit tangent bundle: the fundamental and Cartan tensors, the Chern and
//! Berwald connections, geodesics and parallel transport, connections averaged
//! over the indicatrix, and the rigidity and holonomy criteria built on them.
//!
//! Most routines are generic over [`Real`], so `f32`, `f64` and extended
//! precision types all work. The aliases at the crate root fix `f64`.

// Negated comparisons are deliberate: NaN must fail positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod averaging;
pub mod chart;
pub mod classify;
pub mod connections;
pub mod error;
pub mod expr;
pub mod fields;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod presets;
pub mod sampling;
pub mod scalar;
pub mod structure;
pub mod tensors;
pub mod transport;

pub use chart::Chart;
pub use connections::{
    berwald_coefficients, berwald_defect, chern_coefficients, difference_tensor,
    formal_christoffel, landsberg_tensor, nonlinear_connection, pullback_connection, spray,
    BaseDependence, ConnectionCoefficients, ConnectionKind, DifferenceTensor, NonlinearConnection,
    NonlinearVariant, SprayData,
};
pub use error::{FinslerError, Result};
pub use expr::{check_homogeneity, eval_jet, HomogeneityReport, JetValue, MetricExpression};
pub use geometry::{Level, LocalGeometry};
pub use linalg::{Matrix, Tensor3};
pub use scalar::Real;
pub use structure::{FinslerStructure, MetricFamily};
pub use tensors::{
    cartan_tensor, convexity_scan, fundamental_tensor, CartanTensor, ConvexityScan,
    FundamentalTensor,
};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Tensor64 = Tensor3<f64>;
pub type Tensor32 = Tensor3<f32>;
pub type Geometry64 = LocalGeometry<f64>;
pub type Connection64 = ConnectionCoefficients<f64>;
pub type Connection32 = ConnectionCoefficients<f32>;
