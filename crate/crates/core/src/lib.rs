//! Free multiplicative convolution of probability measures on [0, inf).
//!
//! Given two measures mu and nu (atoms plus Jacobi-type densities), this
//! crate computes mu boxtimes nu through its analytic subordination system:
//! the density by Stieltjes inversion of extrapolated boundary values, the
//! atoms by the exact pairing rule, the support endpoints from the edge
//! characterization equation, and the square-root expansion coefficients of
//! the subordination functions at both edges.
//!
//! Start with [`Measure`] and the pipeline entry points in [`density`] and
//! [`edges`]; the `examples/` directory has one runnable program per
//! capability.

pub mod density;
pub mod edges;
pub mod error;
pub mod measures;
pub mod oracles;
pub mod quadrature;
pub mod series;
pub mod subordination;
pub mod transforms;
pub mod validation;

pub use error::{Error, Result};
pub use measures::{make_jacobi, Atom, JacobiComponent, Measure, MeasureStats, ValidationReport};
pub use transforms::{eta_psi, m_transform, stieltjes, TransformValue};

pub use num_complex::Complex64;
