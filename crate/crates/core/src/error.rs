use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by measure construction, transform evaluation and the
/// subordination/edge solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: evaluation point {z} lies on the support of the measure")]
    Singularity { z: Complex64 },

    #[error("pole of M-transform at z = {z} (z*m(z)+1 = 0)")]
    Pole { z: Complex64 },

    #[error("iteration failed to converge at z = {z}: {msg} (last residual {residual:.3e})")]
    Convergence {
        z: Complex64,
        msg: String,
        residual: f64,
    },

    #[error("boundary extrapolation did not settle at x = {x}: estimate {estimate:.3e} (possible atom or support edge)")]
    Boundary { x: f64, estimate: f64 },

    #[error("input does not satisfy the Jacobi edge assumptions: {0}")]
    Structure(String),

    #[error("degenerate edge: |z_tilde''| = {value:.3e} below threshold")]
    DegenerateEdge { value: f64 },

    #[error("measure spec rejected: {0}")]
    Spec(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
