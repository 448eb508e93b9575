use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point θ = {theta} lies within the pole margin {margin} (frames are undefined at the poles)")]
    PoleSingularity { theta: f64, margin: f64 },

    #[error("quadrature degree {degree} is below the exactness bound {required} for band limit {l_max}")]
    QuadratureUnderResolved { degree: usize, required: usize, l_max: usize },

    #[error("matrix is not orthogonal: max |MᵀM − I| = {residual:e}")]
    NotOrthogonal { residual: f64 },

    #[error("loop path is not closed: first and last points differ by {gap:e}")]
    OpenPath { gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
