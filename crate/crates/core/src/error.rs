use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("outer boundary radius is not positive near angle {angle}")]
    NonPositiveRadius { angle: f64 },

    #[error("radial profile has odd harmonic of order {order}; the domain would not be centrally symmetric")]
    AsymmetricProfile { order: u32 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("hole of radius {radius} does not fit inside the outer domain (inradius {inradius})")]
    HoleTooLarge { radius: f64, inradius: f64 },

    #[error("offset {offset} is outside the admissible range [0, {t_max})")]
    OffsetOutOfRange { offset: f64, t_max: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("mesh has no {0} boundary edges")]
    EmptyBoundary(&'static str),

    #[error("iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("reduced stiffness matrix is not positive definite")]
    SingularSystem,

    #[error("trial function vanishes on the outer boundary")]
    ZeroBoundaryTrace,

    #[error("flux trace is empty")]
    EmptyTrace,

    #[error("circle trace needs at least 16 samples, got {count}")]
    TooFewSamples { count: usize },

    #[error("circle trace samples are not uniformly spaced in angle")]
    NonUniformSamples,

    #[error("derivative problem is incompatible (relative compatibility residual {residual:e})")]
    IncompatibleData { residual: f64 },

    #[error("finite-difference stencil [{low}, {high}] leaves the admissible range (t_max {t_max})")]
    StepTooLarge { low: f64, high: f64, t_max: f64 },

    #[error("shell needs outer radius > inner radius > 0 and dimension >= 2 (got R={outer}, r={inner}, n={dimension})")]
    BadShell { outer: f64, inner: f64, dimension: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
