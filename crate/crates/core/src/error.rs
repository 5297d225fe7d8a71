use thiserror::Error;

/// Errors raised while constructing or evaluating dispersal kernels.
#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("unsupported ambient dimension {0} (supported: 1, 2)")]
    UnsupportedDim(usize),
    #[error("point has dimension {got}, kernel expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("kernel mass check failed: |integral - 1| = {residual:.3e} exceeds {tol:.1e}")]
    MassCheck { residual: f64, tol: f64 },
}

/// Errors raised by domain geometry operations.
#[derive(Debug, Error)]
pub enum DomainError {
    #[error("domains have mismatched dimensions ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("balls in a union must be pairwise disjoint (balls {0} and {1} overlap)")]
    OverlappingBalls(usize, usize),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("domain variant `{0}` has no C1 boundary parameterization")]
    NoBoundaryParameterization(&'static str),
    #[error("boundary quadrature needs at least 8 samples, got {0}")]
    TooFewBoundarySamples(usize),
    #[error("cannot build a ball of the same measure: domain measure is {0}")]
    DegenerateMeasure(f64),
    #[error("map is not injective on the base domain (contraction ratio {0:.3e})")]
    NonInjectiveMap(f64),
    #[error("map Jacobian determinant {0:.3e} below positivity floor")]
    VanishingJacobian(f64),
}

/// Errors raised while assembling or comparing discrete operators.
#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("domain does not fit inside the container grid bounding box")]
    DomainOutsideContainer,
    #[error("kernel dimension {0} does not match domain dimension {1}")]
    DimMismatch(usize, usize),
    #[error("no grid cell centers fall inside the domain; refine the grid (h = {h:.3e})")]
    EmptyActiveSet { h: f64 },
    #[error("operators live on different container grids")]
    GridMismatch,
    #[error("operators were assembled from different kernels")]
    KernelMismatch,
    #[error("binary operator dump is malformed: {0}")]
    BadDump(String),
}

/// Errors raised by the eigensolver and spectral post-processing.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(
        "Jacobi eigensolver did not converge after {sweeps} sweeps \
         (off-diagonal norm {off_norm:.3e}, target {target:.3e})"
    )]
    NoConvergence {
        sweeps: usize,
        off_norm: f64,
        target: f64,
    },
    #[error("Rayleigh quotient of the zero vector is undefined")]
    ZeroVector,
    #[error("vector length {got} does not match the active set size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Errors raised by the shape-derivative machinery.
#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("kernel smoothness C0 is insufficient; shape operations need C1 or better")]
    KernelNotSmooth,
    #[error("eigenvalue {idx} is not simple (gap {gap:.3e} below guard {guard:.3e})")]
    NotSimple { idx: usize, gap: f64, guard: f64 },
    #[error("eigenvalue magnitude {0:.3e} too small for the boundary smoothing formula")]
    TinyEigenvalue(f64),
    #[error("eigenvalue tracking failed: gap collapsed while following index {idx} (t = {t:.3e})")]
    TrackingCollapse { idx: usize, t: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Errors raised by experiment drivers.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("candidate measures differ beyond 1e-3 relative: {0:.6} vs {1:.6}")]
    UnequalMeasures(f64, f64),
    #[error("two-ball separation {0:.3} leaves the balls overlapping")]
    OverlappingBalls(f64),
    #[error("epsilon {eps} is not aligned with grid spacing h = {h}")]
    MisalignedEps { eps: f64, h: f64 },
    #[error("invariant `{name}` violated: {details}")]
    InvariantViolation { name: &'static str, details: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

impl ExperimentError {
    /// Name of the violated invariant, if this is an invariant failure.
    pub fn invariant_name(&self) -> Option<&'static str> {
        match self {
            ExperimentError::InvariantViolation { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// Shorthand used by the experiment layer.
pub fn invariant(name: &'static str, details: impl Into<String>) -> ExperimentError {
    ExperimentError::InvariantViolation {
        name,
        details: details.into(),
    }
}
