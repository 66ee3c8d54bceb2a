use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("ball of radius {radius} does not fit in a box of side {box_length}")]
    BallTooLarge { radius: f64, box_length: f64 },
    #[error("rescaled evaluation point leaves the represented domain: {0}")]
    DomainExceeded(String),
    #[error("dyadic shell {k} lies below grid resolution")]
    ShellUnresolved { k: i32 },
    #[error("seam mismatch {defect:e} exceeds tolerance {tol:e}")]
    SeamMismatch { defect: f64, tol: f64 },
    #[error("cumulative L3 mass diverges under refinement")]
    NonIntegrableProfile,
    #[error("singular point: kernel evaluated at the origin")]
    SingularPoint,
    #[error("singular quadrature self-check failed: {0}")]
    SingularQuadrature(String),
    #[error("exponents (s, q) = ({s}, {q}) violate 2/s + 3/q = 3 with q in (1, 3]")]
    AdmissibilityViolation { s: f64, q: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("time mesh too coarse: {0} samples (need at least 4)")]
    MeshTooCoarse(usize),
    #[error("no contraction: difference ratio above 1 for 3 consecutive iterations")]
    NoContraction,
    #[error("gate violation: {0}")]
    GateViolation(String),
    #[error("exponent order: q = {q} exceeds p = {p}")]
    ExponentOrder { p: f64, q: f64 },
    #[error("CFL gate violated: max|v| dt / dx = {cfl:.4} > {limit}")]
    CflViolation { cfl: f64, limit: f64 },
    #[error("non-finite value encountered at t = {0}")]
    NanGuard(f64),
    #[error("test function support violation: {0}")]
    SupportViolation(String),
    #[error("unresolved cylinder: {0}")]
    UnresolvedCylinder(String),
    #[error("coverage gap: ledger ends at {ledger_end} but {required} is required")]
    CoverageGap { ledger_end: f64, required: f64 },
    #[error("compatibility violation: annulus mean of ∇χ·v is {0:e} relative")]
    CompatibilityViolation(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
