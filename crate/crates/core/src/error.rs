use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the simulators and the harness can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry in input operator")]
    NonFiniteInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("missing model parameter `{0}`")]
    MissingParam(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("spectral gap collapsed to {gap:e} at t = {t}")]
    GapCollapse { t: f64, gap: f64 },

    #[error("finite-difference stencil of half-width {h:e} leaves [0, T] at t = {t}")]
    BoundaryStencil { t: f64, h: f64 },

    #[error("operator is not a projector: |P^2 - P| = {defect:e}")]
    NotAProjector { defect: f64 },

    #[error("invalid projector family: {0}")]
    FamilyInvalid(String),

    #[error("intertwiner lost unitarity at t = {t}: |W^dag W - I| = {defect:e}")]
    UnitarityLoss { t: f64, defect: f64 },

    #[error("initial state has weight {leak:e} outside the monitored subspace")]
    InitialStateOutsideSubspace { leak: f64 },

    #[error("cumulative survival underflowed at step {step}")]
    ZeroSurvival { step: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("positivity lost at t = {t}: clipped weight {clipped:e}")]
    PositivityLoss { t: f64, clipped: f64 },

    #[error("kappa * dt = {kappa_dt} exceeds the stability guard 0.1")]
    StabilityGuard { kappa_dt: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("state norm underflowed at t = {t}")]
    NormUnderflow { t: f64 },

    #[error("oracle did not converge: refinement doubling changed result by {change:e}")]
    NonConvergence { change: f64 },

    #[error("invalid configuration field `{0}`")]
    ConfigInvalid(String),

    #[error("log-log fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFiniteInput => "NonFiniteInput",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::UnknownModel(_) => "UnknownModel",
            Error::MissingParam(_) => "MissingParam",
            Error::InvalidParam { .. } => "InvalidParam",
            Error::GapCollapse { .. } => "GapCollapse",
            Error::BoundaryStencil { .. } => "BoundaryStencil",
            Error::NotAProjector { .. } => "NotAProjector",
            Error::FamilyInvalid(_) => "FamilyInvalid",
            Error::UnitarityLoss { .. } => "UnitarityLoss",
            Error::InitialStateOutsideSubspace { .. } => "InitialStateOutsideSubspace",
            Error::ZeroSurvival { .. } => "ZeroSurvival",
            Error::InvalidDensityMatrix(_) => "InvalidDensityMatrix",
            Error::PositivityLoss { .. } => "PositivityLoss",
            Error::StabilityGuard { .. } => "StabilityGuard",
            Error::GridMismatch(_) => "GridMismatch",
            Error::NormUnderflow { .. } => "NormUnderflow",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::FitDegenerate(_) => "FitDegenerate",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "IoError",
            Error::Json(_) => "IoError",
        }
    }
}
