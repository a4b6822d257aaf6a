use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("point {re:+.6e}{im:+.6e}i lies outside the analyticity sector")]
    SectorViolation { re: f64, im: f64 },
    #[error("point {re:+.6e}{im:+.6e}i is within 1e-6 of a pole of the potential")]
    PoleProximity { re: f64, im: f64 },
    #[error("maximum is degenerate: Hessian eigenvalue {0:.3e} is not negative")]
    DegenerateMaximum(f64),
    #[error("cutoff C={c} collides with lattice decay sum {decay_sum} (alpha={alpha:?})")]
    ForbiddenRadius {
        c: f64,
        alpha: Vec<u32>,
        decay_sum: f64,
    },
    #[error("dimension {0} is not supported here")]
    DimensionUnsupported(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scaling: {0}")]
    InvalidScaling(String),
    #[error("shift {re:+.4e}{im:+.4e}i lies outside the sector uncovered by the scaling angle")]
    SectorUncovered { re: f64, im: f64 },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("contour passes within {distance:.3e} of the spectrum (radius {radius:.3e})")]
    ContourTooClose { distance: f64, radius: f64 },
    #[error("doubling the quadrature changed the projector by {0:.3e} (relative)")]
    QuadratureDivergence(f64),
    #[error("integrator step size underflow at t={0}")]
    StepFailure(f64),
    #[error("fit window holds only {0} samples")]
    WindowTooShort(usize),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("potential is not short range (decay exponent {0})")]
    LongRangeUnsupported(f64),
    #[error("action tail is not negligible: {0:.3e}")]
    TailDivergence(f64),
    #[error("prescribed vector is not in the kernel (projected residual {0:.3e})")]
    PrescriptionNotInKernel(f64),
    #[error("truncation order too low: {0}")]
    TruncationTooLow(String),
    #[error("Picard contraction violated: ratio {0:.3} at iteration {1}")]
    ContractionViolated(f64, usize),
    #[error("tail truncation error {0:.3e} exceeds tolerance")]
    TailTruncationError(f64),
    #[error("prescribed coefficients drifted by {0:.3e}")]
    PrescriptionDrift(f64),
    #[error("projector is not rank one (rank gap {0:.3e})")]
    RankDeficiency(f64),
    #[error("normalization coefficient vanishes: {0}")]
    NormalizationDegenerate(String),
    #[error("projector factorization inconsistent (defect {0:.3e})")]
    InconsistentFactorization(f64),
    #[error("window at x={0} lies in the classically forbidden region")]
    WindowInClassicallyForbiddenRegion(f64),
    #[error("resonance {0:?} is not simple")]
    NonSimpleResonance(Vec<u32>),
    #[error("no exponential regime found: {0}")]
    NoExponentialRegime(String),
    #[error("matching radius {0} does not reach the asymptotic region")]
    MatchingRadiusTooSmall(f64),
    #[error("complex energy too far below the axis: {0}")]
    StiffnessFailure(String),
    #[error("residue methods disagree by {0:.3e} (relative)")]
    MethodDisagreement(f64),
    #[error("shift-invert and dense eigenvalues differ by {0:.3e}")]
    OracleDisagreement(f64),
    #[error("no pole found inside the residue contour")]
    PoleMissed,
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
