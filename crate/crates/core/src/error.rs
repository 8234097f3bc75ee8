use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lattice mismatch: d={left_dim}, dxi={left_dxi} vs d={right_dim}, dxi={right_dxi}")]
    LatticeMismatch {
        left_dim: usize,
        left_dxi: f64,
        right_dim: usize,
        right_dxi: f64,
    },

    #[error("exact resonance k·ω = 0 at k = {k:?}")]
    Resonant { k: Vec<i32> },

    #[error("mode k = {k:?} lies outside the certified range |k|₁ ≤ {k_max}")]
    CertificateTooSmall { k: Vec<i32>, k_max: u32 },

    #[error("near resonance at k = {k:?}: |k·ω| = {divisor:e}")]
    NearResonant { k: Vec<i32>, divisor: f64 },

    #[error("bound violated: {lhs:e} > {rhs:e}")]
    BoundViolated { lhs: f64, rhs: f64 },

    #[error("Lie series diverges: terms stopped decreasing at order {order}")]
    SeriesDivergence { order: usize },

    #[error("counterterm fixed point did not contract after {iterations} iterations (residual {residual:e})")]
    ContractionFailure { iterations: usize, residual: f64 },

    #[error("contraction violated at step {step}: ‖V_(n+1)‖ = {after:e} > α·‖V_n‖ = {bound:e}")]
    ContractionViolated { step: usize, after: f64, bound: f64 },

    #[error("symbol band {band} exceeds the truncation limit {limit}")]
    BandOverflow { band: usize, limit: usize },

    #[error("truncation too small: unitarity defect {defect:e} on the interior block")]
    TruncationTooSmall { defect: f64 },

    #[error("quadrature grid too small: unitarity defect {defect:e}")]
    GridTooSmall { defect: f64 },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),

    #[error("diffeomorphism breakdown: min det(∂θ) = {min_det:e} on the grid")]
    DiffeoBreakdown { min_det: f64 },

    #[error("KAM iteration diverged at step {step}: ‖v‖ went from {before:e} to {after:e}")]
    KamDivergence { step: usize, before: f64, after: f64 },
}
