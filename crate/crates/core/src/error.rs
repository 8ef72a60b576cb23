use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // arithmetic
    #[error("frequency supplied as an exact rational {0}/{1}")]
    RationalInput(i64, i64),
    #[error("only {0} partial quotients are certified by the input precision (need at least 3)")]
    PrecisionExhausted(usize),
    #[error("need at least {needed} convergents, have {have}")]
    InsufficientDepth { needed: usize, have: usize },
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    // trigmat
    #[error("grid of {0} samples is too coarse (need a power of two >= 4)")]
    GridTooCoarse(usize),
    #[error("matrix violates {group} membership: residual {residual:.3e}")]
    GroupViolation { group: String, residual: f64 },
    #[error("strip widths must satisfy h' < h (got h = {h}, h' = {h_prime})")]
    BadStrip { h: f64, h_prime: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // lyapunov
    #[error("matrix product became singular at iterate {0}")]
    Degenerate(usize),
    #[error("no affine window of at least 3 strip heights found (best R^2 = {best_r2:.6})")]
    NoAffineWindow { best_r2: f64 },
    #[error("cocycle is not uniformly hyperbolic (no dominated splitting detected)")]
    NotUH,

    // topology
    #[error("map has nonzero degree {0}; not homotopic to the identity")]
    NonzeroDegree(i64),
    #[error("map is singular on the evaluation grid near x = {0}")]
    SingularOnGrid(f64),
    #[error("frame alignment lost at grid index {index} (overlap {overlap:.3})")]
    AlignmentLost { index: usize, overlap: f64 },

    // splitting
    #[error("cocycle is not {0}-dominated")]
    NotDominated(usize),
    #[error("frame grids do not match: {0}")]
    GridMismatch(String),
    #[error("symplectic form degenerate on the subspace (min singular value {0:.3e})")]
    DegenerateForm(f64),

    // blockdiag
    #[error("pairing between unstable and stable frames is degenerate (min singular value {0:.3e})")]
    DegeneratePairing(f64),
    #[error("monodromy signs disagree: tau(E^u) = {tau_u}, tau(E^s) = {tau_s}")]
    TauMismatch { tau_u: i8, tau_s: i8 },
    #[error("{what} residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    ResidualTooLarge {
        what: String,
        residual: f64,
        tol: f64,
    },

    // hermdiag
    #[error("eigenvalue branches could not be separated near x = {0}")]
    DegenerateUnresolved(f64),
    #[error("Hermitian family is not invertible near x = {x} (min |eigenvalue| = {min_abs:.3e})")]
    NotInvertible { x: f64, min_abs: f64 },
    #[error("frame is rank deficient (min singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("Krein signature of the center bundle is {0}, expected 0")]
    NonzeroSignature(i64),
    #[error("family is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    // experiments
    #[error("neither omega^1 nor omega^2 snaps to zero (omega^1 = {0}, omega^2 = {1})")]
    NoRegularDirection(i64, i64),
    #[error("reducibility attempt stalled at residual {0:.3e}")]
    ReducibilityFailed(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),

    // io
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
