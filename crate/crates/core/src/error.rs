//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "domain formula undefined: 1 + log10(beta_Z) = {denom:.6} <= 0 at beta_Z = {beta_z} \
         (the cylindrical formulation requires beta_Z > 0.1; use an explicit-extent domain \
         for Coulomb tests)"
    )]
    DomainScale { beta_z: f64, denom: f64 },

    #[error("{coord} = {value} outside [0, {max}]")]
    OutOfDomain {
        coord: &'static str,
        value: f64,
        max: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("duplicate collocation nodes at indices {i} and {j}")]
    DuplicateNodes { i: usize, j: usize },

    #[error("operator size mismatch: expected {expected}, got {got} ({context})")]
    SizeMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("singular boundary block {block} while eliminating the {edge} edge")]
    SingularBoundaryBlock { block: &'static str, edge: &'static str },

    #[error("singular reduced operator in {context}")]
    SingularOperator { context: &'static str },

    #[error("missing {kind} potential for electron pair ({i}, {j})")]
    MissingPotential { kind: &'static str, i: usize, j: usize },

    #[error(
        "eigensolver did not converge after {restarts} restarts \
         (best residuals: {best_residuals:?}, tol = {tol:e})"
    )]
    EigenNoConvergence {
        restarts: usize,
        best_residuals: Vec<f64>,
        tol: f64,
    },

    #[error("eigenvalue near shift {sigma} has non-real part {imag:e}; state is under-resolved")]
    ComplexEigenvalue { sigma: f64, imag: f64 },

    #[error("orbital state lost: best overlap {best:.4} < 0.5 (overlaps: {overlaps:?})")]
    StateLost { best: f64, overlaps: Vec<f64> },

    #[error(
        "SCF did not converge in {max_iter} iterations (|dE| = {last_delta:e}, \
         E_HF trace: {trace:?})"
    )]
    ScfNoConvergence {
        max_iter: usize,
        last_delta: f64,
        trace: Vec<f64>,
    },

    #[error("fit did not converge after {iterations} iterations (|grad| = {grad_norm:e}, ssr = {ssr:e})")]
    FitNoConvergence {
        iterations: usize,
        grad_norm: f64,
        ssr: f64,
        best: Vec<f64>,
    },

    #[error("fit rejected: R^2 = {r_squared:.4} < {min:.2} for {model}")]
    FitQuality {
        model: &'static str,
        r_squared: f64,
        min: f64,
    },

    #[error("not enough data points for {model}: need >= {needed}, got {got}")]
    NotEnoughPoints {
        model: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("rational-fit denominator |{denom:e}| < 1e-12 at x = {x} (pole)")]
    RationalPole { denom: f64, x: f64 },

    #[error("unknown state label {label:?}")]
    UnknownState { label: String },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
