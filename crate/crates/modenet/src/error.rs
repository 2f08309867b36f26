//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by network construction, scattering, design, reduction,
/// noise, and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode `{0}` is not part of the network")]
    UnknownMode(String),

    #[error("invalid mode `{id}`: {reason}")]
    InvalidMode { id: String, reason: String },

    #[error("invalid coupling `{a}`--`{b}`: {reason}")]
    InvalidCoupling {
        a: String,
        b: String,
        reason: String,
    },

    #[error("mode-coupling matrix is singular at probe offset {offset_hz} Hz")]
    Singular { offset_hz: f64 },

    #[error(
        "mode-coupling matrix is numerically unusable at probe offset {offset_hz} Hz \
         (estimated condition number {cond:.3e})"
    )]
    IllConditioned { offset_hz: f64, cond: f64 },

    #[error("no impedance-matched detuning at this phase/cooperativity (radicand {0:.6e} < 0)")]
    NoMatchedDetuning(f64),

    #[error("loop-phase argument {0:.6} lies outside [-1, 1]")]
    PhaseDomain(f64),

    #[error("pivot too small; mode {index} cannot be eliminated at this frequency (|M_kk| = {magnitude:.3e})")]
    PivotTooSmall { index: usize, magnitude: f64 },

    #[error("no vacuum coupling rate for cavity {cavity}, mechanical mode {mech}")]
    MissingVacuumCoupling { cavity: usize, mech: usize },

    #[error("unknown port `{0}`")]
    UnknownPort(String),

    #[error(
        "optimizer did not converge after {iterations} iterations (best {best:.6e} at {point:?})"
    )]
    OptimizerNonConvergence {
        iterations: usize,
        best: f64,
        point: Vec<f64>,
    },

    #[error(
        "fit did not converge within {iterations} iterations (residual norm {residual_norm:.6e})"
    )]
    FitNonConvergence {
        iterations: usize,
        residual_norm: f64,
        best: Vec<f64>,
    },

    #[error(
        "underdetermined problem: {observations} observations for {parameters} free parameters"
    )]
    Underdetermined {
        observations: usize,
        parameters: usize,
    },

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("spectral integration did not converge (partial value {partial:.6e})")]
    IntegrationNonConvergence { partial: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
