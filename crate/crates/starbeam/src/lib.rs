//! Joint hybrid/passive beamforming for STARS-aided terahertz links.
//!
//! A STARS (simultaneously transmitting and reflecting surface) splits each
//! impinging signal into a transmitted and a reflected part, so a single
//! passive surface can serve users on both of its sides. This crate models
//! the full downlink: a hybrid-beamforming base station, the surface, and
//! multipath THz propagation, for a single carrier or an OFDM band wide
//! enough that beam split across subcarriers matters.
//!
//! The optimizer maximizes a spectral-/energy-efficiency tradeoff with a
//! penalty dual decomposition (PDD): equality-coupled auxiliaries are
//! penalized in an augmented Lagrangian, an inner loop runs block coordinate
//! descent (a convex rate subproblem, element-wise surface updates,
//! element-wise analog beamformer updates, a least-squares digital
//! beamformer, and true-time-delay updates in the wideband case), and an
//! outer loop alternates dual ascent with penalty tightening.
//!
//! Modules:
//! - [`config`]: scenario description and the flat key-value config loader
//! - [`channel`]: array responses, THz pathloss, path sampling, narrowband
//!   and per-subcarrier wideband channel assembly
//! - [`stars`]: surface coefficient constraints and the coupled-phase
//!   projection
//! - [`numopt`]: golden-section search, BFGS, and the barrier solver for the
//!   per-iteration rate subproblem
//! - [`narrowband`] / [`wideband`]: the PDD drivers
//! - [`metrics`]: power models, spectral and energy efficiency
//! - [`baselines`]: full-digital, conventional-RIS and conventional
//!   wideband-hybrid reference schemes
//! - [`runner`]: seeded batch experiments and CSV output

pub mod baselines;
pub mod channel;
pub mod config;
pub mod metrics;
pub mod narrowband;
pub mod numopt;
pub mod runner;
pub mod stars;
pub mod wideband;

use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RVec = nalgebra::DVector<f64>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A config file failed to parse or violates the schema.
    #[error("config error: {0}")]
    Config(String),
    /// An I/O failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A CSV read/write failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// An optimizer failed in a way that is not a normal non-convergence
    /// (those are reported through result flags instead).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use config::{Band, ScenarioConfig, StarsMode};
pub use stars::StarsCoefficients;
