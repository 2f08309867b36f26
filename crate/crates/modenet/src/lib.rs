//! Driven parametric coupled-mode networks.
//!
//! This crate models networks of parametrically coupled resonances: it
//! assembles mode-coupling matrices, computes scattering matrices, designs
//! four-mode isolators, expands a physical two-cavity/two-oscillator device
//! into its off-resonant ten-mode network, reduces networks by Schur
//! complement elimination, computes output noise spectra, and fits measured
//! maps to the model by least squares.
//!
//! The narrative guide in `book/` walks through the theory and the API; its
//! code snippets are compiled and run as doc-tests (see [`guide`]).

pub mod error;
pub mod expansion;
pub mod fit;
pub mod isolator;
pub mod linalg;
pub mod network;
pub mod noise;
mod optim;

pub mod guide;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use network::{Coupling, Mode, ModeNetwork, SweepResult};
