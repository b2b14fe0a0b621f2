//! Pseudospectral free-channel wave operator diagnostics for Schrödinger
//! dynamics on a periodic box.

pub mod channels;
pub mod cutoffs;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod phase_space;
pub mod propagators;

pub use error::{Error, Result};
pub use field::*;
pub use rustfft::num_complex::{self, Complex64};
