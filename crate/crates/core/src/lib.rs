//! Quantum normal forms of perturbed linear flows on the torus, with a
//! truncated-matrix Weyl quantization oracle.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod error;
pub mod frequency;
pub mod nf;
pub mod run;
pub mod spectra;
pub mod symbol;
pub mod weyl;

pub use error::{Error, Result};
pub use frequency::{DiophantineReport, Frequency};
