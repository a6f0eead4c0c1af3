//! Sparse Fourier-atom symbols and their brackets.

mod bracket;
mod io;
mod key;
mod potential;
#[allow(clippy::module_inception)]
mod symbol;

pub use bracket::{
    bracket, bracket_with_l, moyal_bracket, poisson_bracket, BracketKind, Bracketed, LSymbol,
};
pub use io::{format_symbol, parse_symbol, write_symbol};
pub use key::{AtomKey, MAX_DIM, MAX_INDEX};
pub use potential::{build_potential, Generator, PotentialSpec};
pub use symbol::{Parity, Symbol, TruncationPolicy, DEFAULT_SYMMETRY_TOL};
