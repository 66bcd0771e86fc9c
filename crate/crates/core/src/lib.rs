//! Synthesis of deterministic number sequences for stochastic-computing
//! (SC) circuits.
//!
//! A stochastic number (SN) is a unary bitstream whose value is the
//! fraction of ones (unipolar) or the signed fraction (bipolar). SNs are
//! produced by a comparator fed with a number sequence; the accuracy of an
//! SC circuit depends on how the sequences driving its inputs correlate.
//! This crate builds the mixed-integer program that describes optimal
//! sequences for a given circuit, solves it natively over permutation
//! space, and verifies results with a bit-exact simulator.
//!
//! Modules:
//! - [`sn`]: bitstreams, comparator generation, decoding, SCC, baseline
//!   generators.
//! - [`circuit`]: gate netlists, function specifications, the problem
//!   document format and the cycle-accurate evaluator.
//! - [`mip`]: constraint-system construction, LP export/parse, solution
//!   import and sequence recovery.
//! - [`solver`]: branch-and-bound and annealing over permutations.
//! - [`decompose`]: multi-input circuits as chains of two-input stages.
//! - [`bench`]: exhaustive accuracy sweeps and CSV/JSON reports.

pub mod bench;
pub mod circuit;
pub mod decompose;
mod error;
pub mod mip;
pub mod sn;
pub mod solver;

pub use error::{Error, Result};

/// Exact rational number used for every value-domain computation.
pub type Rational = num_rational::Ratio<i128>;

pub use circuit::{parse_spec, CircuitSpec, FunctionSpec, ProblemSpec};
pub use sn::{Bitstream, Encoding, GeneratorKind, NumberSequence};
pub use mip::parse_decimal;
pub use solver::{solve, SolveConfig, SolveMode, Status, SynthesisResult};

#[cfg(test)]
pub(crate) fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

pub(crate) fn rat_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
