//! The mixed-integer program for sequence synthesis.
//!
//! Each symbolic input gets an `(N+1) x N` binary matrix whose row `i` is
//! the SN for count `i`. Value constraints fix row sums, monotonicity
//! constraints make columns non-decreasing, and together they make every
//! feasible matrix the comparator image of exactly one permutation. Gate
//! behaviour is encoded per grid cell and cycle with the linear
//! constraints of [`encode_gate`], and the objective sums `|C|` over the
//! grid using a `t+ - t-` split.

mod encode;
mod lp;
mod solution;
mod system;

pub use encode::{build_program, encode_gate, gate_truth_system, induced_assignment, EncodeOptions, Layout, MatrixLayout, Sig, VarOrigin};
pub use lp::{check_equivalent, export_lp, parse_lp};
pub use solution::{import_solution, parse_decimal, parse_solution, recover_sequences, Assignment, VerifiedSolution};
pub use system::{Constraint, ConstraintSystem, Relation, VarKind, Variable};
