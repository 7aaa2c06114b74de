//! Process-level grading of stepwise formula derivations.
//!
//! A reference solution is a DAG of formulas. Candidate formulas are matched
//! against its nodes by a randomized solve-and-compare equivalence test, and
//! the credited set is the ancestor closure of the matched nodes.

pub mod cli;
pub mod dataset;
pub mod equiv;
pub mod formula;
pub mod pipeline;
pub mod rubric;
pub mod stats;
