//! Randomized equivalence of two formulas: constant substitution, then
//! solve-and-compare trials over random assignments.

mod check;
mod compile;
mod constants;
mod solve;

pub use check::{
    check_equivalence, EquivParams, EquivVerdict, ParamsError, Trial, TrialOutcome, Verdict, VerdictMode, DEFAULT_SEED,
};
pub use compile::Residual;
pub use constants::{substitute_constants, ConstantValue, ConstantsError, ConstantsMap};
pub use solve::{all_close, grid, solve_residual, SolutionSet, SolveError};

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::formula::Formula;

/// Solve `f` for `target` with every other free variable taken from
/// `assignment`.
pub fn solve_target(
    f: &Formula,
    target: &str,
    assignment: &BTreeMap<String, f64>,
    eps: f64,
    t_max: Duration,
) -> Result<SolutionSet, SolveError> {
    let deadline = Instant::now() + t_max;
    solve_residual(&Residual::compile(f, target, assignment), eps, Some(deadline))
}
