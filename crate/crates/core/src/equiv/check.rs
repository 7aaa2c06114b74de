use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::constants::{substitute_constants, ConstantsMap};
use super::solve::{all_close, SolutionSet, SolveError};
use super::{solve_target, Residual};
use crate::formula::Formula;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivParams {
    /// Trial cap.
    pub n_max: u32,
    /// Valid (non-failure) trials needed before stopping.
    pub n_succ: u32,
    /// Non-rejecting trials needed for an Equivalent verdict.
    pub n_eq: u32,
    pub eps: f64,
    pub sample_lo: f64,
    pub sample_hi: f64,
    /// Per-solve time budget in milliseconds.
    pub t_max_ms: u64,
    pub seed: u64,
    /// Keep the per-trial log in the verdict.
    #[serde(skip)]
    pub keep_log: bool,
}

pub const DEFAULT_SEED: u64 = 20250601;

impl Default for EquivParams {
    fn default() -> Self {
        EquivParams {
            n_max: 40,
            n_succ: 10,
            n_eq: 10,
            eps: 1e-6,
            sample_lo: 2.0,
            sample_hi: 20.0,
            t_max_ms: 200,
            seed: DEFAULT_SEED,
            keep_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("need n_eq <= n_succ <= n_max, got {n_eq}, {n_succ}, {n_max}")]
    Counts { n_eq: u32, n_succ: u32, n_max: u32 },
    #[error("eps must be positive and finite, got {0}")]
    Eps(f64),
    #[error("sampling interval must satisfy 0 < lo < hi, got [{0}, {1}]")]
    Interval(f64, f64),
    #[error("t_max must be positive")]
    Timeout,
}

impl EquivParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.n_eq <= self.n_succ && self.n_succ <= self.n_max) {
            return Err(ParamsError::Counts { n_eq: self.n_eq, n_succ: self.n_succ, n_max: self.n_max });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ParamsError::Eps(self.eps));
        }
        if !(self.sample_lo > 0.0 && self.sample_lo < self.sample_hi && self.sample_hi.is_finite()) {
            return Err(ParamsError::Interval(self.sample_lo, self.sample_hi));
        }
        if self.t_max_ms == 0 {
            return Err(ParamsError::Timeout);
        }
        Ok(())
    }

    pub fn t_max(&self) -> Duration {
        Duration::from_millis(self.t_max_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Equivalent,
    Inequivalent,
}

/// How a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMode {
    /// Random solve-and-compare trials.
    Trials,
    /// Neither formula has a free variable; one direct numeric comparison.
    Direct,
    /// Equality against inequality, or `<` against `≤`; no trials run.
    RelationMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    NonRejecting,
    Rejecting,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub target: String,
    pub assignment: BTreeMap<String, f64>,
    pub first: Result<SolutionSet, SolveError>,
    pub second: Result<SolutionSet, SolveError>,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivVerdict {
    pub verdict: Verdict,
    pub mode: VerdictMode,
    pub n_eq: u32,
    pub n_neq: u32,
    pub n_fail: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<Trial>,
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }

    pub fn trials_run(&self) -> u32 {
        self.n_eq + self.n_neq + self.n_fail
    }

    fn without_trials(verdict: Verdict, mode: VerdictMode) -> Self {
        EquivVerdict { verdict, mode, n_eq: 0, n_neq: 0, n_fail: 0, trials: Vec::new() }
    }
}

/// Put a formula into its graded form: `≈` becomes `=`, and `>`/`≥` are
/// mirrored onto `<`/`≤`.
fn graded(f: &Formula) -> Formula {
    let (relation, swap) = f.relation.graded();
    if swap {
        Formula::new(f.rhs.clone(), relation, f.lhs.clone())
    } else {
        Formula::new(f.lhs.clone(), relation, f.rhs.clone())
    }
}

/// RNG for a formula pair. The seed material orders the two canonical prints,
/// so the trial schedule does not depend on argument order.
fn pair_rng(seed: u64, a: &str, b: &str) -> ChaCha8Rng {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(lo.as_bytes());
    h.update([0u8]);
    h.update(hi.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Decide whether two formulas are equivalent.
pub fn check_equivalence(f1: &Formula, f2: &Formula, c: &ConstantsMap, p: &EquivParams) -> EquivVerdict {
    let g1 = graded(&substitute_constants(f1, c));
    let g2 = graded(&substitute_constants(f2, c));
    if g1.relation != g2.relation {
        return EquivVerdict::without_trials(Verdict::Inequivalent, VerdictMode::RelationMismatch);
    }

    let vars: Vec<String> = g1.free_variables().union(&g2.free_variables()).cloned().collect();
    if vars.is_empty() {
        return direct(&g1, &g2, p.eps);
    }

    let mut rng = pair_rng(p.seed, &g1.canonical(), &g2.canonical());
    let (mut n_eq, mut n_neq, mut n_fail) = (0u32, 0u32, 0u32);
    let mut trials = Vec::new();
    for k in 1..=p.n_max {
        let target = &vars[rng.random_range(0..vars.len())];
        let assignment: BTreeMap<String, f64> = vars
            .iter()
            .filter(|v| *v != target)
            .map(|v| (v.clone(), rng.random_range(p.sample_lo..p.sample_hi)))
            .collect();
        let s1 = solve_target(&g1, target, &assignment, p.eps, p.t_max());
        let s2 = solve_target(&g2, target, &assignment, p.eps, p.t_max());
        let outcome = classify(&s1, &s2, p.eps);
        match outcome {
            TrialOutcome::NonRejecting => n_eq += 1,
            TrialOutcome::Rejecting => n_neq += 1,
            TrialOutcome::Failure => n_fail += 1,
        }
        if p.keep_log {
            trials.push(Trial { target: target.clone(), assignment, first: s1, second: s2, outcome });
        }
        if n_neq > 0 {
            break;
        }
        if n_eq + n_neq >= p.n_succ && k >= p.n_succ {
            break;
        }
    }
    let verdict = if n_eq >= p.n_eq && n_neq == 0 { Verdict::Equivalent } else { Verdict::Inequivalent };
    EquivVerdict { verdict, mode: VerdictMode::Trials, n_eq, n_neq, n_fail, trials }
}

fn classify(s1: &Result<SolutionSet, SolveError>, s2: &Result<SolutionSet, SolveError>, eps: f64) -> TrialOutcome {
    if matches!(s1, Err(SolveError::Timeout)) || matches!(s2, Err(SolveError::Timeout)) {
        return TrialOutcome::Failure;
    }
    let empty = SolutionSet::empty();
    let a = s1.as_ref().unwrap_or(&empty);
    let b = s2.as_ref().unwrap_or(&empty);
    if a.is_empty() && b.is_empty() {
        TrialOutcome::Failure
    } else if all_close(a, b, eps) {
        TrialOutcome::NonRejecting
    } else {
        TrialOutcome::Rejecting
    }
}

// Both formulas are closed statements: equivalent when both hold and they
// state the same value.
fn direct(g1: &Formula, g2: &Formula, eps: f64) -> EquivVerdict {
    let none = BTreeMap::new();
    let holds_at = |g: &Formula| {
        let (residual, scale) = Residual::compile(g, "", &none).constant()?;
        let lhs = g.lhs.eval(&|_| None);
        (residual.is_finite() && residual.abs() <= eps * scale).then_some(lhs)
    };
    let same = match (holds_at(g1), holds_at(g2)) {
        (Some(a), Some(b)) => (a - b).abs() <= eps * 1f64.max(a.abs()).max(b.abs()),
        _ => false,
    };
    let verdict = if same { Verdict::Equivalent } else { Verdict::Inequivalent };
    EquivVerdict::without_trials(verdict, VerdictMode::Direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, UnitTable};

    fn f(src: &str) -> Formula {
        parse_formula(src, &UnitTable::default()).unwrap().remove(0)
    }

    fn check(a: &str, b: &str) -> EquivVerdict {
        check_equivalence(&f(a), &f(b), &ConstantsMap::new(), &EquivParams::default())
    }

    #[test]
    fn identity_is_equivalent() {
        let v = check("F = m a", "F = m a");
        assert!(v.is_equivalent());
        assert_eq!(v.n_eq, 10);
        assert_eq!(v.trials_run(), 10);
    }

    #[test]
    fn coefficient_change_is_rejected_on_first_trial() {
        let v = check("x = A_0 + A_1 t^2", "x = A_0 + 2 A_1 t^2");
        assert_eq!(v.verdict, Verdict::Inequivalent);
        assert_eq!(v.n_neq, 1);
    }

    #[test]
    fn relation_kinds_must_agree() {
        let v = check("x < y", "x = y");
        assert_eq!(v.mode, VerdictMode::RelationMismatch);
        assert_eq!(v.trials_run(), 0);
        assert!(check("x > y", "y < x").is_equivalent());
        assert!(check("x \\approx 2 y", "x = 2 y").is_equivalent());
    }

    #[test]
    fn closed_statements_compare_directly() {
        assert!(check("4 = 2 + 2", "4 = 2 \\cdot 2").is_equivalent());
        assert!(!check("4 = 2 + 2", "5 = 5").is_equivalent());
        assert!(!check("4 = 5", "4 = 5").is_equivalent());
    }

    #[test]
    fn params_validate() {
        assert!(EquivParams::default().validate().is_ok());
        let bad = EquivParams { n_succ: 50, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ParamsError::Counts { .. })));
        let bad = EquivParams { sample_lo: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
