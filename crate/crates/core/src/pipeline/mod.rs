//! Grading a candidate solution against a rubric: extract formulas, match
//! them to rubric nodes, score by ancestor closure, aggregate over datasets.

mod report;

pub use report::{grade_dataset, AggregateReport, ProblemReport, ReportFormat, Rollup, Rollups, RunMeta};

use std::collections::{BTreeMap, BTreeSet};

use dashmap::DashMap;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{CandidateSolution, Problem};
use crate::equiv::{check_equivalence, substitute_constants, ConstantsMap, EquivParams, Verdict};
use crate::formula::{extract_formulas, parse_block, Expr, Formula, UnitTable};
use crate::rubric::{RubricDag, ScoreError, ScoreReport};

/// Shared state for one grading run. The memo caches verdicts per formula
/// pair, keyed on the ordered pair of canonical prints.
pub struct Grader<'a> {
    pub units: &'a UnitTable,
    pub constants: &'a ConstantsMap,
    pub params: EquivParams,
    memo: DashMap<(String, String), Verdict>,
}

/// A rubric node's formula after parsing. Chains such as `a = b = c` yield
/// several pieces; the node matches when every piece is matched.
#[derive(Debug, Clone)]
pub struct ParsedNode {
    pub index: usize,
    pub pieces: Result<Vec<Formula>, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub matched: BTreeSet<usize>,
    /// Why each unmatched node did not match.
    pub notes: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateFormulas {
    pub formulas: Vec<Formula>,
    /// Blocks that failed to parse, with the reason.
    pub discarded: Vec<(String, String)>,
}

/// Extract and parse every math block of a solution, dropping invalid ones.
pub fn candidate_formulas(solution: &str, units: &UnitTable) -> CandidateFormulas {
    let mut out = CandidateFormulas::default();
    for block in extract_formulas(solution) {
        match parse_block(&block, units) {
            Ok(pieces) => out.formulas.extend(pieces),
            Err(e) => out.discarded.push((block, e.to_string())),
        }
    }
    out
}

impl<'a> Grader<'a> {
    pub fn new(units: &'a UnitTable, constants: &'a ConstantsMap, params: EquivParams) -> Self {
        Grader { units, constants, params, memo: DashMap::new() }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn equivalent(&self, a: &Formula, b: &Formula) -> bool {
        let (pa, pb) = (a.canonical(), b.canonical());
        let key = if pa <= pb { (pa, pb) } else { (pb, pa) };
        if let Some(v) = self.memo.get(&key) {
            return *v == Verdict::Equivalent;
        }
        let v = check_equivalence(a, b, self.constants, &self.params).verdict;
        self.memo.insert(key, v);
        v == Verdict::Equivalent
    }

    pub fn parse_rubric(&self, dag: &RubricDag) -> Vec<ParsedNode> {
        dag.nodes
            .iter()
            .map(|n| ParsedNode {
                index: n.index,
                pieces: parse_block(&n.formula, self.units).map_err(|e| e.to_string()),
            })
            .collect()
    }

    /// Existential matching: a node is matched when some candidate is
    /// equivalent to it (to each of its pieces, for chains). `numeric`
    /// supplies significant-figure rules for numerical final answers.
    pub fn match_nodes(
        &self,
        nodes: &[ParsedNode],
        candidates: &[Formula],
        numeric: &BTreeMap<usize, u32>,
    ) -> MatchOutcome {
        let results: Vec<(usize, Result<(), String>)> = nodes
            .par_iter()
            .map(|node| {
                let pieces = match &node.pieces {
                    Ok(p) => p,
                    Err(e) => return (node.index, Err(format!("rubric formula does not parse: {e}"))),
                };
                let sig = numeric.get(&node.index).copied();
                let missing = pieces.iter().filter(|piece| !self.piece_matched(piece, candidates, sig)).count();
                if missing == 0 {
                    (node.index, Ok(()))
                } else {
                    let what = if pieces.len() > 1 {
                        format!("{missing} of {} chain pieces", pieces.len())
                    } else {
                        "formula".into()
                    };
                    (node.index, Err(format!("{what} matched by none of {} candidate formula(s)", candidates.len())))
                }
            })
            .collect();
        let mut out = MatchOutcome::default();
        for (index, r) in results {
            match r {
                Ok(()) => {
                    out.matched.insert(index);
                }
                Err(note) => {
                    out.notes.insert(index, note);
                }
            }
        }
        out
    }

    fn piece_matched(&self, piece: &Formula, candidates: &[Formula], sig: Option<u32>) -> bool {
        candidates.iter().any(|g| {
            let by_digits = sig.is_some_and(|n| numeric_check(g, piece, n, self.constants) == Some(true));
            by_digits || self.equivalent(piece, g)
        })
    }

    /// Grade one candidate against its problem.
    pub fn grade(&self, problem: &Problem, candidate: &CandidateSolution) -> Result<GradeOutcome, ScoreError> {
        let dag = &problem.grading_standard;
        let report = dag.validate();
        if !report.is_ok() {
            return Err(ScoreError::Invalid(report));
        }
        let nodes = self.parse_rubric(dag);
        let found = candidate_formulas(&candidate.solution, self.units);
        let outcome = self.match_nodes(&nodes, &found.formulas, &numeric_finals(problem));
        let mut score = dag.score(&outcome.matched)?;
        for node in &mut score.nodes {
            node.note = outcome.notes.get(&node.index).cloned();
        }
        Ok(GradeOutcome { score, candidates: found.formulas.len(), discarded: found.discarded.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeOutcome {
    #[serde(flatten)]
    pub score: ScoreReport,
    pub candidates: usize,
    pub discarded: usize,
}

/// Final nodes graded by significant figures: the i-th final node pairs with
/// the i-th subquestion when their counts agree.
pub fn numeric_finals(problem: &Problem) -> BTreeMap<usize, u32> {
    let finals: Vec<usize> = problem.grading_standard.finals().collect();
    if finals.len() != problem.subquestions.len() {
        return BTreeMap::new();
    }
    finals
        .into_iter()
        .zip(&problem.subquestions)
        .filter(|(_, s)| s.final_answer_form.eq_ignore_ascii_case("numerical"))
        .filter_map(|(i, s)| Some((i, s.significant_figures?)))
        .collect()
}

/// Node indices of `dag` matched by `candidates`.
pub fn match_against_dag(
    dag: &RubricDag,
    candidates: &[Formula],
    c: &ConstantsMap,
    p: &EquivParams,
    units: &UnitTable,
) -> BTreeSet<usize> {
    let g = Grader::new(units, c, *p);
    g.match_nodes(&g.parse_rubric(dag), candidates, &BTreeMap::new()).matched
}

/// Score one candidate solution against one problem.
pub fn grade_solution(
    problem: &Problem,
    candidate: &CandidateSolution,
    c: &ConstantsMap,
    p: &EquivParams,
    units: &UnitTable,
) -> Result<ScoreReport, ScoreError> {
    Grader::new(units, c, *p).grade(problem, candidate).map(|o| o.score)
}

/// `symbol = number` (either orientation) after constant substitution.
fn numeric_assignment(f: &Formula, c: &ConstantsMap) -> Option<(String, f64)> {
    let f = substitute_constants(f, c);
    let value = |e: &Expr| e.symbols().is_empty().then(|| e.eval(&|_| None)).filter(|v| v.is_finite());
    match (&f.lhs, &f.rhs) {
        (Expr::Sym(s), rhs) => Some((s.clone(), value(rhs)?)),
        (lhs, Expr::Sym(s)) => Some((s.clone(), value(lhs)?)),
        _ => None,
    }
}

/// Agreement at `sig_figs` significant figures, or None when either side is
/// not a numeric assignment to the same symbol.
fn numeric_check(value: &Formula, reference: &Formula, sig_figs: u32, c: &ConstantsMap) -> Option<bool> {
    let (s1, v1) = numeric_assignment(value, c)?;
    let (s2, v2) = numeric_assignment(reference, c)?;
    if s1 != s2 {
        return None;
    }
    let digits = sig_figs.max(1) as usize - 1;
    Some(format!("{v1:.digits$e}") == format!("{v2:.digits$e}"))
}

/// Whether a numerical final answer agrees with the reference at `sig_figs`
/// significant figures (SI magnitudes). Inputs that are not numeric
/// assignments fall back to the equivalence check.
pub fn numeric_final_check(
    value: &Formula,
    reference: &Formula,
    sig_figs: u32,
    c: &ConstantsMap,
    p: &EquivParams,
) -> bool {
    numeric_check(value, reference, sig_figs, c)
        .unwrap_or_else(|| check_equivalence(value, reference, c, p).verdict == Verdict::Equivalent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn f(src: &str) -> Formula {
        parse_formula(src, &UnitTable::default()).unwrap().remove(0)
    }

    #[test]
    fn significant_figures() {
        let (c, p) = (ConstantsMap::new(), EquivParams::default());
        assert!(numeric_final_check(&f("x = 1.4142"), &f("x = \\sqrt{2}"), 3, &c, &p));
        assert!(numeric_final_check(&f("d = 51450\\unit{m}"), &f("d = 5.145 \\times 10^{4}\\unit{m}"), 4, &c, &p));
        assert!(!numeric_final_check(&f("x = 2.99"), &f("x = 3.1"), 2, &c, &p));
        assert!(numeric_final_check(&f("Q = 0"), &f("0 = Q"), 3, &c, &p));
        assert!(numeric_final_check(&f("d = 1.2\\unit{km}"), &f("d = 1200\\unit{m}"), 3, &c, &p));
    }

    #[test]
    fn non_numeric_falls_back_to_equivalence() {
        let (c, p) = (ConstantsMap::new(), EquivParams::default());
        assert!(numeric_final_check(&f("v = a t"), &f("v = t a"), 3, &c, &p));
        assert!(!numeric_final_check(&f("v = a t"), &f("v = 2 t a"), 3, &c, &p));
        assert_eq!(numeric_check(&f("x = 1"), &f("y = 1"), 3, &c), None);
    }

    #[test]
    fn extraction_drops_invalid_blocks() {
        let found = candidate_formulas("$$a = b$$ and $$\\int x dx = y$$ then $c < d < e$", &UnitTable::default());
        assert_eq!(found.formulas.len(), 3);
        assert_eq!(found.discarded.len(), 1);
    }
}
