//! Reference solutions as dependency DAGs: construction rules, ancestor
//! closure and partial-credit scoring.

mod kernel;

pub use kernel::{from_kernel, kernel_roundtrip, to_kernel, Kernel, KernelError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricNode {
    /// 1-based position in the reference solution.
    pub index: usize,
    /// Formula source, usually wrapped in `$$...$$`.
    pub formula: String,
    #[serde(default)]
    pub dependency: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_final_answer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RubricDag {
    pub nodes: Vec<RubricNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Indices must run 1..N in order.
    IndexGap {
        position: usize,
        expected: usize,
        found: usize,
    },
    /// Dependency on a later (or the same) node.
    BackwardEdge {
        node: usize,
        dependency: usize,
    },
    /// Dependency on an index that names no node.
    UnknownDependency {
        node: usize,
        dependency: usize,
    },
    DuplicateDependency {
        node: usize,
        dependency: usize,
    },
    NoFinalAnswer,
    LastNotFinal {
        node: usize,
    },
    /// No directed path from this node to a final answer.
    Unreachable {
        node: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexGap { position, expected, found } => {
                write!(f, "node at position {position} has index {found}, expected {expected}")
            }
            Violation::BackwardEdge { node, dependency } => {
                write!(f, "node {node} depends on later node {dependency}")
            }
            Violation::UnknownDependency { node, dependency } => {
                write!(f, "node {node} depends on missing node {dependency}")
            }
            Violation::DuplicateDependency { node, dependency } => {
                write!(f, "node {node} lists dependency {dependency} twice")
            }
            Violation::NoFinalAnswer => write!(f, "no node is marked as a final answer"),
            Violation::LastNotFinal { node } => write!(f, "last node {node} is not a final answer"),
            Violation::Unreachable { node } => write!(f, "node {node} has no path to a final answer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Single premise, single consumer: possibly a removable algebra step.
    RedundantStep { node: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("matched index {0} names no rubric node")]
    UnknownIndex(usize),
    #[error("rubric does not validate ({} violation(s))", .0.violations.len())]
    Invalid(ValidationReport),
}

impl RubricDag {
    pub fn new(nodes: Vec<RubricNode>) -> Self {
        RubricDag { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, index: usize) -> Option<&RubricNode> {
        self.nodes.iter().find(|n| n.index == index)
    }

    pub fn finals(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.is_final_answer).map(|n| n.index)
    }

    /// Check the construction rules. Violations block scoring; warnings do not.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let known: BTreeSet<usize> = self.nodes.iter().map(|n| n.index).collect();
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.index != pos + 1 {
                report.violations.push(Violation::IndexGap { position: pos + 1, expected: pos + 1, found: node.index });
            }
            let mut seen = BTreeSet::new();
            for &d in &node.dependency {
                if !seen.insert(d) {
                    report.violations.push(Violation::DuplicateDependency { node: node.index, dependency: d });
                } else if d >= node.index && known.contains(&d) {
                    report.violations.push(Violation::BackwardEdge { node: node.index, dependency: d });
                } else if !known.contains(&d) {
                    report.violations.push(Violation::UnknownDependency { node: node.index, dependency: d });
                }
            }
        }
        if self.finals().next().is_none() {
            report.violations.push(Violation::NoFinalAnswer);
        }
        if let Some(last) = self.nodes.last() {
            if !last.is_final_answer {
                report.violations.push(Violation::LastNotFinal { node: last.index });
            }
        }

        // reverse reachability from the finals along dependency edges
        let by_index: BTreeMap<usize, &RubricNode> = self.nodes.iter().map(|n| (n.index, n)).collect();
        let mut reaches: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = self.finals().collect();
        while let Some(v) = stack.pop() {
            if reaches.insert(v) {
                if let Some(node) = by_index.get(&v) {
                    stack.extend(node.dependency.iter().copied().filter(|d| by_index.contains_key(d)));
                }
            }
        }
        for node in &self.nodes {
            if !reaches.contains(&node.index) {
                report.violations.push(Violation::Unreachable { node: node.index });
            }
        }

        let mut consumers: BTreeMap<usize, usize> = BTreeMap::new();
        for node in &self.nodes {
            for &d in &node.dependency {
                *consumers.entry(d).or_default() += 1;
            }
        }
        for node in &self.nodes {
            if node.dependency.len() == 1 && consumers.get(&node.index) == Some(&1) && !node.is_final_answer {
                report.warnings.push(Warning::RedundantStep { node: node.index });
            }
        }
        report
    }

    /// Matched nodes plus all their ancestors, by recursive marking.
    pub fn ancestor_closure(&self, matched: &BTreeSet<usize>) -> Result<BTreeSet<usize>, ScoreError> {
        let by_index: BTreeMap<usize, &RubricNode> = self.nodes.iter().map(|n| (n.index, n)).collect();
        let mut marked = BTreeSet::new();
        for &v in matched {
            if !by_index.contains_key(&v) {
                return Err(ScoreError::UnknownIndex(v));
            }
            mark_ancestors(v, &by_index, &mut marked);
        }
        Ok(marked)
    }

    /// Score a matched set: |closure| / |nodes|, with final-answer and
    /// per-subquestion breakdowns.
    pub fn score(&self, matched: &BTreeSet<usize>) -> Result<ScoreReport, ScoreError> {
        let report = self.validate();
        if !report.is_ok() {
            return Err(ScoreError::Invalid(report));
        }
        let achieved = self.ancestor_closure(matched)?;
        let finals: Vec<FinalStatus> =
            self.finals().map(|index| FinalStatus { index, matched: matched.contains(&index) }).collect();
        let slices = finals
            .iter()
            .map(|f| {
                let nodes = self.ancestor_closure(&BTreeSet::from([f.index])).expect("final index exists");
                let credited = nodes.intersection(&achieved).count();
                Slice {
                    final_index: f.index,
                    nodes: nodes.len(),
                    credited,
                    score: Ratio::new(credited as u64, nodes.len() as u64),
                }
            })
            .collect();
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeOutcome {
                index: n.index,
                status: if matched.contains(&n.index) {
                    NodeStatus::Matched
                } else if achieved.contains(&n.index) {
                    NodeStatus::Credited
                } else {
                    NodeStatus::Missed
                },
                note: None,
            })
            .collect();
        Ok(ScoreReport {
            score: Ratio::new(achieved.len() as u64, self.nodes.len() as u64),
            final_correct: finals.iter().all(|f| f.matched),
            matched: matched.clone(),
            achieved,
            finals,
            slices,
            nodes,
        })
    }

    /// Longest-path layer of every node (1 for nodes without dependencies),
    /// in node order.
    pub fn layers(&self) -> Vec<usize> {
        let mut layer: BTreeMap<usize, usize> = BTreeMap::new();
        for node in &self.nodes {
            let l = node.dependency.iter().filter_map(|d| layer.get(d)).max().map_or(1, |m| m + 1);
            layer.insert(node.index, l);
        }
        self.nodes.iter().map(|n| layer[&n.index]).collect()
    }
}

fn mark_ancestors(v: usize, by_index: &BTreeMap<usize, &RubricNode>, marked: &mut BTreeSet<usize>) {
    if !marked.insert(v) {
        return;
    }
    if let Some(node) = by_index.get(&v) {
        for &d in &node.dependency {
            mark_ancestors(d, by_index, marked);
        }
    }
}

fn ratio_as_text<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

/// A rational as a float, for reporting.
pub fn ratio_value(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinalStatus {
    pub index: usize,
    pub matched: bool,
}

/// Credit restricted to one final answer and its ancestors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Slice {
    pub final_index: usize,
    pub nodes: usize,
    pub credited: usize,
    #[serde(serialize_with = "ratio_as_text")]
    pub score: Ratio<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Matched,
    /// Not matched, credited as an ancestor of a matched node.
    Credited,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeOutcome {
    pub index: usize,
    pub status: NodeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    #[serde(serialize_with = "ratio_as_text")]
    pub score: Ratio<u64>,
    pub final_correct: bool,
    pub matched: BTreeSet<usize>,
    pub achieved: BTreeSet<usize>,
    pub finals: Vec<FinalStatus>,
    pub slices: Vec<Slice>,
    pub nodes: Vec<NodeOutcome>,
}

impl ScoreReport {
    pub fn score_value(&self) -> f64 {
        ratio_value(&self.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(spec: &[(&[usize], bool)]) -> RubricDag {
        RubricDag::new(
            spec.iter()
                .enumerate()
                .map(|(i, (deps, fin))| RubricNode {
                    index: i + 1,
                    formula: format!("$$x_{} = 1$$", i + 1),
                    dependency: deps.to_vec(),
                    is_final_answer: *fin,
                })
                .collect(),
        )
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn chain_validates_and_back_credits() {
        let d = dag(&[(&[], false), (&[1], false), (&[2], true)]);
        let r = d.validate();
        assert!(r.is_ok(), "{r:?}");
        assert_eq!(r.warnings, vec![Warning::RedundantStep { node: 2 }]);
        assert_eq!(d.ancestor_closure(&set(&[3])).unwrap(), set(&[1, 2, 3]));
        assert_eq!(d.ancestor_closure(&set(&[])).unwrap(), set(&[]));
        let s = d.score(&set(&[3])).unwrap();
        assert_eq!(s.score, Ratio::new(1, 1));
        assert!(s.final_correct);
        assert_eq!(s.nodes[0].status, NodeStatus::Credited);
    }

    #[test]
    fn violations_are_reported() {
        let d = dag(&[(&[], false), (&[3], false), (&[2], true)]);
        assert!(d.validate().violations.contains(&Violation::BackwardEdge { node: 2, dependency: 3 }));

        let d = dag(&[(&[], false), (&[], true)]);
        assert_eq!(d.validate().violations, vec![Violation::Unreachable { node: 1 }]);

        let d = dag(&[(&[], false), (&[1, 1], false)]);
        let v = d.validate().violations;
        assert!(v.contains(&Violation::DuplicateDependency { node: 2, dependency: 1 }));
        assert!(v.contains(&Violation::NoFinalAnswer));
        assert!(v.contains(&Violation::LastNotFinal { node: 2 }));

        let mut d = dag(&[(&[], false), (&[1], true)]);
        d.nodes[1].index = 3;
        d.nodes[1].dependency = vec![1, 9];
        let v = d.validate().violations;
        assert!(v.contains(&Violation::IndexGap { position: 2, expected: 2, found: 3 }));
        assert!(v.contains(&Violation::UnknownDependency { node: 3, dependency: 9 }));
    }

    #[test]
    fn scoring_refuses_bad_input() {
        let d = dag(&[(&[], false), (&[1], true)]);
        assert_eq!(d.score(&set(&[7])), Err(ScoreError::UnknownIndex(7)));
        let bad = dag(&[(&[], false), (&[], true)]);
        assert!(matches!(bad.score(&set(&[])), Err(ScoreError::Invalid(_))));
    }

    #[test]
    fn multi_final_breakdown() {
        let d = dag(&[(&[], false), (&[1], true), (&[], false), (&[3], true)]);
        let s = d.score(&set(&[2])).unwrap();
        assert_eq!(s.score, Ratio::new(1, 2));
        assert!(!s.final_correct);
        assert_eq!(s.finals, vec![FinalStatus { index: 2, matched: true }, FinalStatus { index: 4, matched: false }]);
        assert_eq!(s.slices[0].score, Ratio::new(1, 1));
        assert_eq!(s.slices[1].score, Ratio::new(0, 1));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"score\":\"1/2\""), "{json}");
    }

    #[test]
    fn layers_follow_longest_path() {
        let d = dag(&[(&[], false), (&[1], false), (&[], false), (&[2, 3], true)]);
        assert_eq!(d.layers(), vec![1, 2, 1, 3]);
    }
}
