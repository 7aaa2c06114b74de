//! Justification-kernel form of a rubric: one `A |- B` line per node with a
//! nonempty premise list, where A is the comma-separated dependency list of
//! node B. Nodes without premises produce no line.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{RubricDag, RubricNode};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Kernel {
    /// (premises, conclusion), in node order.
    pub pairs: Vec<(Vec<usize>, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("line {0}: expected `A |- B`")]
    Syntax(usize),
    #[error("line {0}: bad index `{1}`")]
    Index(usize, String),
    #[error("conclusion {0} names no node")]
    UnknownNode(usize),
    #[error("conclusion {0} appears twice")]
    Repeated(usize),
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (premises, conclusion) in &self.pairs {
            let a: Vec<String> = premises.iter().map(|p| p.to_string()).collect();
            writeln!(f, "{} |- {}", a.join(","), conclusion)?;
        }
        Ok(())
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (a, b) = line.split_once("|-").ok_or(KernelError::Syntax(lineno))?;
            let index =
                |s: &str| s.trim().parse::<usize>().map_err(|_| KernelError::Index(lineno, s.trim().to_string()));
            let premises = a.split(',').filter(|s| !s.trim().is_empty()).map(index).collect::<Result<Vec<_>, _>>()?;
            if premises.is_empty() {
                return Err(KernelError::Syntax(lineno));
            }
            pairs.push((premises, index(b)?));
        }
        Ok(Kernel { pairs })
    }
}

pub fn to_kernel(dag: &RubricDag) -> Kernel {
    Kernel {
        pairs: dag.nodes.iter().filter(|n| !n.dependency.is_empty()).map(|n| (n.dependency.clone(), n.index)).collect(),
    }
}

/// Rebuild a DAG from edge-free nodes and a kernel.
pub fn from_kernel(skeleton: &[RubricNode], kernel: &Kernel) -> Result<RubricDag, KernelError> {
    let mut nodes: Vec<RubricNode> =
        skeleton.iter().map(|n| RubricNode { dependency: Vec::new(), ..n.clone() }).collect();
    for (premises, conclusion) in &kernel.pairs {
        let node = nodes.iter_mut().find(|n| n.index == *conclusion).ok_or(KernelError::UnknownNode(*conclusion))?;
        if !node.dependency.is_empty() {
            return Err(KernelError::Repeated(*conclusion));
        }
        node.dependency = premises.clone();
    }
    Ok(RubricDag { nodes })
}

/// Serialize the edges to kernel text and rebuild the DAG from it.
pub fn kernel_roundtrip(dag: &RubricDag) -> RubricDag {
    let text = to_kernel(dag).to_string();
    let kernel: Kernel = text.parse().expect("kernel text written by to_kernel parses");
    from_kernel(&dag.nodes, &kernel).expect("kernel conclusions come from the same nodes")
}
