#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stepgrade::rubric::{RubricDag, RubricNode};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A valid DAG: every node depends on earlier nodes, the last node is final
/// and every node has a path to it.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> RubricDag {
    let density = rng.random_range(0.05..0.5);
    let mut nodes: Vec<RubricNode> = (1..=n)
        .map(|i| RubricNode {
            index: i,
            formula: format!("$$x_{{{i}}} = {i}$$"),
            dependency: (1..i).filter(|_| rng.random_bool(density)).collect(),
            is_final_answer: i == n || rng.random_bool(0.05),
        })
        .collect();
    // hang every dead end off the last node so it reaches a final
    let used: BTreeSet<usize> = nodes.iter().flat_map(|n| n.dependency.clone()).collect();
    let dangling: Vec<usize> = (1..n).filter(|i| !used.contains(i) && !nodes[i - 1].is_final_answer).collect();
    nodes[n - 1].dependency.extend(dangling);
    nodes[n - 1].dependency.sort_unstable();
    nodes[n - 1].dependency.dedup();
    RubricDag::new(nodes)
}

/// Ancestor sets by boolean transitive closure over the full matrix.
pub fn reach_matrix(dag: &RubricDag) -> Vec<Vec<bool>> {
    let n = dag.len();
    let mut r = vec![vec![false; n + 1]; n + 1];
    for node in &dag.nodes {
        r[node.index][node.index] = true;
        for &d in &node.dependency {
            r[node.index][d] = true;
        }
    }
    for k in 1..=n {
        for i in 1..=n {
            for j in 1..=n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

pub fn brute_closure(reach: &[Vec<bool>], matched: &BTreeSet<usize>) -> BTreeSet<usize> {
    (1..reach.len()).filter(|&j| matched.iter().any(|&m| reach[m][j])).collect()
}

pub fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> BTreeSet<usize> {
    let p = rng.random_range(0.0..0.4);
    (1..=n).filter(|_| rng.random_bool(p)).collect()
}

/// All pairs, one at a time.
pub fn quadratic(x: &[f64], y: &[f64]) -> (i64, u64, u64, u64) {
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let dy = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            s += dx * dy;
            tx += (dx == 0) as u64;
            ty += (dy == 0) as u64;
        }
    }
    (s, (n * (n - 1) / 2) as u64, tx, ty)
}

pub fn quadratic_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let (s, n0, n1, n2) = quadratic(x, y);
    let d = (n0 - n1) as f64 * (n0 - n2) as f64;
    (d > 0.0).then(|| s as f64 / d.sqrt())
}

pub fn heap_permutations(v: &mut Vec<f64>, k: usize, out: &mut impl FnMut(&[f64])) {
    if k == 1 {
        out(v);
        return;
    }
    heap_permutations(v, k - 1, out);
    for i in 0..k - 1 {
        if k.is_multiple_of(2) {
            v.swap(i, k - 1);
        } else {
            v.swap(0, k - 1);
        }
        heap_permutations(v, k - 1, out);
    }
}
