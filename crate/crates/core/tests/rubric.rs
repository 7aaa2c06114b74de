mod common;

use std::collections::BTreeSet;

use common::{brute_closure, fixture, random_dag, random_subset, reach_matrix};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepgrade::dataset::Dataset;
use stepgrade::rubric::{
    from_kernel, kernel_roundtrip, to_kernel, Kernel, KernelError, RubricDag, RubricNode, ScoreError, Violation,
};

#[test]
fn closure_matches_transitive_closure_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let n = rng.random_range(1..=50);
        let dag = random_dag(&mut rng, n);
        assert!(dag.validate().is_ok(), "{:?}", dag.validate());
        let reach = reach_matrix(&dag);
        for _ in 0..4 {
            let m = random_subset(&mut rng, n);
            let got = dag.ancestor_closure(&m).unwrap();
            assert_eq!(got, brute_closure(&reach, &m));

            // idempotent and monotone
            assert_eq!(dag.ancestor_closure(&got).unwrap(), got);
            let extra = random_subset(&mut rng, n);
            let bigger: BTreeSet<usize> = m.union(&extra).copied().collect();
            assert!(got.is_subset(&dag.ancestor_closure(&bigger).unwrap()));

            let report = dag.score(&m).unwrap();
            assert_eq!(report.score, Ratio::new(got.len() as u64, n as u64));
            assert!(m.is_subset(&report.achieved));
        }
    }
}

#[test]
fn kernel_roundtrip_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let n = rng.random_range(1..=50);
        let dag = random_dag(&mut rng, n);
        assert_eq!(kernel_roundtrip(&dag), dag);
        let text = to_kernel(&dag).to_string();
        let back: Kernel = text.parse().unwrap();
        assert_eq!(back.to_string(), text);
    }
}

#[test]
fn kernel_roundtrip_on_dataset() {
    let ds = Dataset::load(&fixture("dataset20.jsonl")).unwrap();
    assert_eq!(ds.len(), 20);
    for p in &ds.problems {
        assert!(p.grading_standard.validate().is_ok(), "problem {}", p.id);
        assert_eq!(kernel_roundtrip(&p.grading_standard), p.grading_standard, "problem {}", p.id);
    }
}

#[test]
fn kernel_rejects_bad_text() {
    assert!(matches!("1,2 3".parse::<Kernel>(), Err(KernelError::Syntax(_))));
    let skeleton = vec![RubricNode { index: 1, formula: "x=1".into(), dependency: vec![], is_final_answer: true }];
    let k: Kernel = "1 |- 2".parse().unwrap();
    assert_eq!(from_kernel(&skeleton, &k), Err(KernelError::UnknownNode(2)));
}

#[test]
fn sample_problem_scores() {
    let ds = Dataset::load(&fixture("sample_problem.json")).unwrap();
    let dag = &ds.problems[0].grading_standard;
    assert_eq!(dag.len(), 24);
    assert!(dag.validate().is_ok());

    let first_final = dag.score(&BTreeSet::from([13])).unwrap();
    assert_eq!(first_final.score, Ratio::new(13, 24));
    assert!(!first_final.final_correct);
    let both = dag.score(&BTreeSet::from([13, 24])).unwrap();
    assert_eq!(both.score, Ratio::new(1, 1));
    assert!(both.final_correct);
    assert_eq!(dag.score(&BTreeSet::new()).unwrap().score, Ratio::new(0, 1));
    assert_eq!(dag.score(&BTreeSet::from([99])), Err(ScoreError::UnknownIndex(99)));
}

fn node(index: usize, deps: &[usize], fin: bool) -> RubricNode {
    RubricNode { index, formula: format!("x_{index} = 1"), dependency: deps.to_vec(), is_final_answer: fin }
}

#[test]
fn violations_are_reported() {
    let dag = RubricDag::new(vec![node(1, &[2], false), node(2, &[1, 1], true)]);
    let v = dag.validate().violations;
    assert!(v.contains(&Violation::BackwardEdge { node: 1, dependency: 2 }));
    assert!(v.contains(&Violation::DuplicateDependency { node: 2, dependency: 1 }));
    assert!(matches!(dag.score(&BTreeSet::new()), Err(ScoreError::Invalid(_))));

    let dag = RubricDag::new(vec![node(1, &[], false), node(2, &[], false), node(3, &[7], true)]);
    let v = dag.validate().violations;
    assert!(v.contains(&Violation::UnknownDependency { node: 3, dependency: 7 }));
    assert!(v.contains(&Violation::Unreachable { node: 1 }));
    assert!(v.contains(&Violation::Unreachable { node: 2 }));

    let dag = RubricDag::new(vec![node(1, &[], true), node(3, &[1], false)]);
    let v = dag.validate().violations;
    assert!(v.contains(&Violation::IndexGap { position: 2, expected: 2, found: 3 }));
    assert!(v.contains(&Violation::LastNotFinal { node: 3 }));

    assert!(RubricDag::new(vec![node(1, &[], false)]).validate().violations.contains(&Violation::NoFinalAnswer));
}

proptest! {
    #[test]
    fn closure_monotone_and_idempotent(seed in any::<u64>(), n in 1usize..=30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = random_dag(&mut rng, n);
        let a = random_subset(&mut rng, n);
        let b: BTreeSet<usize> = a.union(&random_subset(&mut rng, n)).copied().collect();
        let ca = dag.ancestor_closure(&a).unwrap();
        let cb = dag.ancestor_closure(&b).unwrap();
        prop_assert!(ca.is_subset(&cb));
        prop_assert_eq!(dag.ancestor_closure(&ca).unwrap(), ca.clone());
        prop_assert!(dag.score(&a).unwrap().score <= dag.score(&b).unwrap().score);
        // matching every final credits the whole rubric
        let finals: BTreeSet<usize> = dag.finals().collect();
        prop_assert_eq!(dag.score(&finals).unwrap().score, Ratio::new(1, 1));
    }
}
