//! Difficulty annotation from rubric structure, and rank agreement.

mod kendall;

pub use kendall::{kendall_counts, kendall_tau_b, permutation_test, KendallCounts, RankPairs, StatsError, TauB};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ProblemId;
use crate::rubric::RubricDag;

/// Sum over longest-path layers of ln(layer width). Zero for chains.
pub fn dag_entropy(dag: &RubricDag) -> f64 {
    let layers = dag.layers();
    let depth = layers.iter().copied().max().unwrap_or(0);
    let mut widths = vec![0usize; depth + 1];
    for l in layers {
        widths[l] += 1;
    }
    widths.iter().filter(|&&w| w > 0).map(|&w| (w as f64).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl std::fmt::Display for Difficulty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        })
    }
}

/// Composite-score bands: `S <= easy_max` is Easy, `S <= medium_max` Medium,
/// anything above Hard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bands {
    pub easy_max: u8,
    pub medium_max: u8,
}

impl Default for Bands {
    fn default() -> Self {
        Bands { easy_max: 4, medium_max: 6 }
    }
}

impl Bands {
    pub fn label(&self, s: u8) -> Difficulty {
        if s <= self.easy_max {
            Difficulty::Easy
        } else if s <= self.medium_max {
            Difficulty::Medium
        } else {
            Difficulty::Hard
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau1: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotateError {
    #[error("rating {name} = {value} is outside 1..=3")]
    Rating { name: &'static str, value: u8 },
    #[error("thresholds need tau1 < tau2, got {0} and {1}")]
    Thresholds(f64, f64),
    #[error("bands need 3 <= easy_max < medium_max < 9, got {0} and {1}")]
    Bands(u8, u8),
}

#[derive(Debug, Clone)]
pub struct DifficultyInput<'a> {
    pub c1: u8,
    pub c2: u8,
    pub dag: &'a RubricDag,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifficultyReport {
    pub c1: u8,
    pub c2: u8,
    pub c3: u8,
    pub e: f64,
    #[serde(rename = "S")]
    pub s: u8,
    pub label: Difficulty,
}

/// Discretize the entropy into 1, 2 or 3.
pub fn structural_rating(e: f64, t: Thresholds) -> u8 {
    if e <= t.tau1 {
        1
    } else if e <= t.tau2 {
        2
    } else {
        3
    }
}

pub fn difficulty_label(inp: &DifficultyInput<'_>, bands: &Bands) -> Result<DifficultyReport, AnnotateError> {
    for (name, value) in [("c1", inp.c1), ("c2", inp.c2)] {
        if !(1..=3).contains(&value) {
            return Err(AnnotateError::Rating { name, value });
        }
    }
    let Thresholds { tau1, tau2 } = inp.thresholds;
    if tau1.partial_cmp(&tau2) != Some(std::cmp::Ordering::Less) {
        return Err(AnnotateError::Thresholds(tau1, tau2));
    }
    if !(3 <= bands.easy_max && bands.easy_max < bands.medium_max && bands.medium_max < 9) {
        return Err(AnnotateError::Bands(bands.easy_max, bands.medium_max));
    }
    let e = dag_entropy(inp.dag);
    let c3 = structural_rating(e, inp.thresholds);
    let s = inp.c1 + inp.c2 + c3;
    Ok(DifficultyReport { c1: inp.c1, c2: inp.c2, c3, e, s, label: bands.label(s) })
}

/// Thresholds at the 1/3 and 2/3 quantiles (linear interpolation) of the
/// given entropies. When both land on the same value, tau2 moves to the next
/// larger observed value, or to tau1 + 1 when there is none.
pub fn tertile_thresholds(entropies: &[f64]) -> Thresholds {
    let mut v: Vec<f64> = entropies.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Thresholds { tau1: 0.0, tau2: 1.0 };
    }
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    let (tau1, mut tau2) = (q(1.0 / 3.0), q(2.0 / 3.0));
    if tau2 <= tau1 {
        tau2 = v.iter().copied().find(|&x| x > tau1).unwrap_or(tau1 + 1.0);
    }
    Thresholds { tau1, tau2 }
}

/// Externally supplied ratings for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub problem_id: ProblemId,
    pub c1: u8,
    pub c2: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationResult {
    pub problem_id: ProblemId,
    pub e: f64,
    pub c3: u8,
    #[serde(rename = "S")]
    pub s: u8,
    pub label: Difficulty,
}

/// Paired scores for agreement statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub id: ProblemId,
    pub score_a: f64,
    pub score_b: f64,
}
