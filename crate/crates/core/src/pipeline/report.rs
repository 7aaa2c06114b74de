use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use super::{GradeOutcome, Grader};
use crate::dataset::{CandidateSolution, Dataset, ProblemId, UNLABELED};
use crate::equiv::{ConstantsMap, EquivParams};
use crate::formula::UnitTable;

/// One graded candidate. Exactly one of `outcome` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemReport {
    pub problem_id: ProblemId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub difficulty: String,
    pub domain: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub outcome: Option<GradeOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProblemReport {
    pub fn is_graded(&self) -> bool {
        self.outcome.is_some()
    }
}

fn exact<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Aggregates over a group of graded problems. `step_mean` averages the
/// per-problem scores; `step_mean_pooled` divides credited nodes by total
/// nodes across the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollup {
    /// Graded candidates in the group.
    pub graded: usize,
    pub step_mean: f64,
    #[serde(serialize_with = "exact")]
    pub step_mean_exact: BigRational,
    pub step_mean_pooled: f64,
    pub credited_nodes: u64,
    pub total_nodes: u64,
    pub final_accuracy: f64,
    pub finals_correct: usize,
    /// Mean over candidates that report a latency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_latency_s: Option<f64>,
}

impl Rollup {
    fn of<'a>(reports: impl IntoIterator<Item = (&'a GradeOutcome, Option<f64>)>) -> Rollup {
        let (mut graded, mut sum, mut credited, mut total, mut finals) =
            (0usize, BigRational::zero(), 0u64, 0u64, 0usize);
        let (mut latency_sum, mut latency_n) = (0f64, 0usize);
        for (o, latency) in reports {
            graded += 1;
            let s = &o.score.score;
            sum += BigRational::new(BigInt::from(*s.numer()), BigInt::from(*s.denom()));
            credited += o.score.achieved.len() as u64;
            total += o.score.nodes.len() as u64;
            finals += o.score.final_correct as usize;
            if let Some(l) = latency {
                latency_sum += l;
                latency_n += 1;
            }
        }
        let step_mean_exact = if graded == 0 { BigRational::zero() } else { sum / BigInt::from(graded) };
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Rollup {
            graded,
            step_mean: to_f64(&step_mean_exact),
            step_mean_exact,
            step_mean_pooled: ratio(credited, total),
            credited_nodes: credited,
            total_nodes: total,
            final_accuracy: ratio(finals as u64, graded as u64),
            finals_correct: finals,
            mean_latency_s: (latency_n > 0).then(|| latency_sum / latency_n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollups {
    pub by_model: BTreeMap<String, Rollup>,
    pub by_difficulty: BTreeMap<String, Rollup>,
    pub by_domain: BTreeMap<String, Rollup>,
    pub overall: Rollup,
}

impl Rollups {
    pub fn from_reports(reports: &[ProblemReport]) -> Rollups {
        let graded = || reports.iter().filter_map(|r| Some((r, r.outcome.as_ref()?)));
        let group = |key: fn(&ProblemReport) -> &str| {
            let mut groups: BTreeMap<String, Vec<(&GradeOutcome, Option<f64>)>> = BTreeMap::new();
            for (r, o) in graded() {
                groups.entry(key(r).to_string()).or_default().push((o, r.latency_s));
            }
            groups.into_iter().map(|(k, v)| (k, Rollup::of(v))).collect()
        };
        Rollups {
            by_model: group(|r| r.model.as_deref().unwrap_or(UNNAMED)),
            by_difficulty: group(|r| &r.difficulty),
            by_domain: group(|r| &r.domain),
            overall: Rollup::of(graded().map(|(r, o)| (o, r.latency_s))),
        }
    }
}

pub const UNNAMED: &str = "unnamed";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub seed: u64,
    pub params: EquivParams,
    pub versions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub per_problem: Vec<ProblemReport>,
    pub rollups: Rollups,
    pub run_meta: RunMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Tsv,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "tsv" | "tsv-summary" => Ok(ReportFormat::Tsv),
            other => Err(format!("unknown report format '{other}' (expected json or tsv)")),
        }
    }
}

impl AggregateReport {
    pub fn graded(&self) -> usize {
        self.rollups.overall.graded
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-candidate table, a blank line, then one row per rollup group.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "problem_id\tmodel\tdifficulty\tdomain\tscore\tscore_value\tfinal_correct\tmatched\tnodes\tlatency_s\terror\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.per_problem {
            let model = r.model.as_deref().unwrap_or("");
            let latency = opt(r.latency_s);
            match &r.outcome {
                Some(o) => {
                    let s = &o.score;
                    let _ = writeln!(
                        out,
                        "{}\t{model}\t{}\t{}\t{}/{}\t{:.6}\t{}\t{}\t{}\t{latency}\t",
                        r.problem_id,
                        r.difficulty,
                        r.domain,
                        s.score.numer(),
                        s.score.denom(),
                        s.score_value(),
                        s.final_correct,
                        s.matched.len(),
                        s.nodes.len(),
                    );
                }
                None => {
                    let err = r.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
                    let _ = writeln!(
                        out,
                        "{}\t{model}\t{}\t{}\t\t\t\t\t\t{latency}\t{err}",
                        r.problem_id, r.difficulty, r.domain
                    );
                }
            }
        }
        out.push_str("\ngroup\tlabel\tgraded\tstep_mean\tstep_mean_pooled\tfinal_accuracy\tmean_latency_s\n");
        let mut row = |kind: &str, label: &str, g: &Rollup| {
            let _ = writeln!(
                out,
                "{kind}\t{label}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                g.graded,
                g.step_mean,
                g.step_mean_pooled,
                g.final_accuracy,
                opt(g.mean_latency_s)
            );
        };
        for (k, g) in &self.rollups.by_model {
            row("model", k, g);
        }
        for (k, g) in &self.rollups.by_difficulty {
            row("difficulty", k, g);
        }
        for (k, g) in &self.rollups.by_domain {
            row("domain", k, g);
        }
        row("overall", "all", &self.rollups.overall);
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Tsv => self.to_tsv(),
        }
    }
}

/// Grade every candidate against its problem on a pool of `jobs` threads
/// (0 picks the rayon default). Failures are recorded per candidate. The
/// report is ordered by problem id, then model, then input position, so it
/// does not depend on `jobs`.
pub fn grade_dataset(
    dataset: &Dataset,
    candidates: &[CandidateSolution],
    c: &ConstantsMap,
    p: &EquivParams,
    units: &UnitTable,
    jobs: usize,
) -> Result<AggregateReport, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let grader = Grader::new(units, c, *p);
    let mut graded: Vec<(usize, ProblemReport)> = pool.install(|| {
        candidates
            .par_iter()
            .enumerate()
            .map(|(i, cand)| {
                let problem = dataset.get(&cand.problem_id);
                let mut report = ProblemReport {
                    problem_id: cand.problem_id.clone(),
                    model: cand.model.clone(),
                    difficulty: problem.map_or(UNLABELED, |p| p.difficulty_label()).to_string(),
                    domain: problem.map_or(UNLABELED, |p| p.domain_label()).to_string(),
                    latency_s: cand.latency_s,
                    outcome: None,
                    error: None,
                };
                match problem {
                    None => report.error = Some(format!("unknown problem id {}", cand.problem_id)),
                    Some(problem) => match grader.grade(problem, cand) {
                        Ok(o) => report.outcome = Some(o),
                        Err(e) => report.error = Some(e.to_string()),
                    },
                }
                (i, report)
            })
            .collect()
    });
    graded.sort_by(|(i, a), (j, b)| (&a.problem_id, &a.model, i).cmp(&(&b.problem_id, &b.model, j)));
    let per_problem: Vec<ProblemReport> = graded.into_iter().map(|(_, r)| r).collect();
    let rollups = Rollups::from_reports(&per_problem);
    let versions = BTreeMap::from([("stepgrade".to_string(), env!("CARGO_PKG_VERSION").to_string())]);
    Ok(AggregateReport { per_problem, rollups, run_meta: RunMeta { seed: p.seed, params: *p, versions } })
}
