//! Command-line interface. Exit codes: 0 success, 1 validation or grading
//! failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_candidates, parse_records, Dataset, ProblemId};
use crate::equiv::{ConstantsMap, EquivParams};
use crate::formula::{parse_block, UnitTable};
use crate::pipeline::{grade_dataset, ReportFormat};
use crate::rubric::{Violation, Warning};
use crate::stats::{
    dag_entropy, difficulty_label, kendall_tau_b, permutation_test, tertile_thresholds, AgreementRecord, Annotation,
    AnnotationResult, Bands, DifficultyInput, RankPairs, Thresholds,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stepgrade", version, about = "Grade stepwise formula derivations against DAG rubrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every rubric DAG in a dataset.
    Validate(ValidateArgs),
    /// Grade candidate solutions and write an aggregate report.
    Grade(GradeArgs),
    /// Compute structural entropy and difficulty labels.
    Annotate(AnnotateArgs),
    /// Kendall tau-b with asymptotic and permutation p-values.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file supplying any option; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Unit table replacing the bundled one.
    #[arg(long)]
    pub units: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GradeArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// JSON lines: {problem_id, model?, solution, latency_s?}.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// JSON object of symbol -> number or LaTeX expression. Defaults to the
    /// bundled physical constants.
    #[arg(long)]
    pub constants: Option<PathBuf>,
    #[arg(long)]
    pub units: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub n_succ: Option<u32>,
    #[arg(long)]
    pub n_eq: Option<u32>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sampling interval for free variables, as LO:HI.
    #[arg(long, value_parser = parse_range)]
    pub sample_range: Option<(f64, f64)>,
    #[arg(long)]
    pub t_max_ms: Option<u64>,
    /// json or tsv.
    #[arg(long)]
    pub format: Option<ReportFormat>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// JSON lines: {problem_id, c1, c2}.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Entropy thresholds; both default to tertiles over the dataset.
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// JSON lines: {id, score_a, score_b}.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub n_perm: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// json or tsv.
    #[arg(long)]
    pub format: Option<ReportFormat>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// Everything a config file may set. Paths are relative to the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dataset: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub constants: Option<PathBuf>,
    pub units: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub format: Option<ReportFormat>,
    pub params: Option<EquivParams>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub bands: Option<Bands>,
    pub n_perm: Option<u64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut c: Config = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut c.dataset,
            &mut c.candidates,
            &mut c.constants,
            &mut c.units,
            &mut c.annotations,
            &mut c.pairs,
            &mut c.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

type CliResult = Result<i32, CliError>;

fn load_config(common: &Common) -> Result<Config, CliError> {
    common.config.as_deref().map_or(Ok(Config::default()), Config::load)
}

fn required(flag: Option<PathBuf>, config: Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let p = flag.or(config).ok_or_else(|| CliError::Usage(format!("--{name} is required")))?;
    if !p.exists() {
        return Err(CliError::Usage(format!("{}: no such file", p.display())));
    }
    Ok(p)
}

fn load_units(path: Option<&Path>) -> Result<UnitTable, CliError> {
    match path {
        None => Ok(UnitTable::default()),
        Some(p) => UnitTable::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Failure(e.to_string())),
    }
}

#[derive(Debug, Serialize)]
struct ProblemValidation {
    problem_id: ProblemId,
    violations: Vec<Violation>,
    warnings: Vec<Warning>,
    /// Rubric formulas the parser rejects; such nodes can never be matched.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    unparseable: Vec<UnparseableNode>,
}

#[derive(Debug, Serialize)]
struct UnparseableNode {
    index: usize,
    error: String,
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let cfg = load_config(&a.common)?;
    let path = required(a.dataset, cfg.dataset, "dataset")?;
    let units = load_units(a.units.or(cfg.units).as_deref())?;
    let ds = load_dataset(&path)?;
    let mut failing = 0;
    let report: Vec<ProblemValidation> = ds
        .problems
        .iter()
        .map(|p| {
            let r = p.grading_standard.validate();
            failing += !r.is_ok() as usize;
            let unparseable = p
                .grading_standard
                .nodes
                .iter()
                .filter_map(|n| {
                    parse_block(&n.formula, &units)
                        .err()
                        .map(|e| UnparseableNode { index: n.index, error: e.to_string() })
                })
                .collect();
            ProblemValidation { problem_id: p.id.clone(), violations: r.violations, warnings: r.warnings, unparseable }
        })
        .filter(|v| !v.violations.is_empty() || !v.warnings.is_empty() || !v.unparseable.is_empty())
        .collect();
    emit(a.common.out.or(cfg.out).as_deref(), &(serde_json::to_string_pretty(&report).expect("serializes") + "\n"))?;
    eprintln!("{} problem(s), {failing} with violations", ds.len());
    Ok(if failing == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_grade(a: GradeArgs) -> CliResult {
    let cfg = load_config(&a.common)?;
    let dataset = required(a.dataset, cfg.dataset, "dataset")?;
    let candidates = required(a.candidates, cfg.candidates, "candidates")?;
    let units = load_units(a.units.or(cfg.units).as_deref())?;
    let constants = match a.constants.or(cfg.constants) {
        None => ConstantsMap::default_map(&units),
        Some(p) => ConstantsMap::load(&p, &units).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
    };
    let mut p = cfg.params.unwrap_or_default();
    p.seed = a.seed.or(cfg.seed).unwrap_or(p.seed);
    p.n_max = a.n_max.unwrap_or(p.n_max);
    p.n_succ = a.n_succ.unwrap_or(p.n_succ);
    p.n_eq = a.n_eq.unwrap_or(p.n_eq);
    p.eps = a.eps.unwrap_or(p.eps);
    if let Some((lo, hi)) = a.sample_range {
        (p.sample_lo, p.sample_hi) = (lo, hi);
    }
    p.t_max_ms = a.t_max_ms.unwrap_or(p.t_max_ms);
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(0);
    let format = a.format.or(cfg.format).unwrap_or_default();

    let ds = load_dataset(&dataset)?;
    let cands =
        load_candidates(&candidates).map_err(|e| CliError::Failure(format!("{}: {e}", candidates.display())))?;
    let start = Instant::now();
    let report =
        grade_dataset(&ds, &cands, &constants, &p, &units, jobs).map_err(|e| CliError::Usage(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();
    emit(a.common.out.or(cfg.out).as_deref(), &report.render(format))?;
    let o = &report.rollups.overall;
    let failed = report.per_problem.len() - o.graded;
    eprintln!(
        "graded {} of {} candidate(s): step mean {:.4} (pooled {:.4}), final accuracy {:.4}, wall {wall:.2}s",
        o.graded,
        report.per_problem.len(),
        o.step_mean,
        o.step_mean_pooled,
        o.final_accuracy
    );
    if failed > 0 {
        eprintln!("{failed} candidate(s) failed; see the error field in the report");
    }
    if o.graded == 0 {
        return Err(CliError::Failure("zero problems graded".into()));
    }
    Ok(EXIT_OK)
}

fn cmd_annotate(a: AnnotateArgs) -> CliResult {
    let cfg = load_config(&a.common)?;
    let dataset = required(a.dataset, cfg.dataset, "dataset")?;
    let ann_path = required(a.annotations, cfg.annotations, "annotations")?;
    let ds = load_dataset(&dataset)?;
    let text =
        std::fs::read_to_string(&ann_path).map_err(|e| CliError::Usage(format!("{}: {e}", ann_path.display())))?;
    let annotations: Vec<Annotation> =
        parse_records(&text).map_err(|e| CliError::Failure(format!("{}: {e}", ann_path.display())))?;
    let tertiles =
        tertile_thresholds(&ds.problems.iter().map(|p| dag_entropy(&p.grading_standard)).collect::<Vec<_>>());
    let thresholds = Thresholds {
        tau1: a.tau1.or(cfg.tau1).unwrap_or(tertiles.tau1),
        tau2: a.tau2.or(cfg.tau2).unwrap_or(tertiles.tau2),
    };
    let bands = cfg.bands.unwrap_or_default();
    let mut out = String::new();
    for ann in &annotations {
        let problem = ds
            .get(&ann.problem_id)
            .ok_or_else(|| CliError::Failure(format!("annotation for unknown problem id {}", ann.problem_id)))?;
        let inp = DifficultyInput { c1: ann.c1, c2: ann.c2, dag: &problem.grading_standard, thresholds };
        let r = difficulty_label(&inp, &bands).map_err(|e| match e {
            crate::stats::AnnotateError::Rating { .. } => CliError::Failure(format!("problem {}: {e}", ann.problem_id)),
            other => CliError::Usage(other.to_string()),
        })?;
        let rec = AnnotationResult { problem_id: ann.problem_id.clone(), e: r.e, c3: r.c3, s: r.s, label: r.label };
        out.push_str(&serde_json::to_string(&rec).expect("serializes"));
        out.push('\n');
    }
    emit(a.common.out.or(cfg.out).as_deref(), &out)?;
    eprintln!("annotated {} problem(s) with tau1 = {}, tau2 = {}", annotations.len(), thresholds.tau1, thresholds.tau2);
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct StatsOutput {
    n: usize,
    tau_b: f64,
    p_asymptotic: f64,
    p_permutation: f64,
    n_perm: u64,
    seed: u64,
}

pub const DEFAULT_N_PERM: u64 = 10_000;

fn cmd_stats(a: StatsArgs) -> CliResult {
    let cfg = load_config(&a.common)?;
    let path = required(a.pairs, cfg.pairs, "pairs")?;
    let n_perm = a.n_perm.or(cfg.n_perm).unwrap_or(DEFAULT_N_PERM);
    let seed = a.seed.or(cfg.seed).unwrap_or(crate::equiv::DEFAULT_SEED);
    let format = a.format.or(cfg.format).unwrap_or(ReportFormat::Tsv);
    if n_perm == 0 {
        return Err(CliError::Usage("--n-perm must be at least 1".into()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let records: Vec<AgreementRecord> =
        parse_records(&text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    let pairs =
        RankPairs::new(records.iter().map(|r| r.score_a).collect(), records.iter().map(|r| r.score_b).collect())
            .map_err(|e| CliError::Failure(format!("undefined result: {e}")))?;
    let undefined = |e| CliError::Failure(format!("undefined result: {e}"));
    let t = kendall_tau_b(&pairs).map_err(undefined)?;
    let p_perm = permutation_test(&pairs, n_perm, seed).map_err(undefined)?;
    let out = StatsOutput {
        n: pairs.len(),
        tau_b: t.tau_b,
        p_asymptotic: t.p_asymptotic,
        p_permutation: p_perm,
        n_perm,
        seed,
    };
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&out).expect("serializes") + "\n",
        ReportFormat::Tsv => {
            format!("tau_b\tp_asymptotic\tp_permutation\n{}\t{}\t{}\n", out.tau_b, out.p_asymptotic, out.p_permutation)
        }
    };
    emit(a.common.out.or(cfg.out).as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Grade(a) => cmd_grade(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Failure(msg)) = &e;
            eprintln!("error: {msg}");
            e.code()
        }
    }
}

/// Parse arguments and run; clap's own errors exit with code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
