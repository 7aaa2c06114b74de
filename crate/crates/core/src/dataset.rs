//! Problem records with their grading standards, and candidate solutions.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::RubricDag;

/// Problem identifier; numeric ids sort numerically and before text ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemId {
    Num(u64),
    Text(String),
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemId::Num(n) => write!(f, "{n}"),
            ProblemId::Text(s) => f.write_str(s),
        }
    }
}

impl From<u64> for ProblemId {
    fn from(n: u64) -> Self {
        ProblemId::Num(n)
    }
}

impl From<&str> for ProblemId {
    fn from(s: &str) -> Self {
        ProblemId::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subquestion {
    #[serde(default)]
    pub letter: String,
    #[serde(default)]
    pub subproblem: String,
    #[serde(default)]
    pub solution: String,
    #[serde(default)]
    pub final_answer_form: String,
    #[serde(default)]
    pub final_answer_instructions: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significant_figures: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: ProblemId,
    #[serde(default)]
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub images: Vec<serde_json::Value>,
    #[serde(default)]
    pub subquestions: Vec<Subquestion>,
    pub grading_standard: RubricDag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

pub const UNLABELED: &str = "unlabeled";

impl Problem {
    /// All subquestion solutions, in order.
    pub fn reference_solution(&self) -> String {
        self.subquestions.iter().map(|s| s.solution.as_str()).collect::<Vec<_>>().join("\n\n")
    }

    pub fn difficulty_label(&self) -> &str {
        self.difficulty.as_deref().unwrap_or(UNLABELED)
    }

    pub fn domain_label(&self) -> &str {
        self.domain.as_deref().unwrap_or(UNLABELED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub problem_id: ProblemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<f64>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("problem id {0} appears more than once")]
    DuplicateId(ProblemId),
}

impl DatasetError {
    fn json(e: serde_json::Error, line_offset: usize) -> Self {
        DatasetError::Json { line: e.line() + line_offset, column: e.column(), msg: e.to_string() }
    }
}

/// Read records from a JSON array, a single JSON object, or JSON lines.
pub fn parse_records<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, DatasetError> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| DatasetError::json(e, 0));
    }
    if let Ok(one) = serde_json::from_str::<T>(text) {
        return Ok(vec![one]);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| DatasetError::json(e, i))?);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub problems: Vec<Problem>,
}

impl Dataset {
    pub fn new(problems: Vec<Problem>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for p in &problems {
            if !seen.insert(&p.id) {
                return Err(DatasetError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Dataset { problems })
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        Self::new(parse_records(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::parse(&read(path)?)
    }

    pub fn get(&self, id: &ProblemId) -> Option<&Problem> {
        self.problems.iter().find(|p| &p.id == id)
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateSolution>, DatasetError> {
    parse_records(&read(path)?)
}
