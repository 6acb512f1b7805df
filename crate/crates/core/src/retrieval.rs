//! Case database of solved tasks and nearest-neighbor lookup over task
//! descriptions, used to put a worked example into the agent prompt.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::parse_call;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("case {index}: {reason}")]
    InvalidCase { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Json { line: usize, reason: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStep {
    /// Action call text, e.g. `Tap(3)`.
    pub call: String,
    #[serde(default)]
    pub note: Option<String>,
}

/// A solved task and the steps that solved it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCase {
    pub app: String,
    pub task: String,
    pub steps: Vec<CaseStep>,
}

impl TaskCase {
    pub fn new(app: &str, task: &str, calls: &[&str]) -> Self {
        Self {
            app: app.to_string(),
            task: task.to_string(),
            steps: calls.iter().map(|c| CaseStep { call: c.to_string(), note: None }).collect(),
        }
    }

    fn validate(&self, index: usize) -> Result<(), RetrievalError> {
        let invalid = |reason: String| RetrievalError::InvalidCase { index, reason };
        if self.task.trim().is_empty() {
            return Err(invalid("task is empty".into()));
        }
        if self.steps.is_empty() {
            return Err(invalid("no steps".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            parse_call(&step.call).map_err(|e| invalid(format!("step {}: {e}", i + 1)))?;
        }
        Ok(())
    }
}

/// Reads a JSON Lines case file. Blank lines are skipped.
pub fn read_cases(reader: impl BufRead) -> Result<Vec<TaskCase>, RetrievalError> {
    let mut cases = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let case = serde_json::from_str(&line).map_err(|e| RetrievalError::Json { line: i + 1, reason: e.to_string() })?;
        cases.push(case);
    }
    Ok(cases)
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Source of worked examples for the prompt.
pub trait TaskRetriever: Send + Sync {
    /// Up to `k` cases, most similar first.
    fn retrieve(&self, task: &str, k: usize) -> Vec<TaskCase>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<'a> {
    pub index: usize,
    pub similarity: f64,
    pub case: &'a TaskCase,
}

/// TF-IDF index over task descriptions.
///
/// TF is the raw token count, IDF is `ln((1 + N) / (1 + df)) + 1`, and each
/// case vector is L2-normalized (zero for tasks without tokens).
#[derive(Debug, Clone, PartialEq)]
pub struct CaseIndex {
    cases: Vec<TaskCase>,
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    vectors: Vec<Vec<(usize, f64)>>,
}

fn l2_normalize(v: &mut [(usize, f64)]) {
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in v.iter_mut() {
            *w /= norm;
        }
    }
}

/// Similarities are compared at this resolution so that ties are decided
/// by case order rather than by rounding noise.
const SIMILARITY_QUANTUM: f64 = 1e-9;

pub fn similarity_key(sim: f64) -> i64 {
    (sim / SIMILARITY_QUANTUM).round() as i64
}

impl CaseIndex {
    pub fn build(cases: Vec<TaskCase>) -> Result<Self, RetrievalError> {
        for (i, c) in cases.iter().enumerate() {
            c.validate(i)?;
        }
        let tokens: Vec<Vec<String>> = cases.iter().map(|c| tokenize(&c.task)).collect();
        let mut vocabulary = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for doc in &tokens {
            let mut seen = std::collections::HashSet::new();
            for t in doc {
                let next = vocabulary.len();
                let dim = *vocabulary.entry(t.clone()).or_insert(next);
                if dim == df.len() {
                    df.push(0);
                }
                if seen.insert(dim) {
                    df[dim] += 1;
                }
            }
        }
        let n = cases.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        let mut index = Self { cases, vocabulary, idf, vectors: Vec::new() };
        index.vectors = tokens.iter().map(|doc| index.vectorize(doc)).collect();
        Ok(index)
    }

    fn vectorize(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            if let Some(&dim) = self.vocabulary.get(t) {
                *counts.entry(dim).or_default() += 1.0;
            }
        }
        let mut v: Vec<(usize, f64)> = counts.into_iter().map(|(d, tf)| (d, tf * self.idf[d])).collect();
        v.sort_by_key(|(d, _)| *d);
        l2_normalize(&mut v);
        v
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[TaskCase] {
        &self.cases
    }

    pub fn vocabulary(&self) -> &HashMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Sparse `(dimension, weight)` vector of case `i`, sorted by dimension.
    pub fn vector(&self, i: usize) -> &[(usize, f64)] {
        &self.vectors[i]
    }

    /// Query vector in the index's space; out-of-vocabulary tokens are
    /// ignored.
    pub fn embed(&self, text: &str) -> Vec<(usize, f64)> {
        self.vectorize(&tokenize(text))
    }

    /// The `k` most similar cases by cosine similarity; ties go to the lower
    /// case index.
    pub fn query(&self, task: &str, k: usize) -> Vec<Hit<'_>> {
        let q: HashMap<usize, f64> = self.embed(task).into_iter().collect();
        let mut hits: Vec<Hit<'_>> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(index, v)| Hit {
                index,
                similarity: v.iter().map(|(d, w)| w * q.get(d).copied().unwrap_or(0.0)).sum(),
                case: &self.cases[index],
            })
            .collect();
        hits.sort_by(|a, b| similarity_key(b.similarity).cmp(&similarity_key(a.similarity)).then(a.index.cmp(&b.index)));
        hits.truncate(k);
        hits
    }
}

impl TaskRetriever for CaseIndex {
    fn retrieve(&self, task: &str, k: usize) -> Vec<TaskCase> {
        self.query(task, k).into_iter().map(|h| h.case.clone()).collect()
    }
}
