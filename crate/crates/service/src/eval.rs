//! The structure-generation experiment as a request/response pair, shared by
//! the HTTP endpoint and the command line.

use nodestory::evaluation::{
    builtin_corpus, parse_corpus, render_report, run_eval, summarize, Corpus, CorpusEntry, BUILTIN_CORPORA,
    DEFAULT_ALPHA,
};
use nodestory::{EvalOptions, EvalSummary, GenerativeBackend, TopologyClass, TrialRecord};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRequest {
    /// Shipped corpus names. Empty means all of them, unless `entries` is set.
    #[serde(default)]
    pub corpora: Vec<String>,
    /// Inline corpus, run after the named ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<CorpusEntry>>,
    #[serde(default = "yes")]
    pub check_node_count: bool,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default = "alpha")]
    pub alpha: f64,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Default for EvalRequest {
    fn default() -> Self {
        EvalRequest {
            corpora: Vec::new(),
            entries: None,
            check_node_count: true,
            jobs: 1,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub corpus: String,
    pub expected: TopologyClass,
    pub summary: EvalSummary,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub rows: Vec<EvalRow>,
    /// Markdown table of the rows.
    pub report: String,
}

/// Loads a corpus by shipped name, or from a tab separated file.
pub fn load_corpus(spec: &str) -> Result<Corpus, ServiceError> {
    if BUILTIN_CORPORA.contains(&spec) {
        return Ok(builtin_corpus(spec)?);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| ServiceError::io(spec, e))?;
    Ok(parse_corpus(spec, &text)?)
}

pub fn evaluate(request: &EvalRequest, backend: &dyn GenerativeBackend) -> Result<EvalResponse, ServiceError> {
    let mut corpora = Vec::new();
    for name in &request.corpora {
        corpora.push(builtin_corpus(name)?);
    }
    if let Some(entries) = &request.entries {
        corpora.push(Corpus {
            name: "inline".to_owned(),
            entries: entries.clone(),
        });
    }
    if corpora.is_empty() {
        corpora = BUILTIN_CORPORA.iter().map(|n| builtin_corpus(n)).collect::<Result<_, _>>()?;
    }
    evaluate_corpora(&corpora, request, backend)
}

/// Runs each corpus and summarises it. A corpus mixing classes is split
/// into one row per class.
pub fn evaluate_corpora(
    corpora: &[Corpus],
    request: &EvalRequest,
    backend: &dyn GenerativeBackend,
) -> Result<EvalResponse, ServiceError> {
    let options = EvalOptions {
        check_node_count: request.check_node_count,
        jobs: request.jobs.max(1),
    };
    let mut rows = Vec::new();
    for corpus in corpora {
        let trials = run_eval(&corpus.entries, backend, options)?;
        for class in [TopologyClass::Branching, TopologyClass::Linear] {
            let mine: Vec<TrialRecord> = trials.iter().filter(|t| t.expected == class).cloned().collect();
            if mine.is_empty() {
                continue;
            }
            rows.push(EvalRow {
                corpus: corpus.name.clone(),
                expected: class,
                summary: summarize(&mine, request.alpha)?,
                trials: mine,
            });
        }
    }
    let table: Vec<(TopologyClass, EvalSummary)> = rows.iter().map(|r| (r.expected, r.summary)).collect();
    Ok(EvalResponse {
        report: render_report(&table),
        rows,
    })
}
