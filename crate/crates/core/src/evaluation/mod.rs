//! Structure-generation experiment: run prompt corpora through the pipeline,
//! classify each resulting graph, and summarise with exact binomial
//! intervals.

mod corpus;
mod interval;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::GenerativeBackend;
use crate::graph::TopologyClass;
use crate::orchestrator::{run_pipeline, NODE_COUNT_RANGE};

pub use corpus::{
    builtin_corpora, builtin_corpus, parse_corpus, render_corpus, Corpus, CorpusEntry, BRANCHING_META_PROMPT,
    BUILTIN_CORPORA, LINEAR_META_PROMPT,
};
pub use interval::{clopper_pearson, lower_tail, upper_tail};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("confidence interval undefined for k={k}, n={n}, alpha={alpha}")]
    Domain { k: u64, n: u64, alpha: f64 },
    #[error("unknown corpus {0:?}")]
    UnknownCorpus(String),
    #[error("corpus line {line}: {message}")]
    CorpusFormat { line: usize, message: String },
    #[error("no prompts to evaluate")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub prompt: String,
    pub expected: TopologyClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<TopologyClass>,
    /// Set when the pipeline itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub node_count: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Whether a trial also needs 8 to 12 nodes to pass.
    pub check_node_count: bool,
    /// Trials run at once.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            check_node_count: true,
            jobs: 1,
        }
    }
}

fn trial(entry: &CorpusEntry, backend: &dyn GenerativeBackend, options: EvalOptions) -> TrialRecord {
    match run_pipeline(&entry.prompt, backend).and_then(|out| {
        let class = out.graph.classify_topology()?;
        Ok((class, out.graph.nodes.len()))
    }) {
        Ok((observed, node_count)) => TrialRecord {
            prompt: entry.prompt.clone(),
            expected: entry.expected,
            observed: Some(observed),
            failure: None,
            node_count,
            pass: observed == entry.expected
                && (!options.check_node_count || NODE_COUNT_RANGE.contains(&node_count)),
        },
        Err(e) => TrialRecord {
            prompt: entry.prompt.clone(),
            expected: entry.expected,
            observed: None,
            failure: Some(e.to_string()),
            node_count: 0,
            pass: false,
        },
    }
}

/// One record per entry, in corpus order. Pipeline failures become failed
/// trials.
pub fn run_eval(
    entries: &[CorpusEntry],
    backend: &dyn GenerativeBackend,
    options: EvalOptions,
) -> Result<Vec<TrialRecord>, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let workers = options.jobs.clamp(1, entries.len());
    if workers == 1 {
        return Ok(entries.iter().map(|e| trial(e, backend, options)).collect());
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<TrialRecord>>> = entries.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = entries.get(i) else { break };
                *slots[i].lock().expect("slot lock") = Some(trial(entry, backend, options));
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every trial ran"))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub k: u64,
    pub n: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
}

pub fn summarize(records: &[TrialRecord], alpha: f64) -> Result<EvalSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let n = records.len() as u64;
    let k = records.iter().filter(|r| r.pass).count() as u64;
    summary_of(k, n, alpha)
}

pub fn summary_of(k: u64, n: u64, alpha: f64) -> Result<EvalSummary, EvalError> {
    let (ci_low, ci_high) = clopper_pearson(k, n, alpha)?;
    Ok(EvalSummary {
        k,
        n,
        rate: k as f64 / n as f64,
        ci_low,
        ci_high,
        alpha,
    })
}

/// Markdown table with one row per narrative type.
pub fn render_report(rows: &[(TopologyClass, EvalSummary)]) -> String {
    let level = rows
        .first()
        .map_or(95.0, |(_, s)| (1.0 - s.alpha) * 100.0);
    let mut out = format!(
        "| Narrative Type | Correct / Total | Success Rate | {level:.0}% CI |\n|---|---|---|---|\n"
    );
    for (class, s) in rows {
        out.push_str(&format!(
            "| {class} | {} / {} | {:.0}% | [{:.2}, {:.2}] |\n",
            s.k,
            s.n,
            s.rate * 100.0,
            s.ci_low,
            s.ci_high
        ));
    }
    out
}
