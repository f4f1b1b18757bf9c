use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nodestory::export::{export_bundle, export_warnings, sequence_for_export};
use nodestory::{
    parse_graph_with, ExportSelection, GenerativeBackend, MediaKind, MediaParams, NodeId, ParseMode, StoryGraph,
};
use nodestory_service::eval::{evaluate_corpora, load_corpus, EvalRequest};
use nodestory_service::{BackendConfig, ChatRequest, Committed, Project, RemoteConfig, ServiceConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nodestory", version, about = "Build branching stories as node graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Project directory.
    #[arg(short, long, global = true, default_value = ".")]
    project: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Scripted)]
    backend: BackendKind,
    /// Seed for the scripted backend.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, env = "NODESTORY_REMOTE_URL")]
    remote_url: Option<String>,
    /// Environment variable holding the remote API key.
    #[arg(long, global = true, default_value = "NODESTORY_API_KEY")]
    api_key_env: String,
    /// Remote request timeout in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, global = true, default_value_t = 2)]
    retries: u32,
    /// Parallel media workers.
    #[arg(long, global = true, default_value_t = 2)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BackendKind {
    Scripted,
    Remote,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Audio,
    Image,
    Video,
}

#[derive(Clone, Copy, ValueEnum)]
enum Document {
    Manifest,
    Srt,
    Storyboard,
}

#[derive(Subcommand)]
enum Command {
    /// Create a project directory.
    New {
        dir: PathBuf,
        #[arg(long)]
        name: Option<String>,
        /// Start from an existing graph document.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Keep unknown members of the graph document instead of rejecting them.
        #[arg(long)]
        lenient: bool,
    },
    /// Summarize the project.
    Show,
    /// Check a graph document without touching any project.
    Validate {
        file: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Replace the graph with one generated from a prompt.
    Generate { prompt: String },
    /// Rewrite the text of selected nodes.
    Edit {
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
        #[arg(long)]
        instruction: String,
    },
    /// Add new events after an anchor node.
    Extend {
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long)]
        instruction: String,
    },
    /// Route a free-form request and carry it out.
    Chat {
        utterance: String,
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
    },
    /// Generate media for nodes (all when none are given).
    Media {
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
        #[arg(long, value_enum, default_value_t = Kind::Audio)]
        kind: Kind,
        #[arg(long)]
        voice: Option<String>,
        #[arg(long)]
        style: Option<String>,
    },
    /// Write the export bundle, or print one document.
    Export {
        /// Explicit path, in order.
        #[arg(long, value_delimiter = ',', conflicts_with = "nodes")]
        path: Vec<String>,
        /// Subset, ordered topologically.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
        /// Bundle destination; defaults to the project's export directory.
        #[arg(long, conflicts_with = "print")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        print: Option<Document>,
    },
    /// List snapshots.
    Snapshots,
    /// Make an earlier snapshot the current graph.
    Restore { snapshot: u64 },
    /// Drop old snapshots and unreferenced assets.
    Prune {
        #[arg(long, default_value_t = 5)]
        keep: usize,
    },
    /// Run the structure-generation experiment.
    Eval {
        /// Shipped corpus name or a corpus file; repeatable.
        #[arg(long = "corpus")]
        corpora: Vec<String>,
        #[arg(long)]
        no_node_count: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = nodestory::evaluation::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Directory holding one subdirectory per project.
        #[arg(long, default_value = "projects")]
        root: PathBuf,
        /// Artificial scripted-backend latency.
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
    },
}

impl Global {
    fn backend_config(&self) -> Result<BackendConfig> {
        Ok(match self.backend {
            BackendKind::Scripted => BackendConfig::Scripted { seed: self.seed, latency_ms: 0 },
            BackendKind::Remote => {
                let url = self.remote_url.clone().context("--remote-url is required with --backend remote")?;
                let mut cfg = RemoteConfig::new(url);
                cfg.api_key_env = self.api_key_env.clone();
                cfg.timeout = Duration::try_from_secs_f64(self.timeout).context("bad --timeout")?;
                cfg.retries = self.retries;
                BackendConfig::Remote(cfg)
            }
        })
    }

    fn backend(&self) -> Result<Arc<dyn GenerativeBackend>> {
        Ok(self.backend_config()?.build())
    }

    fn open(&self) -> Result<Arc<Project>> {
        let p = Project::open(&self.project, self.backend()?, self.workers, None)
            .with_context(|| format!("opening project {}", self.project.display()))?;
        Ok(Arc::new(p))
    }

    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce(&T) -> String) -> Result<()> {
        match self.format {
            Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
            Format::Text => {
                let out = text(value);
                if !out.is_empty() {
                    println!("{}", out.trim_end());
                }
            }
        }
        Ok(())
    }
}

fn ids(raw: &[String]) -> Vec<NodeId> {
    raw.iter().map(|s| NodeId::from(s.trim())).collect()
}

fn read_graph(path: &Path, lenient: bool) -> Result<StoryGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mode = if lenient { ParseMode::Lenient } else { ParseMode::Strict };
    Ok(parse_graph_with(&text, mode)?)
}

fn committed_text(c: &Committed) -> String {
    let mut out = format!("version {}", c.version);
    if !c.nodes.is_empty() {
        let nodes: Vec<&str> = c.nodes.iter().map(NodeId::as_str).collect();
        out += &format!(", nodes {}", nodes.join(","));
    }
    for w in &c.warnings {
        out += &format!("\nwarning: {w}");
    }
    out
}

fn selection(path: &[String], nodes: &[String]) -> ExportSelection {
    if !path.is_empty() {
        ExportSelection::Path(ids(path))
    } else if !nodes.is_empty() {
        ExportSelection::Nodes(ids(nodes))
    } else {
        ExportSelection::All
    }
}

#[derive(Serialize)]
struct Validation {
    ok: bool,
    nodes: usize,
    edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    topology: Option<String>,
    report: nodestory::ValidationReport,
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    match cli.command {
        Command::New { dir, name, graph, lenient } => {
            let graph = match graph {
                Some(path) => read_graph(&path, lenient)?,
                None => StoryGraph::new(),
            };
            let name = name.unwrap_or_else(|| {
                dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "story".into())
            });
            let id = uuid::Uuid::new_v4().to_string();
            let p = Project::create(&dir, &id, &name, &graph, g.backend()?, g.workers, None)?;
            g.emit(&p.info(), |i| format!("created {} ({}) at {}", i.name, i.project_id, dir.display()))?;
        }
        Command::Show => {
            let p = g.open()?;
            g.emit(&p.info(), |i| {
                let topology = i.topology.map(|t| t.to_string()).unwrap_or_else(|| "empty".into());
                format!("{} ({})\nversion {}, {} nodes, {} edges, {topology}", i.name, i.project_id, i.version, i.nodes, i.edges)
            })?;
        }
        Command::Validate { file, lenient } => {
            let graph = read_graph(&file, lenient)?;
            let report = graph.validate();
            let v = Validation {
                ok: report.is_ok(),
                nodes: graph.nodes.len(),
                edges: graph.edges.len(),
                topology: graph.classify_topology().ok().map(|t| t.to_string()),
                report,
            };
            g.emit(&v, |v| {
                let mut out = format!("{} nodes, {} edges", v.nodes, v.edges);
                if let Some(t) = &v.topology {
                    out += &format!(", {t}");
                }
                for violation in &v.report.violations {
                    out += &format!("\nerror: {violation}");
                }
                for w in &v.report.warnings {
                    out += &format!("\nwarning: {}", serde_json::to_string(w).unwrap_or_default());
                }
                out
            })?;
            return Ok(v.ok);
        }
        Command::Generate { prompt } => {
            let c = g.open()?.generate(&prompt, None)?;
            g.emit(&c, committed_text)?;
        }
        Command::Edit { nodes, instruction } => {
            let c = g.open()?.edit(&ids(&nodes), &instruction, None)?;
            g.emit(&c, committed_text)?;
        }
        Command::Extend { anchor, instruction } => {
            let anchor = anchor.map(|a| NodeId::from(a.as_str()));
            let c = g.open()?.extend(anchor.as_ref(), &instruction, None)?;
            g.emit(&c, committed_text)?;
        }
        Command::Chat { utterance, nodes } => {
            let p = g.open()?;
            let request = ChatRequest { utterance, selection: ids(&nodes), command: None };
            let reply = p.chat(&request, None)?;
            // Media runs in the background; stay until it settles so the jobs
            // are not left for the next open to mark as interrupted.
            while p.jobs().iter().any(|j| reply.jobs.contains(&j.job_id) && !j.status.is_terminal()) {
                std::thread::sleep(Duration::from_millis(20));
            }
            g.emit(&reply, |r| {
                let mut out = format!("{} at version {}", r.task_kind, r.version);
                if !r.nodes.is_empty() {
                    let nodes: Vec<&str> = r.nodes.iter().map(NodeId::as_str).collect();
                    out += &format!(", nodes {}", nodes.join(","));
                }
                if let Some(inv) = &r.export {
                    out += &format!("\nexported to {}", inv.root.display());
                }
                for w in &r.warnings {
                    out += &format!("\nwarning: {w}");
                }
                out
            })?;
        }
        Command::Media { nodes, kind, voice, style } => {
            let p = g.open()?;
            let kind = match kind {
                Kind::Audio => MediaKind::Audio,
                Kind::Image => MediaKind::Image,
                Kind::Video => MediaKind::Video,
            };
            let mut params = MediaParams::new(kind, g.backend()?.name());
            if let Some(v) = voice {
                params = params.with_voice(v);
            }
            if let Some(s) = style {
                params = params.with_style(s);
            }
            let jobs = p.enqueue(&ids(&nodes), &params)?;
            let done = p.process_media(jobs);
            let failed = done.iter().filter(|j| j.error.is_some()).count();
            g.emit(&done, |jobs| {
                jobs.iter()
                    .map(|j| match (&j.asset, &j.error) {
                        (Some(a), _) => format!("job {} node {}: {}", j.job_id, j.node_id, a.uri),
                        (None, e) => format!("job {} node {}: failed: {}", j.job_id, j.node_id, e.as_deref().unwrap_or("?")),
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            return Ok(failed == 0);
        }
        Command::Export { path, nodes, out, print } => {
            let p = g.open()?;
            let sel = selection(&path, &nodes);
            match (print, out) {
                (Some(Document::Manifest), _) => println!("{}", serde_json::to_string_pretty(&p.export_manifest(&sel)?)?),
                (Some(Document::Srt), _) => print!("{}", p.export_srt(&sel)?),
                (Some(Document::Storyboard), _) => print!("{}", p.export_storyboard(&sel)?),
                (None, Some(dest)) => {
                    let (graph, _) = p.graph();
                    let order = sequence_for_export(&graph, &sel)?;
                    let inventory = export_bundle(&graph, &order, p.root(), &dest)?;
                    for w in export_warnings(&graph, &sel) {
                        eprintln!("warning: {w}");
                    }
                    g.emit(&inventory, |i| format!("exported {} documents and {} assets to {}", i.documents.len(), i.assets.len(), i.root.display()))?;
                }
                (None, None) => {
                    let outcome = p.export(&sel)?;
                    g.emit(&outcome, |o| {
                        let i = &o.inventory;
                        let mut s = format!("exported {} documents and {} assets to {}", i.documents.len(), i.assets.len(), i.root.display());
                        for w in &o.warnings {
                            s += &format!("\nwarning: {w}");
                        }
                        s
                    })?;
                }
            }
        }
        Command::Snapshots => {
            let p = g.open()?;
            let head = p.info().head;
            g.emit(&p.snapshots(), |snaps| {
                snaps
                    .iter()
                    .map(|s| {
                        let mark = if s.snapshot_id == head { "*" } else { " " };
                        format!("{mark} {:>4}  {}  {}", s.snapshot_id, s.taken_at.format("%Y-%m-%d %H:%M:%S"), s.reason)
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
        }
        Command::Restore { snapshot } => {
            let c = g.open()?.restore(snapshot, None)?;
            g.emit(&c, committed_text)?;
        }
        Command::Prune { keep } => {
            let out = g.open()?.prune(keep)?;
            g.emit(&out, |o| format!("{} snapshots kept, {} files removed", o.snapshots, o.removed.len()))?;
        }
        Command::Eval { corpora, no_node_count, jobs, alpha } => {
            let names = if corpora.is_empty() {
                nodestory::evaluation::BUILTIN_CORPORA.iter().map(|s| s.to_string()).collect()
            } else {
                corpora
            };
            let loaded = names.iter().map(|n| load_corpus(n)).collect::<Result<Vec<_>, _>>()?;
            let request = EvalRequest {
                corpora: Vec::new(),
                entries: None,
                check_node_count: !no_node_count,
                jobs,
                alpha,
            };
            let out = evaluate_corpora(&loaded, &request, g.backend()?.as_ref())?;
            g.emit(&out, |o| o.report.clone())?;
        }
        Command::Serve { listen, root, latency_ms } => {
            let mut backend = g.backend_config()?;
            if let BackendConfig::Scripted { latency_ms: l, .. } = &mut backend {
                *l = latency_ms;
            }
            let config = ServiceConfig { listen, root, backend, workers: g.workers };
            tokio::runtime::Runtime::new()?.block_on(nodestory_service::serve(config))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.verbose {
        tracing_subscriber::fmt()
            .with_env_filter(tracing_subscriber::EnvFilter::new("info"))
            .with_writer(std::io::stderr)
            .init();
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn selections() {
        assert_eq!(selection(&[], &[]), ExportSelection::All);
        let path = vec!["1".to_owned(), " 3".to_owned()];
        assert_eq!(selection(&path, &[]), ExportSelection::Path(vec!["1".into(), "3".into()]));
        assert_eq!(selection(&[], &path), ExportSelection::Nodes(vec!["1".into(), "3".into()]));
    }

    #[test]
    fn remote_needs_a_url() {
        let cli = Cli::try_parse_from(["nodestory", "--backend", "remote", "show"]).unwrap();
        if cli.global.remote_url.is_none() {
            assert!(cli.global.backend_config().is_err());
        }
        let cli = Cli::try_parse_from(["nodestory", "--backend", "remote", "--remote-url", "http://h", "--timeout", "2.5", "show"]).unwrap();
        match cli.global.backend_config().unwrap() {
            BackendConfig::Remote(r) => assert_eq!(r.timeout, Duration::from_millis(2500)),
            other => panic!("{other:?}"),
        }
    }
}
