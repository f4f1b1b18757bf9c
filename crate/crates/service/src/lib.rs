//! Project persistence, the HTTP API and the remote backend client.

pub mod api;
pub mod error;
pub mod eval;
pub mod project;
pub mod remote;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use nodestory::{GenerativeBackend, ScriptedBackend, StoryGraph};
use serde::{Deserialize, Serialize};

pub use error::{ErrorClass, ServiceError};
pub use project::{ChatReply, ChatRequest, Committed, Project, ProjectEvent, ProjectInfo, Sequenced, StageEvent};
pub use remote::{RemoteBackend, RemoteConfig};
pub use store::{FaultHook, Manifest, ProjectDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted {
        seed: u64,
        #[serde(default)]
        latency_ms: u64,
    },
    Remote(RemoteConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Scripted { seed: 0, latency_ms: 0 }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Arc<dyn GenerativeBackend> {
        match self {
            BackendConfig::Scripted { seed, latency_ms } => {
                Arc::new(ScriptedBackend::new(*seed).with_latency(Duration::from_millis(*latency_ms)))
            }
            BackendConfig::Remote(cfg) => Arc::new(RemoteBackend::from_config(cfg)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub root: PathBuf,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    2
}

/// All projects under one directory, each in a subdirectory named by its id.
pub struct Service {
    root: PathBuf,
    backend: Arc<dyn GenerativeBackend>,
    workers: usize,
    hook: Option<FaultHook>,
    projects: Mutex<HashMap<String, Arc<Project>>>,
}

impl Service {
    pub fn new(root: impl Into<PathBuf>, backend: Arc<dyn GenerativeBackend>, workers: usize) -> Result<Self, ServiceError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| ServiceError::io(&root, e))?;
        Ok(Service {
            root,
            backend,
            workers: workers.max(1),
            hook: None,
            projects: Mutex::new(HashMap::new()),
        })
    }

    /// Installs a write fault hook on every project opened from now on.
    pub fn with_fault_hook(mut self, hook: FaultHook) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn backend(&self) -> &Arc<dyn GenerativeBackend> {
        &self.backend
    }

    fn project_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        // Ids are uuids, which keeps them from naming anything outside root.
        uuid::Uuid::parse_str(id).map_err(|_| ServiceError::UnknownProject(id.to_owned()))?;
        Ok(self.root.join(id))
    }

    pub fn create(&self, name: &str, graph: &StoryGraph) -> Result<Arc<Project>, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let path = self.project_path(&id)?;
        let project = Arc::new(Project::create(
            &path,
            &id,
            name,
            graph,
            Arc::clone(&self.backend),
            self.workers,
            self.hook.clone(),
        )?);
        self.projects.lock().expect("registry lock").insert(id, Arc::clone(&project));
        Ok(project)
    }

    /// Opens the project on first use.
    pub fn get(&self, id: &str) -> Result<Arc<Project>, ServiceError> {
        let path = self.project_path(id)?;
        let mut projects = self.projects.lock().expect("registry lock");
        if let Some(p) = projects.get(id) {
            return Ok(Arc::clone(p));
        }
        if !path.is_dir() {
            return Err(ServiceError::UnknownProject(id.to_owned()));
        }
        let project = Arc::new(Project::open(&path, Arc::clone(&self.backend), self.workers, self.hook.clone())?);
        projects.insert(id.to_owned(), Arc::clone(&project));
        Ok(project)
    }

    /// Every readable project, by creation time. Unreadable ones are skipped.
    pub fn list(&self) -> Result<Vec<ProjectInfo>, ServiceError> {
        let mut out = Vec::new();
        let entries = std::fs::read_dir(&self.root).map_err(|e| ServiceError::io(&self.root, e))?;
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if uuid::Uuid::parse_str(&name).is_err() {
                continue;
            }
            match self.get(&name) {
                Ok(p) => out.push(p.info()),
                Err(e) => tracing::warn!("skipping project {name}: {e}"),
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.project_id.cmp(&b.project_id)));
        Ok(out)
    }
}

/// Binds and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let service = Service::new(&config.root, config.backend.build(), config.workers)?;
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| ServiceError::io(config.listen.to_string(), e))?;
    let local = listener.local_addr().map_err(|e| ServiceError::io(config.listen.to_string(), e))?;
    tracing::info!("listening on {local}, projects in {}", config.root.display());
    axum::serve(listener, api::router(Arc::new(service)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::io(local.to_string(), e))
}
