//! Maps a user request to exactly one task.
//!
//! Rules, first match wins:
//! 1. an explicit command;
//! 2. an empty utterance is unroutable;
//! 3. no graph yet: generate;
//! 4. selection and a media word (narrate, voice, audio, image, video, ...): media;
//! 5. an export word (export, compile, subtitles, storyboard): export;
//! 6. selection and a structural request (split, merge, insert, "new node"):
//!    extend, with a notice that the selected nodes are left as they are;
//! 7. selection: edit the selection;
//! 8. no selection and a continuation word (add, extend, continue,
//!    "what happens next"): extend;
//! 9. otherwise edit every node.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{prompts, OrchestratorError};
use crate::backend::{BackendRequest, GenerativeBackend, TaskName};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Generate,
    Edit,
    MediaGen,
    Export,
    Extend,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Generate,
        TaskKind::Edit,
        TaskKind::MediaGen,
        TaskKind::Export,
        TaskKind::Extend,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Generate => "Generate",
            TaskKind::Edit => "Edit",
            TaskKind::MediaGen => "MediaGen",
            TaskKind::Export => "Export",
            TaskKind::Extend => "Extend",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = OrchestratorError;

    /// Accepts the kind names and the command tags (`media` for MediaGen).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "generate" => Ok(TaskKind::Generate),
            "edit" => Ok(TaskKind::Edit),
            "media" | "mediagen" => Ok(TaskKind::MediaGen),
            "export" => Ok(TaskKind::Export),
            "extend" => Ok(TaskKind::Extend),
            _ => Err(OrchestratorError::InvalidRoute(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskRequest {
    #[serde(default)]
    pub utterance: String,
    #[serde(default)]
    pub selection: Vec<NodeId>,
    #[serde(default)]
    pub graph_present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_command: Option<TaskKind>,
}

impl TaskRequest {
    pub fn new(utterance: impl Into<String>, selection: Vec<NodeId>, graph_present: bool) -> Self {
        TaskRequest {
            utterance: utterance.into(),
            selection,
            graph_present,
            explicit_command: None,
        }
    }

    pub fn command(mut self, kind: TaskKind) -> Self {
        self.explicit_command = Some(kind);
        self
    }
}

/// Which nodes the routed task works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Selection,
    AllNodes,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing {
    pub kind: TaskKind,
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

impl Routing {
    fn plain(kind: TaskKind, scope: Scope) -> Self {
        Routing {
            kind,
            scope,
            notice: None,
        }
    }
}

const MEDIA_STEMS: &[&str] = &[
    "narrat", "voice", "audio", "image", "picture", "illustrat", "video", "clip", "film", "animat",
];
const EXPORT_STEMS: &[&str] = &["export", "compile", "subtitle", "storyboard"];
const STRUCTURAL_STEMS: &[&str] = &["split", "merge", "insert"];
const CONTINUATION_STEMS: &[&str] = &["add", "extend", "continu", "sequel"];

const STRUCTURAL_NOTICE: &str =
    "Structural change requested: new nodes are added after the selection; the selected nodes are not modified.";

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn has_stem(words: &[String], stems: &[&str]) -> bool {
    words
        .iter()
        .any(|w| stems.iter().any(|s| w.starts_with(s)))
}

fn has_phrase(words: &[String], phrase: &str) -> bool {
    let joined = format!(" {} ", words.join(" "));
    joined.contains(&format!(" {phrase} "))
}

fn default_scope(kind: TaskKind, selected: bool) -> Scope {
    match kind {
        TaskKind::Generate => Scope::None,
        TaskKind::Extend => {
            if selected {
                Scope::Selection
            } else {
                Scope::None
            }
        }
        _ => {
            if selected {
                Scope::Selection
            } else {
                Scope::AllNodes
            }
        }
    }
}

/// Rule-table routing. Deterministic and total over well-formed requests.
pub fn route(request: &TaskRequest) -> Result<Routing, OrchestratorError> {
    let selected = !request.selection.is_empty();
    if let Some(kind) = request.explicit_command {
        return Ok(Routing::plain(kind, default_scope(kind, selected)));
    }
    if request.utterance.trim().is_empty() {
        return Err(OrchestratorError::UnroutableRequest);
    }
    if !request.graph_present {
        return Ok(Routing::plain(TaskKind::Generate, Scope::None));
    }
    let w = words(&request.utterance);
    if selected && has_stem(&w, MEDIA_STEMS) {
        return Ok(Routing::plain(TaskKind::MediaGen, Scope::Selection));
    }
    if has_stem(&w, EXPORT_STEMS) {
        return Ok(Routing::plain(TaskKind::Export, default_scope(TaskKind::Export, selected)));
    }
    if selected && (has_stem(&w, STRUCTURAL_STEMS) || has_phrase(&w, "new node")) {
        return Ok(Routing {
            kind: TaskKind::Extend,
            scope: Scope::Selection,
            notice: Some(STRUCTURAL_NOTICE.to_owned()),
        });
    }
    if selected {
        return Ok(Routing::plain(TaskKind::Edit, Scope::Selection));
    }
    if has_stem(&w, CONTINUATION_STEMS) || has_phrase(&w, "what happens next") {
        return Ok(Routing::plain(TaskKind::Extend, Scope::None));
    }
    Ok(Routing::plain(TaskKind::Edit, Scope::AllNodes))
}

/// Encodes a request as backend params.
pub fn route_params(request: &TaskRequest) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    params.insert("utterance".to_owned(), request.utterance.clone());
    params.insert(
        "selection".to_owned(),
        request
            .selection
            .iter()
            .map(NodeId::as_str)
            .collect::<Vec<_>>()
            .join(","),
    );
    params.insert("graph_present".to_owned(), request.graph_present.to_string());
    if let Some(kind) = request.explicit_command {
        params.insert("command".to_owned(), kind.as_str().to_owned());
    }
    params
}

/// Inverse of [`route_params`] followed by [`route`].
pub fn route_from_params(params: &BTreeMap<String, String>) -> Result<TaskKind, OrchestratorError> {
    let get = |k: &str| params.get(k).map(String::as_str).unwrap_or_default();
    let request = TaskRequest {
        utterance: get("utterance").to_owned(),
        selection: get("selection")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(NodeId::from)
            .collect(),
        graph_present: get("graph_present") == "true",
        explicit_command: match get("command") {
            "" => None,
            c => Some(c.parse()?),
        },
    };
    Ok(route(&request)?.kind)
}

/// Lets the backend choose the task; the answer must name one of the five kinds.
pub fn route_with_backend(
    request: &TaskRequest,
    backend: &dyn GenerativeBackend,
) -> Result<Routing, OrchestratorError> {
    let selected = !request.selection.is_empty();
    if let Some(kind) = request.explicit_command {
        return Ok(Routing::plain(kind, default_scope(kind, selected)));
    }
    if request.utterance.trim().is_empty() {
        return Err(OrchestratorError::UnroutableRequest);
    }
    let mut call = BackendRequest::new(TaskName::Route, prompts::route(request));
    call.params = route_params(request);
    let answer = backend.complete(&call)?.into_text()?;
    let kind: TaskKind = answer.parse()?;
    if kind != TaskKind::Generate && !request.graph_present {
        return Err(OrchestratorError::InvalidRoute(format!(
            "{answer} (no graph exists yet)"
        )));
    }
    Ok(Routing::plain(kind, default_scope(kind, selected)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;

    fn kind(utterance: &str, selection: &[&str], graph: bool) -> TaskKind {
        let req = TaskRequest::new(
            utterance,
            selection.iter().map(|s| NodeId::from(*s)).collect(),
            graph,
        );
        route(&req).unwrap().kind
    }

    #[test]
    fn reference_examples() {
        assert_eq!(kind("write a story about a lost dog", &[], false), TaskKind::Generate);
        assert_eq!(kind("make this sound mysterious", &["3"], true), TaskKind::Edit);
        assert_eq!(kind("narrate these in a hopeful tone", &["1", "2"], true), TaskKind::MediaGen);
    }

    #[test]
    fn remaining_rules() {
        assert_eq!(kind("what happens next?", &[], true), TaskKind::Extend);
        assert_eq!(kind("export the story with subtitles", &["1"], true), TaskKind::Export);
        assert_eq!(kind("make everything darker", &[], true), TaskKind::Edit);
        assert_eq!(
            route(&TaskRequest::new("make everything darker", vec![], true)).unwrap().scope,
            Scope::AllNodes
        );
        let split = route(&TaskRequest::new("split this node in two", vec!["2".into()], true)).unwrap();
        assert_eq!(split.kind, TaskKind::Extend);
        assert!(split.notice.is_some());
        assert_eq!(kind("add the fact that it rained", &["2"], true), TaskKind::Edit);
    }

    #[test]
    fn explicit_command_wins_and_empty_is_unroutable() {
        let req = TaskRequest::new("narrate", vec!["1".into()], true).command(TaskKind::Export);
        assert_eq!(route(&req).unwrap().kind, TaskKind::Export);
        assert_eq!(
            route(&TaskRequest::new("   ", vec![], true)),
            Err(OrchestratorError::UnroutableRequest)
        );
        assert_eq!(
            route(&TaskRequest::new("", vec![], false).command(TaskKind::Generate)).unwrap().kind,
            TaskKind::Generate
        );
    }

    #[test]
    fn parsing_kinds() {
        assert_eq!("media".parse::<TaskKind>().unwrap(), TaskKind::MediaGen);
        assert_eq!(" Extend.\n".parse::<TaskKind>().unwrap(), TaskKind::Extend);
        assert!("dance".parse::<TaskKind>().is_err());
    }

    #[test]
    fn backend_delegation_agrees_with_rules_for_scripted() {
        let backend = ScriptedBackend::new(0);
        for (u, sel, graph) in [
            ("write a story", vec![], false),
            ("make this sound mysterious", vec![NodeId::from("3")], true),
            ("narrate these", vec![NodeId::from("1")], true),
            ("continue", vec![], true),
        ] {
            let req = TaskRequest::new(u, sel, graph);
            assert_eq!(route_with_backend(&req, &backend).unwrap(), route(&req).unwrap());
        }
    }
}
