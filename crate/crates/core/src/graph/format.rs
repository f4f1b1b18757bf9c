//! The JSON graph document.
//!
//! ```text
//! {"nodes":[
//! {"id":"1","data":{"label":"...","segment":"..."},"position":{"x":50,"y":50}},
//! ...
//! ],
//! "edges":[
//! {"id":"e1-2","source":"1","target":"2"},
//! ...]}
//! ```
//!
//! Two optional members extend the base document: `nodes[].assets` (media
//! versions attached to a node) and a top-level `story_context` string. Both
//! are omitted when empty, so plain documents serialize byte-for-byte in the
//! layout above.

use serde_json::{Map, Value};
use thiserror::Error;

use super::validate::{validate, Violation};
use super::{join_violations, Extras, NodeId, Position, StoryEdge, StoryGraph, StoryNode};
use crate::media::MediaAsset;

/// How unknown members are handled while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown members are schema violations.
    #[default]
    Strict,
    /// Unknown members on the document, nodes, node data and edges are kept
    /// verbatim and written back on serialization.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("integrity violation: {}", join_violations(.0))]
    IntegrityViolation(Vec<Violation>),
}

impl ParseError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::SchemaViolation {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses a graph document in strict mode and validates it.
pub fn parse_graph(text: &str) -> Result<StoryGraph, ParseError> {
    parse_graph_with(text, ParseMode::Strict)
}

pub fn parse_graph_with(text: &str, mode: ParseMode) -> Result<StoryGraph, ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::MalformedDocument {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let graph = from_value(value, mode)?;
    let report = validate(&graph);
    if !report.is_ok() {
        return Err(ParseError::IntegrityViolation(report.violations));
    }
    Ok(graph)
}

fn from_value(value: Value, mode: ParseMode) -> Result<StoryGraph, ParseError> {
    let Value::Object(mut doc) = value else {
        return Err(ParseError::schema("$", "document must be an object"));
    };
    let nodes = take_array(&mut doc, "nodes", "$")?;
    let edges = take_array(&mut doc, "edges", "$")?;
    let story_context = match doc.remove("story_context") {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(ParseError::schema("$.story_context", "expected a string")),
    };
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, v)| node_from_value(v, &format!("$.nodes[{i}]"), mode))
        .collect::<Result<Vec<_>, _>>()?;
    let edges = edges
        .into_iter()
        .enumerate()
        .map(|(i, v)| edge_from_value(v, &format!("$.edges[{i}]"), mode))
        .collect::<Result<Vec<_>, _>>()?;
    let extra = leftovers(doc, "$", mode)?;

    Ok(StoryGraph {
        nodes,
        edges,
        story_context,
        extra,
    })
}

fn node_from_value(value: Value, path: &str, mode: ParseMode) -> Result<StoryNode, ParseError> {
    let mut obj = expect_object(value, path)?;
    let id = take_string(&mut obj, "id", path)?;

    let data_path = format!("{path}.data");
    let mut data = expect_object(take(&mut obj, "data", path)?, &data_path)?;
    let label = take_string(&mut data, "label", &data_path)?;
    let segment = take_string(&mut data, "segment", &data_path)?;
    let data_extra = leftovers(data, &data_path, mode)?;

    let pos_path = format!("{path}.position");
    let mut pos = expect_object(take(&mut obj, "position", path)?, &pos_path)?;
    let x = take_number(&mut pos, "x", &pos_path)?;
    let y = take_number(&mut pos, "y", &pos_path)?;
    // Position objects never carry extras, in either mode.
    leftovers(pos, &pos_path, ParseMode::Strict)?;

    let assets = match obj.remove("assets") {
        None => Vec::new(),
        Some(v) => {
            let assets_path = format!("{path}.assets");
            serde_json::from_value::<Vec<MediaAsset>>(v)
                .map_err(|e| ParseError::schema(assets_path, e.to_string()))?
        }
    };
    let extra = leftovers(obj, path, mode)?;

    Ok(StoryNode {
        id: NodeId::from(id),
        label,
        segment,
        position: Position::new(x, y),
        assets,
        extra,
        data_extra,
    })
}

fn edge_from_value(value: Value, path: &str, mode: ParseMode) -> Result<StoryEdge, ParseError> {
    let mut obj = expect_object(value, path)?;
    let id = take_string(&mut obj, "id", path)?;
    let source = take_string(&mut obj, "source", path)?;
    let target = take_string(&mut obj, "target", path)?;
    let extra = leftovers(obj, path, mode)?;
    Ok(StoryEdge {
        id,
        source: source.into(),
        target: target.into(),
        extra,
    })
}

fn expect_object(value: Value, path: &str) -> Result<Map<String, Value>, ParseError> {
    match value {
        Value::Object(m) => Ok(m),
        other => Err(ParseError::schema(
            path,
            format!("expected an object, found {}", kind_of(&other)),
        )),
    }
}

fn take(obj: &mut Map<String, Value>, key: &str, path: &str) -> Result<Value, ParseError> {
    obj.remove(key)
        .ok_or_else(|| ParseError::schema(format!("{path}.{key}"), "missing field"))
}

fn take_array(obj: &mut Map<String, Value>, key: &str, path: &str) -> Result<Vec<Value>, ParseError> {
    match take(obj, key, path)? {
        Value::Array(items) => Ok(items),
        other => Err(ParseError::schema(
            format!("{path}.{key}"),
            format!("expected an array, found {}", kind_of(&other)),
        )),
    }
}

fn take_string(obj: &mut Map<String, Value>, key: &str, path: &str) -> Result<String, ParseError> {
    match take(obj, key, path)? {
        Value::String(s) => Ok(s),
        other => Err(ParseError::schema(
            format!("{path}.{key}"),
            format!("expected a string, found {}", kind_of(&other)),
        )),
    }
}

fn take_number(obj: &mut Map<String, Value>, key: &str, path: &str) -> Result<f64, ParseError> {
    match take(obj, key, path)? {
        Value::Number(n) => n.as_f64().ok_or_else(|| {
            ParseError::schema(format!("{path}.{key}"), "number out of range")
        }),
        other => Err(ParseError::schema(
            format!("{path}.{key}"),
            format!("expected a number, found {}", kind_of(&other)),
        )),
    }
}

fn leftovers(obj: Map<String, Value>, path: &str, mode: ParseMode) -> Result<Extras, ParseError> {
    match (mode, obj.keys().next()) {
        (ParseMode::Strict, Some(key)) => Err(ParseError::schema(
            format!("{path}.{key}"),
            "unexpected field",
        )),
        _ => Ok(obj),
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Serializes a graph with canonical member order, one node or edge per line.
pub fn serialize_graph(graph: &StoryGraph) -> String {
    let mut out = String::from("{\"nodes\":[");
    if graph.nodes.is_empty() {
        out.push_str("],");
    } else {
        out.push('\n');
        let nodes: Vec<String> = graph.nodes.iter().map(node_json).collect();
        out.push_str(&nodes.join(",\n"));
        out.push_str("\n],\n");
    }
    out.push_str("\"edges\":[");
    if !graph.edges.is_empty() {
        out.push('\n');
        let edges: Vec<String> = graph.edges.iter().map(edge_json).collect();
        out.push_str(&edges.join(",\n"));
    }
    out.push(']');
    if let Some(ctx) = &graph.story_context {
        out.push_str(",\n\"story_context\":");
        out.push_str(&string_json(ctx));
    }
    push_extras(&mut out, &graph.extra);
    out.push('}');
    out
}

fn node_json(node: &StoryNode) -> String {
    let mut out = format!(
        "{{\"id\":{},\"data\":{{\"label\":{},\"segment\":{}",
        string_json(node.id.as_str()),
        string_json(&node.label),
        string_json(&node.segment)
    );
    push_extras(&mut out, &node.data_extra);
    out.push_str(&format!(
        "}},\"position\":{{\"x\":{},\"y\":{}}}",
        number_json(node.position.x),
        number_json(node.position.y)
    ));
    if !node.assets.is_empty() {
        out.push_str(",\"assets\":");
        out.push_str(&serde_json::to_string(&node.assets).expect("assets serialize"));
    }
    push_extras(&mut out, &node.extra);
    out.push('}');
    out
}

fn edge_json(edge: &StoryEdge) -> String {
    let mut out = format!(
        "{{\"id\":{},\"source\":{},\"target\":{}",
        string_json(&edge.id),
        string_json(edge.source.as_str()),
        string_json(edge.target.as_str())
    );
    push_extras(&mut out, &edge.extra);
    out.push('}');
    out
}

fn push_extras(out: &mut String, extras: &Extras) {
    for (key, value) in extras {
        out.push(',');
        out.push_str(&string_json(key));
        out.push(':');
        out.push_str(&serde_json::to_string(value).expect("json value serializes"));
    }
}

fn string_json(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Integral coordinates print without a fraction, as in hand-written documents.
fn number_json(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        serde_json::to_string(&v).expect("finite numbers serialize")
    }
}
