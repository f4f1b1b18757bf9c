use serde::Serialize;

use crate::graph::{GraphError, StoryGraph};

pub const DEFAULT_CONTEXT_BUDGET: usize = 4000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RollingContext {
    pub text: String,
    pub char_budget: usize,
}

/// Ancestor segments of `node` in topological order, separated by blank
/// lines. When over budget the oldest text is dropped first.
pub fn rolling_context(
    graph: &StoryGraph,
    node: &str,
    char_budget: usize,
) -> Result<RollingContext, GraphError> {
    let ancestors = graph.ancestors(node)?;
    let text = if ancestors.is_empty() {
        String::new()
    } else {
        let order = graph.topological_order(Some(&ancestors.into_iter().collect::<Vec<_>>()))?;
        order
            .iter()
            .map(|id| graph.require(id.as_str()).map(|n| n.segment.as_str()))
            .collect::<Result<Vec<_>, _>>()?
            .join("\n\n")
    };
    let len = text.chars().count();
    let text = if len > char_budget {
        text.chars().skip(len - char_budget).collect()
    } else {
        text
    };
    Ok(RollingContext { text, char_budget })
}
