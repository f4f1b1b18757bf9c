//! Prompt texts for model-backed backends. The scripted backend reads the
//! structured params instead and ignores these.

use super::TaskRequest;

/// Grammar the reasoner must answer in.
pub const DRAFT_GRAMMAR: &str = "\
One line per node, fields separated by a single TAB:
ordinal<TAB>label<TAB>segment<TAB>successors
- ordinal: 1, 2, 3, ... in order, no gaps
- label: a short title
- segment: the narrative text of the node, on one line
- successors: comma-separated ordinals of the nodes that follow, or empty
No other text.";

pub fn generate(premise: &str) -> String {
    format!(
        "Write a short story of 8 to 12 events based on the request below. \
         Write one paragraph per event, two sentences each.\n\nRequest: {premise}"
    )
}

pub fn extend(instruction: &str, anchor_segment: &str) -> String {
    format!(
        "Continue the story after the scene below with two more events, one \
         paragraph of two sentences each.\n\nScene: {anchor_segment}\n\nRequest: {instruction}"
    )
}

pub fn reason(narrative: &str) -> String {
    format!(
        "Split the story into nodes and link them in narrative order. Parallel \
         storylines become separate branches that rejoin where the story does.\n\n\
         {DRAFT_GRAMMAR}\n\nStory:\n{narrative}"
    )
}

pub fn repair(narrative: &str, previous: &str, error: &str) -> String {
    format!(
        "Your previous answer could not be parsed ({error}). Answer again using \
         exactly this format.\n\n{DRAFT_GRAMMAR}\n\nPrevious answer:\n{previous}\n\nStory:\n{narrative}"
    )
}

pub fn diagram_check(document: &str) -> String {
    format!(
        "Check this story graph document. Reply with the single word ok if every \
         node has an id, label, segment and position and every edge references \
         existing nodes; otherwise describe the problem.\n\n{document}"
    )
}

pub fn edit(instruction: &str, label: &str, segment: &str, context: &str) -> String {
    format!(
        "Rewrite one story node following the instruction. Keep its role in the \
         story. Reply with the new label, a TAB, and the new segment on one line.\n\n\
         Instruction: {instruction}\nLabel: {label}\nSegment: {segment}\n\
         Neighbouring scenes:\n{context}"
    )
}

pub fn route(request: &TaskRequest) -> String {
    let selection = if request.selection.is_empty() {
        "none".to_owned()
    } else {
        request
            .selection
            .iter()
            .map(|id| id.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "Choose the task for this request. Reply with one word: Generate, Edit, \
         MediaGen, Export or Extend.\n\nRequest: {}\nSelected nodes: {selection}\n\
         Story exists: {}",
        request.utterance, request.graph_present
    )
}
