//! Prompt corpora: the shipped branching and linear sets, plus a tab
//! separated file format (`class<TAB>prompt` per line).

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::TopologyClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub expected: TopologyClass,
    pub prompt: String,
    /// Outcome published alongside the prompt, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub entries: Vec<CorpusEntry>,
}

/// Instruction used to produce the branching prompt set with a live model.
pub const BRANCHING_META_PROMPT: &str = "Generate 10 user prompts for a short story that can be represented as a branching narrative with parallel events. There should be around 8-12 events. The prompt should be around 1 to 3 sentences long. Return only the prompts, nothing else.";

/// Instruction used to produce the linear prompt set with a live model.
pub const LINEAR_META_PROMPT: &str = "Generate 10 user prompts for a short story that can be represented as a linear sequence of events. There should be around 8-12 events in total. The prompt should be around 1 to 3 sentences long. Return only the prompts, nothing else.";

const BRANCHING: [(&str, bool); 10] = [
    ("A group of friends enters a haunted mansion, each taking a different hallway that leads to strange encounters before they reunite.", true),
    ("A colony ship lands on an alien world, where different crew members explore separate regions that reveal conflicting discoveries.", true),
    ("A royal court faces a crisis: the king seeks peace, the queen demands war, and advisors pursue secret plots that intertwine.", true),
    ("A city is struck by a mysterious blackout, forcing residents across different neighborhoods to make choices that eventually converge.", true),
    ("A team of treasure hunters splits up inside a vast cave system, each path filled with traps and clues pointing to the same artifact.", true),
    ("A rebellion begins in a futuristic city, where different factions take divergent actions that may ultimately decide the same fate.", true),
    ("A group of scientists investigates a spreading anomaly, with each researcher following a separate theory until their findings intersect.", true),
    ("A traveling circus arrives in a new town, and performers\u{2019} separate adventures\u{2014}on stage, in the streets, and in secret\u{2014}eventually collide.", true),
    ("A family separated during a natural disaster each struggles to survive in different locations, working toward reunion.", true),
    ("A medieval village faces an approaching army, with villagers choosing to fortify defenses, hide in the forest, or negotiate, all leading to a shared resolution.", true),
];

const LINEAR: [(&str, bool); 10] = [
    ("A child sets out to find their lost dog and faces a series of challenges along the way.", true),
    ("An archaeologist explores an ancient tomb, uncovering traps, puzzles, and a final treasure.", true),
    ("A knight embarks on a quest to rescue a captured friend, passing through forests, mountains, and dungeons.", true),
    ("A group of astronauts lands on Mars and follows a series of steps to establish the first colony.", false),
    ("A chef attempts to prepare a complex dish, encountering difficulties but completing it step by step.", true),
    ("A musician travels from town to town, slowly building recognition until reaching a grand concert.", true),
    ("A fisherman battles a storm at sea, struggling with wind, waves, and exhaustion before making it back to shore.", true),
    ("A teacher prepares their students for an important exam, overcoming obstacles in study sessions until the final test.", false),
    ("A young inventor builds a flying machine, refining it through a series of trials until it finally succeeds.", true),
    ("A messenger must deliver an important letter across dangerous terrain, encountering challenges one after another until the mission is complete.", true),
];

pub const BUILTIN_CORPORA: [&str; 2] = ["branching", "linear"];

fn build(name: &str, class: TopologyClass, rows: &[(&str, bool)]) -> Corpus {
    Corpus {
        name: name.to_owned(),
        entries: rows
            .iter()
            .map(|(prompt, pass)| CorpusEntry {
                expected: class,
                prompt: (*prompt).to_owned(),
                reported_pass: Some(*pass),
            })
            .collect(),
    }
}

pub fn builtin_corpus(name: &str) -> Result<Corpus, EvalError> {
    match name {
        "branching" => Ok(build(name, TopologyClass::Branching, &BRANCHING)),
        "linear" => Ok(build(name, TopologyClass::Linear, &LINEAR)),
        other => Err(EvalError::UnknownCorpus(other.to_owned())),
    }
}

pub fn builtin_corpora() -> Vec<Corpus> {
    BUILTIN_CORPORA
        .iter()
        .map(|n| builtin_corpus(n).expect("builtin"))
        .collect()
}

/// Parses `class<TAB>prompt` lines. Blank lines and `#` comments are skipped.
pub fn parse_corpus(name: &str, text: &str) -> Result<Corpus, EvalError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |message: &str| EvalError::CorpusFormat {
            line: i + 1,
            message: message.to_owned(),
        };
        let (class, prompt) = line.split_once('\t').ok_or_else(|| bad("expected class<TAB>prompt"))?;
        let expected: TopologyClass = class.trim().parse().map_err(|_| bad("unknown class"))?;
        let prompt = prompt.trim();
        if prompt.is_empty() {
            return Err(bad("empty prompt"));
        }
        entries.push(CorpusEntry {
            expected,
            prompt: prompt.to_owned(),
            reported_pass: None,
        });
    }
    Ok(Corpus {
        name: name.to_owned(),
        entries,
    })
}

pub fn render_corpus(corpus: &Corpus) -> String {
    corpus
        .entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.expected, e.prompt))
        .collect()
}
