//! Deterministic stand-in for the remote models.
//!
//! Text rules:
//! - `generate` writes 8 to 12 beats of exactly [`SENTENCES_PER_BEAT`] sentences,
//!   one paragraph per beat. The first beat restates the premise, so any
//!   parallel-structure cue in the prompt survives into the narrative.
//! - `reason` groups sentences into beats and chains them. The first beat
//!   containing a cue (see [`branch_cue`]) forks: the beats between it and
//!   the last two are split into up to three contiguous threads, whose tails
//!   all lead into the second-to-last beat.
//! - `edit` applies a few recognisable instruction patterns ("shorter",
//!   "sound <tone>", "add the fact that ...").
//!
//! Media rules: audio lasts `words / 2.5` seconds, video `max(4, words / 2.5)`,
//! images are 1024x1024. Payloads are small placeholder byte strings.

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    BackendError, BackendErrorKind, BackendRequest, BackendResponse, Capability, GenerativeBackend,
    TaskName,
};

pub const SENTENCES_PER_BEAT: usize = 2;
pub const NARRATION_WORDS_PER_SECOND: f64 = 2.5;
const MIN_BEATS: usize = 8;
const MAX_BEATS: usize = 12;
const MAX_THREADS: usize = 3;
const MIN_VIDEO_SECONDS: f64 = 4.0;
const IMAGE_SIDE: u64 = 1024;

const CUE_WORDS: &[&str] = &["each"];
const CUE_PREFIXES: &[&str] = &[
    "different",
    "separat",
    "parallel",
    "faction",
    "meanwhile",
    "intertwin",
    "converg",
    "diverg",
    "simultaneous",
    "reunit",
    "collid",
    "intersect",
];
const CUE_PHRASES: &[&str] = &[
    "split up",
    "splits up",
    "different paths",
    "all leading to",
    "at the same time",
];

const OPENINGS: &[&str] = &[
    "Everything begins on an ordinary morning.",
    "No one expects what is about to happen.",
    "A quiet world is about to change.",
    "The first sign of trouble arrives without warning.",
    "An old promise sets events in motion.",
];

const MIDDLE: &[(&str, &str)] = &[
    ("The {p} studies the first clue with care.", "It points somewhere no one expected."),
    ("A sudden obstacle blocks the way ahead.", "The {p} has to find another approach."),
    ("An unexpected ally offers help.", "Trust does not come easily to the {p}."),
    ("Night falls and the air grows cold.", "The {p} pushes on despite the fatigue."),
    ("A small victory lifts every spirit.", "For a moment the goal feels close."),
    ("Old doubts return without warning.", "The {p} remembers why the journey began."),
    ("A hidden passage opens under a loose stone.", "Light spills into a forgotten room."),
    ("A warning arrives from a stranger.", "The message is short and troubling."),
    ("The weather turns against the {p}.", "Progress slows to a crawl."),
    ("A careful plan takes shape.", "Every detail is checked twice."),
    ("The first attempt ends in failure.", "The {p} learns from every mistake."),
    ("A rival appears with a competing claim.", "Tension rises with every word."),
    ("A long climb tests the {p}.", "The view from the top reveals the next goal."),
    ("Supplies run dangerously low.", "A hard choice cannot be avoided."),
    ("A friendly face appears at the right moment.", "The {p} accepts the help gratefully."),
    ("The path narrows to a single ledge.", "One careless move would end everything."),
];

const GATHERING: &[(&str, &str)] = &[
    ("The loose ends of the story finally come together.", "The {p} sees the whole picture at last."),
    ("All the threads of the journey lead to one place.", "The {p} arrives ready for the final test."),
];

const ENDINGS: &[(&str, &str)] = &[
    ("The {p} looks back on everything that happened.", "The story closes on a hopeful note."),
    ("Calm returns as the dust settles.", "The {p} has been changed for good."),
    ("A new day dawns over a changed world.", "The {p} finally rests."),
];

const CONTINUATIONS: &[(&str, &str)] = &[
    ("A new chapter opens after the dust settles.", "Fresh questions wait just ahead."),
    ("A forgotten detail comes back to matter.", "The journey resumes once more."),
    ("A letter arrives with unexpected news.", "It is read twice before anyone decides."),
    ("Some time passes in peace.", "Then a new challenge appears on the horizon."),
];

/// Words that end the protagonist phrase of a premise.
const PHRASE_STOPS: &[&str] = &[
    "must", "is", "are", "has", "was", "who", "where", "with", "and", "in", "on", "at", "during",
];

/// Offline generative backend. Same seed and prompt give the same output.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    seed: u64,
    latency: Duration,
}

impl ScriptedBackend {
    pub fn new(seed: u64) -> Self {
        ScriptedBackend {
            seed,
            latency: Duration::ZERO,
        }
    }

    /// Sleeps this long on every call, for exercising concurrency.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn rng_for(&self, key: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(key.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_le_bytes(head))
    }

    fn generate(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let premise = input(request, "prompt");
        if premise.trim().is_empty() {
            return Err(invalid("empty prompt"));
        }
        let mut rng = self.rng_for(premise);
        let who = protagonist(premise);
        let beats = if request.get("mode") == Some("extend") {
            let mut pool: Vec<_> = CONTINUATIONS.to_vec();
            pool.shuffle(&mut rng);
            pool.iter().take(2).map(|pair| beat(pair, "")).collect()
        } else {
            story_beats(&mut rng, premise, &who)
        };
        Ok(BackendResponse::text(beats.join("\n\n")))
    }

    fn edit(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let instruction = request.get("instruction").unwrap_or_default();
        let label = clean_field(request.get("label").unwrap_or_default());
        let segment = clean_field(request.get("segment").unwrap_or_default());
        Ok(BackendResponse::text(format!(
            "{label}\t{}",
            apply_instruction(&segment, instruction)
        )))
    }

    fn media(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let text = request.get("text").unwrap_or(&request.prompt);
        let words = word_count(text);
        if words == 0 {
            return Err(invalid("empty media prompt"));
        }
        let narration = words as f64 / NARRATION_WORDS_PER_SECOND;
        let digest = Sha256::digest(format!("{}|{}|{text}", self.seed, request.task).as_bytes());
        let tag: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        let body = |kind: &str| format!("placeholder {kind} {tag}\n").into_bytes();
        let response = match request.task {
            TaskName::Audio => BackendResponse::bytes(body("audio"))
                .with("duration_s", narration)
                .with("extension", "mp3")
                .with("mime", "audio/mpeg"),
            TaskName::Image => BackendResponse::bytes(body("image"))
                .with("width", IMAGE_SIDE)
                .with("height", IMAGE_SIDE)
                .with("extension", "png")
                .with("mime", "image/png"),
            _ => BackendResponse::bytes(body("video"))
                .with("duration_s", narration.max(MIN_VIDEO_SECONDS))
                .with("extension", "mp4")
                .with("mime", "video/mp4"),
        };
        Ok(response)
    }
}

impl GenerativeBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn capabilities(&self) -> &[Capability] {
        &[
            Capability::Text,
            Capability::Audio,
            Capability::Image,
            Capability::Video,
        ]
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        match request.task {
            TaskName::Generate => self.generate(request),
            TaskName::Reason => {
                let narrative = input(request, "narrative");
                if narrative.trim().is_empty() {
                    return Err(invalid("empty narrative"));
                }
                Ok(BackendResponse::text(decompose(narrative)))
            }
            TaskName::DiagramCheck => Ok(BackendResponse::text("ok")),
            TaskName::Edit => self.edit(request),
            TaskName::Route => {
                let kind = crate::orchestrator::route_from_params(&request.params)
                    .map_err(|e| BackendError::new(BackendErrorKind::Failed, e.to_string()))?;
                Ok(BackendResponse::text(kind.as_str()))
            }
            TaskName::Audio | TaskName::Image | TaskName::Video => self.media(request),
        }
    }
}

fn input<'a>(request: &'a BackendRequest, key: &str) -> &'a str {
    request.get(key).unwrap_or(&request.prompt)
}

fn invalid(message: &str) -> BackendError {
    BackendError::new(BackendErrorKind::Failed, message)
}

fn beat(pair: &(&str, &str), who: &str) -> String {
    format!("{} {}", pair.0, pair.1).replace("{p}", who)
}

fn story_beats(rng: &mut ChaCha8Rng, premise: &str, who: &str) -> Vec<String> {
    let count = rng.random_range(MIN_BEATS..=MAX_BEATS);
    let opening = OPENINGS[rng.random_range(0..OPENINGS.len())];
    let mut beats = vec![format!(
        "{opening} It is the story of how {}.",
        premise_clause(premise)
    )];
    let mut middle: Vec<_> = MIDDLE.to_vec();
    middle.shuffle(rng);
    beats.extend(middle.iter().take(count - 3).map(|pair| beat(pair, who)));
    beats.push(beat(&GATHERING[rng.random_range(0..GATHERING.len())], who));
    beats.push(beat(&ENDINGS[rng.random_range(0..ENDINGS.len())], who));
    beats
}

/// The premise as one clause: no inner sentence breaks, no trailing stop,
/// leading article lower-cased.
fn premise_clause(premise: &str) -> String {
    let flat = premise.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = flat.trim_end_matches(['.', '!', '?', ' ']);
    let neutral: String = trimmed
        .chars()
        .map(|c| if matches!(c, '.' | '!' | '?') { ',' } else { c })
        .collect();
    let mut words = neutral.splitn(2, ' ');
    match (words.next(), words.next()) {
        (Some(first @ ("A" | "An" | "The")), Some(rest)) => {
            format!("{} {rest}", first.to_lowercase())
        }
        _ => neutral,
    }
}

/// Best-effort subject phrase of a premise, lower-case, without article.
pub fn protagonist(premise: &str) -> String {
    let words: Vec<String> = premise
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect();
    let start = match words.first().map(String::as_str) {
        Some("a" | "an" | "the") => 1,
        _ => 0,
    };
    let mut phrase: Vec<&str> = Vec::new();
    for (i, word) in words.iter().enumerate().skip(start).take(3) {
        let after_of = i > 0 && words[i - 1] == "of";
        let verb_like = !phrase.is_empty()
            && !after_of
            && (word.ends_with('s') || word.ends_with("ed") || PHRASE_STOPS.contains(&word.as_str()));
        if verb_like {
            break;
        }
        phrase.push(word);
    }
    while phrase.last() == Some(&"of") {
        phrase.pop();
    }
    if phrase.is_empty() {
        "hero".to_owned()
    } else {
        phrase.join(" ")
    }
}

/// Lower-case alphanumeric tokens.
fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whether the text signals parallel storylines.
pub fn branch_cue(text: &str) -> bool {
    let toks = tokens(text);
    if toks
        .iter()
        .any(|t| CUE_WORDS.contains(&t.as_str()) || CUE_PREFIXES.iter().any(|p| t.starts_with(p)))
    {
        return true;
    }
    let joined = format!(" {} ", toks.join(" "));
    CUE_PHRASES
        .iter()
        .any(|phrase| joined.contains(&format!(" {phrase} ")))
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Splits on `.`, `!` or `?` followed by whitespace or the end of text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let at_break = matches!(c, '.' | '!' | '?')
            && chars.peek().is_none_or(|next| next.is_whitespace());
        if at_break {
            let sentence = current.split_whitespace().collect::<Vec<_>>().join(" ");
            if !sentence.is_empty() {
                out.push(sentence);
            }
            current.clear();
        }
    }
    let tail = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn title_case(sentence: &str) -> String {
    sentence
        .trim_end_matches(['.', '!', '?'])
        .split_whitespace()
        .take(6)
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

fn clean_field(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decomposes a narrative into the tab-separated draft list.
fn decompose(narrative: &str) -> String {
    let sentences = split_sentences(narrative);
    let beats: Vec<&[String]> = sentences.chunks(SENTENCES_PER_BEAT).collect();
    let n = beats.len();
    let mut successors: Vec<Vec<usize>> = (0..n)
        .map(|i| if i + 1 < n { vec![i + 1] } else { Vec::new() })
        .collect();

    let fork = beats.iter().position(|b| branch_cue(&b.join(" ")));
    if let Some(b) = fork {
        // Beats strictly between the fork and the last two.
        let first = b + 1;
        let end = n.saturating_sub(2);
        let len = end.saturating_sub(first);
        if len >= 2 {
            let threads = len.min(MAX_THREADS);
            let mut tails = Vec::new();
            let mut heads = Vec::new();
            let mut at = first;
            for t in 0..threads {
                let size = len / threads + usize::from(t < len % threads);
                heads.push(at);
                for i in at..at + size - 1 {
                    successors[i] = vec![i + 1];
                }
                tails.push(at + size - 1);
                at += size;
            }
            successors[b] = heads;
            for tail in tails {
                successors[tail] = vec![end];
            }
        }
    }

    beats
        .iter()
        .enumerate()
        .map(|(i, beat)| {
            let succ: Vec<String> = successors[i].iter().map(|s| (s + 1).to_string()).collect();
            format!(
                "{}\t{}\t{}\t{}\n",
                i + 1,
                title_case(&beat[0]),
                beat.join(" "),
                succ.join(",")
            )
        })
        .collect()
}

fn apply_instruction(segment: &str, instruction: &str) -> String {
    let lower = instruction.to_lowercase();
    let words = tokens(&lower);
    let mut sentences = split_sentences(segment);
    let mut changed = false;

    if words.iter().any(|w| w == "shorter" || w == "shorten" || w == "condense") {
        sentences.truncate(1);
        changed = true;
    }
    if let Some(pos) = words.iter().position(|w| w == "sound") {
        if let Some(tone) = words.get(pos + 1) {
            let tone = if tone == "more" || tone == "less" {
                words.get(pos + 2).map(|t| format!("{tone} {t}"))
            } else {
                Some(tone.clone())
            };
            if let Some(tone) = tone {
                sentences.push(format!("It all felt {tone}."));
                changed = true;
            }
        }
    }
    if let Some(at) = lower.find("add the fact that ") {
        let fact = clean_field(&instruction[at + "add the fact that ".len()..]);
        let fact = fact.trim_end_matches(['.', '!', '?']);
        if !fact.is_empty() {
            let mut chars = fact.chars();
            let first: String = chars.next().into_iter().flat_map(char::to_uppercase).collect();
            sentences.push(format!("{first}{}.", chars.as_str()));
            changed = true;
        }
    }
    if !changed {
        sentences.push("The moment is told again with fresh detail.".to_owned());
    }
    clean_field(&sentences.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generate(seed: u64, prompt: &str) -> String {
        ScriptedBackend::new(seed)
            .complete(&BackendRequest::new(TaskName::Generate, prompt).param("prompt", prompt))
            .unwrap()
            .into_text()
            .unwrap()
    }

    fn reason(narrative: &str) -> Vec<Vec<String>> {
        let text = ScriptedBackend::new(0)
            .complete(&BackendRequest::new(TaskName::Reason, narrative))
            .unwrap()
            .into_text()
            .unwrap();
        text.lines()
            .map(|l| l.split('\t').map(str::to_owned).collect())
            .collect()
    }

    const DOG: &str = "A child sets out to find their lost dog and faces a series of challenges along the way.";
    const MANSION: &str = "A group of friends enters a haunted mansion, each taking a different hallway that leads to strange encounters before they reunite.";

    #[test]
    fn narrative_has_eight_to_twelve_two_sentence_beats() {
        for seed in 0..20 {
            let text = generate(seed, DOG);
            let sentences = split_sentences(&text);
            assert_eq!(sentences.len() % SENTENCES_PER_BEAT, 0);
            let beats = sentences.len() / SENTENCES_PER_BEAT;
            assert!((8..=12).contains(&beats), "{beats} beats");
            assert_eq!(text.split("\n\n").count(), beats);
        }
        assert_eq!(generate(3, DOG), generate(3, DOG));
    }

    #[test]
    fn templates_carry_no_cues() {
        let all = MIDDLE
            .iter()
            .chain(GATHERING)
            .chain(ENDINGS)
            .chain(CONTINUATIONS)
            .flat_map(|(a, b)| [*a, *b])
            .chain(OPENINGS.iter().copied());
        for sentence in all {
            assert!(!branch_cue(sentence), "{sentence}");
            assert_eq!(split_sentences(sentence).len(), 1, "{sentence}");
        }
    }

    #[test]
    fn cue_detection_uses_whole_tokens() {
        assert!(branch_cue("each taking a different hallway"));
        assert!(branch_cue("The team splits up in the caves"));
        assert!(!branch_cue("A teacher prepares students"));
        assert!(!branch_cue("they reach the summit"));
    }

    #[test]
    fn linear_narrative_decomposes_into_a_chain() {
        let drafts = reason(&generate(1, DOG));
        let n = drafts.len();
        for (i, d) in drafts.iter().enumerate() {
            assert_eq!(d[0], (i + 1).to_string());
            let expected = if i + 1 < n { (i + 2).to_string() } else { String::new() };
            assert_eq!(d[3], expected);
        }
    }

    #[test]
    fn cue_beat_forks_into_three_threads() {
        let drafts = reason(&generate(1, MANSION));
        assert_eq!(drafts[0][3].split(',').count(), 3);
        let n = drafts.len();
        let into_gathering = drafts
            .iter()
            .filter(|d| d[3] == (n - 1).to_string())
            .count();
        assert_eq!(into_gathering, 3);
    }

    #[test]
    fn nine_beat_chain_example() {
        let narrative: String = (1..=9)
            .map(|i| format!("Beat {i} starts. Beat {i} ends.\n\n"))
            .collect();
        let drafts = reason(&narrative);
        assert_eq!(drafts.len(), 9);
        assert_eq!(drafts[8][3], "");
        assert_eq!(drafts[0][1], "Beat 1 Starts");
    }

    #[test]
    fn protagonist_phrases() {
        assert_eq!(protagonist(DOG), "child");
        assert_eq!(protagonist(MANSION), "group of friends");
        assert_eq!(protagonist("A young inventor builds a flying machine."), "young inventor");
        assert_eq!(protagonist(""), "hero");
    }

    #[test]
    fn premise_loses_inner_sentence_breaks() {
        assert_eq!(
            premise_clause("A spy lands. Then what?\tNobody knows!"),
            "a spy lands, Then what, Nobody knows"
        );
    }

    #[test]
    fn edit_instructions() {
        let seg = "The door creaks open. Dust fills the air.";
        assert_eq!(apply_instruction(seg, "make these parts shorter"), "The door creaks open.");
        assert_eq!(
            apply_instruction(seg, "make this sound mysterious"),
            "The door creaks open. Dust fills the air. It all felt mysterious."
        );
        assert_eq!(
            apply_instruction(seg, "shorter and sound adventurous"),
            "The door creaks open. It all felt adventurous."
        );
        assert_eq!(
            apply_instruction(seg, "add the fact that the house is empty"),
            "The door creaks open. Dust fills the air. The house is empty."
        );
    }

    #[test]
    fn audio_duration_follows_narration_rate() {
        let text = vec!["word"; 20].join(" ");
        let r = ScriptedBackend::new(0)
            .complete(&BackendRequest::new(TaskName::Audio, "").param("text", text.as_str()))
            .unwrap();
        assert_eq!(r.metadata_f64("duration_s"), Some(8.0));
        let v = ScriptedBackend::new(0)
            .complete(&BackendRequest::new(TaskName::Video, "").param("text", "two words"))
            .unwrap();
        assert_eq!(v.metadata_f64("duration_s"), Some(4.0));
    }
}
