use std::cmp::Ordering;
use std::collections::HashSet;

use super::{NodeId, StoryGraph};

/// Compares ids so that embedded digit runs order numerically ("2" < "10",
/// "n9" < "n10"). Falls back to plain byte order to stay total.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    let mut left = Runs::new(a);
    let mut right = Runs::new(b);
    loop {
        match (left.next(), right.next()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => {
                let ord = match (is_digits(x), is_digits(y)) {
                    (true, true) => compare_digit_runs(x, y),
                    _ => x.cmp(y),
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

fn is_digits(run: &str) -> bool {
    run.as_bytes().first().is_some_and(u8::is_ascii_digit)
}

fn compare_digit_runs(x: &str, y: &str) -> Ordering {
    let x = x.trim_start_matches('0');
    let y = y.trim_start_matches('0');
    x.len().cmp(&y.len()).then_with(|| x.cmp(y))
}

/// Splits a string into maximal digit / non-digit runs.
struct Runs<'a> {
    rest: &'a str,
}

impl<'a> Runs<'a> {
    fn new(s: &'a str) -> Self {
        Runs { rest: s }
    }
}

impl<'a> Iterator for Runs<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        let first = self.rest.chars().next()?;
        let digit = first.is_ascii_digit();
        let end = self
            .rest
            .char_indices()
            .find(|(_, c)| c.is_ascii_digit() != digit)
            .map_or(self.rest.len(), |(i, _)| i);
        let (run, rest) = self.rest.split_at(end);
        self.rest = rest;
        Some(run)
    }
}

/// Smallest positive integer, as a string, not already used as a node id.
pub fn fresh_id(graph: &StoryGraph) -> NodeId {
    let used: HashSet<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
    next_free(&used, 1).0
}

pub(crate) fn next_free(used: &HashSet<&str>, start: u64) -> (NodeId, u64) {
    let mut candidate = start;
    loop {
        let id = candidate.to_string();
        if !used.contains(id.as_str()) {
            return (NodeId::from(id), candidate);
        }
        candidate += 1;
    }
}

/// Allocates a run of fresh ids without repeating any.
pub(crate) struct IdAllocator {
    used: HashSet<String>,
    cursor: u64,
}

impl IdAllocator {
    pub(crate) fn for_graph(graph: &StoryGraph) -> Self {
        IdAllocator {
            used: graph.nodes.iter().map(|n| n.id.to_string()).collect(),
            cursor: 1,
        }
    }

    pub(crate) fn allocate(&mut self) -> NodeId {
        let borrowed: HashSet<&str> = self.used.iter().map(String::as_str).collect();
        let (id, n) = next_free(&borrowed, self.cursor);
        self.cursor = n + 1;
        self.used.insert(id.to_string());
        id
    }
}
