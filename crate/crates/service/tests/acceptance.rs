//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any failed. Oracles here are written against the
//! formats and definitions, not against the library's own helpers.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use nodestory::backend::FaultyBackend;
use nodestory::evaluation::{builtin_corpus, clopper_pearson, DEFAULT_ALPHA};
use nodestory::export::{build_manifest, render_srt};
use nodestory::media::{attach_asset, enqueue_media, process_jobs, MemorySink};
use nodestory::orchestrator::edit_nodes;
use nodestory::{
    parse_graph, serialize_graph, GenerativeBackend, JobEvent, JobStatus, MediaKind, MediaParams, NewNode, NodeId,
    Position, ScriptedBackend, StoryEdge, StoryGraph, StoryNode, TextUpdate, TopologyClass,
};
use nodestory_service::eval::{evaluate, EvalRequest};
use nodestory_service::{api, FaultHook, Project, Service};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use statrs::distribution::{Binomial, DiscreteCDF};

const LUMINA: &str = include_str!("../../core/tests/fixtures/lumina.json");

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn random_text(rng: &mut StdRng) -> String {
    const POOL: &[&str] = &["", "plain words here.", "quote \" and \\ slash", "tab\tnew\nline", "ünïcödé ✓ 物語", "{\"json\": [1]}"];
    let mut s = POOL[rng.random_range(0..POOL.len())].to_owned();
    for _ in 0..rng.random_range(0..4) {
        s.push(char::from_u32(rng.random_range(0x20..0x3000)).unwrap_or('x'));
    }
    s
}

/// A valid graph: ids are a shuffled 1..=n, edges only go forward in that
/// shuffled order, so it is acyclic.
fn random_graph(rng: &mut StdRng, max_nodes: usize, nonempty_text: bool) -> StoryGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut ids: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let mut g = StoryGraph::new();
    for &id in &ids {
        let mut segment = random_text(rng);
        if nonempty_text && segment.trim().is_empty() {
            segment = "Something happens.".into();
        }
        let pos = Position::new(rng.random_range(-1e5..1e5), f64::from(rng.random_range(0..20u8)) * 50.0);
        g.nodes.push(StoryNode::new(id.to_string(), random_text(rng), segment, pos));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.3) {
                g.edges.push(StoryEdge::between(ids[i].to_string(), ids[j].to_string()));
            }
        }
    }
    if rng.random_bool(0.3) {
        g.story_context = Some(random_text(rng));
    }
    for &id in &ids {
        for _ in 0..rng.random_range(0..3) {
            attach_asset(&mut g, &NodeId::from(id.to_string()), MediaParams::audio("scripted"), "mp3", Some(1.5)).unwrap();
        }
    }
    g
}

fn schema_fidelity() -> Result<String, String> {
    let started = Instant::now();
    let g = parse_graph(LUMINA).map_err(|e| e.to_string())?;
    ensure(g.nodes.len() == 7 && g.edges.len() == 8, || format!("{} nodes, {} edges", g.nodes.len(), g.edges.len()))?;
    let report = g.validate();
    ensure(report.violations.is_empty(), || format!("{:?}", report.violations))?;
    let original: Value = serde_json::from_str(LUMINA).unwrap();
    let again: Value = serde_json::from_str(&serialize_graph(&g)).unwrap();
    ensure(original == again, || "serialized listing differs".into())?;

    let mut rng = StdRng::seed_from_u64(0x5eed);
    for i in 0..1000 {
        let g = random_graph(&mut rng, 15, false);
        let text = serialize_graph(&g);
        let back = parse_graph(&text).map_err(|e| format!("case {i}: {e}"))?;
        ensure(back == g, || format!("case {i}: graph changed"))?;
        ensure(serialize_graph(&back) == text, || format!("case {i}: text changed"))?;
    }
    let took = within(Duration::from_secs(5), started)?;
    Ok(format!("7 nodes, 8 edges, 1000 round trips in {took:.2?}"))
}

/// Successor bitmasks for one of the 3^(n choose 2) pair states, or None
/// when it has a cycle.
fn decode_dag(n: usize, mut state: u64) -> Option<Vec<u8>> {
    let mut succ = vec![0u8; n];
    for i in 0..n {
        for j in i + 1..n {
            match state % 3 {
                1 => succ[i] |= 1 << j,
                2 => succ[j] |= 1 << i,
                _ => {}
            }
            state /= 3;
        }
    }
    let mut left: u32 = (1 << n) - 1;
    while left != 0 {
        let reached = (0..n).filter(|&u| left >> u & 1 == 1).fold(0u32, |acc, u| acc | u32::from(succ[u]));
        let sources = left & !reached;
        if sources == 0 {
            return None;
        }
        left &= !sources;
    }
    Some(succ)
}

fn brute_class(succ: &[u8]) -> TopologyClass {
    let n = succ.len();
    let edges: usize = succ.iter().map(|s| s.count_ones() as usize).sum();
    let indeg = |v: usize| succ.iter().filter(|s| *s >> v & 1 == 1).count();
    let degrees_ok = succ.iter().all(|s| s.count_ones() <= 1) && (0..n).all(|v| indeg(v) <= 1);
    // With in/out degree at most one and n-1 edges, one root means one chain.
    let roots = (0..n).filter(|&v| indeg(v) == 0).count();
    if degrees_ok && edges + 1 == n && roots == 1 {
        TopologyClass::Linear
    } else {
        TopologyClass::Branching
    }
}

fn brute_paths(succ: &[u8]) -> Vec<Vec<u8>> {
    let n = succ.len();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<u8>> = (0..n)
        .filter(|&v| succ.iter().all(|s| s >> v & 1 == 0))
        .map(|v| vec![v as u8])
        .collect();
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap() as usize;
        if succ[last] == 0 {
            out.push(path.iter().map(|v| v + 1).collect());
        }
        for v in 0..n {
            if succ[last] >> v & 1 == 1 {
                let mut next = path.clone();
                next.push(v as u8);
                stack.push(next);
            }
        }
    }
    out.sort();
    out
}

fn topology_oracle() -> Result<String, String> {
    let started = Instant::now();
    let mut checked = 0u64;
    for n in 1..=6usize {
        let mut g = StoryGraph::new();
        for v in 0..n {
            // Scrambled positions so ties are broken by more than the id.
            let pos = Position::new(((v * 5) % 3) as f64 * 100.0, ((v * 2) % 5) as f64 * 100.0);
            g.nodes.push(StoryNode::new((v + 1).to_string(), "", "", pos));
        }
        let all: Vec<Vec<StoryEdge>> = (0..n)
            .map(|u| (0..n).map(|v| StoryEdge::between((u + 1).to_string(), (v + 1).to_string())).collect())
            .collect();
        let pair_count = (n * (n - 1) / 2) as u32;
        for state in 0..3u64.pow(pair_count) {
            let Some(succ) = decode_dag(n, state) else { continue };
            g.edges.clear();
            for u in 0..n {
                for v in 0..n {
                    if succ[u] >> v & 1 == 1 {
                        g.edges.push(all[u][v].clone());
                    }
                }
            }
            let class = g.classify_topology().map_err(|e| e.to_string())?;
            ensure(class == brute_class(&succ), || format!("n={n} state={state}: class {class:?}"))?;
            let mut paths: Vec<Vec<u8>> = g
                .enumerate_paths()
                .map_err(|e| e.to_string())?
                .iter()
                .map(|p| p.iter().map(|id| id.as_str().parse().unwrap()).collect())
                .collect();
            paths.sort();
            ensure(paths == brute_paths(&succ), || format!("n={n} state={state}: paths {paths:?}"))?;
            checked += 1;
        }
    }
    ensure(checked == 3_811_356, || format!("checked {checked} DAGs"))?;
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!("{checked} DAGs agree in {took:.2?}"))
}

fn ci_reproduction() -> Result<String, String> {
    let round = |x: f64| (x * 100.0).round() / 100.0;
    let (lo, hi) = clopper_pearson(8, 10, 0.05).map_err(|e| e.to_string())?;
    ensure((round(lo), round(hi)) == (0.44, 0.97), || format!("8/10 gave ({lo}, {hi})"))?;
    let (lo, hi) = clopper_pearson(10, 10, 0.05).map_err(|e| e.to_string())?;
    ensure((round(lo), round(hi)) == (0.69, 1.0), || format!("10/10 gave ({lo}, {hi})"))?;

    let half = DEFAULT_ALPHA / 2.0;
    let mut checks = 0;
    for n in 1..=12u64 {
        for k in 0..=n {
            let (lo, hi) = clopper_pearson(k, n, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
            if k == 0 {
                ensure(lo == 0.0, || format!("k=0 n={n}: lower {lo}"))?;
            } else {
                // P(X >= k | lo) = alpha/2
                let tail = Binomial::new(lo, n).unwrap().sf(k - 1);
                ensure((tail - half).abs() < 1e-6, || format!("k={k} n={n}: upper tail {tail}"))?;
                checks += 1;
            }
            if k == n {
                ensure(hi == 1.0, || format!("k=n={n}: upper {hi}"))?;
            } else {
                // P(X <= k | hi) = alpha/2
                let tail = Binomial::new(hi, n).unwrap().cdf(k);
                ensure((tail - half).abs() < 1e-6, || format!("k={k} n={n}: lower tail {tail}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("(0.44, 0.97) and (0.69, 1.00); {checks} tail equalities within 1e-6"))
}

fn experiment_analogue() -> Result<String, String> {
    let started = Instant::now();
    let out = evaluate(&EvalRequest::default(), &ScriptedBackend::new(7)).map_err(|e| e.to_string())?;
    let row = |class| out.rows.iter().find(|r| r.expected == class).ok_or(format!("no {class} row"));
    let branching = row(TopologyClass::Branching)?;
    ensure(branching.summary.k == 10 && branching.summary.n == 10, || format!("branching {}/{}", branching.summary.k, branching.summary.n))?;
    let linear = row(TopologyClass::Linear)?;
    ensure(linear.summary.k >= 8 && linear.summary.n == 10, || format!("linear {}/{}", linear.summary.k, linear.summary.n))?;
    for t in linear.trials.iter().chain(&branching.trials).filter(|t| t.pass) {
        ensure((8..=12).contains(&t.node_count), || format!("passing trial with {} nodes", t.node_count))?;
    }
    ensure(
        builtin_corpus("branching").unwrap().entries.len() == 10 && builtin_corpus("linear").unwrap().entries.len() == 10,
        || "corpus sizes".into(),
    )?;
    let lines: Vec<&str> = out.report.lines().collect();
    ensure(lines.first() == Some(&"| Narrative Type | Correct / Total | Success Rate | 95% CI |"), || out.report.clone())?;
    for line in &lines[2..] {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        ensure(cells.len() == 4, || format!("row {line:?}"))?;
        ensure(cells[1].contains(" / ") && cells[2].ends_with('%') && cells[3].starts_with('['), || format!("row {line:?}"))?;
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!("Branching {}/10, Linear {}/10 in {took:.2?}", branching.summary.k, linear.summary.k))
}

fn node_json(text: &str) -> BTreeMap<String, String> {
    let doc: Value = serde_json::from_str(text).unwrap();
    doc["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| (n["id"].as_str().unwrap().to_owned(), serde_json::to_string(n).unwrap()))
        .collect()
}

fn edges_json(text: &str) -> String {
    let doc: Value = serde_json::from_str(text).unwrap();
    serde_json::to_string(&doc["edges"]).unwrap()
}

fn editor_preservation() -> Result<String, String> {
    const INSTRUCTIONS: [&str; 5] = [
        "make this sound mysterious",
        "make these parts shorter",
        "add the fact that the keeper is watching",
        "sound less gloomy",
        "rewrite with more sensory detail",
    ];
    let mut rng = StdRng::seed_from_u64(200);
    for case in 0..200 {
        let g = random_graph(&mut rng, 12, true);
        let ids = g.node_ids();
        let mut selection: Vec<NodeId> = ids.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
        if selection.is_empty() {
            selection.push(ids[rng.random_range(0..ids.len())].clone());
        }
        let instruction = INSTRUCTIONS[rng.random_range(0..INSTRUCTIONS.len())];
        let backend = ScriptedBackend::new(rng.random());
        let edited = edit_nodes(&g, &selection, instruction, &backend).map_err(|e| format!("case {case}: {e}"))?;
        let (before, after) = (serialize_graph(&g), serialize_graph(&edited));
        ensure(edges_json(&before) == edges_json(&after), || format!("case {case}: edges changed"))?;
        let (a, b) = (node_json(&before), node_json(&after));
        ensure(a.keys().eq(b.keys()), || format!("case {case}: node set changed"))?;
        for (id, obj) in &a {
            if !selection.iter().any(|s| s.as_str() == id) {
                ensure(b[id] == *obj, || format!("case {case}: unselected node {id} changed"))?;
            }
        }
    }

    // A failure part way through leaves the graph alone, in memory and on disk.
    let g = parse_graph(LUMINA).unwrap();
    let selection: Vec<NodeId> = ["2", "3", "4", "5"].into_iter().map(NodeId::from).collect();
    let before = serialize_graph(&g);
    let failing = FaultyBackend::failing_call(ScriptedBackend::new(1), 2);
    ensure(edit_nodes(&g, &selection, "make this sound mysterious", &failing).is_err(), || "edit succeeded".into())?;
    ensure(failing.calls() == 3 && serialize_graph(&g) == before, || "graph touched".into())?;

    let tmp = tempfile::tempdir().unwrap();
    let backend: Arc<dyn GenerativeBackend> = Arc::new(FaultyBackend::failing_call(ScriptedBackend::new(1), 2));
    let project = Project::create(tmp.path(), "p", "demo", &g, backend, 1, None).map_err(|e| e.to_string())?;
    ensure(project.edit(&selection, "make this sound mysterious", None).is_err(), || "project edit succeeded".into())?;
    let (now, version) = project.graph();
    ensure(version == 1 && serialize_graph(&now) == before, || "project graph touched".into())?;
    let on_disk = std::fs::read_to_string(tmp.path().join("graph.json")).unwrap();
    ensure(on_disk == before, || "graph.json touched".into())?;
    Ok("200 triples preserved; failed edit left graph unchanged".into())
}

fn srt_millis(stamp: &str) -> Result<u64, String> {
    let bytes = stamp.as_bytes();
    let shape_ok = bytes.len() == 12
        && bytes[2] == b':'
        && bytes[5] == b':'
        && bytes[8] == b','
        && bytes.iter().enumerate().all(|(i, b)| [2, 5, 8].contains(&i) || b.is_ascii_digit());
    ensure(shape_ok, || format!("bad timestamp {stamp:?}"))?;
    let num = |r: std::ops::Range<usize>| stamp[r].parse::<u64>().unwrap();
    Ok(((num(0..2) * 60 + num(3..5)) * 60 + num(6..8)) * 1000 + num(9..12))
}

fn read_srt(text: &str) -> Result<Vec<(usize, u64, u64, String)>, String> {
    let mut cues = Vec::new();
    for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let mut lines = block.lines();
        let index = lines.next().unwrap_or("").parse::<usize>().map_err(|e| format!("{e} in {block:?}"))?;
        let timing = lines.next().ok_or("missing timing")?;
        let (a, b) = timing.split_once(" --> ").ok_or(format!("bad timing {timing:?}"))?;
        cues.push((index, srt_millis(a)?, srt_millis(b)?, lines.collect::<Vec<_>>().join("\n")));
    }
    Ok(cues)
}

fn chain_with_words(words: &[usize]) -> StoryGraph {
    let mut g = StoryGraph::new();
    for (i, &w) in words.iter().enumerate() {
        let id = (i + 1).to_string();
        g.nodes.push(StoryNode::new(id.clone(), format!("Scene {id}"), vec!["word"; w].join(" "), Position::new(50.0 + 300.0 * i as f64, 50.0)));
        if i > 0 {
            g.edges.push(StoryEdge::between(i.to_string(), id));
        }
    }
    g
}

fn export_timing() -> Result<String, String> {
    let mut g = chain_with_words(&[1, 1]);
    g.nodes[0].segment = "Hello".into();
    g.nodes[1].segment = "World".into();
    let ids = g.node_ids();
    for (id, d) in ids.iter().zip([3.0, 2.5]) {
        attach_asset(&mut g, id, MediaParams::audio("s"), "mp3", Some(d)).unwrap();
    }
    let srt = render_srt(&build_manifest(&g, &ids).map_err(|e| e.to_string())?);
    let worked = "1\n00:00:00,000 --> 00:00:03,000\nHello\n\n2\n00:00:03,000 --> 00:00:05,500\nWorld\n";
    ensure(srt == worked, || format!("worked example rendered {srt:?}"))?;

    let mut rng = StdRng::seed_from_u64(6);
    for case in 0..64 {
        let words: Vec<usize> = (0..rng.random_range(1..14)).map(|_| rng.random_range(1..60)).collect();
        let graph = chain_with_words(&words);
        let ids = graph.node_ids();
        let jobs = enqueue_media(&graph, &ids, &MediaParams::audio("scripted"), 1).unwrap();
        let sink = MemorySink::new(graph);
        process_jobs(jobs, &ScriptedBackend::new(rng.random()), &sink, 3, &|_| {});
        let graph = sink.graph();
        let manifest = build_manifest(&graph, &ids).map_err(|e| e.to_string())?;
        let mut cursor = 0.0;
        for (entry, w) in manifest.entries.iter().zip(&words) {
            ensure(entry.start_s == cursor && entry.end_s > entry.start_s, || format!("case {case}: gap or overlap"))?;
            let narrated = graph.node(entry.node_id.as_str()).unwrap().assets[0].duration_s.unwrap();
            ensure(((entry.end_s - entry.start_s) - narrated).abs() < 1e-9 && (narrated - *w as f64 / 2.5).abs() < 1e-9, || {
                format!("case {case}: duration {narrated} for {w} words")
            })?;
            cursor = entry.end_s;
        }
        ensure(cursor == manifest.total_duration_s, || format!("case {case}: total {}", manifest.total_duration_s))?;
        let cues = read_srt(&render_srt(&manifest))?;
        ensure(cues.len() == manifest.entries.len(), || format!("case {case}: cue count"))?;
        for (i, ((index, start, end, text), entry)) in cues.iter().zip(&manifest.entries).enumerate() {
            let ms = |s: f64| (s * 1000.0).round() as u64;
            ensure(*index == i + 1 && *start == ms(entry.start_s) && *end == ms(entry.end_s) && *text == entry.segment, || {
                format!("case {case}: cue {index} mismatch")
            })?;
        }
    }
    Ok("worked example byte-exact; 64 timelines tile and re-parse to the millisecond".into())
}

fn temporaries(dir: &Path, found: &mut usize) {
    for entry in std::fs::read_dir(dir).unwrap().flatten() {
        if entry.path().is_dir() {
            temporaries(&entry.path(), found);
        } else if entry.file_name().to_string_lossy().starts_with(".tmp-") {
            *found += 1;
        }
    }
}

fn durability() -> Result<String, String> {
    let lumina = parse_graph(LUMINA).unwrap();
    let backend = || -> Arc<dyn GenerativeBackend> { Arc::new(ScriptedBackend::new(3)) };
    let mut kills = 0;
    for trial in 0..50u64 {
        let mut rng = StdRng::seed_from_u64(trial ^ 0xd00d);
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        Project::create(root, "p", "demo", &lumina, backend(), 1, None).map_err(|e| e.to_string())?;
        let kill_at = rng.random_range(1..20);
        let renames = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&renames);
        // Dies just before the kill_at-th rename; nothing after reaches disk.
        let hook: FaultHook = Arc::new(move |_: &Path| {
            if counter.fetch_add(1, Ordering::SeqCst) + 1 >= kill_at {
                Err(io::Error::other("killed"))
            } else {
                Ok(())
            }
        });
        let mut last_good = (lumina.clone(), 1);
        if let Ok(p) = Project::open(root, backend(), 2, Some(hook)) {
            for step in 0..25 {
                let (g, _) = p.graph();
                let ids = g.node_ids();
                let id = ids[rng.random_range(0..ids.len())].clone();
                let _ = match step % 4 {
                    0 => p.update_node(&id, TextUpdate { label: None, segment: Some(format!("Step {step}.")) }, None, None).map(drop),
                    1 => p
                        .add_node(NewNode { label: "New".into(), segment: "More.".into(), connect_from: Some(id), connect_to: None }, None)
                        .map(drop),
                    2 => p.enqueue(&[id], &MediaParams::audio("scripted")).map(|jobs| drop(p.process_media(jobs))),
                    _ => p.duplicate(&[id], None).map(drop),
                };
                last_good = p.graph();
                if renames.load(Ordering::SeqCst) >= kill_at {
                    break;
                }
            }
        }
        if renames.load(Ordering::SeqCst) >= kill_at {
            kills += 1;
        }
        let reopened = Project::open(root, backend(), 1, None).map_err(|e| format!("trial {trial}: reload failed: {e}"))?;
        let (graph, version) = reopened.graph();
        ensure(graph.validate().is_ok(), || format!("trial {trial}: invalid graph"))?;
        ensure((&graph, version) == (&last_good.0, last_good.1), || {
            format!("trial {trial}: reloaded version {version}, expected {}", last_good.1)
        })?;
        let mut tmp_files = 0;
        temporaries(root, &mut tmp_files);
        ensure(tmp_files == 0, || format!("trial {trial}: {tmp_files} temporary files left"))?;
        ensure(reopened.jobs().iter().all(|j| j.status.is_terminal()), || format!("trial {trial}: live job after reload"))?;
        for asset in graph.nodes.iter().flat_map(|n| &n.assets) {
            ensure(root.join(&asset.uri).is_file(), || format!("trial {trial}: missing {}", asset.uri))?;
        }
    }
    ensure(kills == 50, || format!("only {kills} of 50 trials were killed"))?;

    // Two writers, one version: exactly one wins.
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let svc = Arc::new(Service::new(tmp.path(), backend(), 1).map_err(|e| e.to_string())?);
    let id = svc.create("race", &lumina).map_err(|e| e.to_string())?.info().project_id;
    let app = api::router(svc);
    let statuses = rt.block_on(async {
        use tower::ServiceExt;
        let put = || {
            let req = axum::http::Request::put(format!("/projects/{id}/graph"))
                .header("if-match", "\"1\"")
                .body(axum::body::Body::from(LUMINA))
                .unwrap();
            app.clone().oneshot(req)
        };
        let (a, b) = tokio::join!(put(), put());
        let mut s = [a.unwrap().status().as_u16(), b.unwrap().status().as_u16()];
        s.sort();
        s
    });
    ensure(statuses == [200, 409], || format!("statuses {statuses:?}"))?;
    Ok("50 killed writers reload cleanly; racing PUTs gave 200 and 409".into())
}

fn media_queue() -> Result<String, String> {
    let graph = chain_with_words(&[6; 25]);
    let ids = graph.node_ids();
    let mut jobs = Vec::new();
    for kind in [MediaKind::Audio, MediaKind::Image, MediaKind::Audio, MediaKind::Video] {
        let params = MediaParams::new(kind, "scripted").with_style("speak in a hopeful tone");
        jobs.extend(enqueue_media(&graph, &ids, &params, jobs.len() as u64 + 1).map_err(|e| e.to_string())?);
    }
    ensure(jobs.len() == 100, || format!("{} jobs", jobs.len()))?;
    let backend = FaultyBackend::new(ScriptedBackend::new(2), |_, call| call % 7 == 3);
    let sink = MemorySink::new(graph.clone());
    let events: Mutex<Vec<JobEvent>> = Mutex::new(Vec::new());
    let done = process_jobs(jobs, &backend, &sink, 4, &|e| events.lock().unwrap().push(e.clone()));
    let events = events.into_inner().unwrap();
    let after = sink.graph();

    ensure(done.len() == 100 && done.iter().all(|j| j.status.is_terminal()), || "non-terminal job".into())?;
    let mut status: HashMap<u64, JobStatus> = (1..=100).map(|id| (id, JobStatus::Queued)).collect();
    let legal = |from: JobStatus, to: JobStatus| {
        matches!(
            (from, to),
            (JobStatus::Queued, JobStatus::Running) | (JobStatus::Running, JobStatus::Done) | (JobStatus::Running, JobStatus::Failed)
        )
    };
    let mut versions: HashMap<(String, MediaKind), u32> = HashMap::new();
    for e in &events {
        let slot = status.get_mut(&e.job_id).ok_or(format!("unknown job {}", e.job_id))?;
        ensure(legal(*slot, e.status), || format!("job {}: {:?} -> {:?}", e.job_id, slot, e.status))?;
        *slot = e.status;
        if e.status == JobStatus::Done {
            let v = versions.entry((e.node_id.as_str().to_owned(), e.kind)).or_insert(0);
            ensure(e.version == Some(*v + 1), || format!("job {}: version {:?} after {v}", e.job_id, e.version))?;
            *v += 1;
        }
    }
    let terminal = status.values().filter(|s| s.is_terminal()).count();
    ensure(terminal == 100 && events.len() == 200, || format!("{terminal} terminal, {} events", events.len()))?;
    for (before, after) in graph.nodes.iter().zip(&after.nodes) {
        ensure(before.segment == after.segment && before.label == after.label, || format!("node {} text changed", before.id))?;
    }
    ensure(graph.edges == after.edges, || "edges changed".into())?;
    let failed = done.iter().filter(|j| j.status == JobStatus::Failed).count();
    Ok(format!("100 terminal ({} done, {failed} failed), transitions legal, versions monotone", 100 - failed))
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("schema fidelity", schema_fidelity),
        ("topology oracle", topology_oracle),
        ("confidence intervals", ci_reproduction),
        ("scripted experiment analogue", experiment_analogue),
        ("editor structure preservation", editor_preservation),
        ("export timing", export_timing),
        ("service durability", durability),
        ("media queue", media_queue),
    ];
    // Failures are reported on their own line; keep panic noise out of it.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
