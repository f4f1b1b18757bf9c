use super::ExportManifest;

fn millis(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(0.0) as u64
}

/// `HH:MM:SS,mmm`
pub fn format_timestamp(seconds: f64) -> String {
    let ms = millis(seconds);
    format!(
        "{:02}:{:02}:{:02},{:03}",
        ms / 3_600_000,
        ms / 60_000 % 60,
        ms / 1000 % 60,
        ms % 1000
    )
}

/// Cue text on consecutive non-blank lines; blank lines would end the cue.
fn cue_text(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// One cue per manifest entry, numbered from 1, separated by blank lines.
pub fn render_srt(manifest: &ExportManifest) -> String {
    manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let text = if e.segment.trim().is_empty() { &e.label } else { &e.segment };
            format!(
                "{}\n{} --> {}\n{}\n",
                i + 1,
                format_timestamp(e.start_s),
                format_timestamp(e.end_s),
                cue_text(text)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}
