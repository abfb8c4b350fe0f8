use std::fmt::Write;

use kaleido_core::{PipelineOutput, ValenceLabel, ValueKind};

pub fn arrow(label: ValenceLabel) -> &'static str {
    match label {
        ValenceLabel::Supports => "↑ support",
        ValenceLabel::Opposes => "↓ oppose",
        ValenceLabel::Either => "↕ either",
    }
}

/// Event line, then one block per kind listing text, valence and relevance.
pub fn render(out: &PipelineOutput) -> String {
    let width = out
        .candidates
        .iter()
        .map(|c| c.entry.text.chars().count())
        .max()
        .unwrap_or(0);
    let mut s = String::new();
    writeln!(s, "Event: {}", out.action).unwrap();
    for kind in ValueKind::ALL {
        let rows: Vec<_> = out.candidates.iter().filter(|c| c.entry.kind == kind).collect();
        if rows.is_empty() {
            continue;
        }
        writeln!(s, "{kind}").unwrap();
        for c in rows {
            let pad = width - c.entry.text.chars().count();
            writeln!(
                s,
                "  {}{}  {:<10} relevance {:.2}",
                c.entry.text,
                " ".repeat(pad),
                arrow(c.valence.argmax()),
                c.relevance
            )
            .unwrap();
        }
    }
    if out.candidates.is_empty() {
        writeln!(s, "(no values passed the filters)").unwrap();
    }
    s
}
