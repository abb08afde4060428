//! Graphviz export of a system model.

use std::fmt::Write as _;

use crate::analysis::FaultState;
use crate::model::SystemModel;

const SEEDED_FILL: &str = "#e06666";
const DERIVED_FILL: &str = "#f6b26b";

/// Renders `model` as a DOT digraph in model order. Nodes faulty in
/// `highlight` are filled: seeded faults red, derived faults orange.
pub fn to_dot(model: &SystemModel, highlight: Option<&FaultState>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", dot_id(model.name()));
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    for node in model.nodes() {
        let mut label = node.name.clone();
        if let Some(gate) = &node.gate {
            label.push('\n');
            label.push_str(&gate.to_string());
        }
        if node.is_start {
            label.push_str("\n[START]");
        }
        if node.is_end {
            label.push_str("\n[END]");
        }
        let _ = write!(out, "  {} [label={}", dot_id(&node.name), quote(&label));
        if let Some(state) = highlight {
            if state.seeded.contains(&node.name) {
                let _ = write!(out, ", style=filled, fillcolor=\"{SEEDED_FILL}\"");
            } else if state.derived.contains(&node.name) {
                let _ = write!(out, ", style=filled, fillcolor=\"{DERIVED_FILL}\"");
            }
        }
        out.push_str("];\n");
    }
    for edge in model.edges() {
        let _ = writeln!(out, "  {} -> {};", dot_id(&edge.from), dot_id(&edge.to));
    }
    out.push_str("}\n");
    out
}

fn dot_id(name: &str) -> String {
    let mut chars = name.chars();
    let plain = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.to_string()
    } else {
        quote(name)
    }
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
