//! Deterministic response templates and the name-fidelity check applied to
//! backend phrasing.

use serde::Serialize;

use super::backend::LmBackend;
use super::dispatch::ToolResult;

pub const PHRASE_STYLE: &str = "Rephrase the analysis result below as a short answer for a safety engineer. \
Keep every component name exactly as written and do not mention components that are not listed.";

pub const NO_PROPAGATION: &str = "No faults propagate beyond the seeded set.";

const SNIPPET_CHARS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhrasedBy {
    Backend,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Response {
    pub text: String,
    pub phrased_by: PhrasedBy,
}

/// Joins names as `a`, `a and b`, `a, b and c`.
fn list<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> String {
    let names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
    match names.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

pub fn render_template(result: &ToolResult) -> String {
    match result {
        ToolResult::Knowledge { hits, .. } if hits.is_empty() => {
            "I found nothing about that in the safety-practice notes.".into()
        }
        ToolResult::Knowledge { hits, .. } => {
            let mut out = String::from("From the safety-practice notes:");
            for hit in hits {
                let mut snippet: String = hit.chunk.text.chars().take(SNIPPET_CHARS).collect();
                if snippet.len() < hit.chunk.text.len() {
                    snippet.push_str("...");
                }
                out.push_str(&format!("\n\n{} ({}):\n{}", hit.chunk.title, hit.chunk.doc_id, snippet));
            }
            out
        }
        ToolResult::Propagation(state) if state.derived.is_empty() => {
            let mut out = NO_PROPAGATION.to_string();
            if !state.seeded.is_empty() {
                out.push_str(&format!(" Faulty components: {}.", list(&state.seeded)));
            }
            out
        }
        ToolResult::Propagation(state) => format!(
            "The faulty components are {}. Seeded: {}. Derived through the fault gates: {}.",
            list(state.faulty()),
            list(&state.seeded),
            list(&state.derived)
        ),
        ToolResult::CriticalPath { excluded, paths } if paths.all_paths_blocked() => format!(
            "No path from a start node to an end node remains once {} are excluded.",
            list(excluded)
        ),
        ToolResult::CriticalPath { excluded, paths } => {
            let mut out = format!("The critical path includes {}.", list(&paths.node_union));
            for path in &paths.paths {
                out.push_str(&format!("\n- {}", path.join(" -> ")));
            }
            if !excluded.is_empty() {
                out.push_str(&format!("\nExcluded as faulty: {}.", list(excluded)));
            }
            out
        }
        ToolResult::Spofs(report) if report.spofs.is_empty() => {
            "There are no single points of failure.".into()
        }
        ToolResult::Spofs(report) => {
            let mut out = format!(
                "The single points of failure are {}.",
                list(&report.spofs)
            );
            for (node, end) in &report.witness {
                out.push_str(&format!("\n- {node} alone brings down {end}"));
            }
            out
        }
        ToolResult::Suggestion(plan) if plan.is_empty() => {
            "There are no single points of failure, so no replication is needed.".into()
        }
        ToolResult::Suggestion(plan) => format!(
            "I suggest replicating {} into {}. {}",
            plan.target,
            list(&plan.replica_names),
            plan.rationale
        ),
        ToolResult::Replication {
            target,
            replicas,
            revision,
        } => format!(
            "Replicated {target} into {}. The model is now at revision {revision}.",
            list(replicas)
        ),
        ToolResult::Fallback { message } => message.clone(),
    }
}

/// Whether `name` occurs in `text` as a whole word.
pub fn mentions(text: &str, name: &str) -> bool {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    text.match_indices(name).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + name.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

/// Phrases `result` through the backend, keeping the backend text only when
/// it names every component of the result.
pub fn respond(result: &ToolResult, backend: &dyn LmBackend) -> Response {
    let template = render_template(result);
    match backend.phrase(&template, PHRASE_STYLE) {
        Ok(text) if !text.trim().is_empty() && result.node_names().iter().all(|n| mentions(&text, n)) => {
            Response {
                text,
                phrased_by: PhrasedBy::Backend,
            }
        }
        Ok(_) => Response {
            text: template,
            phrased_by: PhrasedBy::Template,
        },
        Err(e) => {
            tracing::warn!(error = %e, "phrasing failed, using template");
            Response {
                text: template,
                phrased_by: PhrasedBy::Template,
            }
        }
    }
}
