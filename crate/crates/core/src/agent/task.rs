//! Task formulation: turns the chosen leaf plus the prompt into tool
//! arguments, resolving component names against the model and references
//! to earlier turns against session memory.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use super::backend::{ExtractRequest, LmBackend};
use super::network::ToolKind;
use super::session::Session;
use super::AgentError;
use crate::model::SystemModel;
use crate::mutation::DEFAULT_COPIES;

static LAST_FAULT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:last|previous|prior|earlier|same|remembered)\s+(?:reported\s+|mentioned\s+)?(?:faults?|failures?|fault\s+set)\b",
    )
    .unwrap()
});

static LAST_PLAN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:suggestion|suggested|recommendation|recommended|proposal|proposed|plan)\b|\b(?:do|apply|implement)\s+(?:it|that|this)\b",
    )
    .unwrap()
});

static EXCLUSION_CUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:without|excluding|exclude|except|avoid|avoiding|given|assuming|assume|if|when|faulty|failed|fails|fail|broken|down|unavailable|lost|faults?)\b",
    )
    .unwrap()
});

static COPIES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(\d+|two|three|four|five|six)\s+(?:copies|replicas|instances|times|versions|redundant)\b|\bcopies\s*=\s*(\d+)\b|\b(duplicate|triplicate|quadruplicate)\b",
    )
    .unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TaskArgs {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copies: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// Some argument was taken from session memory.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub from_memory: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSpec {
    pub tool: ToolKind,
    pub args: TaskArgs,
    pub formulated_prompt: String,
}

impl TaskSpec {
    pub fn new(tool: ToolKind, args: TaskArgs) -> Self {
        let formulated_prompt = formulate_text(tool, &args);
        TaskSpec {
            tool,
            args,
            formulated_prompt,
        }
    }
}

fn formulate_text(tool: ToolKind, args: &TaskArgs) -> String {
    match tool {
        ToolKind::AnswerSafetyQuestion => format!(
            "Look up safety-practice notes relevant to: {}",
            args.query.as_deref().unwrap_or_default()
        ),
        ToolKind::PropagateFaults => format!(
            "Propagate the faults of {} through the fault gates of the model.",
            args.faults.join(", ")
        ),
        ToolKind::CriticalPath if args.exclude.is_empty() => {
            "Compute the critical path from the start nodes to the end nodes.".into()
        }
        ToolKind::CriticalPath => format!(
            "Compute the critical path from the start nodes to the end nodes, avoiding {}.",
            args.exclude.join(", ")
        ),
        ToolKind::FindSpofs => "Find every component whose failure alone reaches an end node.".into(),
        ToolKind::SuggestRedundancy => {
            "Select the single point of failure that benefits most from replication.".into()
        }
        ToolKind::ReplicateNode => format!(
            "Replicate {} into {} instances.",
            args.target.as_deref().unwrap_or_default(),
            args.copies.unwrap_or(DEFAULT_COPIES)
        ),
        ToolKind::Fallback => "Decline politely; the request is outside the supported tasks.".into(),
    }
}

/// Resolves a user-typed component name: case-insensitive exact match first,
/// then a case-insensitive prefix shared by exactly one node.
pub fn resolve_name(model: &SystemModel, raw: &str) -> Result<String, AgentError> {
    let lower = raw.to_lowercase();
    let names = || model.nodes().iter().map(|n| n.name.as_str());
    if let Some(exact) = names().find(|n| *n == raw) {
        return Ok(exact.to_string());
    }
    let mut folded = names().filter(|n| n.to_lowercase() == lower);
    if let (Some(only), None) = (folded.next(), folded.next()) {
        return Ok(only.to_string());
    }
    if !lower.is_empty() {
        let mut prefixed = names().filter(|n| n.to_lowercase().starts_with(&lower));
        if let (Some(only), None) = (prefixed.next(), prefixed.next()) {
            return Ok(only.to_string());
        }
    }
    Err(AgentError::UnknownNodeRef(raw.to_string()))
}

/// Asks the backend which components the prompt names and validates every
/// reply entry against the model.
fn extract_names(
    backend: &dyn LmBackend,
    model: &SystemModel,
    prompt: &str,
    instruction: &str,
) -> Result<Vec<String>, AgentError> {
    let candidates: Vec<String> = model.nodes().iter().map(|n| n.name.clone()).collect();
    let reply = backend.extract(&ExtractRequest {
        prompt,
        instruction,
        candidates: &candidates,
    })?;
    let mut names = Vec::new();
    for raw in reply.split([',', '\n', ';']) {
        let raw = raw
            .trim()
            .trim_start_matches(['-', '*'])
            .trim()
            .trim_matches(['"', '\'', '`', '.']);
        if raw.is_empty() || raw.eq_ignore_ascii_case("none") {
            continue;
        }
        let name = resolve_name(model, raw)?;
        if !names.contains(&name) {
            names.push(name);
        }
    }
    Ok(names)
}

fn parse_copies(prompt: &str) -> Option<usize> {
    let caps = COPIES.captures(prompt)?;
    if let Some(word) = caps.get(3) {
        return Some(match word.as_str().to_lowercase().as_str() {
            "triplicate" => 3,
            "quadruplicate" => 4,
            _ => 2,
        });
    }
    let count = caps.get(1).or_else(|| caps.get(2))?.as_str().to_lowercase();
    match count.as_str() {
        "two" => Some(2),
        "three" => Some(3),
        "four" => Some(4),
        "five" => Some(5),
        "six" => Some(6),
        digits => digits.parse().ok(),
    }
}

/// Whether the prompt refers back to the previously discussed fault set.
pub fn mentions_last_fault(prompt: &str) -> bool {
    LAST_FAULT.is_match(prompt)
}

pub fn formulate_task(
    prompt: &str,
    tool: ToolKind,
    session: &Session,
    model: &SystemModel,
    backend: &dyn LmBackend,
) -> Result<TaskSpec, AgentError> {
    let memory = session.memory();
    let remembered_fault = || {
        memory
            .last_fault
            .as_ref()
            .map(|f| f.faulty().into_iter().collect::<Vec<_>>())
            .ok_or_else(|| AgentError::UnresolvedReference("the last fault".into()))
    };
    let mut args = TaskArgs::default();
    match tool {
        ToolKind::AnswerSafetyQuestion => args.query = Some(prompt.trim().to_string()),
        ToolKind::PropagateFaults => {
            if mentions_last_fault(prompt) {
                args.faults = remembered_fault()?;
                args.from_memory = true;
            }
            let named = extract_names(
                backend,
                model,
                prompt,
                "List the system components the user states as faulty or failing.",
            )?;
            for name in named {
                if !args.faults.contains(&name) {
                    args.faults.push(name);
                }
            }
            if args.faults.is_empty() {
                return Err(AgentError::MissingArgument {
                    tool,
                    argument: "faulty components",
                });
            }
        }
        ToolKind::CriticalPath => {
            if mentions_last_fault(prompt) {
                args.exclude = remembered_fault()?;
                args.from_memory = true;
            }
            if EXCLUSION_CUE.is_match(prompt) {
                let named = extract_names(
                    backend,
                    model,
                    prompt,
                    "List the system components the user wants excluded from the path, for example because they are faulty.",
                )?;
                for name in named {
                    if !args.exclude.contains(&name) {
                        args.exclude.push(name);
                    }
                }
            }
        }
        ToolKind::FindSpofs | ToolKind::SuggestRedundancy | ToolKind::Fallback => {}
        ToolKind::ReplicateNode => {
            let named = extract_names(
                backend,
                model,
                prompt,
                "List the system component the user wants replicated.",
            )?;
            match named.as_slice() {
                [one] => args.target = Some(one.clone()),
                [] if LAST_PLAN.is_match(prompt) => {
                    let plan = memory
                        .last_plan
                        .as_ref()
                        .filter(|p| !p.is_empty())
                        .ok_or_else(|| AgentError::UnresolvedReference("the suggestion".into()))?;
                    args.target = Some(plan.target.clone());
                    args.copies = Some(plan.replica_names.len());
                    args.from_memory = true;
                }
                [] => {
                    return Err(AgentError::MissingArgument {
                        tool,
                        argument: "target component",
                    })
                }
                many => return Err(AgentError::AmbiguousTarget(many.to_vec())),
            }
            if let Some(copies) = parse_copies(prompt) {
                args.copies = Some(copies);
            }
            args.copies.get_or_insert(DEFAULT_COPIES);
        }
    }
    Ok(TaskSpec::new(tool, args))
}
