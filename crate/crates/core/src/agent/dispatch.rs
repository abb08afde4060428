use std::collections::BTreeSet;

use serde::Serialize;

use super::network::ToolKind;
use super::session::Session;
use super::task::TaskSpec;
use super::AgentError;
use crate::analysis::{critical_path, find_spofs, propagate, FaultState, PathResult, SpofReport};
use crate::document::SharedDocument;
use crate::knowledge::{KnowledgeIndex, ScoredChunk};
use crate::mutation::{replicate_node, suggest_redundancy, MutationPlan, DEFAULT_COPIES};

pub const KNOWLEDGE_HITS: usize = 3;

pub const FALLBACK_MESSAGE: &str = "I can answer safety engineering questions, analyze the system model \
(fault propagation, critical path, single points of failure) and suggest or apply redundancy. \
That request is outside those tasks.";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "tool", content = "data")]
pub enum ToolResult {
    #[serde(rename = "AnswerSafetyQuestion")]
    Knowledge { query: String, hits: Vec<ScoredChunk> },
    #[serde(rename = "PropagateFaults")]
    Propagation(FaultState),
    #[serde(rename = "CriticalPath")]
    CriticalPath {
        excluded: Vec<String>,
        #[serde(flatten)]
        paths: PathResult,
    },
    #[serde(rename = "FindSpofs")]
    Spofs(SpofReport),
    #[serde(rename = "SuggestRedundancy")]
    Suggestion(MutationPlan),
    #[serde(rename = "ReplicateNode")]
    Replication {
        target: String,
        replicas: Vec<String>,
        revision: u64,
    },
    #[serde(rename = "Fallback")]
    Fallback { message: String },
}

impl ToolResult {
    pub fn tool(&self) -> ToolKind {
        match self {
            ToolResult::Knowledge { .. } => ToolKind::AnswerSafetyQuestion,
            ToolResult::Propagation(_) => ToolKind::PropagateFaults,
            ToolResult::CriticalPath { .. } => ToolKind::CriticalPath,
            ToolResult::Spofs(_) => ToolKind::FindSpofs,
            ToolResult::Suggestion(_) => ToolKind::SuggestRedundancy,
            ToolResult::Replication { .. } => ToolKind::ReplicateNode,
            ToolResult::Fallback { .. } => ToolKind::Fallback,
        }
    }

    /// Every component name carried by the result.
    pub fn node_names(&self) -> BTreeSet<String> {
        match self {
            ToolResult::Knowledge { .. } | ToolResult::Fallback { .. } => BTreeSet::new(),
            ToolResult::Propagation(state) => state.faulty(),
            ToolResult::CriticalPath { excluded, paths } => {
                paths.node_union.iter().chain(excluded).cloned().collect()
            }
            ToolResult::Spofs(report) => report.spofs.clone(),
            ToolResult::Suggestion(plan) if plan.is_empty() => BTreeSet::new(),
            ToolResult::Suggestion(plan) => std::iter::once(&plan.target)
                .chain(&plan.replica_names)
                .cloned()
                .collect(),
            ToolResult::Replication {
                target, replicas, ..
            } => std::iter::once(target).chain(replicas).cloned().collect(),
        }
    }
}

/// Runs the tool named by `task` and records the outcome in session memory.
/// A mutation is applied to `doc` (and so written back to its file).
pub fn dispatch(
    task: &TaskSpec,
    doc: &SharedDocument,
    session: &mut Session,
    knowledge: &KnowledgeIndex,
) -> Result<ToolResult, AgentError> {
    let tool = task.tool;
    let args = &task.args;
    let analysis = |source| AgentError::Analysis { tool, source };
    let model = doc.snapshot();

    let result = match tool {
        ToolKind::AnswerSafetyQuestion => {
            let query = args.query.clone().unwrap_or_default();
            let hits = knowledge.retrieve(&query, KNOWLEDGE_HITS);
            ToolResult::Knowledge { query, hits }
        }
        ToolKind::PropagateFaults => {
            let state = propagate(&model, &args.faults).map_err(analysis)?;
            session.memory_mut().last_fault = Some(state.clone());
            ToolResult::Propagation(state)
        }
        ToolKind::CriticalPath => ToolResult::CriticalPath {
            excluded: args.exclude.clone(),
            paths: critical_path(&model, &args.exclude).map_err(analysis)?,
        },
        ToolKind::FindSpofs => ToolResult::Spofs(find_spofs(&model).map_err(analysis)?),
        ToolKind::SuggestRedundancy => {
            let plan = suggest_redundancy(&model).map_err(analysis)?;
            session.memory_mut().last_plan = Some(plan.clone());
            ToolResult::Suggestion(plan)
        }
        ToolKind::ReplicateNode => {
            let target = args.target.clone().ok_or(AgentError::MissingArgument {
                tool,
                argument: "target component",
            })?;
            let copies = args.copies.unwrap_or(DEFAULT_COPIES);
            let next = doc
                .update(|m| replicate_node(m, &target, copies))
                .map_err(|source| AgentError::Mutation { tool, source })?;
            session.sync_with(&next);
            ToolResult::Replication {
                replicas: crate::mutation::replica_names(&target, copies),
                target,
                revision: next.revision(),
            }
        }
        ToolKind::Fallback => ToolResult::Fallback {
            message: FALLBACK_MESSAGE.into(),
        },
    };
    if tool != ToolKind::Fallback {
        session.memory_mut().last_result = serde_json::to_value(&result).ok();
    }
    Ok(result)
}
