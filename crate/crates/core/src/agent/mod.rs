//! The concept-guided agent.
//!
//! A prompt is routed through the [`DecisionNetwork`] one small choice at a
//! time until a leaf names a tool. The task formulation layer then extracts
//! the tool arguments, the tool runs deterministically, and the structured
//! result is phrased as a reply.

pub mod backend;
pub mod dispatch;
pub mod http;
pub mod mock;
pub mod network;
pub mod respond;
pub mod session;
pub mod task;

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;
use thiserror::Error;

pub use backend::{BackendError, ChoiceRequest, ExtractRequest, LabeledOption, LmBackend};
pub use dispatch::{dispatch, ToolResult};
pub use http::{HttpBackend, HttpConfig};
pub use mock::MockBackend;
pub use network::{ConceptOption, DecisionNetwork, DecisionNode, Next, ToolKind};
pub use respond::{respond, PhrasedBy, Response};
pub use session::{DecisionStep, DecisionTrace, Memory, Role, Session, Turn};
pub use task::{formulate_task, TaskArgs, TaskSpec};

use crate::document::SharedDocument;
use crate::error::{AnalysisError, MutationError};
use crate::knowledge::KnowledgeIndex;

/// Retries after an off-menu reply, each with a stricter instruction.
pub const MAX_RETRIES: usize = 2;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("cannot resolve {0}: nothing to refer back to yet")]
    UnresolvedReference(String),

    #[error("no component of the model matches `{0}`")]
    UnknownNodeRef(String),

    #[error("{tool} needs the {argument}")]
    MissingArgument { tool: ToolKind, argument: &'static str },

    #[error("more than one component named for replication: {}", .0.join(", "))]
    AmbiguousTarget(Vec<String>),

    #[error("{tool} failed: {source}")]
    Analysis {
        tool: ToolKind,
        #[source]
        source: AnalysisError,
    },

    #[error("{tool} failed: {source}")]
    Mutation {
        tool: ToolKind,
        #[source]
        source: MutationError,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl AgentError {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentError::Backend(BackendError::Unavailable(_)) => "backend_unavailable",
            AgentError::Backend(BackendError::Malformed(_)) => "backend_malformed",
            AgentError::UnresolvedReference(_) => "unresolved_reference",
            AgentError::UnknownNodeRef(_) => "unknown_node",
            AgentError::MissingArgument { .. } => "missing_argument",
            AgentError::AmbiguousTarget(_) => "ambiguous_target",
            AgentError::Analysis { .. } => "analysis_error",
            AgentError::Mutation { .. } => "mutation_error",
            AgentError::Internal(_) => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&AgentError> for ErrorInfo {
    fn from(e: &AgentError) -> Self {
        ErrorInfo {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

/// Everything produced for one prompt.
#[derive(Debug, Clone, Serialize)]
pub struct Reply {
    pub text: String,
    pub task: Option<TaskSpec>,
    pub result: Option<ToolResult>,
    pub trace: DecisionTrace,
    pub error: Option<ErrorInfo>,
    pub phrased_by: PhrasedBy,
    pub revision: u64,
}

pub struct Agent {
    network: DecisionNetwork,
    backend: Box<dyn LmBackend>,
    knowledge: KnowledgeIndex,
}

impl Agent {
    pub fn new(network: DecisionNetwork, backend: impl LmBackend + 'static, knowledge: KnowledgeIndex) -> Self {
        Agent {
            network,
            backend: Box::new(backend),
            knowledge,
        }
    }

    /// The bundled network with the deterministic mock backend.
    pub fn offline(knowledge: KnowledgeIndex) -> Self {
        Agent::new(DecisionNetwork::bundled(), MockBackend::new(), knowledge)
    }

    pub fn network(&self) -> &DecisionNetwork {
        &self.network
    }

    pub fn backend(&self) -> &dyn LmBackend {
        self.backend.as_ref()
    }

    pub fn knowledge(&self) -> &KnowledgeIndex {
        &self.knowledge
    }

    /// One micro-decision. Returns the chosen option, or `None` once every
    /// attempt came back off-menu.
    pub fn classify<'n>(
        &self,
        prompt: &str,
        node: &'n DecisionNode,
    ) -> Result<(Option<&'n ConceptOption>, DecisionStep), BackendError> {
        let mut step = DecisionStep {
            decision: node.id.clone(),
            options: node.options.iter().map(|o| o.id.clone()).collect(),
            replies: Vec::new(),
            chosen: None,
        };
        for attempt in 0..=MAX_RETRIES {
            let request = ChoiceRequest {
                prompt,
                question: &node.question,
                options: node
                    .options
                    .iter()
                    .map(|o| LabeledOption {
                        label: &o.id,
                        description: &o.description,
                        examples: &o.triggers,
                    })
                    .collect(),
                strict: attempt > 0,
            };
            let reply = self.backend.choose(&request)?;
            let picked = match_label(&reply, node);
            step.replies.push(reply);
            if let Some(option) = picked {
                step.chosen = Some(option.id.clone());
                return Ok((Some(option), step));
            }
        }
        tracing::warn!(decision = %node.id, "no valid label after retries, routing to fallback");
        Ok((None, step))
    }

    /// Runs the cascade from the root to a leaf. The trace is returned even
    /// when the backend fails midway.
    pub fn cascade(&self, prompt: &str) -> (DecisionTrace, Result<ToolKind, BackendError>) {
        let mut trace = DecisionTrace::default();
        let mut node = self.network.root();
        loop {
            match self.classify(prompt, node) {
                Err(e) => return (trace, Err(e)),
                Ok((choice, step)) => {
                    trace.steps.push(step);
                    match choice.map(|o| &o.next) {
                        None => {
                            trace.leaf = Some(ToolKind::Fallback);
                            return (trace, Ok(ToolKind::Fallback));
                        }
                        Some(Next::Task(tool)) => {
                            trace.leaf = Some(*tool);
                            return (trace, Ok(*tool));
                        }
                        Some(Next::Decision(child)) => node = child,
                    }
                }
            }
        }
    }

    /// classify, formulate, dispatch and respond for one prompt. Never
    /// panics: every failure becomes [`Reply::error`]. Both turns are
    /// appended to the session history.
    pub fn handle(&self, prompt: &str, session: &mut Session, doc: &SharedDocument) -> Reply {
        session.sync_with(&doc.snapshot());
        session.push(Turn::user(prompt));
        let mut trace = DecisionTrace::default();
        let mut task = None;
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let (t, leaf) = self.cascade(prompt);
            trace = t;
            let tool = leaf?;
            let model = doc.snapshot();
            let spec = formulate_task(prompt, tool, session, &model, self.backend.as_ref())?;
            task = Some(spec.clone());
            let result = dispatch(&spec, doc, session, &self.knowledge)?;
            Ok::<_, AgentError>(result)
        }))
        .unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected failure".into());
            Err(AgentError::Internal(message))
        });

        let reply = match outcome {
            Ok(result) => {
                let response = respond(&result, self.backend.as_ref());
                Reply {
                    text: response.text,
                    task,
                    result: Some(result),
                    trace,
                    error: None,
                    phrased_by: response.phrased_by,
                    revision: doc.revision(),
                }
            }
            Err(e) => Reply {
                text: format!("Sorry, I could not complete that: {e}"),
                task,
                result: None,
                trace,
                error: Some(ErrorInfo::from(&e)),
                phrased_by: PhrasedBy::Template,
                revision: doc.revision(),
            },
        };
        session.sync_with(&doc.snapshot());
        session.push(Turn {
            role: Role::Agent,
            text: reply.text.clone(),
            task: reply.task.clone(),
            result: reply.result.clone(),
            trace: Some(reply.trace.clone()),
            error: reply.error.clone(),
        });
        reply
    }
}

/// Accepts a reply naming one option label, ignoring case, surrounding
/// whitespace, quotes and a trailing period.
fn match_label<'n>(reply: &str, node: &'n DecisionNode) -> Option<&'n ConceptOption> {
    let cleaned = reply
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '.' | '*'))
        .trim();
    node.options
        .iter()
        .find(|o| o.id.eq_ignore_ascii_case(cleaned))
}
