use serde::Serialize;
use serde_json::Value;

use super::dispatch::ToolResult;
use super::network::ToolKind;
use super::task::TaskSpec;
use super::ErrorInfo;
use crate::analysis::FaultState;
use crate::model::SystemModel;
use crate::mutation::MutationPlan;

/// One micro-decision: the options offered, every raw backend reply, and the
/// option finally taken (`None` when all attempts were off-menu).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionStep {
    pub decision: String,
    pub options: Vec<String>,
    pub replies: Vec<String>,
    pub chosen: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DecisionTrace {
    pub steps: Vec<DecisionStep>,
    pub leaf: Option<ToolKind>,
}

impl DecisionTrace {
    /// Chosen option ids from the root down.
    pub fn path(&self) -> Vec<&str> {
        self.steps.iter().filter_map(|s| s.chosen.as_deref()).collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Memory {
    pub last_fault: Option<FaultState>,
    pub last_result: Option<Value>,
    pub last_plan: Option<MutationPlan>,
    pub model_revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, Serialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ToolResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<DecisionTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Turn {
            role: Role::User,
            text: text.into(),
            task: None,
            result: None,
            trace: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    id: String,
    history: Vec<Turn>,
    memory: Memory,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            history: Vec::new(),
            memory: Memory::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub(crate) fn memory_mut(&mut self) -> &mut Memory {
        &mut self.memory
    }

    pub(crate) fn push(&mut self, turn: Turn) {
        self.history.push(turn);
    }

    /// Aligns memory with `model`: remembered faults or plans that name a node
    /// the model no longer has are dropped.
    pub fn sync_with(&mut self, model: &SystemModel) {
        let memory = &mut self.memory;
        if memory
            .last_fault
            .as_ref()
            .is_some_and(|f| f.faulty().iter().any(|n| !model.contains(n)))
        {
            memory.last_fault = None;
        }
        if memory
            .last_plan
            .as_ref()
            .is_some_and(|p| !p.is_empty() && !model.contains(&p.target))
        {
            memory.last_plan = None;
        }
        memory.model_revision = model.revision();
    }
}
