use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("language model backend unavailable: {0}")]
    Unavailable(String),

    #[error("language model backend returned an unusable reply: {0}")]
    Malformed(String),
}

/// One offered answer of a micro-decision.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledOption<'a> {
    pub label: &'a str,
    pub description: &'a str,
    pub examples: &'a [String],
}

#[derive(Debug, Clone, Serialize)]
pub struct ChoiceRequest<'a> {
    pub prompt: &'a str,
    pub question: &'a str,
    pub options: Vec<LabeledOption<'a>>,
    /// Set on retries after an answer that was not one of the labels.
    pub strict: bool,
}

impl ChoiceRequest<'_> {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.label)
    }
}

/// Asks for the subset of `candidates` the prompt refers to, as a
/// comma-separated list (or `NONE`).
#[derive(Debug, Clone, Serialize)]
pub struct ExtractRequest<'a> {
    pub prompt: &'a str,
    pub instruction: &'a str,
    pub candidates: &'a [String],
}

/// The language model seen by the agent. Every call is small and
/// constrained: pick a label, list names, or rephrase given facts.
pub trait LmBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Returns one label of `request.options`. Implementations may return
    /// anything; the caller validates and retries.
    fn choose(&self, request: &ChoiceRequest<'_>) -> Result<String, BackendError>;

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<String, BackendError>;

    fn phrase(&self, facts: &str, style: &str) -> Result<String, BackendError>;
}

impl<T: LmBackend + ?Sized> LmBackend for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn choose(&self, request: &ChoiceRequest<'_>) -> Result<String, BackendError> {
        (**self).choose(request)
    }

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<String, BackendError> {
        (**self).extract(request)
    }

    fn phrase(&self, facts: &str, style: &str) -> Result<String, BackendError> {
        (**self).phrase(facts, style)
    }
}
