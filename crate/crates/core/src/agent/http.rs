//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendError, ChoiceRequest, ExtractRequest, LmBackend};

pub const API_KEY_ENV: &str = "CODESIGN_LLM_API_KEY";
pub const BASE_URL_ENV: &str = "CODESIGN_LLM_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Sampling temperature for `phrase`; `choose` and `extract` always use 0.
    pub phrase_temperature: f64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: DEFAULT_BASE_URL.into(),
            model: DEFAULT_MODEL.into(),
            api_key: None,
            timeout: Duration::from_secs(30),
            phrase_temperature: 0.0,
        }
    }
}

impl HttpConfig {
    /// Defaults overridden by `CODESIGN_LLM_BASE_URL` and
    /// `CODESIGN_LLM_API_KEY` when set.
    pub fn from_env() -> Self {
        let mut config = HttpConfig::default();
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                config.base_url = url.trim().to_string();
            }
        }
        config.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        config
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": temperature,
        });
        let mut request = self.agent.post(self.endpoint());
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Unavailable(format!("HTTP {status}: {}", text.trim())));
        }
        let reply: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }
}

impl LmBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn choose(&self, request: &ChoiceRequest<'_>) -> Result<String, BackendError> {
        let labels: Vec<&str> = request.labels().collect();
        let mut system = format!(
            "You classify a user request for a safety engineering assistant.\n{}\n\
             Answer with exactly one of these labels and nothing else: {}.\n",
            request.question,
            labels.join(", ")
        );
        for option in &request.options {
            system.push_str(&format!("\nLabel `{}`: {}\nExamples:\n", option.label, option.description));
            for example in option.examples {
                system.push_str(&format!("- {example}\n"));
            }
        }
        if request.strict {
            system.push_str(&format!(
                "\nYour previous reply was not a valid label. Reply with one word from: {}.",
                labels.join(", ")
            ));
        }
        self.complete(&system, request.prompt, 0.0)
    }

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<String, BackendError> {
        let system = format!(
            "{}\nReply with a comma-separated list of names copied exactly from this list, \
             or NONE if the request names none of them:\n{}",
            request.instruction,
            request.candidates.join(", ")
        );
        self.complete(&system, request.prompt, 0.0)
    }

    fn phrase(&self, facts: &str, style: &str) -> Result<String, BackendError> {
        self.complete(style, facts, self.config.phrase_temperature)
    }
}
