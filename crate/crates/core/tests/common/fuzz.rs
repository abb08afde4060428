//! A backend that answers every call with seeded noise, for containment tests.

use std::collections::BTreeSet;
use std::sync::Mutex;

use codesign_core::agent::{
    BackendError, ChoiceRequest, DecisionNetwork, ExtractRequest, LmBackend, Reply, ToolKind,
};
use codesign_core::{Agent, KnowledgeIndex, ModelDocument, SharedDocument, Session};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOISE: &[&str] = &[
    "",
    "   ",
    "I think the answer is probably the second one.",
    "FindSpofs",
    "root",
    "option 2",
    "NONE",
    "{\"label\": \"other\"}",
    "système",
    "critical_path; DROP TABLE",
    "\u{0}\u{1b}[31m",
    "safety_qa safety_qa",
];

pub struct NoiseBackend {
    rng: Mutex<ChaCha8Rng>,
}

impl NoiseBackend {
    pub fn new(seed: u64) -> Self {
        NoiseBackend {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn noise(rng: &mut ChaCha8Rng) -> String {
        match rng.random_range(0..3) {
            0 => NOISE.choose(rng).unwrap().to_string(),
            1 => (0..rng.random_range(0..40)).map(|_| rng.random::<char>()).collect(),
            _ => "x".repeat(rng.random_range(0..5000)),
        }
    }
}

impl LmBackend for NoiseBackend {
    fn name(&self) -> &str {
        "noise"
    }

    fn choose(&self, request: &ChoiceRequest<'_>) -> Result<String, BackendError> {
        let mut rng = self.rng.lock().unwrap();
        let labels: Vec<&str> = request.labels().collect();
        Ok(match rng.random_range(0..10) {
            0 => return Err(BackendError::Unavailable("noise".into())),
            1 => return Err(BackendError::Malformed("noise".into())),
            2..=4 => labels.choose(&mut *rng).unwrap().to_string(),
            5 => format!("\"{}.\"", labels.choose(&mut *rng).unwrap().to_uppercase()),
            _ => Self::noise(&mut rng),
        })
    }

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<String, BackendError> {
        let mut rng = self.rng.lock().unwrap();
        Ok(match rng.random_range(0..6) {
            0 => return Err(BackendError::Unavailable("noise".into())),
            1 | 2 => {
                let n = rng.random_range(1..=3.min(request.candidates.len().max(1)));
                request
                    .candidates
                    .choose_multiple(&mut *rng, n)
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            }
            3 => "Ghost, Phantom".into(),
            _ => Self::noise(&mut rng),
        })
    }

    fn phrase(&self, facts: &str, _style: &str) -> Result<String, BackendError> {
        let mut rng = self.rng.lock().unwrap();
        Ok(match rng.random_range(0..4) {
            0 => return Err(BackendError::Unavailable("noise".into())),
            1 => facts.to_string(),
            _ => Self::noise(&mut rng),
        })
    }
}

/// Random prompt text: a mix of fixture-like requests and junk.
pub fn fuzz_prompt(rng: &mut ChaCha8Rng) -> String {
    const PARTS: &[&str] = &[
        "replicate", "Lidar1", "critical path", "what happens if", "GPS", "fails", "the last fault",
        "apply the suggestion", "SPOF", "weather", "three copies of", "Ghost", "and", "?", "",
        "SensorFusion", "exclude", "<node>", "2OO3", "\u{202e}", "🙂",
    ];
    let n = rng.random_range(0..8);
    (0..n).map(|_| *PARTS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Why a reply escaped the network contract, if it did.
pub fn escape_reason(reply: &Reply, network: &DecisionNetwork) -> Option<String> {
    let mut allowed: BTreeSet<ToolKind> = network.leaf_tools();
    allowed.insert(ToolKind::Fallback);
    if reply.text.trim().is_empty() {
        return Some("empty reply text".into());
    }
    match reply.trace.leaf {
        None => {
            let kind = reply.error.as_ref().map(|e| e.kind.as_str());
            if !kind.is_some_and(|k| k.starts_with("backend_")) {
                return Some(format!("no leaf without a backend error: {kind:?}"));
            }
        }
        Some(leaf) if !allowed.contains(&leaf) => return Some(format!("leaf {leaf} not in network")),
        Some(leaf) => {
            if let Some(result) = &reply.result {
                if result.tool() != leaf {
                    return Some(format!("result {} differs from leaf {leaf}", result.tool()));
                }
            }
            if reply.result.is_none() && reply.error.is_none() {
                return Some("neither result nor error".into());
            }
        }
    }
    if let Some(kind) = reply.error.as_ref().map(|e| e.kind.as_str()) {
        if kind == "internal" {
            return Some(format!("internal error: {}", reply.error.as_ref().unwrap().message));
        }
    }
    for step in &reply.trace.steps {
        if let Some(chosen) = &step.chosen {
            if !step.options.contains(chosen) {
                return Some(format!("chose {chosen} outside {:?}", step.options));
            }
        }
    }
    None
}

/// Runs `count` noisy prompts through noisy agents; returns the escapes.
pub fn run_fuzz(count: usize, seed: u64) -> Vec<String> {
    let knowledge = KnowledgeIndex::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut escapes = Vec::new();
    let mut agent = Agent::new(DecisionNetwork::bundled(), NoiseBackend::new(seed), knowledge.clone());
    let mut doc = fresh_doc();
    let mut session = Session::new("fuzz");
    for i in 0..count {
        if i % 50 == 0 {
            agent = Agent::new(DecisionNetwork::bundled(), NoiseBackend::new(seed ^ i as u64), knowledge.clone());
            doc = fresh_doc();
            session = Session::new("fuzz");
        }
        let prompt = fuzz_prompt(&mut rng);
        let reply = agent.handle(&prompt, &mut session, &doc);
        if let Some(reason) = escape_reason(&reply, agent.network()) {
            escapes.push(format!("{prompt:?}: {reason}"));
        }
    }
    escapes
}

fn fresh_doc() -> SharedDocument {
    SharedDocument::new(ModelDocument::in_memory(
        codesign_core::parse_model(codesign_core::AUTOMATED_DRIVING_XML).unwrap(),
    ))
}
