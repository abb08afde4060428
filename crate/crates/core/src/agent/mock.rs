//! Deterministic offline backend.
//!
//! `choose` scores each option by the idf-weighted share of prompt terms
//! found in the option's description and trigger examples, plus the best
//! Jaccard overlap with a single trigger. The highest score wins, ties go to
//! the lexicographically smallest label, and a prompt with no evidence for
//! any option goes to the default (last listed when none is marked).

use std::collections::{BTreeMap, BTreeSet};

use super::backend::{BackendError, ChoiceRequest, ExtractRequest, LmBackend};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "be", "by", "can", "could", "do", "does", "for", "from", "i", "in",
    "is", "it", "its", "me", "my", "of", "on", "or", "our", "please", "so", "that", "the",
    "their", "them", "then", "there", "this", "to", "us", "was", "we", "were", "would", "you",
    "your",
];

const MIN_PREFIX_LEN: usize = 3;

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    default_label: Option<String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Label returned when no option shares a term with the prompt and the
    /// request does not say which option is the default.
    pub fn with_default_label(mut self, label: impl Into<String>) -> Self {
        self.default_label = Some(label.into());
        self
    }

    /// Per-option scores for `request`, in option order.
    pub fn scores(&self, request: &ChoiceRequest<'_>) -> Vec<f64> {
        let prompt = terms(request.prompt);
        let vocab: Vec<BTreeSet<String>> = request
            .options
            .iter()
            .map(|o| {
                let mut v = terms(o.description);
                for t in o.examples {
                    v.extend(terms(t));
                }
                v
            })
            .collect();
        let n = vocab.len() as f64;
        let idf = |term: &str| {
            let df = vocab.iter().filter(|v| v.contains(term)).count();
            (1.0 + n / df.max(1) as f64).ln()
        };
        let weights: BTreeMap<&str, f64> = prompt.iter().map(|t| (t.as_str(), idf(t))).collect();
        let total: f64 = weights.values().sum();

        request
            .options
            .iter()
            .zip(&vocab)
            .map(|(option, vocab)| {
                if prompt.is_empty() {
                    return 0.0;
                }
                let overlap: f64 = weights
                    .iter()
                    .filter(|(t, _)| vocab.contains(**t))
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / total;
                let best_trigger = option
                    .examples
                    .iter()
                    .map(|t| jaccard(&prompt, &terms(t)))
                    .fold(0.0, f64::max);
                overlap + best_trigger
            })
            .collect()
    }
}

impl LmBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn choose(&self, request: &ChoiceRequest<'_>) -> Result<String, BackendError> {
        let scores = self.scores(request);
        let best = request
            .options
            .iter()
            .zip(&scores)
            .filter(|(_, s)| **s > 0.0)
            .max_by(|(a, sa), (b, sb)| sa.total_cmp(sb).then_with(|| b.label.cmp(a.label)));
        if let Some((option, _)) = best {
            return Ok(option.label.to_string());
        }
        let fallback = self
            .default_label
            .as_deref()
            .or_else(|| request.options.last().map(|o| o.label))
            .unwrap_or_default();
        Ok(fallback.to_string())
    }

    /// Lists candidates named in the prompt: case-insensitive exact match,
    /// or a capitalized word of at least three characters that is a prefix
    /// of exactly one candidate.
    fn extract(&self, request: &ExtractRequest<'_>) -> Result<String, BackendError> {
        let mut found: Vec<&str> = Vec::new();
        for word in words(request.prompt) {
            let lower = word.to_lowercase();
            let exact = request
                .candidates
                .iter()
                .find(|c| c.to_lowercase() == lower);
            let hit = exact.or_else(|| {
                let capitalized = word.chars().next().is_some_and(char::is_uppercase);
                if !capitalized || word.chars().count() < MIN_PREFIX_LEN {
                    return None;
                }
                let mut matches = request
                    .candidates
                    .iter()
                    .filter(|c| c.to_lowercase().starts_with(&lower));
                match (matches.next(), matches.next()) {
                    (Some(only), None) => Some(only),
                    _ => None,
                }
            });
            if let Some(hit) = hit {
                if !found.contains(&hit.as_str()) {
                    found.push(hit);
                }
            }
        }
        Ok(if found.is_empty() {
            "NONE".to_string()
        } else {
            found.join(", ")
        })
    }

    fn phrase(&self, facts: &str, _style: &str) -> Result<String, BackendError> {
        Ok(facts.to_string())
    }
}

/// Whitespace-separated words with surrounding punctuation and a trailing
/// possessive removed.
pub(crate) fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || ",;:()?!\"`".contains(c))
        .map(|w| w.trim_matches(|c: char| c == '.' || c == '\'' || c == '*'))
        .map(|w| w.strip_suffix("'s").unwrap_or(w))
        .filter(|w| !w.is_empty())
}

fn terms(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .map(|t| stem(&t))
        .collect()
}

fn stem(term: &str) -> String {
    let n = term.chars().count();
    let strip = |suffix: &str, min: usize| {
        (n >= min && term.ends_with(suffix)).then(|| term[..term.len() - suffix.len()].to_string())
    };
    strip("ies", 5)
        .map(|s| s + "y")
        .or_else(|| strip("ing", 6))
        .or_else(|| strip("ed", 5))
        .or_else(|| (!term.ends_with("ss")).then(|| strip("s", 4)).flatten())
        .unwrap_or_else(|| term.to_string())
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
