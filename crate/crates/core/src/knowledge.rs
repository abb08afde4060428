//! Lexical retrieval over a small corpus of safety-practice notes.
//!
//! Documents are chunked at paragraph boundaries (at most
//! [`MAX_CHUNK_CHARS`] characters per chunk) and scored against a query by
//! term coverage first, then by a saturated TF-IDF weight, so a chunk that
//! contains every query term always outranks one that contains only some.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub const MAX_CHUNK_CHARS: usize = 1000;
pub const INDEX_FORMAT_VERSION: u32 = 1;

const TF_SATURATION: f64 = 1.2;

const BUNDLED_CORPUS: &[(&str, &str)] = &[
    ("critical_path.md", include_str!("../corpus/critical_path.md")),
    ("fault_trees.md", include_str!("../corpus/fault_trees.md")),
    ("functional_safety.md", include_str!("../corpus/functional_safety.md")),
    ("redundancy.md", include_str!("../corpus/redundancy.md")),
    ("single_points_of_failure.md", include_str!("../corpus/single_points_of_failure.md")),
    ("voting_gates.md", include_str!("../corpus/voting_gates.md")),
];

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "can", "do", "does", "for", "from", "how",
    "i", "if", "in", "is", "it", "its", "me", "my", "of", "on", "or", "so", "that", "the", "this",
    "to", "was", "what", "when", "which", "who", "why", "with", "you", "your",
];

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("index file is malformed: {0}")]
    Format(String),

    #[error("index format version {found} is not supported (expected {INDEX_FORMAT_VERSION})")]
    Version { found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocChunk {
    /// `<relative path>#<chunk number>`, unique within an index.
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredChunk {
    pub chunk: DocChunk,
    pub score: f64,
}

/// Inverted index over the chunk texts and titles. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeIndex {
    chunks: Vec<DocChunk>,
    /// term -> (chunk index, term frequency), sorted by chunk index.
    postings: BTreeMap<String, Vec<(usize, u32)>>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    chunks: Vec<DocChunk>,
}

impl KnowledgeIndex {
    /// Indexes every `.md` and `.txt` file below `dir`, in path order.
    pub fn build(dir: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let dir = dir.as_ref();
        let mut chunks = Vec::new();
        let walker = WalkDir::new(dir).sort_by_file_name();
        for entry in walker {
            let entry = entry.map_err(|e| KnowledgeError::Io {
                path: e.path().unwrap_or(dir).to_path_buf(),
                source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
            })?;
            let path = entry.path();
            let is_doc = entry.file_type().is_file()
                && path
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("md") || e.eq_ignore_ascii_case("txt"));
            if !is_doc {
                continue;
            }
            let text = fs::read_to_string(path).map_err(|source| KnowledgeError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let rel = path.strip_prefix(dir).unwrap_or(path);
            let rel_id = rel.to_string_lossy().replace('\\', "/");
            chunks.extend(chunk_document(&rel_id, path, &text));
        }
        if chunks.is_empty() {
            tracing::warn!(dir = %dir.display(), "knowledge corpus is empty");
        }
        Ok(Self::from_chunks(chunks))
    }

    /// Index over the safety notes compiled into the crate.
    pub fn bundled() -> Self {
        let chunks = BUNDLED_CORPUS
            .iter()
            .flat_map(|(name, text)| chunk_document(name, Path::new(name), text))
            .collect();
        Self::from_chunks(chunks)
    }

    pub fn from_chunks(chunks: Vec<DocChunk>) -> Self {
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        for (i, chunk) in chunks.iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for term in tokenize(&chunk.title).chain(tokenize(&chunk.text)) {
                *tf.entry(term).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((i, count));
            }
        }
        KnowledgeIndex { chunks, postings }
    }

    pub fn chunks(&self) -> &[DocChunk] {
        &self.chunks
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Top `k` chunks for `query`, by score descending then doc id. Chunks
    /// sharing no term with the query are never returned.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredChunk> {
        let terms: BTreeSet<String> = tokenize(query).collect();
        let n = self.chunks.len() as f64;
        let weighted: Vec<(&Vec<(usize, u32)>, f64)> = terms
            .iter()
            .filter_map(|t| self.postings.get(t))
            .map(|postings| (postings, (1.0 + n / postings.len() as f64).ln()))
            .collect();
        let total_weight: f64 = weighted.iter().map(|(_, idf)| idf).sum();

        let mut coverage: BTreeMap<usize, (u32, f64)> = BTreeMap::new();
        for (postings, idf) in &weighted {
            for &(i, tf) in postings.iter() {
                let tf = f64::from(tf);
                let entry = coverage.entry(i).or_default();
                entry.0 += 1;
                entry.1 += idf * tf / (tf + TF_SATURATION);
            }
        }

        let mut scored: Vec<ScoredChunk> = coverage
            .into_iter()
            .map(|(i, (matched, weight))| ScoredChunk {
                chunk: self.chunks[i].clone(),
                // integer part: matched terms; fraction: normalized tf-idf < 1
                score: f64::from(matched) + weight / total_weight,
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.chunk.doc_id.cmp(&b.chunk.doc_id))
        });
        scored.truncate(k);
        scored
    }

    /// Serializes the index as a versioned JSON document. Byte-stable for an
    /// unchanged corpus.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&IndexFile {
            version: INDEX_FORMAT_VERSION,
            chunks: self.chunks.clone(),
        })
        .expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KnowledgeError> {
        let file: IndexFile =
            serde_json::from_str(text).map_err(|e| KnowledgeError::Format(e.to_string()))?;
        if file.version != INDEX_FORMAT_VERSION {
            return Err(KnowledgeError::Version {
                found: file.version,
            });
        }
        Ok(Self::from_chunks(file.chunks))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KnowledgeError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| KnowledgeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| KnowledgeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Lowercased alphanumeric terms, stopwords removed.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
}

fn chunk_document(rel_id: &str, source: &Path, text: &str) -> Vec<DocChunk> {
    let title = text
        .lines()
        .find_map(|l| l.trim().strip_prefix('#').map(|h| h.trim_start_matches('#').trim()))
        .filter(|h| !h.is_empty())
        .map(str::to_string)
        .unwrap_or_else(|| {
            source
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| rel_id.to_string())
        });

    let mut pieces = Vec::new();
    for para in paragraphs(text) {
        if para.chars().count() <= MAX_CHUNK_CHARS {
            pieces.push(para);
        } else {
            pieces.extend(split_long(&para));
        }
    }

    let mut chunks: Vec<String> = Vec::new();
    for piece in pieces {
        match chunks.last_mut() {
            Some(cur) if cur.chars().count() + 2 + piece.chars().count() <= MAX_CHUNK_CHARS => {
                cur.push_str("\n\n");
                cur.push_str(&piece);
            }
            _ => chunks.push(piece),
        }
    }

    chunks
        .into_iter()
        .enumerate()
        .map(|(i, text)| DocChunk {
            doc_id: format!("{rel_id}#{i}"),
            title: title.clone(),
            text,
            source: source.to_path_buf(),
        })
        .collect()
}

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(cur.join("\n"));
                cur.clear();
            }
        } else {
            cur.push(line.trim_end());
        }
    }
    if !cur.is_empty() {
        out.push(cur.join("\n"));
    }
    out
}

/// Splits an oversized paragraph at whitespace into pieces of at most
/// `MAX_CHUNK_CHARS` characters. A single word longer than that is cut hard.
fn split_long(para: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for word in para.split_whitespace() {
        let mut word = word.to_string();
        while word.chars().count() > MAX_CHUNK_CHARS {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            let cut: String = word.chars().take(MAX_CHUNK_CHARS).collect();
            word = word.chars().skip(MAX_CHUNK_CHARS).collect();
            out.push(cut);
        }
        let extra = if cur.is_empty() { 0 } else { 1 };
        if cur.chars().count() + extra + word.chars().count() > MAX_CHUNK_CHARS {
            out.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(&word);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
