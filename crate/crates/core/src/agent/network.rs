//! The decision network: a tree of small multiple-choice decisions whose
//! leaves name the tool that serves a request.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 4;

/// The bundled decision network.
pub const DEFAULT_NETWORK_XML: &str = include_str!("../../config/decision_network.xml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolKind {
    AnswerSafetyQuestion,
    PropagateFaults,
    CriticalPath,
    FindSpofs,
    SuggestRedundancy,
    ReplicateNode,
    Fallback,
}

impl ToolKind {
    pub const ALL: [ToolKind; 7] = [
        ToolKind::AnswerSafetyQuestion,
        ToolKind::PropagateFaults,
        ToolKind::CriticalPath,
        ToolKind::FindSpofs,
        ToolKind::SuggestRedundancy,
        ToolKind::ReplicateNode,
        ToolKind::Fallback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolKind::AnswerSafetyQuestion => "AnswerSafetyQuestion",
            ToolKind::PropagateFaults => "PropagateFaults",
            ToolKind::CriticalPath => "CriticalPath",
            ToolKind::FindSpofs => "FindSpofs",
            ToolKind::SuggestRedundancy => "SuggestRedundancy",
            ToolKind::ReplicateNode => "ReplicateNode",
            ToolKind::Fallback => "Fallback",
        }
    }

    pub fn is_mutation(self) -> bool {
        matches!(self, ToolKind::ReplicateNode)
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tool `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Next {
    Decision(DecisionNode),
    Task(ToolKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConceptOption {
    pub id: String,
    pub description: String,
    pub triggers: Vec<String>,
    /// Chosen when the backend finds no evidence for any option.
    pub is_default: bool,
    pub next: Next,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionNode {
    pub id: String,
    pub question: String,
    pub options: Vec<ConceptOption>,
}

impl DecisionNode {
    pub fn option(&self, id: &str) -> Option<&ConceptOption> {
        self.options.iter().find(|o| o.id == id)
    }

    pub fn default_option(&self) -> Option<&ConceptOption> {
        self.options.iter().find(|o| o.is_default)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed decision network: {0}")]
    Syntax(String),

    #[error("decision `{decision}`: {reason}")]
    Invalid { decision: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionNetwork {
    root: DecisionNode,
}

impl DecisionNetwork {
    pub fn new(root: DecisionNode) -> Result<Self, NetworkError> {
        let mut ids = BTreeSet::new();
        validate(&root, &mut ids)?;
        Ok(DecisionNetwork { root })
    }

    pub fn bundled() -> Self {
        Self::from_xml(DEFAULT_NETWORK_XML).expect("bundled decision network is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_xml(&text)
    }

    pub fn root(&self) -> &DecisionNode {
        &self.root
    }

    /// Every leaf with the option path that reaches it, in document order.
    pub fn leaves(&self) -> Vec<(Vec<String>, ToolKind)> {
        fn walk(node: &DecisionNode, path: &mut Vec<String>, out: &mut Vec<(Vec<String>, ToolKind)>) {
            for option in &node.options {
                path.push(option.id.clone());
                match &option.next {
                    Next::Task(tool) => out.push((path.clone(), *tool)),
                    Next::Decision(child) => walk(child, path, out),
                }
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    pub fn leaf_tools(&self) -> BTreeSet<ToolKind> {
        self.leaves().into_iter().map(|(_, t)| t).collect()
    }

    /// Parses the network file format:
    ///
    /// ```xml
    /// <network>
    ///   <decision id="root" question="...">
    ///     <option id="a" description="..." default="true">
    ///       <trigger>example prompt</trigger>
    ///       <task tool="FindSpofs"/>
    ///     </option>
    ///     <option id="b" description="...">
    ///       <trigger>...</trigger>
    ///       <decision id="..." question="..."> ... </decision>
    ///     </option>
    ///   </decision>
    /// </network>
    /// ```
    pub fn from_xml(text: &str) -> Result<Self, NetworkError> {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);
        let syntax = |m: String| NetworkError::Syntax(m);

        let mut stack: Vec<Frame> = Vec::new();
        let mut root: Option<DecisionNode> = None;
        let mut seen_network = false;

        loop {
            let event = reader
                .read_event()
                .map_err(|e| syntax(format!("at byte {}: {e}", reader.error_position())))?;
            match event {
                Event::Start(e) => open(&e, &mut stack, &mut seen_network, false)?,
                Event::Empty(e) => {
                    open(&e, &mut stack, &mut seen_network, true)?;
                    close(&mut stack, &mut root)?;
                }
                Event::End(_) => close(&mut stack, &mut root)?,
                Event::Text(t) => {
                    let text: &str = t.as_ref();
                    match stack.last_mut() {
                        Some(Frame::Trigger(buf)) => buf.push_str(text),
                        _ if text.trim().is_empty() => {}
                        _ => return Err(syntax(format!("unexpected text `{}`", text.trim()))),
                    }
                }
                Event::GeneralRef(r) => {
                    let resolved = match r.resolve_char_ref().map_err(|e| syntax(e.to_string()))? {
                        Some(c) => c.to_string(),
                        None => quick_xml::escape::resolve_predefined_entity(&r)
                            .ok_or_else(|| syntax(format!("unknown entity `&{};`", &*r)))?
                            .to_string(),
                    };
                    match stack.last_mut() {
                        Some(Frame::Trigger(buf)) => buf.push_str(&resolved),
                        _ => return Err(syntax("unexpected entity reference".into())),
                    }
                }
                Event::CData(t) => match stack.last_mut() {
                    Some(Frame::Trigger(buf)) => {
                        buf.push_str(&t.into_inner())
                    }
                    _ => return Err(syntax("unexpected CDATA".into())),
                },
                Event::Eof => break,
                _ => {}
            }
        }
        if !stack.is_empty() {
            return Err(syntax("unclosed element".into()));
        }
        let root = root.ok_or_else(|| syntax("no root <decision> element".into()))?;
        DecisionNetwork::new(root)
    }
}

enum Frame {
    Network,
    Decision(DecisionNode),
    Option {
        option: ConceptOption,
        next: Option<Next>,
    },
    Trigger(String),
    Task,
}

fn attr(e: &BytesStart, key: &str) -> Result<Option<String>, NetworkError> {
    for a in e.attributes() {
        let a = a.map_err(|e| NetworkError::Syntax(e.to_string()))?;
        let k: &str = a.key.as_ref();
        if k == key {
            let v = a
                .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                .map_err(|e| NetworkError::Syntax(e.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart, tag: &str, key: &str) -> Result<String, NetworkError> {
    attr(e, key)?.ok_or_else(|| NetworkError::Syntax(format!("<{tag}> needs a `{key}` attribute")))
}

fn open(
    e: &BytesStart,
    stack: &mut Vec<Frame>,
    seen_network: &mut bool,
    empty: bool,
) -> Result<(), NetworkError> {
    let name = e.name();
    let tag: &str = name.as_ref();
    let misplaced = || NetworkError::Syntax(format!("<{tag}> is not allowed here"));
    let frame = match (tag, stack.last()) {
        ("network", None) if !*seen_network => {
            *seen_network = true;
            Frame::Network
        }
        ("decision", Some(Frame::Network)) | ("decision", Some(Frame::Option { next: None, .. })) => {
            if empty {
                return Err(NetworkError::Syntax("<decision> needs options".into()));
            }
            Frame::Decision(DecisionNode {
                id: required(e, tag, "id")?,
                question: required(e, tag, "question")?,
                options: Vec::new(),
            })
        }
        ("option", Some(Frame::Decision(_))) => {
            let is_default = match attr(e, "default")?.as_deref() {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => {
                    return Err(NetworkError::Syntax(format!(
                        "`default` must be true or false, got `{other}`"
                    )))
                }
            };
            Frame::Option {
                option: ConceptOption {
                    id: required(e, tag, "id")?,
                    description: required(e, tag, "description")?,
                    triggers: Vec::new(),
                    is_default,
                    next: Next::Task(ToolKind::Fallback),
                },
                next: None,
            }
        }
        ("trigger", Some(Frame::Option { .. })) => Frame::Trigger(String::new()),
        ("task", Some(Frame::Option { next: None, .. })) => {
            let tool: ToolKind = required(e, tag, "tool")?
                .parse()
                .map_err(NetworkError::Syntax)?;
            if let Some(Frame::Option { next, .. }) = stack.last_mut() {
                *next = Some(Next::Task(tool));
            }
            Frame::Task
        }
        _ => return Err(misplaced()),
    };
    stack.push(frame);
    Ok(())
}

fn close(stack: &mut Vec<Frame>, root: &mut Option<DecisionNode>) -> Result<(), NetworkError> {
    let frame = stack
        .pop()
        .ok_or_else(|| NetworkError::Syntax("unbalanced end tag".into()))?;
    match (frame, stack.last_mut()) {
        (Frame::Network, _) | (Frame::Task, _) => {}
        (Frame::Trigger(text), Some(Frame::Option { option, .. })) => {
            let text = text.trim();
            if !text.is_empty() {
                option.triggers.push(text.to_string());
            }
        }
        (Frame::Option { mut option, next }, Some(Frame::Decision(decision))) => {
            option.next = next.ok_or_else(|| NetworkError::Invalid {
                decision: decision.id.clone(),
                reason: format!("option `{}` has neither a <task> nor a <decision>", option.id),
            })?;
            decision.options.push(option);
        }
        (Frame::Decision(node), Some(Frame::Option { next, .. })) => {
            *next = Some(Next::Decision(node));
        }
        (Frame::Decision(node), Some(Frame::Network)) => {
            if root.replace(node).is_some() {
                return Err(NetworkError::Syntax("more than one root <decision>".into()));
            }
        }
        _ => return Err(NetworkError::Syntax("unexpected element nesting".into())),
    }
    Ok(())
}

fn validate(node: &DecisionNode, ids: &mut BTreeSet<String>) -> Result<(), NetworkError> {
    let invalid = |reason: String| NetworkError::Invalid {
        decision: node.id.clone(),
        reason,
    };
    if !ids.insert(node.id.clone()) {
        return Err(invalid("decision id is used twice".into()));
    }
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&node.options.len()) {
        return Err(invalid(format!(
            "has {} options, expected {MIN_OPTIONS} to {MAX_OPTIONS}",
            node.options.len()
        )));
    }
    let mut option_ids = BTreeSet::new();
    for option in &node.options {
        if option.id.trim().is_empty() || option.id.chars().any(char::is_whitespace) {
            return Err(invalid(format!("option id `{}` is empty or has whitespace", option.id)));
        }
        if !option_ids.insert(option.id.to_lowercase()) {
            return Err(invalid(format!("option `{}` appears twice", option.id)));
        }
        if option.triggers.is_empty() {
            return Err(invalid(format!("option `{}` has no trigger examples", option.id)));
        }
        if let Next::Decision(child) = &option.next {
            validate(child, ids)?;
        }
    }
    if node.options.iter().filter(|o| o.is_default).count() > 1 {
        return Err(invalid("more than one default option".into()));
    }
    Ok(())
}
