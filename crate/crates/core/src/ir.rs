//! The intermediate representation: a plain list verbalization of the model
//! that is handed to the language model instead of XML.
//!
//! ```text
//! Nodes:
//!     - <name>
//! Edges:
//!     - <name> --> <name>
//! Attributes:
//!     - <name>: <key> = <value>
//! ```

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::ModelError;
use crate::model::{validate_name, ComponentNode, Edge, NodeDraft, SystemModel};

const INDENT_BULLET: &str = "    - ";
const ARROW: &str = " --> ";

/// Which model element an IR line describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IrElement {
    Node { name: String },
    Edge { from: String, to: String },
    Attribute { node: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IrDocument {
    pub text: String,
    /// 1-based line number to the element rendered on that line.
    pub line_map: BTreeMap<usize, IrElement>,
}

/// Verbalizes `model` in model order. Per node, attributes are listed as
/// gate, start, end, then extra attributes.
pub fn verbalize(model: &SystemModel) -> IrDocument {
    let mut lines: Vec<(String, Option<IrElement>)> = Vec::new();
    lines.push(("Nodes:".into(), None));
    for node in model.nodes() {
        lines.push((
            format!("{INDENT_BULLET}{}", node.name),
            Some(IrElement::Node {
                name: node.name.clone(),
            }),
        ));
    }
    lines.push(("Edges:".into(), None));
    for edge in model.edges() {
        lines.push((
            format!("{INDENT_BULLET}{}{ARROW}{}", edge.from, edge.to),
            Some(IrElement::Edge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            }),
        ));
    }
    lines.push(("Attributes:".into(), None));
    for node in model.nodes() {
        let mut attr = |key: &str, value: &str| {
            lines.push((
                format!("{INDENT_BULLET}{}: {key} = {value}", node.name),
                Some(IrElement::Attribute {
                    node: node.name.clone(),
                    key: key.to_string(),
                }),
            ));
        };
        if let Some(gate) = &node.gate {
            attr("gate", &gate.to_string());
        }
        if node.is_start {
            attr("start", "true");
        }
        if node.is_end {
            attr("end", "true");
        }
        for (key, value) in &node.extra_attributes {
            attr(key, value);
        }
    }

    let mut text = String::new();
    let mut line_map = BTreeMap::new();
    for (i, (line, element)) in lines.into_iter().enumerate() {
        text.push_str(&line);
        text.push('\n');
        if let Some(element) = element {
            line_map.insert(i + 1, element);
        }
    }
    IrDocument { text, line_map }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    None,
    Nodes,
    Edges,
    Attributes,
}

/// Parses IR text back into a model named `system`.
pub fn parse_ir(text: &str) -> Result<SystemModel, ModelError> {
    let mut section = Section::None;
    let mut drafts: Vec<NodeDraft> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let syntax = |message: String| ModelError::IrSyntax {
            line: line_no,
            message,
        };
        if raw.trim().is_empty() {
            continue;
        }
        let header = match raw.trim_end() {
            "Nodes:" => Some(Section::Nodes),
            "Edges:" => Some(Section::Edges),
            "Attributes:" => Some(Section::Attributes),
            _ => None,
        };
        if let Some(next) = header {
            if next as u8 != section as u8 + 1 {
                return Err(syntax(
                    "sections must appear once each, as Nodes:, Edges:, Attributes:".into(),
                ));
            }
            section = next;
            continue;
        }
        let item = raw
            .strip_prefix(INDENT_BULLET)
            .ok_or_else(|| syntax(format!("expected a `{INDENT_BULLET}` list item")))?;
        let unknown = |name: &str| ModelError::UnknownNodeRef {
            name: name.to_string(),
            context: format!("IR line {line_no}"),
        };

        match section {
            Section::None => return Err(syntax("list item before the Nodes: section".into())),
            Section::Nodes => {
                let name = item.trim_end();
                validate_name(name).map_err(|_| syntax(format!("invalid node name `{name}`")))?;
                if index.insert(name.to_string(), drafts.len()).is_some() {
                    return Err(ModelError::DuplicateNode(name.to_string()));
                }
                drafts.push(NodeDraft {
                    node: ComponentNode::new(name),
                    gate_expr: None,
                });
            }
            Section::Edges => {
                let (from, to) = item
                    .trim_end()
                    .split_once(ARROW)
                    .ok_or_else(|| syntax("expected `<name> --> <name>`".into()))?;
                for end in [from, to] {
                    if !index.contains_key(end) {
                        return Err(unknown(end));
                    }
                }
                edges.push(Edge::new(from, to));
            }
            Section::Attributes => {
                let (name, rest) = item
                    .split_once(": ")
                    .ok_or_else(|| syntax("expected `<name>: <key> = <value>`".into()))?;
                let (key, value) = rest
                    .split_once(" = ")
                    .or_else(|| rest.strip_suffix(" =").map(|k| (k, "")))
                    .ok_or_else(|| syntax("expected `<key> = <value>`".into()))?;
                let &slot = index.get(name).ok_or_else(|| unknown(name))?;
                let draft = &mut drafts[slot];
                let flag = |value: &str| match value.trim() {
                    "true" => Ok(true),
                    "false" => Ok(false),
                    other => Err(syntax(format!("expected true or false, got `{other}`"))),
                };
                match key {
                    "gate" if draft.gate_expr.is_some() => {
                        return Err(syntax(format!("second gate for `{name}`")))
                    }
                    "gate" => draft.gate_expr = Some(value.to_string()),
                    "start" => draft.node.is_start = flag(value)?,
                    "end" => draft.node.is_end = flag(value)?,
                    "name" => return Err(syntax("`name` is not an attribute".into())),
                    _ => draft
                        .node
                        .extra_attributes
                        .push((key.to_string(), value.to_string())),
                }
            }
        }
    }
    if section != Section::Attributes {
        return Err(ModelError::IrSyntax {
            line: text.lines().count().max(1),
            message: "missing section; expected Nodes:, Edges: and Attributes:".into(),
        });
    }
    crate::model::assemble("system".into(), drafts, edges)
}
