//! Reading and writing the model XML.
//!
//! ```xml
//! <system name="...">
//!   <node name="Camera1" start="true"/>
//!   <node name="ImageProcessor" gate="2OO3(Camera1,Camera2,Camera3)"/>
//!   <edge from="Camera1" to="ImageProcessor"/>
//! </system>
//! ```
//!
//! Unknown node attributes are kept, in document order, as extra attributes.

use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::Path;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use crate::error::ModelError;
use crate::model::{assemble, ComponentNode, Edge, NodeDraft, SystemModel};

const DEFAULT_SYSTEM_NAME: &str = "system";

/// Parses a model document. The result is at revision 0 with no source path.
pub fn parse_model(xml_text: &str) -> Result<SystemModel, ModelError> {
    let mut reader = Reader::from_str(xml_text);
    reader.config_mut().trim_text(true);

    let mut doc = DocState::default();
    let mut depth = 0usize;
    loop {
        match reader.read_event().map_err(|e| xml_error(&reader, e))? {
            Event::Start(e) => {
                doc.element(&e, depth)?;
                depth += 1;
            }
            Event::Empty(e) => doc.element(&e, depth)?,
            Event::End(_) => depth = depth.saturating_sub(1),
            Event::Text(t) if depth > 0 => {
                let raw = AsRef::<str>::as_ref(&t).trim().to_string();
                if !raw.is_empty() {
                    return Err(ModelError::XmlSyntax(format!(
                        "unexpected text `{raw}` inside model"
                    )));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let name = doc
        .system_name
        .ok_or_else(|| ModelError::XmlSyntax("missing <system> root element".into()))?;
    assemble(name, doc.drafts, doc.edges)
}

#[derive(Default)]
struct DocState {
    system_name: Option<String>,
    drafts: Vec<NodeDraft>,
    edges: Vec<Edge>,
}

impl DocState {
    fn element(&mut self, e: &BytesStart, depth: usize) -> Result<(), ModelError> {
        let name = e.name();
        let tag: &str = name.as_ref();
        match depth {
            0 => {
                if tag != "system" || self.system_name.is_some() {
                    return Err(ModelError::XmlSyntax(format!(
                        "expected a single <system> root element, found <{}>",
                        tag
                    )));
                }
                let name = attributes(e)?
                    .into_iter()
                    .find(|(k, _)| k == "name")
                    .map(|(_, v)| v)
                    .unwrap_or_else(|| DEFAULT_SYSTEM_NAME.to_string());
                self.system_name = Some(name);
            }
            1 => match tag {
                "node" => self.drafts.push(read_node(e)?),
                "edge" => self.edges.push(read_edge(e)?),
                other => tracing::warn!(
                    element = other,
                    "ignoring unknown element in model"
                ),
            },
            _ => {}
        }
        Ok(())
    }
}

/// Reads a model from disk, recording its source path.
pub fn load_model(path: impl AsRef<Path>) -> Result<SystemModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
    Ok(parse_model(&text)?.with_source_path(Some(path.to_path_buf())))
}

/// Renders the model as XML. Attribute order is name, gate, start, end, then
/// extra attributes in their stored order.
pub fn to_xml(model: &SystemModel) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<system name=\"{}\">", escape(model.name()));
    for node in model.nodes() {
        let _ = write!(out, "  <node name=\"{}\"", escape(&node.name));
        if let Some(gate) = &node.gate {
            let _ = write!(out, " gate=\"{}\"", escape(gate.to_string()));
        }
        if node.is_start {
            out.push_str(" start=\"true\"");
        }
        if node.is_end {
            out.push_str(" end=\"true\"");
        }
        for (key, value) in &node.extra_attributes {
            let _ = write!(out, " {key}=\"{}\"", escape(value));
        }
        out.push_str("/>\n");
    }
    for edge in model.edges() {
        let _ = writeln!(
            out,
            "  <edge from=\"{}\" to=\"{}\"/>",
            escape(&edge.from),
            escape(&edge.to)
        );
    }
    out.push_str("</system>\n");
    out
}

/// Writes the model atomically: the XML goes to a temporary file in the target
/// directory, which is then renamed over `path`.
pub fn write_model(model: &SystemModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    write_model_with(model, path.as_ref(), |_| Ok(()))
}

/// Like [`write_model`], running `before_rename` once the temporary file is
/// complete. An error from the hook aborts the write and leaves `path` untouched.
pub fn write_model_with(
    model: &SystemModel,
    path: &Path,
    before_rename: impl FnOnce(&Path) -> io::Result<()>,
) -> Result<(), ModelError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".codesign-")
        .suffix(".xml.tmp")
        .tempfile_in(dir)
        .map_err(|e| ModelError::io(path, e))?;
    tmp.write_all(to_xml(model).as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| ModelError::io(path, e))?;
    before_rename(tmp.path()).map_err(|e| ModelError::io(path, e))?;
    tmp.persist(path).map_err(|e| ModelError::io(path, e.error))?;
    Ok(())
}

fn xml_error(reader: &Reader<&[u8]>, err: quick_xml::Error) -> ModelError {
    ModelError::XmlSyntax(format!("{err} at byte {}", reader.error_position()))
}

fn attributes(e: &BytesStart) -> Result<Vec<(String, String)>, ModelError> {
    let mut out = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| ModelError::XmlSyntax(err.to_string()))?;
        let key = AsRef::<str>::as_ref(&attr.key).to_string();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|err| ModelError::XmlSyntax(err.to_string()))?
            .into_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn parse_flag(node: &str, key: &str, value: &str) -> Result<bool, ModelError> {
    if value.eq_ignore_ascii_case("true") {
        Ok(true)
    } else if value.eq_ignore_ascii_case("false") {
        Ok(false)
    } else {
        Err(ModelError::InvalidAttribute {
            node: node.to_string(),
            key: key.to_string(),
            reason: format!("expected true or false, got `{value}`"),
        })
    }
}

fn read_node(e: &BytesStart) -> Result<NodeDraft, ModelError> {
    let attrs = attributes(e)?;
    let name = attrs
        .iter()
        .find(|(k, _)| k == "name")
        .map(|(_, v)| v.clone())
        .ok_or_else(|| ModelError::XmlSyntax("<node> without a name attribute".into()))?;
    let mut node = ComponentNode::new(name.clone());
    let mut gate_expr = None;
    for (key, value) in attrs {
        match key.as_str() {
            "name" => {}
            "gate" => gate_expr = Some(value),
            "start" => node.is_start = parse_flag(&name, &key, &value)?,
            "end" => node.is_end = parse_flag(&name, &key, &value)?,
            _ => node.extra_attributes.push((key, value)),
        }
    }
    Ok(NodeDraft { node, gate_expr })
}

fn read_edge(e: &BytesStart) -> Result<Edge, ModelError> {
    let attrs = attributes(e)?;
    let get = |key: &str| {
        attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ModelError::XmlSyntax(format!("<edge> without a `{key}` attribute")))
    };
    Ok(Edge::new(get("from")?, get("to")?))
}
