//! The system model graph: named components, directed edges, fault gates and
//! start/end markers.

use std::borrow::Cow;
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::ModelError;
use crate::gate::FaultGate;

/// Attribute keys with dedicated meaning; everything else is an extra attribute.
pub const RESERVED_ATTRIBUTES: [&str; 4] = ["name", "gate", "start", "end"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentNode {
    pub name: String,
    pub gate: Option<FaultGate>,
    pub is_start: bool,
    pub is_end: bool,
    pub extra_attributes: Vec<(String, String)>,
}

impl ComponentNode {
    pub fn new(name: impl Into<String>) -> Self {
        ComponentNode {
            name: name.into(),
            gate: None,
            is_start: false,
            is_end: false,
            extra_attributes: Vec::new(),
        }
    }

    pub fn start(mut self) -> Self {
        self.is_start = true;
        self
    }

    pub fn end(mut self) -> Self {
        self.is_end = true;
        self
    }

    pub fn with_gate(mut self, gate: FaultGate) -> Self {
        self.gate = Some(gate);
        self
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra_attributes.push((key.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// A validated, acyclic system model. Immutable once built; mutations produce
/// a new value with a bumped revision.
#[derive(Debug, Clone)]
pub struct SystemModel {
    name: String,
    nodes: Vec<ComponentNode>,
    edges: Vec<Edge>,
    revision: u64,
    source_path: Option<PathBuf>,
    index: HashMap<String, usize>,
    inputs: Vec<Vec<usize>>,
    outputs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for SystemModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.revision == other.revision
            && self.source_path == other.source_path
            && self.structure_eq(other)
    }
}

impl SystemModel {
    /// Validates the parts and builds a model at revision 0.
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<ComponentNode>,
        edges: Vec<Edge>,
    ) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            validate_name(&node.name)?;
            if index.insert(node.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(node.name.clone()));
            }
        }

        let mut inputs = vec![Vec::new(); nodes.len()];
        let mut outputs = vec![Vec::new(); nodes.len()];
        let mut seen = HashSet::with_capacity(edges.len());
        for edge in &edges {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| ModelError::UnknownNodeRef {
                    name: name.to_string(),
                    context: format!("edge {} --> {}", edge.from, edge.to),
                })
            };
            let (from, to) = (lookup(&edge.from)?, lookup(&edge.to)?);
            if !seen.insert((from, to)) {
                return Err(ModelError::DuplicateEdge(edge.from.clone(), edge.to.clone()));
            }
            outputs[from].push(to);
            inputs[to].push(from);
        }

        let topo = match topological_order(&inputs, &outputs) {
            Some(order) => order,
            None => {
                let cycle = find_cycle(&outputs)
                    .into_iter()
                    .map(|i| nodes[i].name.clone())
                    .collect();
                return Err(ModelError::CycleDetected { cycle });
            }
        };

        for (i, node) in nodes.iter().enumerate() {
            validate_attributes(node)?;
            let Some(gate) = &node.gate else { continue };
            if inputs[i].is_empty() {
                return Err(ModelError::GateOnSource(node.name.clone()));
            }
            let neighbors: BTreeSet<&str> =
                inputs[i].iter().map(|&j| nodes[j].name.as_str()).collect();
            let mut leaves = BTreeSet::new();
            for leaf in gate.leaves() {
                if !neighbors.contains(leaf) {
                    return Err(ModelError::UnknownNodeRef {
                        name: leaf.to_string(),
                        context: format!("gate of `{}` does not match an input edge", node.name),
                    });
                }
                if !leaves.insert(leaf) {
                    return Err(ModelError::BadGateExpr {
                        expr: gate.to_string(),
                        reason: format!("input `{leaf}` listed more than once"),
                    });
                }
            }
        }

        Ok(SystemModel {
            name: name.into(),
            nodes,
            edges,
            revision: 0,
            source_path: None,
            index,
            inputs,
            outputs,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    pub fn with_revision(mut self, revision: u64) -> Self {
        self.revision = revision;
        self
    }

    pub fn with_source_path(mut self, path: Option<PathBuf>) -> Self {
        self.source_path = path;
        self
    }

    pub fn nodes(&self) -> &[ComponentNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn node(&self, name: &str) -> Option<&ComponentNode> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Input components of `name`, in edge document order.
    pub fn in_neighbors(&self, name: &str) -> Vec<&str> {
        self.index_of(name)
            .map(|i| self.inputs[i].iter().map(|&j| self.nodes[j].name.as_str()).collect())
            .unwrap_or_default()
    }

    /// Consumers of `name`, in edge document order.
    pub fn out_neighbors(&self, name: &str) -> Vec<&str> {
        self.index_of(name)
            .map(|i| self.outputs[i].iter().map(|&j| self.nodes[j].name.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn in_degree(&self, name: &str) -> usize {
        self.index_of(name).map_or(0, |i| self.inputs[i].len())
    }

    pub(crate) fn input_indices(&self, i: usize) -> &[usize] {
        &self.inputs[i]
    }

    pub(crate) fn output_indices(&self, i: usize) -> &[usize] {
        &self.outputs[i]
    }

    /// Node indices in topological order, ties broken by document order.
    pub fn topological_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn start_nodes(&self) -> impl Iterator<Item = &ComponentNode> {
        self.nodes.iter().filter(|n| n.is_start)
    }

    pub fn end_nodes(&self) -> impl Iterator<Item = &ComponentNode> {
        self.nodes.iter().filter(|n| n.is_end)
    }

    /// The gate that decides whether `name` turns faulty: its explicit gate, or
    /// AND over all inputs when none is given. Source nodes have no gate.
    pub fn effective_gate(&self, name: &str) -> Option<Cow<'_, FaultGate>> {
        let i = self.index_of(name)?;
        self.effective_gate_at(i)
    }

    pub(crate) fn effective_gate_at(&self, i: usize) -> Option<Cow<'_, FaultGate>> {
        if let Some(gate) = &self.nodes[i].gate {
            return Some(Cow::Borrowed(gate));
        }
        if self.inputs[i].is_empty() {
            return None;
        }
        let names = self.inputs[i].iter().map(|&j| self.nodes[j].name.clone());
        Some(Cow::Owned(
            FaultGate::and(names).expect("in-neighbors are distinct and non-empty"),
        ))
    }

    /// Equality on nodes, edges, gates, flags and extra attributes only.
    pub fn structure_eq(&self, other: &SystemModel) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

/// Names must be non-empty and free of whitespace and of the characters that
/// delimit gate expressions, IR lines and edges.
pub fn validate_name(name: &str) -> Result<(), ModelError> {
    let bad = name.is_empty()
        || name.contains("-->")
        || name
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, '(' | ')' | ',' | ':'));
    if bad {
        Err(ModelError::InvalidName(name.to_string()))
    } else {
        Ok(())
    }
}

fn validate_attributes(node: &ComponentNode) -> Result<(), ModelError> {
    let mut keys = HashSet::new();
    for (key, value) in &node.extra_attributes {
        let invalid = |reason: &str| ModelError::InvalidAttribute {
            node: node.name.clone(),
            key: key.clone(),
            reason: reason.to_string(),
        };
        let mut chars = key.chars();
        let well_formed = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if !well_formed {
            return Err(invalid("key must be an XML name"));
        }
        if RESERVED_ATTRIBUTES.contains(&key.as_str()) {
            return Err(invalid("key is reserved"));
        }
        if !keys.insert(key.as_str()) {
            return Err(invalid("key is repeated"));
        }
        if value.chars().any(char::is_control) {
            return Err(invalid("value contains control characters"));
        }
    }
    Ok(())
}

fn topological_order(inputs: &[Vec<usize>], outputs: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut pending: Vec<usize> = inputs.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = pending
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(inputs.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &j in &outputs[i] {
            pending[j] -= 1;
            if pending[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    (order.len() == inputs.len()).then_some(order)
}

/// Returns the nodes of one cycle, starting from the node where the back edge lands.
fn find_cycle(outputs: &[Vec<usize>]) -> Vec<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        OnStack,
        Done,
    }
    let mut mark = vec![Mark::New; outputs.len()];
    for root in 0..outputs.len() {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::OnStack;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = outputs[v].get(*next) {
                *next += 1;
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::OnStack;
                        stack.push((w, 0));
                    }
                    Mark::OnStack => {
                        let pos = stack.iter().position(|&(u, _)| u == w).unwrap();
                        return stack[pos..].iter().map(|&(u, _)| u).collect();
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
            }
        }
    }
    Vec::new()
}

struct NodeView<'a> {
    node: &'a ComponentNode,
    effective_gate: Option<String>,
}

impl Serialize for NodeView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Attr<'a> {
            key: &'a str,
            value: &'a str,
        }
        let mut st = s.serialize_struct("Node", 6)?;
        st.serialize_field("name", &self.node.name)?;
        st.serialize_field("gate", &self.node.gate.as_ref().map(ToString::to_string))?;
        st.serialize_field("effective_gate", &self.effective_gate)?;
        st.serialize_field("start", &self.node.is_start)?;
        st.serialize_field("end", &self.node.is_end)?;
        let attrs: Vec<Attr> = self
            .node
            .extra_attributes
            .iter()
            .map(|(key, value)| Attr { key, value })
            .collect();
        st.serialize_field("attributes", &attrs)?;
        st.end()
    }
}

/// JSON snapshot used by the HTTP API: name, revision, nodes and edges.
impl Serialize for SystemModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let nodes: Vec<NodeView> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| NodeView {
                node,
                effective_gate: self.effective_gate_at(i).map(|g| g.to_string()),
            })
            .collect();
        let mut st = s.serialize_struct("SystemModel", 4)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("revision", &self.revision)?;
        st.serialize_field("nodes", &nodes)?;
        st.serialize_field("edges", &self.edges)?;
        st.end()
    }
}

/// A node whose gate is still unparsed text, as read from a document.
pub(crate) struct NodeDraft {
    pub node: ComponentNode,
    pub gate_expr: Option<String>,
}

/// Validates structure first, then parses each gate against the node's inputs.
pub(crate) fn assemble(
    name: String,
    drafts: Vec<NodeDraft>,
    edges: Vec<Edge>,
) -> Result<SystemModel, ModelError> {
    let mut exprs = Vec::with_capacity(drafts.len());
    let mut nodes = Vec::with_capacity(drafts.len());
    for draft in drafts {
        exprs.push(draft.gate_expr);
        nodes.push(draft.node);
    }
    let skeleton = SystemModel::new(name.clone(), nodes, edges)?;
    if exprs.iter().all(Option::is_none) {
        return Ok(skeleton);
    }
    let mut nodes = skeleton.nodes.clone();
    for (node, expr) in nodes.iter_mut().zip(&exprs) {
        let Some(expr) = expr else { continue };
        let neighbors: BTreeSet<&str> = skeleton.in_neighbors(&node.name).into_iter().collect();
        if neighbors.is_empty() {
            return Err(ModelError::GateOnSource(node.name.clone()));
        }
        node.gate = Some(FaultGate::parse(expr, &neighbors)?);
    }
    SystemModel::new(name, nodes, skeleton.edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> SystemModel {
        SystemModel::new(
            "chain",
            vec![
                ComponentNode::new("S").start(),
                ComponentNode::new("A"),
                ComponentNode::new("E").end(),
            ],
            vec![Edge::new("S", "A"), Edge::new("A", "E")],
        )
        .unwrap()
    }

    #[test]
    fn neighbors_and_effective_gate() {
        let m = chain();
        assert_eq!(m.in_neighbors("A"), vec!["S"]);
        assert_eq!(m.out_neighbors("A"), vec!["E"]);
        assert!(m.effective_gate("S").is_none());
        assert_eq!(m.effective_gate("E").unwrap().to_string(), "AND(A)");
    }

    #[test]
    fn topological_order_is_document_stable() {
        let m = SystemModel::new(
            "t",
            vec![
                ComponentNode::new("C"),
                ComponentNode::new("B"),
                ComponentNode::new("A"),
            ],
            vec![Edge::new("B", "C"), Edge::new("A", "C")],
        )
        .unwrap();
        let names: Vec<_> = m.topological_indices().iter().map(|&i| &m.nodes()[i].name).collect();
        assert_eq!(names, ["B", "A", "C"]);
    }

    #[test]
    fn rejects_cycles_with_witness() {
        let err = SystemModel::new(
            "c",
            vec![ComponentNode::new("A"), ComponentNode::new("B")],
            vec![Edge::new("A", "B"), Edge::new("B", "A")],
        )
        .unwrap_err();
        match err {
            ModelError::CycleDetected { cycle } => assert_eq!(cycle, ["A", "B"]),
            other => panic!("unexpected {other:?}"),
        }
        let err = SystemModel::new("c", vec![ComponentNode::new("A")], vec![Edge::new("A", "A")])
            .unwrap_err();
        assert!(matches!(err, ModelError::CycleDetected { cycle } if cycle == ["A"]));
    }

    #[test]
    fn rejects_structural_violations() {
        let dup = SystemModel::new("d", vec![ComponentNode::new("A"), ComponentNode::new("A")], vec![]);
        assert!(matches!(dup, Err(ModelError::DuplicateNode(n)) if n == "A"));

        let dangling = SystemModel::new("d", vec![ComponentNode::new("A")], vec![Edge::new("A", "Z")]);
        assert!(matches!(dangling, Err(ModelError::UnknownNodeRef { name, .. }) if name == "Z"));

        for bad in ["", "two words", "a-->b", "f(x)", "a,b", "a:b"] {
            let r = SystemModel::new("d", vec![ComponentNode::new(bad)], vec![]);
            assert!(matches!(r, Err(ModelError::InvalidName(_))), "{bad:?}");
        }

        let source_gate = SystemModel::new(
            "d",
            vec![ComponentNode::new("A").with_gate(FaultGate::or(["B"]).unwrap()), ComponentNode::new("B")],
            vec![],
        );
        assert!(matches!(source_gate, Err(ModelError::GateOnSource(n)) if n == "A"));

        let reserved = SystemModel::new("d", vec![ComponentNode::new("A").with_attribute("gate", "x")], vec![]);
        assert!(matches!(reserved, Err(ModelError::InvalidAttribute { .. })));
    }

    #[test]
    fn gate_leaves_must_be_inputs() {
        let r = SystemModel::new(
            "g",
            vec![
                ComponentNode::new("A"),
                ComponentNode::new("B"),
                ComponentNode::new("C").with_gate(FaultGate::or(["A", "B"]).unwrap()),
            ],
            vec![Edge::new("A", "C")],
        );
        assert!(matches!(r, Err(ModelError::UnknownNodeRef { name, .. }) if name == "B"));
    }
}
