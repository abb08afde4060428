//! Fault-tolerance mutations: node replication and redundancy suggestions.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::analysis::find_spofs;
use crate::error::{AnalysisError, MutationError};
use crate::gate::{FaultGate, GateInput, GateKind};
use crate::model::{ComponentNode, Edge, SystemModel};

pub const DEFAULT_COPIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[non_exhaustive]
pub enum MutationKind {
    ReplicateNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationPlan {
    pub kind: MutationKind,
    /// Empty when there is nothing to replicate.
    pub target: String,
    pub replica_names: Vec<String>,
    pub rationale: String,
}

impl MutationPlan {
    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    fn empty() -> Self {
        MutationPlan {
            kind: MutationKind::ReplicateNode,
            target: String::new(),
            replica_names: Vec::new(),
            rationale: "no single points of failure".into(),
        }
    }
}

impl Serialize for MutationPlan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("MutationPlan", 4)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("target", &self.target)?;
        st.serialize_field("replicas", &self.replica_names)?;
        st.serialize_field("rationale", &self.rationale)?;
        st.end()
    }
}

pub fn replica_names(target: &str, copies: usize) -> Vec<String> {
    (1..=copies).map(|i| format!("{target}_{i}")).collect()
}

/// Replaces `target` with `copies` replicas.
///
/// Each replica inherits the target's edges, gate and start/end flags.
/// Every consumer sees the replica group as a single all-of input: its gate
/// gets `target` substituted by `nOOn(replicas)`, and a consumer without an
/// explicit gate gains `AND(...)` over its inputs with the group in place of
/// the target. The result carries the next revision.
pub fn replicate_node(
    model: &SystemModel,
    target: &str,
    copies: usize,
) -> Result<SystemModel, MutationError> {
    if !model.contains(target) {
        return Err(MutationError::UnknownNodeRef(target.to_string()));
    }
    if copies < 2 {
        return Err(MutationError::InvalidCopies(copies));
    }
    if model.len() == 1 {
        return Err(MutationError::TrivialModel(target.to_string()));
    }
    let replicas = replica_names(target, copies);
    if let Some(taken) = replicas.iter().find(|r| model.contains(r)) {
        return Err(MutationError::NameCollision(taken.clone()));
    }

    let group = GateInput::Group(
        FaultGate::new(
            GateKind::KOutOfN(copies),
            replicas.iter().cloned().map(GateInput::Node).collect(),
        )
        .expect("replica names are distinct"),
    );

    let consumers = model.out_neighbors(target);
    let mut nodes = Vec::with_capacity(model.len() + copies - 1);
    for node in model.nodes() {
        if node.name == target {
            nodes.extend(replicas.iter().map(|r| ComponentNode {
                name: r.clone(),
                ..node.clone()
            }));
            continue;
        }
        let mut node = node.clone();
        if consumers.contains(&node.name.as_str()) {
            let gate = match &node.gate {
                Some(gate) => gate.substitute(target, &group),
                None => {
                    let inputs = model
                        .in_neighbors(&node.name)
                        .into_iter()
                        .map(|n| {
                            if n == target {
                                group.clone()
                            } else {
                                GateInput::Node(n.to_string())
                            }
                        })
                        .collect();
                    FaultGate::new(GateKind::And, inputs)?
                }
            };
            node.gate = Some(gate);
        }
        nodes.push(node);
    }

    let mut edges = Vec::with_capacity(model.edges().len());
    for edge in model.edges() {
        if edge.from == target {
            edges.extend(replicas.iter().map(|r| Edge::new(r.clone(), edge.to.clone())));
        } else if edge.to == target {
            edges.extend(replicas.iter().map(|r| Edge::new(edge.from.clone(), r.clone())));
        } else {
            edges.push(edge.clone());
        }
    }

    Ok(SystemModel::new(model.name(), nodes, edges)?
        .with_revision(model.revision() + 1)
        .with_source_path(model.source_path().map(Into::into)))
}

/// Picks the single point of failure with the most inputs (ties broken by
/// name) as the replication candidate.
pub fn suggest_redundancy(model: &SystemModel) -> Result<MutationPlan, AnalysisError> {
    let report = find_spofs(model)?;
    let Some(target) = report
        .spofs
        .iter()
        .max_by(|a, b| {
            model
                .in_degree(a)
                .cmp(&model.in_degree(b))
                .then_with(|| b.cmp(a))
        })
        .cloned()
    else {
        return Ok(MutationPlan::empty());
    };

    let inputs = model.in_neighbors(&target);
    let consumers = model.out_neighbors(&target);
    let mut rationale = format!(
        "{target} is a single point of failure: its failure alone reaches end node {}.",
        report.witness[&target]
    );
    if !inputs.is_empty() {
        rationale.push_str(&format!(
            " It depends on {} input(s) ({}), the most among the single points of failure.",
            inputs.len(),
            inputs.join(", ")
        ));
    }
    if !consumers.is_empty() {
        rationale.push_str(&format!(
            " Its output feeds {}.",
            consumers.join(", ")
        ));
    }
    rationale.push_str(&format!(
        " Replicating it into {DEFAULT_COPIES} instances lets the system keep working when one instance fails."
    ));

    Ok(MutationPlan {
        kind: MutationKind::ReplicateNode,
        replica_names: replica_names(&target, DEFAULT_COPIES),
        target,
        rationale,
    })
}
