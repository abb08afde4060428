//! Deterministic safety analyses: gate evaluation, fault propagation, critical
//! path search and single-point-of-failure detection.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::gate::FaultGate;
use crate::model::SystemModel;

/// Faults assigned to a model: the seeded ones and those derived from them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct FaultState {
    pub seeded: BTreeSet<String>,
    pub derived: BTreeSet<String>,
}

impl FaultState {
    pub fn faulty(&self) -> BTreeSet<String> {
        self.seeded.union(&self.derived).cloned().collect()
    }

    pub fn is_faulty(&self, name: &str) -> bool {
        self.seeded.contains(name) || self.derived.contains(name)
    }

    pub fn is_empty(&self) -> bool {
        self.seeded.is_empty() && self.derived.is_empty()
    }
}

impl Serialize for FaultState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FaultState", 3)?;
        st.serialize_field("faulty", &self.faulty())?;
        st.serialize_field("seeded", &self.seeded)?;
        st.serialize_field("derived", &self.derived)?;
        st.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathResult {
    pub paths: Vec<Vec<String>>,
    pub node_union: BTreeSet<String>,
    pub excluded_faults: BTreeSet<String>,
}

impl PathResult {
    /// True when exclusions (or the graph itself) leave no start-to-end route.
    pub fn all_paths_blocked(&self) -> bool {
        self.paths.is_empty()
    }
}

impl Serialize for PathResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PathResult", 2)?;
        st.serialize_field("paths", &self.paths)?;
        st.serialize_field("node_union", &self.node_union)?;
        st.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpofReport {
    pub spofs: BTreeSet<String>,
    /// For each SPOF, the lexicographically first end node its failure reaches.
    pub witness: BTreeMap<String, String>,
}

pub fn eval_gate(gate: &FaultGate, faulty: &BTreeSet<String>) -> bool {
    gate.eval_with(&|name| faulty.contains(name))
}

/// Propagates seeded faults in one topological pass. A node turns faulty when
/// seeded or when its effective gate fires over its inputs' states; source
/// nodes only fail when seeded.
pub fn propagate<I, S>(model: &SystemModel, seeds: I) -> Result<FaultState, AnalysisError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seeded_idx = vec![false; model.len()];
    for seed in seeds {
        let seed = seed.as_ref();
        let i = model
            .index_of(seed)
            .ok_or_else(|| AnalysisError::UnknownNodeRef(seed.to_string()))?;
        seeded_idx[i] = true;
    }
    let faulty = propagate_indices(model, &seeded_idx);
    let mut state = FaultState::default();
    for (i, node) in model.nodes().iter().enumerate() {
        if seeded_idx[i] {
            state.seeded.insert(node.name.clone());
        } else if faulty[i] {
            state.derived.insert(node.name.clone());
        }
    }
    Ok(state)
}

fn propagate_indices(model: &SystemModel, seeded: &[bool]) -> Vec<bool> {
    let mut faulty = seeded.to_vec();
    for &i in model.topological_indices() {
        if faulty[i] {
            continue;
        }
        if let Some(gate) = model.effective_gate_at(i) {
            faulty[i] = gate.eval_with(&|name| model.index_of(name).is_some_and(|j| faulty[j]));
        }
    }
    faulty
}

/// Shortest start-to-end paths with unit edge weights after removing the
/// excluded nodes.
///
/// For every end node, each start at minimal distance contributes the
/// lexicographically smallest of its shortest paths; starts farther away than
/// the minimum are dropped. Unreachable ends contribute nothing.
pub fn critical_path<I, S>(model: &SystemModel, exclude: I) -> Result<PathResult, AnalysisError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if model.start_nodes().next().is_none() {
        return Err(AnalysisError::NoStartOrEnd("start"));
    }
    if model.end_nodes().next().is_none() {
        return Err(AnalysisError::NoStartOrEnd("end"));
    }
    let mut blocked = vec![false; model.len()];
    let mut excluded_faults = BTreeSet::new();
    for name in exclude {
        let name = name.as_ref();
        let i = model
            .index_of(name)
            .ok_or_else(|| AnalysisError::UnknownNodeRef(name.to_string()))?;
        blocked[i] = true;
        excluded_faults.insert(name.to_string());
    }

    let nodes = model.nodes();
    let starts: Vec<usize> = (0..model.len())
        .filter(|&i| nodes[i].is_start && !blocked[i])
        .collect();
    let mut paths = Vec::new();
    for end in (0..model.len()).filter(|&i| nodes[i].is_end && !blocked[i]) {
        let to_end = distances_to(model, end, &blocked);
        let Some(best) = starts.iter().filter_map(|&s| to_end[s]).min() else {
            continue;
        };
        for &s in starts.iter().filter(|&&s| to_end[s] == Some(best)) {
            paths.push(smallest_shortest_path(model, s, &to_end, &blocked));
        }
    }
    paths.sort();
    paths.dedup();
    let node_union = paths.iter().flatten().cloned().collect();
    Ok(PathResult {
        paths,
        node_union,
        excluded_faults,
    })
}

/// Dijkstra over reversed unit-weight edges: the distance from every node to
/// `target`, skipping blocked nodes.
fn distances_to(model: &SystemModel, target: usize, blocked: &[bool]) -> Vec<Option<u64>> {
    const EDGE_WEIGHT: u64 = 1;
    let mut dist: Vec<Option<u64>> = vec![None; model.len()];
    let mut heap = BinaryHeap::new();
    dist[target] = Some(0);
    heap.push(Reverse((0u64, target)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].is_some_and(|best| d > best) {
            continue;
        }
        for &w in model.input_indices(v) {
            if blocked[w] {
                continue;
            }
            let candidate = d + EDGE_WEIGHT;
            if dist[w].is_none_or(|cur| candidate < cur) {
                dist[w] = Some(candidate);
                heap.push(Reverse((candidate, w)));
            }
        }
    }
    dist
}

/// Walks from `start` towards the end whose distance table is `to_end`,
/// taking the lexicographically smallest successor that stays on a shortest
/// path. All candidate paths have equal length, so the greedy choice yields
/// the smallest node sequence.
fn smallest_shortest_path(
    model: &SystemModel,
    start: usize,
    to_end: &[Option<u64>],
    blocked: &[bool],
) -> Vec<String> {
    let nodes = model.nodes();
    let mut path = vec![nodes[start].name.clone()];
    let mut cur = start;
    while let Some(d) = to_end[cur].filter(|&d| d > 0) {
        cur = model
            .output_indices(cur)
            .iter()
            .copied()
            .filter(|&w| !blocked[w] && to_end[w] == Some(d - 1))
            .min_by(|&a, &b| nodes[a].name.cmp(&nodes[b].name))
            .expect("a node at distance d > 0 has a successor at distance d - 1");
        path.push(nodes[cur].name.clone());
    }
    path
}

/// Nodes whose sole failure reaches an end node.
pub fn find_spofs(model: &SystemModel) -> Result<SpofReport, AnalysisError> {
    let ends: Vec<usize> = model
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.is_end)
        .map(|(i, _)| i)
        .collect();
    if ends.is_empty() {
        return Err(AnalysisError::NoStartOrEnd("end"));
    }
    let mut report = SpofReport::default();
    let mut seeded = vec![false; model.len()];
    for (v, node) in model.nodes().iter().enumerate() {
        seeded[v] = true;
        let faulty = propagate_indices(model, &seeded);
        seeded[v] = false;
        let witness = ends
            .iter()
            .filter(|&&e| faulty[e])
            .map(|&e| &model.nodes()[e].name)
            .min();
        if let Some(end) = witness {
            report.spofs.insert(node.name.clone());
            report.witness.insert(node.name.clone(), end.clone());
        }
    }
    Ok(report)
}
