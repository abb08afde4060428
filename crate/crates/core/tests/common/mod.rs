#![allow(dead_code)]

pub mod fuzz;
pub mod routing;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use codesign_core::{ComponentNode, Edge, FaultGate, GateInput, GateKind, ModelError, SystemModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DagParams {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_probability: f64,
    pub extra_attributes: bool,
}

impl DagParams {
    pub fn small() -> Self {
        DagParams {
            min_nodes: 2,
            max_nodes: 12,
            edge_probability: 0.35,
            extra_attributes: false,
        }
    }

    pub fn up_to(max_nodes: usize) -> Self {
        DagParams {
            min_nodes: 1,
            max_nodes,
            edge_probability: 0.2,
            extra_attributes: true,
        }
    }
}

fn random_gate(rng: &mut ChaCha8Rng, inputs: &[String]) -> Option<FaultGate> {
    if rng.random_bool(0.25) {
        return None;
    }
    let mut leaves: Vec<String> = inputs.to_vec();
    leaves.shuffle(rng);
    if leaves.len() > 1 && rng.random_bool(0.2) {
        leaves.truncate(rng.random_range(1..leaves.len()));
    }
    let kind = |rng: &mut ChaCha8Rng, n: usize| match rng.random_range(0..3) {
        0 => GateKind::And,
        1 => GateKind::Or,
        _ => GateKind::KOutOfN(rng.random_range(1..=n)),
    };
    let mut gate_inputs: Vec<GateInput> = Vec::new();
    if leaves.len() >= 3 && rng.random_bool(0.2) {
        let split = rng.random_range(2..leaves.len());
        let group: Vec<GateInput> = leaves[..split].iter().cloned().map(GateInput::Node).collect();
        let group_kind = kind(rng, group.len());
        gate_inputs.push(GateInput::Group(FaultGate::new(group_kind, group).unwrap()));
        gate_inputs.extend(leaves[split..].iter().cloned().map(GateInput::Node));
    } else {
        gate_inputs.extend(leaves.into_iter().map(GateInput::Node));
    }
    let n = gate_inputs.len();
    let k = kind(rng, n);
    Some(FaultGate::new(k, gate_inputs).unwrap())
}

/// A random valid DAG. Node `Ni` may only feed `Nj` for i < j, but the
/// document order of nodes and edges is shuffled.
pub fn random_dag(seed: u64, params: &DagParams) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(params.min_nodes..=params.max_nodes);
    let names: Vec<String> = (0..n)
        .map(|i| match rng.random_range(0..4) {
            0 => format!("N{i}"),
            1 => format!("node_{i}"),
            2 => format!("Comp{i}.x"),
            _ => format!("n-{i}"),
        })
        .collect();
    let mut edges = Vec::new();
    let mut inputs: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut outputs = vec![0usize; n];
    for j in 0..n {
        for i in 0..j {
            if rng.random_bool(params.edge_probability) {
                edges.push(Edge::new(names[i].clone(), names[j].clone()));
                inputs[j].push(names[i].clone());
                outputs[i] += 1;
            }
        }
    }
    let mut nodes: Vec<ComponentNode> = Vec::with_capacity(n);
    for i in 0..n {
        let mut node = ComponentNode::new(names[i].clone());
        if !inputs[i].is_empty() {
            node.gate = random_gate(&mut rng, &inputs[i]);
        }
        node.is_start = inputs[i].is_empty() && rng.random_bool(0.7);
        node.is_end = outputs[i] == 0 && rng.random_bool(0.7);
        if params.extra_attributes && rng.random_bool(0.2) {
            node.extra_attributes.push(("asil".into(), ["A", "B", "C", "D"][rng.random_range(0..4)].into()));
            if rng.random_bool(0.3) {
                node.extra_attributes.push(("note".into(), "x < y & \"z\"".into()));
            }
        }
        nodes.push(node);
    }
    if !nodes.iter().any(|n| n.is_start) {
        let src = (0..n).find(|&i| inputs[i].is_empty()).unwrap();
        nodes[src].is_start = true;
    }
    if !nodes.iter().any(|n| n.is_end) {
        let sink = (0..n).rev().find(|&i| outputs[i] == 0).unwrap();
        nodes[sink].is_end = true;
    }
    nodes.shuffle(&mut rng);
    edges.shuffle(&mut rng);
    SystemModel::new(format!("random{seed}"), nodes, edges).unwrap()
}

/// A random digraph that may contain cycles, as raw nodes and edges.
pub fn random_digraph(seed: u64, max_nodes: usize) -> (Vec<String>, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes);
    let names = (0..n).map(|i| format!("V{i}")).collect();
    let p = rng.random_range(0.05..0.3);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    (names, edges)
}

/// Colour-marking DFS: true when some edge closes a cycle.
pub fn has_back_edge(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    fn visit(v: usize, adj: &[Vec<usize>], colour: &mut [u8]) -> bool {
        colour[v] = 1;
        for &w in &adj[v] {
            if colour[w] == 1 || (colour[w] == 0 && visit(w, adj, colour)) {
                return true;
            }
        }
        colour[v] = 2;
        false
    }
    let mut colour = vec![0u8; n];
    (0..n).any(|v| colour[v] == 0 && visit(v, &adj, &mut colour))
}

pub fn build_digraph(names: &[String], edges: &[(usize, usize)]) -> Result<SystemModel, ModelError> {
    SystemModel::new(
        "g",
        names.iter().map(|n| ComponentNode::new(n.clone())).collect(),
        edges.iter().map(|&(a, b)| Edge::new(names[a].clone(), names[b].clone())).collect(),
    )
}

/// Gate semantics written out directly: count faulty inputs and compare
/// with the threshold.
pub fn oracle_gate(gate: &FaultGate, faulty: &dyn Fn(&str) -> bool) -> bool {
    let hits = gate
        .inputs()
        .iter()
        .filter(|input| match input {
            GateInput::Node(name) => faulty(name),
            GateInput::Group(inner) => oracle_gate(inner, faulty),
        })
        .count();
    let n = gate.inputs().len();
    match gate.kind() {
        GateKind::And => hits == n,
        GateKind::Or => hits >= 1,
        GateKind::KOutOfN(k) => hits >= k,
    }
}

/// Fault propagation by fixpoint iteration, independent of any ordering.
pub fn fixpoint_faulty(model: &SystemModel, seeds: &BTreeSet<String>) -> BTreeSet<String> {
    let mut faulty = seeds.clone();
    loop {
        let mut changed = false;
        for node in model.nodes() {
            if faulty.contains(&node.name) {
                continue;
            }
            let inputs = model.in_neighbors(&node.name);
            if inputs.is_empty() {
                continue;
            }
            let fires = match &node.gate {
                Some(gate) => oracle_gate(gate, &|n| faulty.contains(n)),
                None => inputs.iter().all(|n| faulty.contains(*n)),
            };
            if fires {
                faulty.insert(node.name.clone());
                changed = true;
            }
        }
        if !changed {
            return faulty;
        }
    }
}

/// Singleton-seed definition: v is a SPOF iff faulting v alone faults an end.
pub fn singleton_spofs(model: &SystemModel) -> BTreeSet<String> {
    let ends: Vec<&str> = model.end_nodes().map(|n| n.name.as_str()).collect();
    model
        .nodes()
        .iter()
        .filter(|v| {
            let faulty = fixpoint_faulty(model, &BTreeSet::from([v.name.clone()]));
            ends.iter().any(|e| faulty.contains(*e))
        })
        .map(|v| v.name.clone())
        .collect()
}

/// BFS hop distance from `from` to every reachable node avoiding `blocked`.
pub fn bfs(model: &SystemModel, from: &str, blocked: &BTreeSet<String>) -> BTreeMap<String, usize> {
    let mut dist = BTreeMap::new();
    if blocked.contains(from) {
        return dist;
    }
    dist.insert(from.to_string(), 0);
    let mut queue = VecDeque::from([from.to_string()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for w in model.out_neighbors(&v) {
            if !blocked.contains(w) && !dist.contains_key(w) {
                dist.insert(w.to_string(), d + 1);
                queue.push_back(w.to_string());
            }
        }
    }
    dist
}

/// Every path from `from` to `to` avoiding `blocked`, by exhaustive DFS.
pub fn all_paths(model: &SystemModel, from: &str, to: &str, blocked: &BTreeSet<String>) -> Vec<Vec<String>> {
    fn walk(
        model: &SystemModel,
        to: &str,
        blocked: &BTreeSet<String>,
        path: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        let v = path.last().unwrap().clone();
        if v == to {
            out.push(path.clone());
            return;
        }
        for w in model.out_neighbors(&v) {
            if !blocked.contains(w) {
                path.push(w.to_string());
                walk(model, to, blocked, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if !blocked.contains(from) && !blocked.contains(to) {
        walk(model, to, blocked, &mut vec![from.to_string()], &mut out);
    }
    out
}

/// The critical path set by enumeration: per end node, every start at the
/// minimal hop distance contributes its lexicographically smallest shortest
/// path.
pub fn oracle_critical_paths(model: &SystemModel, blocked: &BTreeSet<String>) -> BTreeSet<Vec<String>> {
    let starts: Vec<&str> = model.start_nodes().map(|n| n.name.as_str()).filter(|n| !blocked.contains(*n)).collect();
    let mut result = BTreeSet::new();
    for end in model.end_nodes().map(|n| n.name.as_str()).filter(|n| !blocked.contains(*n)) {
        let per_start: Vec<(&str, Vec<Vec<String>>)> = starts
            .iter()
            .map(|s| (*s, all_paths(model, s, end, blocked)))
            .filter(|(_, paths)| !paths.is_empty())
            .collect();
        let Some(best) = per_start.iter().flat_map(|(_, p)| p.iter().map(Vec::len)).min() else {
            continue;
        };
        for (_, paths) in per_start {
            if let Some(smallest) = paths.into_iter().filter(|p| p.len() == best).min() {
                result.insert(smallest);
            }
        }
    }
    result
}

/// Snapshot of everything `structure_eq` is meant to cover, for diffing.
pub fn structure(model: &SystemModel) -> Vec<String> {
    let mut out: Vec<String> = model
        .nodes()
        .iter()
        .map(|n| {
            format!(
                "{} gate={:?} start={} end={} extra={:?}",
                n.name,
                n.gate.as_ref().map(ToString::to_string),
                n.is_start,
                n.is_end,
                n.extra_attributes
            )
        })
        .collect();
    out.extend(model.edges().iter().map(|e| format!("{} --> {}", e.from, e.to)));
    out
}

/// Exhaustive truth tables of AND, OR and every kOOn over n <= `max_n`
/// inputs, checked against counting. Gates are built from their textual form.
pub fn gate_truth_table_failures(max_n: usize) -> Vec<String> {
    let mut failures = Vec::new();
    for n in 1..=max_n {
        let names: Vec<String> = (0..n).map(|i| format!("I{i}")).collect();
        let args = names.join(",");
        let mut exprs: Vec<(String, usize)> = vec![(format!("AND({args})"), n), (format!("OR({args})"), 1)];
        exprs.extend((1..=n).map(|k| (format!("{k}OO{n}({args})"), k)));
        for (expr, threshold) in exprs {
            let gate = match FaultGate::parse_unchecked(&expr) {
                Ok(g) => g,
                Err(e) => {
                    failures.push(format!("{expr}: {e}"));
                    continue;
                }
            };
            for bits in 0u32..(1 << n) {
                let faulty = |name: &str| bits & (1 << name[1..].parse::<u32>().unwrap()) != 0;
                let expected = bits.count_ones() as usize >= threshold;
                if gate.eval_with(&faulty) != expected {
                    failures.push(format!("{expr} with inputs {bits:0n$b}", n = n));
                }
            }
        }
    }
    failures
}
