//! Verbalized fault gates.
//!
//! A gate decides whether faults on a component's inputs propagate to the
//! component itself. The textual grammar is
//!
//! ```text
//! gate  := KEYWORD '(' item (',' item)* ')'
//! KEYWORD := AND | OR | <k>OO<n>          (case-insensitive)
//! item  := gate | <node name>
//! ```
//!
//! Nested gates only appear after redundancy mutations, where a replica group
//! is folded into a consumer's gate as an all-of subterm.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    /// Faulty when at least `k` of the listed inputs are faulty.
    KOutOfN(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateInput {
    Node(String),
    Group(FaultGate),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultGate {
    kind: GateKind,
    inputs: Vec<GateInput>,
}

impl FaultGate {
    /// Builds a gate, checking arity, `k` range and duplicate leaves.
    pub fn new(kind: GateKind, inputs: Vec<GateInput>) -> Result<Self, ModelError> {
        if inputs.is_empty() {
            return Err(ModelError::BadGateExpr {
                expr: String::new(),
                reason: "gate has no inputs".into(),
            });
        }
        if let GateKind::KOutOfN(k) = kind {
            if k < 1 || k > inputs.len() {
                return Err(ModelError::KOutOfRange { k, n: inputs.len() });
            }
        }
        let gate = FaultGate { kind, inputs };
        let mut seen = BTreeSet::new();
        for leaf in gate.leaves() {
            if !seen.insert(leaf) {
                return Err(ModelError::BadGateExpr {
                    expr: gate.to_string(),
                    reason: format!("input `{leaf}` listed more than once"),
                });
            }
        }
        Ok(gate)
    }

    pub fn and<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        Self::new(GateKind::And, nodes(names))
    }

    pub fn or<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        Self::new(GateKind::Or, nodes(names))
    }

    pub fn k_out_of_n<S: Into<String>>(
        k: usize,
        names: impl IntoIterator<Item = S>,
    ) -> Result<Self, ModelError> {
        Self::new(GateKind::KOutOfN(k), nodes(names))
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn inputs(&self) -> &[GateInput] {
        &self.inputs
    }

    /// The `k` threshold this gate applies over its direct inputs.
    pub fn threshold(&self) -> usize {
        match self.kind {
            GateKind::And => self.inputs.len(),
            GateKind::Or => 1,
            GateKind::KOutOfN(k) => k,
        }
    }

    /// All node names referenced anywhere in the gate, in textual order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        for input in &self.inputs {
            match input {
                GateInput::Node(name) => out.push(name),
                GateInput::Group(g) => g.collect_leaves(out),
            }
        }
    }

    /// Evaluates the gate given a predicate telling which inputs are faulty.
    pub fn eval_with(&self, is_faulty: &impl Fn(&str) -> bool) -> bool {
        let hits = self
            .inputs
            .iter()
            .filter(|input| match input {
                GateInput::Node(name) => is_faulty(name),
                GateInput::Group(g) => g.eval_with(is_faulty),
            })
            .count();
        hits >= self.threshold()
    }

    /// Replaces every leaf named `target` with `replacement`.
    pub fn substitute(&self, target: &str, replacement: &GateInput) -> FaultGate {
        let inputs = self
            .inputs
            .iter()
            .map(|input| match input {
                GateInput::Node(name) if name == target => replacement.clone(),
                GateInput::Node(_) => input.clone(),
                GateInput::Group(g) => GateInput::Group(g.substitute(target, replacement)),
            })
            .collect();
        FaultGate {
            kind: self.kind,
            inputs,
        }
    }

    /// Parses a gate expression and checks that every leaf is one of `in_neighbors`.
    pub fn parse(expr: &str, in_neighbors: &BTreeSet<&str>) -> Result<Self, ModelError> {
        let gate = Self::parse_unchecked(expr)?;
        for leaf in gate.leaves() {
            if !in_neighbors.contains(leaf) {
                return Err(ModelError::UnknownNodeRef {
                    name: leaf.to_string(),
                    context: format!("gate `{expr}` does not match an input edge"),
                });
            }
        }
        Ok(gate)
    }

    /// Parses a gate expression without checking its leaves against a graph.
    pub fn parse_unchecked(expr: &str) -> Result<Self, ModelError> {
        let mut parser = Parser { src: expr, pos: 0 };
        let gate = parser.gate()?;
        parser.skip_ws();
        if parser.pos != expr.len() {
            return Err(parser.error("trailing input after gate"));
        }
        Ok(gate)
    }
}

fn nodes<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Vec<GateInput> {
    names.into_iter().map(|n| GateInput::Node(n.into())).collect()
}

impl fmt::Display for FaultGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GateKind::And => write!(f, "AND(")?,
            GateKind::Or => write!(f, "OR(")?,
            GateKind::KOutOfN(k) => write!(f, "{}OO{}(", k, self.inputs.len())?,
        }
        for (i, input) in self.inputs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match input {
                GateInput::Node(name) => f.write_str(name)?,
                GateInput::Group(g) => write!(f, "{g}")?,
            }
        }
        f.write_str(")")
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, reason: &str) -> ModelError {
        ModelError::BadGateExpr {
            expr: self.src.to_string(),
            reason: format!("{reason} at offset {}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn word(&mut self) -> &'a str {
        let rest = &self.src[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | ','))
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn expect(&mut self, c: char) -> Result<(), ModelError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn gate(&mut self) -> Result<FaultGate, ModelError> {
        self.skip_ws();
        let keyword = self.word();
        if keyword.is_empty() {
            return Err(self.error("expected gate keyword"));
        }
        let (kind, declared_n) = parse_keyword(keyword).ok_or_else(|| {
            self.error(&format!("unknown gate keyword `{keyword}`"))
        })?;
        self.expect('(')?;
        let mut inputs = Vec::new();
        loop {
            inputs.push(self.item()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected `,` or `)`")),
            }
        }
        if let Some(n) = declared_n {
            if n != inputs.len() {
                return Err(self.error(&format!(
                    "`{keyword}` declares {n} inputs but lists {}",
                    inputs.len()
                )));
            }
        }
        FaultGate::new(kind, inputs).map_err(|e| match e {
            ModelError::BadGateExpr { reason, .. } => ModelError::BadGateExpr {
                expr: self.src.to_string(),
                reason,
            },
            other => other,
        })
    }

    fn item(&mut self) -> Result<GateInput, ModelError> {
        self.skip_ws();
        let start = self.pos;
        let word = self.word();
        if word.is_empty() {
            return Err(self.error("expected input name"));
        }
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos = start;
            Ok(GateInput::Group(self.gate()?))
        } else {
            Ok(GateInput::Node(word.to_string()))
        }
    }
}

/// Returns the gate kind and, for `kOOn`, the declared input count.
fn parse_keyword(word: &str) -> Option<(GateKind, Option<usize>)> {
    if word.eq_ignore_ascii_case("AND") {
        return Some((GateKind::And, None));
    }
    if word.eq_ignore_ascii_case("OR") {
        return Some((GateKind::Or, None));
    }
    let upper = word.to_ascii_uppercase();
    let (k, n) = upper.split_once("OO")?;
    if k.is_empty() || n.is_empty() || !k.bytes().chain(n.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((GateKind::KOutOfN(k.parse().ok()?), Some(n.parse().ok()?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<'a>(names: &[&'a str]) -> BTreeSet<&'a str> {
        names.iter().copied().collect()
    }

    #[test]
    fn parses_two_out_of_three() {
        let nb = set(&["Camera1", "Camera2", "Camera3"]);
        let g = FaultGate::parse("2OO3(Camera1,Camera2,Camera3)", &nb).unwrap();
        assert_eq!(g.kind(), GateKind::KOutOfN(2));
        assert_eq!(g.leaves(), vec!["Camera1", "Camera2", "Camera3"]);
    }

    #[test]
    fn keywords_are_case_insensitive_and_whitespace_tolerant() {
        let nb = set(&["A", "B", "C"]);
        let g = FaultGate::parse("  2oo3 ( A , B,C )", &nb).unwrap();
        assert_eq!(g.to_string(), "2OO3(A,B,C)");
        assert_eq!(FaultGate::parse("and(A)", &nb).unwrap().to_string(), "AND(A)");
        assert_eq!(FaultGate::parse("Or(B, A)", &nb).unwrap().to_string(), "OR(B,A)");
    }

    #[test]
    fn unary_and() {
        let g = FaultGate::parse("AND(A)", &set(&["A"])).unwrap();
        assert_eq!(g.kind(), GateKind::And);
        assert_eq!(g.inputs(), &[GateInput::Node("A".into())]);
    }

    #[test]
    fn k_out_of_range() {
        let nb = set(&["A", "B", "C"]);
        assert!(matches!(
            FaultGate::parse("4OO3(A,B,C,A)", &nb),
            Err(ModelError::BadGateExpr { .. })
        ));
        // n declared consistently but k too large
        assert!(matches!(
            FaultGate::parse_unchecked("4OO3(A,B,C)"),
            Err(ModelError::BadGateExpr { .. }) | Err(ModelError::KOutOfRange { .. })
        ));
        assert!(matches!(
            FaultGate::k_out_of_n(4, ["A", "B", "C"]),
            Err(ModelError::KOutOfRange { k: 4, n: 3 })
        ));
        assert!(matches!(
            FaultGate::parse_unchecked("0OO2(A,B)"),
            Err(ModelError::KOutOfRange { k: 0, n: 2 })
        ));
    }

    #[test]
    fn k_exceeding_n_reports_range() {
        assert!(matches!(
            FaultGate::parse("4OO3(A,B,C)", &set(&["A", "B", "C"])),
            Err(ModelError::KOutOfRange { k: 4, n: 3 })
        ));
    }

    #[test]
    fn rejects_malformed() {
        let nb = set(&["A", "B"]);
        for bad in ["", "AND", "AND()", "AND(A", "AND(A,)", "XOR(A,B)", "AND(A) B", "2OO(A,B)", "AND(A,A)"] {
            assert!(
                matches!(FaultGate::parse(bad, &nb), Err(ModelError::BadGateExpr { .. })),
                "{bad:?} should be rejected"
            );
        }
        assert!(matches!(
            FaultGate::parse("2OO3(A,B)", &nb),
            Err(ModelError::BadGateExpr { .. })
        ));
    }

    #[test]
    fn leaf_must_be_in_neighbor() {
        let err = FaultGate::parse("OR(A,Z)", &set(&["A", "B"])).unwrap_err();
        assert!(matches!(err, ModelError::UnknownNodeRef { ref name, .. } if name == "Z"));
    }

    #[test]
    fn nested_groups_roundtrip() {
        let text = "OR(2OO2(SensorFusion_1,SensorFusion_2),Map)";
        let g = FaultGate::parse_unchecked(text).unwrap();
        assert_eq!(g.to_string(), text);
        assert_eq!(g.leaves(), vec!["SensorFusion_1", "SensorFusion_2", "Map"]);
        let only_one = |n: &str| n == "SensorFusion_1";
        assert!(!g.eval_with(&only_one));
        let both = |n: &str| n.starts_with("SensorFusion");
        assert!(g.eval_with(&both));
    }

    #[test]
    fn substitute_replaces_nested_leaves() {
        let g = FaultGate::parse_unchecked("2OO3(A,B,C)").unwrap();
        let group = GateInput::Group(FaultGate::k_out_of_n(2, ["B_1", "B_2"]).unwrap());
        assert_eq!(g.substitute("B", &group).to_string(), "2OO3(A,2OO2(B_1,B_2),C)");
    }
}
