//! Safety-codesign engine.
//!
//! Loads a system model graph from XML, verbalizes it into a list-form
//! intermediate representation, runs deterministic safety analyses (fault
//! propagation, critical path, single points of failure), applies redundancy
//! mutations, and routes free-text prompts to those tools through a cascade
//! of small classification decisions.

pub mod agent;
pub mod analysis;
pub mod document;
pub mod dot;
pub mod error;
pub mod gate;
pub mod ir;
pub mod knowledge;
pub mod model;
pub mod mutation;
pub mod xml;

pub use analysis::{critical_path, eval_gate, find_spofs, propagate, FaultState, PathResult, SpofReport};
pub use agent::{Agent, Reply, Session};
pub use document::{ModelDocument, SharedDocument};
pub use dot::to_dot;
pub use error::{AnalysisError, ModelError, MutationError};
pub use gate::{FaultGate, GateInput, GateKind};
pub use ir::{parse_ir, verbalize, IrDocument};
pub use knowledge::{DocChunk, KnowledgeIndex};
pub use model::{ComponentNode, Edge, SystemModel};
pub use mutation::{replicate_node, suggest_redundancy, MutationPlan};
pub use xml::{load_model, parse_model, to_xml, write_model};

/// The bundled automated-driving example model.
pub const AUTOMATED_DRIVING_XML: &str = include_str!("../fixtures/automated_driving.xml");
