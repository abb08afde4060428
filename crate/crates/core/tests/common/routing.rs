use codesign_core::agent::{Agent, Session, TaskArgs, ToolKind};
use codesign_core::{parse_model, KnowledgeIndex, ModelDocument, SharedDocument, AUTOMATED_DRIVING_XML};

pub const ROUTING_PROMPTS: &str = include_str!("../../fixtures/routing_prompts.tsv");
pub const ROW1_PROMPT: &str = "What happens if Radar1, Radar2 and IMU have a fault?";

#[derive(Debug, Clone)]
pub struct RoutingCase {
    pub line: usize,
    pub leaf: ToolKind,
    pub prompt: String,
    pub needs_memory: bool,
    pub expected: Expected,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expected {
    pub faults: Option<Vec<String>>,
    pub exclude: Option<Vec<String>>,
    pub target: Option<String>,
    pub copies: Option<usize>,
}

pub fn routing_cases() -> Vec<RoutingCase> {
    let mut cases = Vec::new();
    for (i, line) in ROUTING_PROMPTS.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3, "line {}: {line:?}", i + 1);
        let mut expected = Expected::default();
        let mut needs_memory = false;
        for part in cols[2].split_whitespace() {
            let list = |v: &str| v.split(',').filter(|s| !s.is_empty()).map(String::from).collect();
            match part.split_once('=') {
                _ if part == "-" => {}
                _ if part == "memory" => needs_memory = true,
                Some(("faults", v)) => expected.faults = Some(list(v)),
                Some(("exclude", v)) => expected.exclude = Some(list(v)),
                Some(("target", v)) => expected.target = Some(v.to_string()),
                Some(("copies", v)) => expected.copies = Some(v.parse().unwrap()),
                _ => panic!("line {}: bad argument `{part}`", i + 1),
            }
        }
        cases.push(RoutingCase {
            line: i + 1,
            leaf: cols[0].parse().unwrap(),
            prompt: cols[1].to_string(),
            needs_memory,
            expected,
        });
    }
    cases
}

impl Expected {
    pub fn matches(&self, args: &TaskArgs) -> bool {
        self.faults.as_ref().is_none_or(|f| *f == args.faults)
            && self.exclude.as_ref().is_none_or(|e| *e == args.exclude)
            && self.target.as_ref().is_none_or(|t| Some(t) == args.target.as_ref())
            && self.copies.is_none_or(|c| Some(c) == args.copies)
    }
}

/// Routes one case on a fresh in-memory fixture. `Err` describes a miss.
pub fn run_case(agent: &Agent, case: &RoutingCase) -> Result<(), String> {
    let doc = SharedDocument::new(ModelDocument::in_memory(parse_model(AUTOMATED_DRIVING_XML).unwrap()));
    let mut session = Session::new("routing");
    if case.needs_memory {
        agent.handle(ROW1_PROMPT, &mut session, &doc);
    }
    let reply = agent.handle(&case.prompt, &mut session, &doc);
    let leaf = reply.trace.leaf;
    if leaf != Some(case.leaf) {
        return Err(format!(
            "line {}: {:?} routed to {:?} via {:?}",
            case.line,
            case.prompt,
            leaf,
            reply.trace.path()
        ));
    }
    let task = reply
        .task
        .ok_or_else(|| format!("line {}: {:?} failed: {:?}", case.line, case.prompt, reply.error))?;
    if !case.expected.matches(&task.args) {
        return Err(format!(
            "line {}: {:?} extracted {:?}, expected {:?}",
            case.line, case.prompt, task.args, case.expected
        ));
    }
    Ok(())
}

pub fn offline_agent() -> Agent {
    Agent::offline(KnowledgeIndex::default())
}
