//! `codesign` subcommands.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use codesign_core::agent::respond::render_template;
use codesign_core::agent::ToolResult;
use codesign_core::{
    critical_path, find_spofs, parse_model, propagate, replicate_node, suggest_redundancy, to_dot, verbalize,
    write_model, Agent, ModelDocument, Session, SharedDocument, SystemModel,
};
use serde::Serialize;

use crate::config::{BackendKind, Config};
use crate::server::{self, AppState};
use crate::CliError;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "codesign", version, about = "Safety analysis and redundancy design on system model graphs")]
pub struct Cli {
    /// System model XML. The bundled automated-driving example when omitted.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,

    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,

    /// Knowledge corpus: a markdown directory or a saved index file.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,

    /// Decision network XML.
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the model.
    Parse,
    /// Print the list-form intermediate representation.
    Verbalize,
    /// Print a Graphviz digraph, optionally colouring a fault state.
    Dot {
        #[arg(long, value_delimiter = ',')]
        faults: Vec<String>,
    },
    /// Propagate seeded faults through the fault gates.
    Propagate {
        #[arg(long, value_delimiter = ',', required = true)]
        faults: Vec<String>,
    },
    /// Shortest start-to-end paths, avoiding excluded components.
    CriticalPath {
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        /// Also exclude everything the faults in `--faults` propagate to.
        #[arg(long, requires = "faults")]
        exclude_last_fault: bool,
        #[arg(long, value_delimiter = ',', requires = "exclude_last_fault")]
        faults: Vec<String>,
    },
    /// List single points of failure.
    Spof,
    /// Suggest the component to replicate.
    Suggest,
    /// Replace a component by redundant replicas and write the model back.
    Replicate {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 2)]
        copies: usize,
        /// Write the result here instead of over `--model`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chat with the agent: a REPL on stdin, or one prompt with `--prompt`.
    Chat {
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, default_value = "cli")]
        session: String,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        /// Static web assets served under `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, input, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn settings(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(model) = &cli.model {
        config.model = Some(model.clone());
    }
    if let Some(kind) = cli.backend {
        config.backend.kind = kind;
    }
    if let Some(corpus) = &cli.corpus {
        config.corpus = Some(corpus.clone());
    }
    if let Some(network) = &cli.network {
        config.network = Some(network.clone());
    }
    Ok(config)
}

fn open_document(config: &Config) -> Result<ModelDocument, CliError> {
    match &config.model {
        Some(path) => Ok(ModelDocument::open(path)?),
        None => {
            tracing::info!("no --model given, using the bundled example");
            Ok(ModelDocument::in_memory(parse_model(codesign_core::AUTOMATED_DRIVING_XML)?))
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, human: impl FnOnce() -> String) -> Result<(), CliError> {
    if json {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        writeln!(out, "{text}")?;
    } else {
        writeln!(out, "{}", human())?;
    }
    Ok(())
}

fn summary(model: &SystemModel) -> String {
    format!(
        "{}: {} nodes, {} edges, {} start, {} end, revision {}",
        model.name(),
        model.len(),
        model.edges().len(),
        model.start_nodes().count(),
        model.end_nodes().count(),
        model.revision()
    )
}

fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let config = settings(&cli)?;
    let json = cli.json;
    match cli.command {
        Command::Parse => {
            let doc = open_document(&config)?;
            emit(out, json, doc.model(), || summary(doc.model()))
        }
        Command::Verbalize => {
            let doc = open_document(&config)?;
            let ir = verbalize(doc.model());
            if json {
                emit(out, true, &ir, String::new)
            } else {
                write!(out, "{}", ir.text)?;
                Ok(())
            }
        }
        Command::Dot { faults } => {
            let doc = open_document(&config)?;
            let state = if faults.is_empty() {
                None
            } else {
                Some(propagate(doc.model(), &faults)?)
            };
            let dot = to_dot(doc.model(), state.as_ref());
            if json {
                emit(out, true, &serde_json::json!({ "dot": dot }), String::new)
            } else {
                write!(out, "{dot}")?;
                Ok(())
            }
        }
        Command::Propagate { faults } => {
            let doc = open_document(&config)?;
            let state = propagate(doc.model(), &faults)?;
            emit(out, json, &state, || render_template(&ToolResult::Propagation(state.clone())))
        }
        Command::CriticalPath {
            exclude,
            exclude_last_fault,
            faults,
        } => {
            let doc = open_document(&config)?;
            let mut excluded = exclude;
            if exclude_last_fault {
                excluded.extend(propagate(doc.model(), &faults)?.faulty());
            }
            excluded.sort();
            excluded.dedup();
            let paths = critical_path(doc.model(), &excluded)?;
            emit(out, json, &paths, || {
                render_template(&ToolResult::CriticalPath {
                    excluded: excluded.clone(),
                    paths: paths.clone(),
                })
            })
        }
        Command::Spof => {
            let doc = open_document(&config)?;
            let report = find_spofs(doc.model())?;
            emit(out, json, &report, || render_template(&ToolResult::Spofs(report.clone())))
        }
        Command::Suggest => {
            let doc = open_document(&config)?;
            let plan = suggest_redundancy(doc.model())?;
            emit(out, json, &plan, || render_template(&ToolResult::Suggestion(plan.clone())))
        }
        Command::Replicate { target, copies, out: dest } => {
            let mut doc = open_document(&config)?;
            let next = replicate_node(doc.model(), &target, copies)?;
            let replicas = codesign_core::mutation::replica_names(&target, copies);
            match &dest {
                Some(path) => write_model(&next, path)?,
                None if doc.path().is_some() => {}
                None => return Err(CliError::Usage("replicate needs --model or --out to write the result".into())),
            }
            let revision = next.revision();
            if dest.is_none() {
                doc.replace(next)?;
            }
            let data = serde_json::json!({ "target": &target, "replicas": &replicas, "revision": revision });
            let result = ToolResult::Replication {
                target,
                replicas,
                revision,
            };
            emit(out, json, &data, || render_template(&result))
        }
        Command::Chat { prompt, session } => {
            let doc = SharedDocument::new(open_document(&config)?);
            let agent = Agent::new(config.network()?, config.backend(), config.knowledge()?);
            let mut session = Session::new(session);
            match prompt {
                Some(prompt) => {
                    let reply = agent.handle(&prompt, &mut session, &doc);
                    emit(out, json, &reply, || reply.text.clone())?;
                    match &reply.error {
                        Some(e) if e.kind.starts_with("backend_") => Err(CliError::Backend(e.message.clone())),
                        _ => Ok(()),
                    }
                }
                None => repl(&agent, &mut session, &doc, json, input, out),
            }
        }
        Command::Serve { addr, static_dir } => {
            let addr = addr
                .or_else(|| config.server.addr.clone())
                .unwrap_or_else(|| DEFAULT_ADDR.to_string());
            let static_dir = static_dir.or_else(|| config.server.static_dir.clone());
            let state = AppState::new(
                SharedDocument::new(open_document(&config)?),
                Agent::new(config.network()?, config.backend(), config.knowledge()?),
            );
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(state, &addr, static_dir))?;
            Ok(())
        }
    }
}

fn repl(
    agent: &Agent,
    session: &mut Session,
    doc: &SharedDocument,
    json: bool,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if !json {
        writeln!(out, "codesign chat ({} backend). Type `quit` to leave.", agent.backend().name())?;
    }
    let mut line = String::new();
    loop {
        if !json {
            write!(out, "> ")?;
            out.flush()?;
        }
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let prompt = line.trim();
        match prompt {
            "" => continue,
            "quit" | "exit" => break,
            _ => {}
        }
        let reply = agent.handle(prompt, session, doc);
        if json {
            let text = serde_json::to_string(&reply).map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(out, "{text}")?;
        } else {
            writeln!(out, "{}", reply.text)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("codesign").chain(args.iter().copied()),
            &mut std::io::empty(),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["propagate"]).0, 1);
        assert_eq!(run_args(&["critical-path", "--exclude-last-fault"]).0, 1);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("critical-path"));
    }

    #[test]
    fn analysis_errors_exit_3() {
        let (code, _, err) = run_args(&["propagate", "--faults", "Ghost"]);
        assert_eq!(code, 3);
        assert!(err.contains("Ghost"));
        assert_eq!(run_args(&["replicate", "--target", "Ghost"]).0, 3);
    }

    #[test]
    fn model_errors_exit_2() {
        assert_eq!(run_args(&["parse", "--model", "/nonexistent/model.xml"]).0, 2);
    }

    #[test]
    fn bundled_model_by_default() {
        let (code, out, _) = run_args(&["parse"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "AutomatedDriving: 17 nodes, 17 edges, 9 start, 1 end, revision 0");
    }

    #[test]
    fn exclude_last_fault_excludes_the_propagated_set() {
        let (code, out, _) = run_args(&[
            "critical-path",
            "--faults",
            "Radar1,Radar2,IMU",
            "--exclude-last-fault",
            "--json",
        ]);
        assert_eq!(code, 0);
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(value["paths"], serde_json::json!([["GPS", "Map", "PathPlanner", "VehicleController"]]));
    }

    #[test]
    fn in_memory_replicate_needs_a_destination() {
        assert_eq!(run_args(&["replicate", "--target", "GPS"]).0, 1);
    }
}
