//! Command-line front end: check models, run scenarios, answer trust queries
//! and dump proof obligations.
//!
//! Exit codes: 0 success, 1 a proof obligation, goal or assertion failed,
//! 2 usage error, 3 unreadable or malformed input.

pub mod check;
pub mod scenario;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use trustb_core::trust::{trust_query, Group, TrustError, TrustLevel, TrustState, Variant};
use trustb_core::{BoundSpec, Name, StateSource};

use check::{CheckOptions, ModelSpec};
use scenario::{parse_scenario, ScenarioRun, StepOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
        }
    }
}

/// Exit status and captured output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String, failed: bool) -> Outcome {
        Outcome {
            code: i32::from(failed),
            stdout,
            stderr: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// inv2 as a relation: several triples per trustor
    Rel,
    /// AGENTS = trustors ∪ trustees without disjointness
    Np,
    /// level-2 inv4 over established triples only
    Safety,
    /// level-2 act1 records the whole trustee set
    Mutant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Mutation(String);

fn parse_mutation(s: &str) -> Result<Mutation, String> {
    match s.split_once(':') {
        Some(("drop", l)) if !l.is_empty() => Ok(Mutation(l.to_string())),
        _ => Err(format!("expected drop:LABEL, found `{s}`")),
    }
}

fn parse_bounds(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.parse::<usize>()).collect();
    match nums.as_deref() {
        Ok([a, b, c]) => Ok((*a, *b, *c)),
        _ => Err(format!("expected TRUSTORS,TRUSTEES,TASKS (e.g. 2,2,2), found `{s}`")),
    }
}

fn parse_card(s: &str) -> Result<(String, usize), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected SET=N, found `{s}`"))?;
    let n = v.trim().parse().map_err(|_| format!("`{v}` is not a cardinality"))?;
    Ok((k.trim().to_string(), n))
}

#[derive(Parser)]
#[command(name = "trustb", version, about = "Check the trust models, run trust scenarios and answer trust queries")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and discharge proof obligations over bounded instantiations
    Check(CheckArgs),
    /// Run a scenario script and print its trace
    Simulate(SimulateArgs),
    /// Explain a trust query against an exported state
    Query(QueryArgs),
    /// Print proof obligations with their hypotheses and goals
    DumpPo(DumpArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Trust level of the built-in model (0, 1 or 2) [default: 2]
    #[arg(long)]
    level: Option<TrustLevel>,
    /// Built-in model variant; may be repeated
    #[arg(long, value_enum)]
    variant: Vec<VariantArg>,
    /// Delete a guard or invariant of the target machine before checking
    #[arg(long, value_name = "drop:LABEL", value_parser = parse_mutation)]
    mutate: Vec<Mutation>,
    /// Check an invariant as a reachability goal instead
    #[arg(long = "goal-invariant", value_name = "LABEL")]
    goal_invariant: Vec<String>,
    /// Target machine of a model file [default: the last one]
    #[arg(long)]
    machine: Option<String>,
    /// Model file (.ebt); the built-in models by default
    file: Option<PathBuf>,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        let has = |v| self.variant.contains(&v);
        ModelSpec {
            level: self.level,
            variant: Variant {
                non_partitioned: has(VariantArg::Np),
                relational_inv2: has(VariantArg::Rel),
                safety_inv4: has(VariantArg::Safety),
                mutant_act1: has(VariantArg::Mutant),
            },
            file: self.file.clone(),
            machine: self.machine.clone(),
            drop: self.mutate.iter().map(|m| m.0.clone()).collect(),
            goals: self.goal_invariant.clone(),
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Upper cardinalities of trustors, trustees and TASKS
    #[arg(long, env = "TRUSTB_BOUNDS", default_value = "2,2,2", value_parser = parse_bounds)]
    bounds: (usize, usize, usize),
    /// Upper cardinality of any other set, e.g. --card AGENTS=3
    #[arg(long = "card", value_name = "SET=N", value_parser = parse_card)]
    cards: Vec<(String, usize)>,
    #[arg(long, default_value_t = StateSource::AllInvariantStates)]
    state_source: StateSource,
    /// Largest set whose powerset may be enumerated
    #[arg(long)]
    powerset_bound: Option<usize>,
    /// Also report guards that are never the only false guard
    #[arg(long)]
    vacuity: bool,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario script (.scn)
    script: PathBuf,
    /// Write the final state in the export format
    #[arg(long, value_name = "FILE")]
    export: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct QueryArgs {
    /// Exported trust state
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    #[arg(long, default_value = "2")]
    level: TrustLevel,
    /// TRUSTOR TRUSTEE... TASK; the trustees may also be given as `{a,b}`
    #[arg(num_args = 2.., required = true, value_name = "ATOM")]
    atoms: Vec<String>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Only this obligation
    #[arg(long, value_name = "NAME")]
    po: Option<String>,
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome::ok(text, false)
            };
        }
    };
    let r = match cli.command {
        Cmd::Check(a) => check(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Query(a) => query(a),
        Cmd::DumpPo(a) => dump(a),
    };
    r.unwrap_or_else(|e| Outcome {
        code: e.code(),
        stdout: String::new(),
        stderr: format!("trustb: {e}\n"),
    })
}

fn check(a: CheckArgs) -> Result<Outcome, CliError> {
    let loaded = check::load_model(&a.model.spec())?;
    let (tr, te, tk) = a.bounds;
    let mut bounds = BoundSpec::trust(tr, te, tk).with_source(a.state_source);
    for (k, v) in a.cards {
        bounds.cardinalities.insert(k, v);
    }
    if let Some(p) = a.powerset_bound {
        bounds.powerset_bound = p;
    }
    let opts = CheckOptions {
        bounds,
        vacuity: a.vacuity,
        format: a.format,
    };
    let (out, failed) = check::run_check(&loaded, &opts)?;
    Ok(Outcome::ok(out, failed))
}

fn dump(a: DumpArgs) -> Result<Outcome, CliError> {
    let loaded = check::load_model(&a.model.spec())?;
    Ok(Outcome::ok(check::dump_pos(&loaded, a.po.as_deref())?, false))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_state(path: &Path) -> Result<TrustState, CliError> {
    TrustState::import(&read(path)?).map_err(|e| match e {
        TrustError::Import { line, message } => CliError::Input(format!("{}:{line}:1: {message}", path.display())),
        e => CliError::Input(format!("{}: {e}", path.display())),
    })
}

fn parse_group(tokens: &[String]) -> Group {
    tokens
        .iter()
        .flat_map(|t| t.split(|c: char| c == ',' || c == '{' || c == '}' || c.is_whitespace()))
        .filter(|x| !x.is_empty())
        .map(Name::from)
        .collect()
}

fn query(a: QueryArgs) -> Result<Outcome, CliError> {
    let s = load_state(&a.state)?;
    let (i, rest) = a.atoms.split_first().expect("at least two atoms");
    let (t, j) = rest.split_last().expect("at least two atoms");
    let j = parse_group(j);
    let d = trust_query(&s, i, &j, t, a.level).map_err(|e| CliError::Usage(e.to_string()))?;
    let members: Vec<&str> = j.iter().map(|x| &**x).collect();
    let out = format!(
        "query: {i} trusts {{{}}} for {t} at level {}\n{d}\n",
        members.join(", "),
        a.level
    );
    Ok(Outcome::ok(out, false))
}

fn step_text(o: &StepOutcome) -> String {
    match o {
        StepOutcome::Applied => "ok".into(),
        StepOutcome::Trust(d) | StepOutcome::Query(d) if d.granted => "granted".into(),
        StepOutcome::Trust(d) | StepOutcome::Query(d) => format!("denied: {}", d.failing.join(", ")),
        StepOutcome::Assertion(r) => {
            let bad: Vec<&str> = r.iter().filter(|(_, b)| !b).map(|(l, _)| l.as_str()).collect();
            if bad.is_empty() {
                "holds".into()
            } else {
                format!("ASSERTION FAILED: {}", bad.join(", "))
            }
        }
        StepOutcome::Error(e) => format!("ERROR: {e}"),
    }
}

fn render_run(name: &str, level: TrustLevel, run: &ScenarioRun, format: Format) -> String {
    let mut o = String::new();
    let u = &run.initial.universe;
    let join = |s: &std::collections::BTreeSet<Name>| s.iter().map(|x| &**x).collect::<Vec<_>>().join(", ");
    match format {
        Format::Table => {
            let _ = writeln!(
                o,
                "scenario {name}: trustors {{{}}}, trustees {{{}}}, tasks {{{}}}, level {level}",
                join(&u.trustors),
                join(&u.trustees),
                join(&u.tasks)
            );
            let w = run.steps.iter().map(|s| s.command.to_string().chars().count()).max().unwrap_or(0);
            for s in &run.steps {
                let _ = writeln!(o, "{:>4}  {:w$}  {}", s.line, s.command.to_string(), step_text(&s.outcome));
                if let StepOutcome::Query(d) | StepOutcome::Trust(d) = &s.outcome {
                    if !d.granted {
                        for (l, b) in &d.guard_results {
                            let _ = writeln!(o, "        {l}: {b}");
                        }
                    }
                }
                if !s.violations.is_empty() {
                    let _ = writeln!(o, "        invariants violated: {}", s.violations.join(", "));
                }
            }
            let _ = writeln!(o, "{} commands, {} failed", run.steps.len(), run.failures());
        }
        Format::Records => {
            let _ = writeln!(o, "scenario: {name}");
            let _ = writeln!(o, "level: {}", level.index());
            for s in &run.steps {
                let _ = writeln!(o, "\nline: {}", s.line);
                let _ = writeln!(o, "command: {}", s.command);
                let _ = writeln!(o, "outcome: {}", step_text(&s.outcome));
                let _ = writeln!(o, "violations: {}", s.violations.join(" "));
            }
            let _ = writeln!(o, "\nsummary: commands={} failed={}", run.steps.len(), run.failures());
        }
    }
    o
}

fn simulate(a: SimulateArgs) -> Result<Outcome, CliError> {
    let shown = a.script.display().to_string();
    let src = read(&a.script)?;
    let script = parse_scenario(&src).map_err(|e| {
        let (l, c) = e.position();
        let msg = e.to_string();
        let msg = msg.splitn(3, ':').nth(2).unwrap_or(&msg).trim().to_string();
        CliError::Input(format!("{shown}:{l}:{c}: {msg}"))
    })?;
    let run = script.run();
    if let Some(p) = &a.export {
        std::fs::write(p, run.final_state().export())
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    let out = render_run(&shown, script.level, &run, a.format);
    Ok(Outcome::ok(out, run.failures() > 0))
}
