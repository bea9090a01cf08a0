//! `check` and `dump-po`: model selection, discharge and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use trustb_core::ast::Component;
use trustb_core::discharge::{replay_counterexample, GoalReport, GuardVacuity};
use trustb_core::trust::models::{model_chain, sources};
use trustb_core::trust::{TrustLevel, Variant};
use trustb_core::{
    generate_pos, parse_document, typecheck_model, BoundSpec, Context, DischargeReport, Discharger, Machine,
    TypedModel, Verdict,
};

use crate::{CliError, Format};

/// Where the model comes from and how it is altered before checking.
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    pub level: Option<TrustLevel>,
    pub variant: Variant,
    pub file: Option<std::path::PathBuf>,
    /// Target machine in a file; the last one by default.
    pub machine: Option<String>,
    pub drop: Vec<String>,
    pub goals: Vec<String>,
}

pub struct LoadedModel {
    pub model: TypedModel,
    pub title: String,
}

fn builtin_components() -> Vec<Component> {
    sources()
        .iter()
        .flat_map(|(_, src)| parse_document(src).expect("built-in sources parse").components)
        .collect()
}

fn file_chain(path: &Path, machine: Option<&str>) -> Result<(Vec<Context>, Vec<Machine>), CliError> {
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
    let doc = parse_document(&src).map_err(|e| {
        let p = e.position();
        let msg = e.to_string();
        let msg = msg.split_once(": ").map_or(msg.as_str(), |(_, m)| m).to_string();
        CliError::Input(format!("{shown}:{}:{}: {msg}", p.line, p.col))
    })?;
    let mut ctxs: Vec<Context> = doc.contexts().cloned().collect();
    let mut machs: Vec<Machine> = doc.machines().cloned().collect();
    let target = match machine {
        Some(name) => machs
            .iter()
            .position(|m| &*m.name == name)
            .ok_or_else(|| CliError::Usage(format!("{shown} has no machine `{name}`")))?,
        None if machs.is_empty() => return Err(CliError::Input(format!("{shown}: no machine to check"))),
        None => machs.len() - 1,
    };
    let t = machs.remove(target);
    // components the file refers to but does not define come from the built-in models
    for c in builtin_components() {
        match c {
            Component::Context(c) if !ctxs.iter().any(|x| x.name == c.name) => ctxs.push(c),
            Component::Machine(m) if m.name != t.name && !machs.iter().any(|x| x.name == m.name) => machs.push(m),
            _ => {}
        }
    }
    machs.push(t);
    Ok((ctxs, machs))
}

pub fn load_model(spec: &ModelSpec) -> Result<LoadedModel, CliError> {
    let (ctxs, mut machs, title) = match &spec.file {
        Some(path) => {
            if spec.level.is_some() || spec.variant != Variant::default() {
                return Err(CliError::Usage("--level and --variant apply to the built-in models only".into()));
            }
            let (c, m) = file_chain(path, spec.machine.as_deref())?;
            let title = format!("{} ({})", m.last().expect("target").name, path.display());
            (c, m, title)
        }
        None => {
            if spec.machine.is_some() {
                return Err(CliError::Usage("--machine needs a model FILE".into()));
            }
            let level = spec.level.unwrap_or(TrustLevel::Commitment);
            if spec.variant.mutant_act1 && level != TrustLevel::Commitment {
                return Err(CliError::Usage("the act1 mutant exists at level 2 only".into()));
            }
            let (c, m) = model_chain(level, spec.variant);
            let title = format!("{} at level {level}", m.last().expect("target").name);
            (c, m, title)
        }
    };
    let target = machs.last_mut().expect("target");
    for l in &spec.drop {
        if !target.drop_label(l) {
            return Err(CliError::Usage(format!(
                "no guard or invariant labelled `{l}` in {}",
                target.name
            )));
        }
    }
    let model = typecheck_model(&ctxs, &machs).map_err(|e| match &spec.file {
        Some(p) => CliError::Input(format!("{}: {e}", p.display())),
        None => CliError::Input(e.to_string()),
    })?;
    let model = model
        .with_goal_invariants(&spec.goals)
        .map_err(|l| CliError::Usage(format!("`{l}` is not a non-typing invariant of the target machine")))?;
    Ok(LoadedModel { model, title })
}

pub struct CheckOptions {
    pub bounds: BoundSpec,
    pub vacuity: bool,
    pub format: Format,
}

fn describe_bounds(b: &BoundSpec) -> String {
    b.cardinalities
        .iter()
        .map(|(k, v)| format!("{k}≤{v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Default)]
struct Tally {
    counts: BTreeMap<&'static str, usize>,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        let k = match v {
            Verdict::Discharged => "discharged",
            Verdict::Failed => "failed",
            Verdict::Vacuous => "vacuous",
            Verdict::BoundExceeded => "bound-exceeded",
        };
        *self.counts.entry(k).or_default() += 1;
    }

    fn get(&self, k: &str) -> usize {
        self.counts.get(k).copied().unwrap_or(0)
    }
}

fn replay_note(m: &TypedModel, r: &DischargeReport) -> Option<&'static str> {
    let cx = r.counterexample.as_ref()?;
    Some(match replay_counterexample(m, &r.po, cx) {
        Ok(true) => "reproduced",
        Ok(false) => "not reproduced",
        Err(_) => "replay error",
    })
}

/// Runs the check; returns the report and whether anything failed.
pub fn run_check(loaded: &LoadedModel, opts: &CheckOptions) -> Result<(String, bool), CliError> {
    let m = &loaded.model;
    let started = Instant::now();
    let d = Discharger::new(m, opts.bounds.clone());
    let pos = generate_pos(m);
    let reports = d.discharge_all(&pos).map_err(|e| CliError::Usage(e.to_string()))?;
    let goals = d.reach_goals().map_err(|e| CliError::Usage(e.to_string()))?;
    let vacuity = if opts.vacuity {
        d.detect_vacuous_guards().map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        Vec::new()
    };
    let mut tally = Tally::default();
    for r in &reports {
        tally.add(r.verdict);
    }
    let failed = tally.get("failed") > 0 || !goals.iter().all(GoalReport::met);
    let out = match opts.format {
        Format::Table => table(loaded, opts, &reports, &goals, &vacuity, &tally, started.elapsed()),
        Format::Records => records(loaded, opts, &reports, &goals, &vacuity, &tally),
    };
    Ok((out, failed))
}

fn table(
    loaded: &LoadedModel,
    opts: &CheckOptions,
    reports: &[DischargeReport],
    goals: &[GoalReport],
    vacuity: &[GuardVacuity],
    tally: &Tally,
    elapsed: std::time::Duration,
) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "model {}", loaded.title);
    let _ = writeln!(
        o,
        "bounds {}; state source {}",
        describe_bounds(&opts.bounds),
        opts.bounds.state_source
    );
    let w = reports.iter().map(|r| r.po.name.chars().count()).max().unwrap_or(2).max(2);
    let _ = writeln!(o, "\n{:w$}  {:14}  {:>9}", "PO", "VERDICT", "CASES");
    for r in reports {
        let _ = writeln!(o, "{:w$}  {:14}  {:>9}", r.po.name, r.verdict.to_string(), r.cases_checked);
        if let Some(cx) = &r.counterexample {
            let _ = writeln!(o, "    counterexample: {cx}");
            if let Some(n) = replay_note(&loaded.model, r) {
                let _ = writeln!(o, "    replay: {n}");
            }
        }
        if let Some(n) = &r.note {
            let _ = writeln!(o, "    note: {n}");
        }
    }
    if !goals.is_empty() {
        let _ = writeln!(o, "\ngoals (reachability)");
        for g in goals {
            let status = if g.met() { "reached" } else { "unreached" };
            let _ = writeln!(
                o,
                "{:w$}  {:14}  in {}/{} instantiations ({} unsatisfiable), {} states",
                g.label, status, g.reached_in, g.instantiations, g.unsatisfiable_in, g.states_explored
            );
        }
    }
    if !vacuity.is_empty() {
        let _ = writeln!(o, "\nguard vacuity");
        for v in vacuity {
            let _ = writeln!(o, "{:w$}  {}", format!("{}/{}", v.event, v.label), v.status);
        }
    }
    let _ = writeln!(
        o,
        "\n{} obligations: {} discharged, {} failed, {} vacuous, {} bound-exceeded ({:.2}s)",
        reports.len(),
        tally.get("discharged"),
        tally.get("failed"),
        tally.get("vacuous"),
        tally.get("bound-exceeded"),
        elapsed.as_secs_f64()
    );
    o
}

fn records(
    loaded: &LoadedModel,
    opts: &CheckOptions,
    reports: &[DischargeReport],
    goals: &[GoalReport],
    vacuity: &[GuardVacuity],
    tally: &Tally,
) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "model: {}", loaded.title);
    let _ = writeln!(o, "bounds: {}", describe_bounds(&opts.bounds));
    let _ = writeln!(o, "state-source: {}", opts.bounds.state_source);
    for r in reports {
        let _ = writeln!(o, "\npo: {}", r.po.name);
        let _ = writeln!(o, "kind: {}", r.po.kind);
        let _ = writeln!(o, "verdict: {}", r.verdict);
        let _ = writeln!(o, "cases: {}", r.cases_checked);
        if let Some(cx) = &r.counterexample {
            let _ = writeln!(o, "counterexample: {cx}");
            if let Some(n) = replay_note(&loaded.model, r) {
                let _ = writeln!(o, "replay: {n}");
            }
        }
        if let Some(n) = &r.note {
            let _ = writeln!(o, "note: {n}");
        }
    }
    for g in goals {
        let _ = writeln!(o, "\ngoal: {}", g.label);
        let _ = writeln!(o, "status: {}", if g.met() { "reached" } else { "unreached" });
        let _ = writeln!(o, "reached-in: {}/{}", g.reached_in, g.instantiations);
        let _ = writeln!(o, "unsatisfiable-in: {}", g.unsatisfiable_in);
        if let Some(w) = &g.witness {
            let _ = writeln!(o, "witness: [{}] {}", w.inst, w.describe_vars());
        }
    }
    for v in vacuity {
        let _ = writeln!(o, "\nguard: {}/{}", v.event, v.label);
        let _ = writeln!(o, "status: {}", v.status);
    }
    let _ = writeln!(
        o,
        "\nsummary: obligations={} discharged={} failed={} vacuous={} bound-exceeded={}",
        reports.len(),
        tally.get("discharged"),
        tally.get("failed"),
        tally.get("vacuous"),
        tally.get("bound-exceeded")
    );
    o
}

pub fn dump_pos(loaded: &LoadedModel, only: Option<&str>) -> Result<String, CliError> {
    let pos = generate_pos(&loaded.model);
    let mut o = String::new();
    let _ = writeln!(o, "model {}", loaded.title);
    let mut n = 0;
    for po in pos.iter().filter(|p| only.is_none_or(|x| p.name == x)) {
        let _ = writeln!(o, "\n{po}");
        n += 1;
    }
    if n == 0 {
        if let Some(x) = only {
            return Err(CliError::Usage(format!("no proof obligation named `{x}`")));
        }
    }
    Ok(o)
}
