//! Plain-Rust trust state mirroring the level-2 machine variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::models::TrustLevel;
use super::query::TrustDecision;
use crate::dsl::parse_value;
use crate::runtime::{Instantiation, State};
use crate::value::{Name, SetV, Value};

pub type Agent = Name;
pub type Task = Name;
/// A set of trustees acting together.
pub type Group = BTreeSet<Agent>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub trustor: Agent,
    pub group: Group,
    pub task: Task,
}

impl Triple {
    pub fn new(trustor: &str, group: &[&str], task: &str) -> Triple {
        Triple {
            trustor: trustor.into(),
            group: group.iter().map(|g| Name::from(*g)).collect(),
            task: task.into(),
        }
    }

    pub fn to_value(&self) -> Value {
        Value::pair(
            Value::Atom(self.trustor.clone()),
            Value::pair(group_value(&self.group), Value::Atom(self.task.clone())),
        )
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_value())
    }
}

pub fn group_value(g: &Group) -> Value {
    Value::Set(g.iter().map(|a| Value::Atom(a.clone())).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("agent_task already maps {group} to {existing}, cannot also map it to {task}")]
    FunctionalityViolation {
        group: String,
        existing: String,
        task: String,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("trust denied at level {}: failing {}", .0.level, .0.failing.join(", "))]
    TrustDenied(TrustDecision),
    #[error("line {line}: {message}")]
    Import { line: usize, message: String },
}

/// The agents and tasks a state ranges over.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Universe {
    pub trustors: BTreeSet<Agent>,
    pub trustees: BTreeSet<Agent>,
    pub tasks: BTreeSet<Task>,
}

fn atoms(names: &BTreeSet<Name>) -> SetV {
    names.iter().map(|n| Value::Atom(n.clone())).collect()
}

impl Universe {
    pub fn new(trustors: &[&str], trustees: &[&str], tasks: &[&str]) -> Universe {
        let set = |xs: &[&str]| xs.iter().map(|x| Name::from(*x)).collect();
        Universe {
            trustors: set(trustors),
            trustees: set(trustees),
            tasks: set(tasks),
        }
    }

    pub fn agents(&self) -> BTreeSet<Agent> {
        self.trustors.union(&self.trustees).cloned().collect()
    }

    /// `AGENTS = trustors ∪ trustees`.
    pub fn instantiation(&self) -> Instantiation {
        let mut carriers = BTreeMap::new();
        carriers.insert(Name::from("AGENTS"), atoms(&self.agents()));
        carriers.insert(Name::from("TASKS"), atoms(&self.tasks));
        let mut constants = BTreeMap::new();
        constants.insert(Name::from("trustors"), Value::Set(atoms(&self.trustors)));
        constants.insert(Name::from("trustees"), Value::Set(atoms(&self.trustees)));
        Instantiation::new(carriers, constants)
    }

    pub fn from_instantiation(inst: &Instantiation) -> Result<Universe, TrustError> {
        let names = |c: &str| -> Result<BTreeSet<Name>, TrustError> {
            let v = inst
                .constant(c)
                .map(|v| v.clone())
                .or_else(|| inst.carrier(c).map(|s| Value::Set(s.clone())))
                .ok_or_else(|| TrustError::TypeMismatch(format!("instantiation lacks {c}")))?;
            let s = v.as_set().map_err(|e| TrustError::TypeMismatch(e.to_string()))?;
            s.iter()
                .map(|x| {
                    x.as_atom()
                        .cloned()
                        .ok_or_else(|| TrustError::TypeMismatch(format!("{x} is not an atom")))
                })
                .collect()
        };
        Ok(Universe {
            trustors: names("trustors")?,
            trustees: names("trustees")?,
            tasks: names("TASKS")?,
        })
    }

    pub fn declares(&self, name: &str) -> bool {
        self.trustors.contains(name) || self.trustees.contains(name) || self.tasks.contains(name)
    }

    pub(crate) fn check_agent(&self, a: &str) -> Result<(), TrustError> {
        if self.trustors.contains(a) || self.trustees.contains(a) {
            Ok(())
        } else {
            Err(TrustError::TypeMismatch(format!("{a} is not an agent")))
        }
    }

    pub(crate) fn check_group(&self, g: &Group) -> Result<(), TrustError> {
        g.iter().try_for_each(|a| self.check_agent(a))
    }

    pub(crate) fn check_task(&self, t: &str) -> Result<(), TrustError> {
        if self.tasks.contains(t) {
            Ok(())
        } else {
            Err(TrustError::TypeMismatch(format!("{t} is not a task")))
        }
    }
}

/// Immutable trust state; every update returns a new value.
///
/// `commitments` holds explicit entries only. A triple counts as committed
/// when its entry is TRUE and its (group, task) pair is allocated, which is
/// exactly the default-FALSE total function the level-2 machine sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustState {
    pub universe: Arc<Universe>,
    pub agent_task: BTreeMap<Group, Task>,
    pub trustor_trustee_task: BTreeSet<Triple>,
    pub knowledge: BTreeSet<(Agent, Agent)>,
    pub commitments: BTreeMap<Triple, bool>,
}

impl TrustState {
    pub fn new(universe: Universe) -> TrustState {
        TrustState {
            universe: Arc::new(universe),
            agent_task: BTreeMap::new(),
            trustor_trustee_task: BTreeSet::new(),
            knowledge: BTreeSet::new(),
            commitments: BTreeMap::new(),
        }
    }

    pub fn allocate_task(&self, j: &Group, t: &str) -> Result<TrustState, TrustError> {
        self.universe.check_task(t)?;
        if let Some(a) = j.iter().find(|a| !self.universe.trustees.contains(*a)) {
            return Err(TrustError::TypeMismatch(format!("{a} is not a trustee")));
        }
        match self.agent_task.get(j) {
            Some(existing) if &**existing != t => Err(TrustError::FunctionalityViolation {
                group: group_value(j).to_string(),
                existing: existing.to_string(),
                task: t.to_string(),
            }),
            _ => {
                let mut s = self.clone();
                s.agent_task.insert(j.clone(), t.into());
                Ok(s)
            }
        }
    }

    pub fn learn(&self, i: &str, j: &str) -> Result<TrustState, TrustError> {
        if !self.universe.trustors.contains(i) {
            return Err(TrustError::TypeMismatch(format!("{i} is not a trustor")));
        }
        if !self.universe.trustees.contains(j) {
            return Err(TrustError::TypeMismatch(format!("{j} is not a trustee")));
        }
        let mut s = self.clone();
        s.knowledge.insert((i.into(), j.into()));
        Ok(s)
    }

    pub fn commit(&self, i: &str, j: &Group, t: &str, value: bool) -> Result<TrustState, TrustError> {
        if !self.universe.trustors.contains(i) {
            return Err(TrustError::TypeMismatch(format!("{i} is not a trustor")));
        }
        if let Some(a) = j.iter().find(|a| !self.universe.trustees.contains(*a)) {
            return Err(TrustError::TypeMismatch(format!("{a} is not a trustee")));
        }
        self.universe.check_task(t)?;
        let mut s = self.clone();
        s.commitments.insert(
            Triple {
                trustor: i.into(),
                group: j.clone(),
                task: t.into(),
            },
            value,
        );
        Ok(s)
    }

    /// Effective commitment as seen by the level-2 machine.
    pub fn committed(&self, triple: &Triple) -> bool {
        self.commitments.get(triple) == Some(&true)
            && self.agent_task.get(&triple.group) == Some(&triple.task)
    }

    /// Applies `act1` once the query at `level` is granted.
    pub fn establish_trust(
        &self,
        i: &str,
        j: &Group,
        t: &str,
        level: TrustLevel,
    ) -> Result<TrustState, TrustError> {
        let d = super::query::trust_query(self, i, j, t, level)?;
        if !d.granted {
            return Err(TrustError::TrustDenied(d));
        }
        let mut s = self.clone();
        s.trustor_trustee_task.insert(Triple {
            trustor: i.into(),
            group: j.clone(),
            task: t.into(),
        });
        Ok(s)
    }

    fn agent_task_value(&self) -> Value {
        Value::set(
            self.agent_task
                .iter()
                .map(|(g, t)| Value::pair(group_value(g), Value::Atom(t.clone()))),
        )
    }

    /// The machine state of `level` for this trust state.
    pub fn embed(&self, level: TrustLevel) -> State {
        let mut vars = BTreeMap::new();
        vars.insert(Name::from("agent_task"), self.agent_task_value());
        vars.insert(
            Name::from("trustor_trustee_task"),
            Value::set(self.trustor_trustee_task.iter().map(Triple::to_value)),
        );
        if level >= TrustLevel::Epistemic {
            vars.insert(
                Name::from("knowledge"),
                Value::set(
                    self.knowledge
                        .iter()
                        .map(|(i, j)| Value::pair(Value::Atom(i.clone()), Value::Atom(j.clone()))),
                ),
            );
        }
        if level >= TrustLevel::Commitment {
            let mut entries = Vec::new();
            for i in &self.universe.trustors {
                for (g, t) in &self.agent_task {
                    let tr = Triple {
                        trustor: i.clone(),
                        group: g.clone(),
                        task: t.clone(),
                    };
                    entries.push(Value::pair(tr.to_value(), Value::Bool(self.committed(&tr))));
                }
            }
            vars.insert(Name::from("commitments"), Value::set(entries));
        }
        State {
            inst: Arc::new(self.universe.instantiation()),
            vars,
        }
    }

    /// Inverse of [`TrustState::embed`] for any level; missing variables are empty.
    pub fn from_state(s: &State) -> Result<TrustState, TrustError> {
        let bad = |what: &str, v: &Value| TrustError::TypeMismatch(format!("{what}: unexpected {v}"));
        let universe = Universe::from_instantiation(&s.inst)?;
        let mut out = TrustState::new(universe);
        let empty = Value::empty_set();
        let set_of = |name: &str| -> Result<Vec<Value>, TrustError> {
            let v = s.var(name).unwrap_or(&empty);
            Ok(v.as_set().map_err(|_| bad(name, v))?.iter().cloned().collect())
        };
        let atom = |v: &Value| v.as_atom().cloned().ok_or_else(|| bad("atom", v));
        let group = |v: &Value| -> Result<Group, TrustError> {
            v.as_set().map_err(|_| bad("group", v))?.iter().map(atom).collect()
        };
        let triple = |v: &Value| -> Result<Triple, TrustError> {
            let (i, rest) = v.as_pair().map_err(|_| bad("triple", v))?;
            let (j, t) = rest.as_pair().map_err(|_| bad("triple", v))?;
            Ok(Triple {
                trustor: atom(i)?,
                group: group(j)?,
                task: atom(t)?,
            })
        };
        for p in set_of("agent_task")? {
            let (g, t) = p.as_pair().map_err(|_| bad("agent_task", &p))?;
            out.agent_task.insert(group(g)?, atom(t)?);
        }
        for p in set_of("trustor_trustee_task")? {
            out.trustor_trustee_task.insert(triple(&p)?);
        }
        for p in set_of("knowledge")? {
            let (i, j) = p.as_pair().map_err(|_| bad("knowledge", &p))?;
            out.knowledge.insert((atom(i)?, atom(j)?));
        }
        for p in set_of("commitments")? {
            let (k, b) = p.as_pair().map_err(|_| bad("commitments", &p))?;
            let b = b.as_bool().map_err(|_| bad("commitments", &p))?;
            if b {
                out.commitments.insert(triple(k)?, true);
            }
        }
        Ok(out)
    }

    /// Sectioned text form, one entry per line in canonical order.
    pub fn export(&self) -> String {
        let u = &self.universe;
        let join = |s: &BTreeSet<Name>| s.iter().map(|x| &**x).collect::<Vec<_>>().join(" ");
        let mut out = String::from("[context]\n");
        out.push_str(&format!("trustors = {}\n", join(&u.trustors)));
        out.push_str(&format!("trustees = {}\n", join(&u.trustees)));
        out.push_str(&format!("tasks = {}\n", join(&u.tasks)));
        out.push_str("\n[agent_task]\n");
        for (g, t) in &self.agent_task {
            out.push_str(&format!("{} ↦ {t}\n", group_value(g)));
        }
        out.push_str("\n[trustor_trustee_task]\n");
        for tr in &self.trustor_trustee_task {
            out.push_str(&format!("{tr}\n"));
        }
        out.push_str("\n[knowledge]\n");
        for (i, j) in &self.knowledge {
            out.push_str(&format!("{i} ↦ {j}\n"));
        }
        out.push_str("\n[commitments]\n");
        for (tr, b) in &self.commitments {
            out.push_str(&format!("{tr} = {}\n", if *b { "TRUE" } else { "FALSE" }));
        }
        out
    }

    pub fn import(text: &str) -> Result<TrustState, TrustError> {
        let err = |line: usize, message: String| TrustError::Import { line, message };
        let mut section = String::new();
        let mut universe = Universe::default();
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let n = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = s.trim().to_string();
                continue;
            }
            if section == "context" {
                let (key, val) = line
                    .split_once('=')
                    .ok_or_else(|| err(n, format!("expected `name = atoms`, found `{line}`")))?;
                let set: BTreeSet<Name> = val.split_whitespace().map(Name::from).collect();
                match key.trim() {
                    "trustors" => universe.trustors = set,
                    "trustees" => universe.trustees = set,
                    "tasks" => universe.tasks = set,
                    other => return Err(err(n, format!("unknown context entry `{other}`"))),
                }
            } else {
                entries.push((n, section.clone(), line.to_string()));
            }
        }
        let mut st = TrustState::new(universe);
        let value = |n: usize, src: &str| parse_value(src).map_err(|e| err(n, e.to_string()));
        for (n, section, line) in entries {
            let wrap = |e: TrustError| err(n, e.to_string());
            match section.as_str() {
                "agent_task" => {
                    let (g, t) = split_pair(&value(n, &line)?).ok_or_else(|| err(n, "expected group ↦ task".into()))?;
                    let g = value_group(&g).ok_or_else(|| err(n, "expected a set of agents".into()))?;
                    let t = t.as_atom().cloned().ok_or_else(|| err(n, "expected a task".into()))?;
                    st = st.allocate_task(&g, &t).map_err(wrap)?;
                }
                "trustor_trustee_task" => {
                    let tr = value_triple(&value(n, &line)?).ok_or_else(|| err(n, "expected a triple".into()))?;
                    st.universe.check_agent(&tr.trustor).map_err(wrap)?;
                    st.universe.check_group(&tr.group).map_err(wrap)?;
                    st.universe.check_task(&tr.task).map_err(wrap)?;
                    st.trustor_trustee_task.insert(tr);
                }
                "knowledge" => {
                    let (i, j) = split_pair(&value(n, &line)?).ok_or_else(|| err(n, "expected i ↦ j".into()))?;
                    let (Some(i), Some(j)) = (i.as_atom(), j.as_atom()) else {
                        return Err(err(n, "expected agents".into()));
                    };
                    st = st.learn(i, j).map_err(wrap)?;
                }
                "commitments" => {
                    let (lhs, rhs) = line
                        .rsplit_once('=')
                        .ok_or_else(|| err(n, "expected `triple = TRUE|FALSE`".into()))?;
                    let b = match rhs.trim() {
                        "TRUE" => true,
                        "FALSE" => false,
                        other => return Err(err(n, format!("expected TRUE or FALSE, found `{other}`"))),
                    };
                    let tr = value_triple(&value(n, lhs.trim())?).ok_or_else(|| err(n, "expected a triple".into()))?;
                    st = st.commit(&tr.trustor, &tr.group, &tr.task, b).map_err(wrap)?;
                }
                "" => return Err(err(n, "entry before any section header".into())),
                other => return Err(err(n, format!("unknown section `{other}`"))),
            }
        }
        Ok(st)
    }
}

fn split_pair(v: &Value) -> Option<(Value, Value)> {
    v.as_pair().ok().map(|(a, b)| (a.clone(), b.clone()))
}

fn value_group(v: &Value) -> Option<Group> {
    v.as_set().ok()?.iter().map(|x| x.as_atom().cloned()).collect()
}

fn value_triple(v: &Value) -> Option<Triple> {
    let (i, rest) = v.as_pair().ok()?;
    let (j, t) = rest.as_pair().ok()?;
    Some(Triple {
        trustor: i.as_atom()?.clone(),
        group: value_group(j)?,
        task: t.as_atom()?.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(xs: &[&str]) -> Group {
        xs.iter().map(|x| Name::from(*x)).collect()
    }

    fn base() -> TrustState {
        TrustState::new(Universe::new(&["u1", "u2"], &["v1", "v2"], &["t1", "t2"]))
    }

    #[test]
    fn allocation_is_functional() {
        let s = base().allocate_task(&g(&["v1"]), "t1").unwrap();
        assert!(matches!(
            s.allocate_task(&g(&["v1"]), "t2"),
            Err(TrustError::FunctionalityViolation { .. })
        ));
        let s = s.allocate_task(&g(&["v1", "v2"]), "t2").unwrap();
        assert_eq!(s.agent_task.len(), 2);
        assert_eq!(s.allocate_task(&g(&["v1"]), "t1").unwrap(), s);
    }

    #[test]
    fn learn_typing_and_idempotence() {
        let s = base().learn("u1", "v1").unwrap();
        assert_eq!(s.learn("u1", "v1").unwrap(), s);
        assert!(matches!(base().learn("u1", "u2"), Err(TrustError::TypeMismatch(_))));
    }

    #[test]
    fn commitment_overwrites() {
        let tr = Triple::new("u1", &["v1"], "t1");
        let s = base()
            .allocate_task(&g(&["v1"]), "t1")
            .unwrap()
            .commit("u1", &g(&["v1"]), "t1", true)
            .unwrap();
        assert!(s.committed(&tr));
        let s = s.commit("u1", &g(&["v1"]), "t1", false).unwrap();
        assert!(!s.committed(&tr));
    }

    #[test]
    fn export_import_round_trip() {
        let s = base()
            .allocate_task(&g(&["v1"]), "t1")
            .unwrap()
            .learn("u1", "v1")
            .unwrap()
            .commit("u1", &g(&["v1"]), "t1", true)
            .unwrap();
        let s = s.establish_trust("u1", &g(&["v1"]), "t1", TrustLevel::Commitment).unwrap();
        let text = s.export();
        assert!(text.contains("[commitments]\nu1 ↦ ({v1} ↦ t1) = TRUE\n"));
        assert_eq!(TrustState::import(&text).unwrap(), s);
    }

    #[test]
    fn embed_and_decode() {
        let s = base()
            .allocate_task(&g(&["v1"]), "t1")
            .unwrap()
            .commit("u2", &g(&["v1"]), "t1", true)
            .unwrap();
        let st = s.embed(TrustLevel::Commitment);
        assert_eq!(
            st.var("commitments").unwrap().to_string(),
            "{u1 ↦ ({v1} ↦ t1) ↦ FALSE, u2 ↦ ({v1} ↦ t1) ↦ TRUE}"
        );
        assert_eq!(TrustState::from_state(&st).unwrap(), s);
    }
}
