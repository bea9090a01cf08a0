//! Executable semantics of a typed machine over a finite instantiation.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ast::Expr;
use crate::eval::{Env, Evaluator};
use crate::types::{Ty, TypedEvent, TypedModel};
use crate::value::{EvalError, Name, SetV, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("instantiation violates axiom {label}")]
    AxiomViolation { label: String },
    #[error("event {event} is not enabled: guard {label} is false")]
    GuardFailed { event: String, label: String },
    #[error("ill-typed binding: {0}")]
    TypeMismatch(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Values for every carrier set and constant of the seen contexts.
#[derive(Clone)]
pub struct Instantiation {
    pub carriers: BTreeMap<Name, SetV>,
    pub constants: BTreeMap<Name, Value>,
    env: Env,
}

impl Instantiation {
    pub fn new(carriers: BTreeMap<Name, SetV>, constants: BTreeMap<Name, Value>) -> Self {
        let mut env = Env::new();
        for (k, v) in &carriers {
            env.set(k.clone(), Value::Set(v.clone()));
        }
        for (k, v) in &constants {
            env.set(k.clone(), v.clone());
        }
        Instantiation {
            carriers,
            constants,
            env,
        }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn carrier(&self, name: &str) -> Option<&SetV> {
        self.carriers.get(name)
    }

    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.constants.get(name)
    }

    fn key(&self) -> (&BTreeMap<Name, SetV>, &BTreeMap<Name, Value>) {
        (&self.carriers, &self.constants)
    }
}

impl PartialEq for Instantiation {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Instantiation {}

impl PartialOrd for Instantiation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Instantiation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl Hash for Instantiation {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl fmt::Debug for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.carriers {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        for (k, v) in &self.constants {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// A valuation of the machine variables over an instantiation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub inst: Arc<Instantiation>,
    pub vars: BTreeMap<Name, Value>,
}

impl State {
    pub fn env(&self) -> Env {
        let mut env = self.inst.env().clone();
        for (k, v) in &self.vars {
            env.set(k.clone(), v.clone());
        }
        env
    }

    pub fn var(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    /// Short content hash, stable across runs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.inst.to_string().as_bytes());
        for (k, v) in &self.vars {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Variables only, `name = value` separated by `; `.
    pub fn describe_vars(&self) -> String {
        self.vars
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.inst, self.describe_vars())
    }
}

/// Parameter values in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Binding(pub Vec<(Name, Value)>);

impl Binding {
    pub fn new<I: IntoIterator<Item = (&'static str, Value)>>(items: I) -> Binding {
        Binding(items.into_iter().map(|(k, v)| (Name::from(k), v)).collect())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| &**k == name).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Truth value of every guard of an event under a binding, in label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardReport {
    pub event: Name,
    pub results: Vec<(Name, bool)>,
}

impl GuardReport {
    pub fn enabled(&self) -> bool {
        self.results.iter().all(|(_, b)| *b)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|(_, b)| !*b)
            .map(|(l, _)| &**l)
            .collect()
    }

    pub fn get(&self, label: &str) -> Option<bool> {
        self.results.iter().find(|(l, _)| &**l == label).map(|(_, b)| *b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub pre: State,
    pub event: Name,
    pub binding: Binding,
    pub post: State,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: State,
    pub steps: Vec<Transition>,
}

impl Trace {
    pub fn new(initial: State) -> Trace {
        Trace {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn last(&self) -> &State {
        self.steps.last().map(|t| &t.post).unwrap_or(&self.initial)
    }

    /// Line-delimited, tab-separated records. See the README for the format.
    pub fn to_records(&self, rt: &Runtime<'_>) -> Result<String, RuntimeError> {
        let mut out = String::from("trace\tversion=1\n");
        out.push_str(&format!("inst\t{}\n", self.initial.inst));
        let state_line = |s: &State| {
            let mut l = format!("state\t{}", s.digest());
            for (k, v) in &s.vars {
                l.push_str(&format!("\t{k}={v}"));
            }
            l.push('\n');
            l
        };
        out.push_str(&state_line(&self.initial));
        for (n, t) in self.steps.iter().enumerate() {
            let report = rt.event_enabled(&t.pre, &t.event, &t.binding)?;
            let binding: Vec<String> = t.binding.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let guards: Vec<String> = report
                .results
                .iter()
                .map(|(l, b)| format!("{l}:{}", if *b { 'T' } else { 'F' }))
                .collect();
            out.push_str(&format!(
                "step\t{}\tevent={}\tpre={}\tpost={}\tbinding={}\tguards={}\n",
                n + 1,
                t.event,
                t.pre.digest(),
                t.post.digest(),
                binding.join(";"),
                guards.join(",")
            ));
            out.push_str(&state_line(&t.post));
        }
        Ok(out)
    }
}

/// Whether `v` inhabits type `ty` under the instantiation's carriers.
pub fn value_has_type(v: &Value, ty: &Ty, inst: &Instantiation) -> bool {
    match (v, ty) {
        (_, Ty::Unknown) => true,
        (Value::Atom(_), Ty::Carrier(c)) => inst.carrier(c).is_some_and(|s| s.contains(v)),
        (Value::Bool(_), Ty::Bool) => true,
        (Value::Set(s), Ty::Set(t)) => s.iter().all(|x| value_has_type(x, t, inst)),
        (Value::Pair(p), Ty::Pair(a, b)) => {
            value_has_type(&p.0, a, inst) && value_has_type(&p.1, b, inst)
        }
        _ => false,
    }
}

pub struct Runtime<'m> {
    pub model: &'m TypedModel,
    pub ev: Evaluator,
}

impl<'m> Runtime<'m> {
    pub fn new(model: &'m TypedModel) -> Self {
        Runtime {
            model,
            ev: Evaluator::default(),
        }
    }

    pub fn with_evaluator(model: &'m TypedModel, ev: Evaluator) -> Self {
        Runtime { model, ev }
    }

    pub fn check_axioms(&self, inst: &Instantiation) -> Result<(), RuntimeError> {
        for a in &self.model.axioms {
            if !self.ev.eval_pred(&a.pred, inst.env())? {
                return Err(RuntimeError::AxiomViolation {
                    label: a.label.clone(),
                });
            }
        }
        Ok(())
    }

    fn event(&self, name: &str) -> Result<&'m TypedEvent, RuntimeError> {
        self.model
            .target()
            .event(name)
            .ok_or_else(|| RuntimeError::UnknownEvent(name.to_string()))
    }

    /// Empty sets everywhere, then the INITIALISATION actions if any.
    pub fn initial_state(&self, inst: &Instantiation) -> Result<State, RuntimeError> {
        self.check_axioms(inst)?;
        self.initial_state_unchecked(Arc::new(inst.clone()))
    }

    pub(crate) fn initial_state_unchecked(
        &self,
        inst: Arc<Instantiation>,
    ) -> Result<State, RuntimeError> {
        let scope = self.model.target();
        let mut vars = BTreeMap::new();
        let init = scope.initialisation();
        let env = inst.env().clone();
        for v in &scope.variables {
            let value = match init.and_then(|e| e.event.action_for(&v.name)) {
                Some(a) => self.ev.eval_expr(&a.body.expr, &env)?,
                None => match v.ty {
                    Ty::Bool => Value::Bool(false),
                    _ => Value::empty_set(),
                },
            };
            vars.insert(v.name.clone(), value);
        }
        Ok(State { inst, vars })
    }

    fn binding_env(
        &self,
        s: &State,
        ev: &TypedEvent,
        binding: &Binding,
    ) -> Result<Env, RuntimeError> {
        let mut env = s.env();
        for (n, v) in self.check_binding(s, ev, binding)? {
            env.set(n, v);
        }
        Ok(env)
    }

    fn check_binding(
        &self,
        s: &State,
        ev: &TypedEvent,
        binding: &Binding,
    ) -> Result<Vec<(Name, Value)>, RuntimeError> {
        if binding.0.len() != ev.params.len() {
            return Err(RuntimeError::TypeMismatch(format!(
                "event {} takes {} parameters, binding has {}",
                ev.name(),
                ev.params.len(),
                binding.0.len()
            )));
        }
        let mut out = Vec::with_capacity(ev.params.len());
        for p in &ev.params {
            let v = binding.get(&p.name).ok_or_else(|| {
                RuntimeError::TypeMismatch(format!("parameter {} is not bound", p.name))
            })?;
            if !value_has_type(v, &p.ty, &s.inst) {
                return Err(RuntimeError::TypeMismatch(format!(
                    "{} = {v} is not of type {}",
                    p.name, p.ty
                )));
            }
            out.push((p.name.clone(), v.clone()));
        }
        Ok(out)
    }

    pub fn event_enabled(
        &self,
        s: &State,
        event: &str,
        binding: &Binding,
    ) -> Result<GuardReport, RuntimeError> {
        let mut r = self.guard_table(s, event, std::slice::from_ref(binding))?;
        Ok(r.pop().expect("one binding"))
    }

    /// Guard reports for many bindings of one event in the same state.
    pub fn guard_table(
        &self,
        s: &State,
        event: &str,
        bindings: &[Binding],
    ) -> Result<Vec<GuardReport>, RuntimeError> {
        let ev = self.event(event)?;
        let env = s.env();
        let mut out = Vec::with_capacity(bindings.len());
        for b in bindings {
            let locals = self.check_binding(s, ev, b)?;
            let truth = self.ev.eval_preds_with(ev.event.guards.iter().map(|g| &g.body), &env, locals)?;
            out.push(GuardReport {
                event: ev.event.name.clone(),
                results: ev.event.guards.iter().map(|g| g.label.clone()).zip(truth).collect(),
            });
        }
        Ok(out)
    }

    pub fn fire_event(&self, s: &State, event: &str, binding: &Binding) -> Result<State, RuntimeError> {
        let ev = self.event(event)?;
        let env = self.binding_env(s, ev, binding)?;
        for g in &ev.event.guards {
            if !self.ev.eval_pred(&g.body, &env)? {
                return Err(RuntimeError::GuardFailed {
                    event: event.to_string(),
                    label: g.label.to_string(),
                });
            }
        }
        self.apply_actions(s, ev, &env)
    }

    /// Applies the actions of `ev`, all evaluated in the pre-state `env`.
    pub(crate) fn apply_actions(
        &self,
        s: &State,
        ev: &TypedEvent,
        env: &Env,
    ) -> Result<State, RuntimeError> {
        let mut post = s.clone();
        for a in &ev.event.actions {
            let v = self.ev.eval_expr(&a.body.expr, env)?;
            post.vars.insert(a.body.var.clone(), v);
        }
        Ok(post)
    }

    pub fn check_invariants(&self, s: &State) -> Result<Vec<(String, bool)>, RuntimeError> {
        let env = s.env();
        let mut out = Vec::new();
        for inv in self.model.invariants() {
            out.push((inv.label.clone(), self.ev.eval_pred(&inv.pred, &env)?));
        }
        Ok(out)
    }

    /// Every binding of the event's parameters over their typing ranges,
    /// in canonical order. Ranges may depend on earlier parameters.
    pub fn bindings(&self, s: &State, event: &str) -> Result<Vec<Binding>, RuntimeError> {
        let ev = self.event(event)?;
        let mut out = Vec::new();
        let mut env = s.env();
        self.bindings_rec(ev, 0, &mut env, &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    fn bindings_rec(
        &self,
        ev: &TypedEvent,
        k: usize,
        env: &mut Env,
        acc: &mut Vec<(Name, Value)>,
        out: &mut Vec<Binding>,
    ) -> Result<(), RuntimeError> {
        let Some(p) = ev.params.get(k) else {
            out.push(Binding(acc.clone()));
            return Ok(());
        };
        for v in self.ev.range_values(p.typing.range(), env)? {
            env.set(p.name.clone(), v.clone());
            acc.push((p.name.clone(), v));
            self.bindings_rec(ev, k + 1, env, acc, out)?;
            acc.pop();
        }
        Ok(())
    }

    /// All enabled (event, binding) pairs, ordered by event name then binding.
    pub fn enumerate_transitions(&self, s: &State) -> Result<Vec<Transition>, RuntimeError> {
        let mut events: Vec<&TypedEvent> = self.model.target().transition_events().collect();
        events.sort_by(|a, b| a.name().cmp(b.name()));
        let mut out = Vec::new();
        for ev in events {
            for b in self.bindings(s, ev.name())? {
                let env = self.binding_env(s, ev, &b)?;
                let mut enabled = true;
                for g in &ev.event.guards {
                    if !self.ev.eval_pred(&g.body, &env)? {
                        enabled = false;
                        break;
                    }
                }
                if enabled {
                    let post = self.apply_actions(s, ev, &env)?;
                    out.push(Transition {
                        pre: s.clone(),
                        event: ev.event.name.clone(),
                        binding: b,
                        post,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Re-fires every step and compares with the stored post states.
    pub fn replay(&self, trace: &Trace) -> Result<bool, RuntimeError> {
        let mut cur = &trace.initial;
        for t in &trace.steps {
            if &t.pre != cur {
                return Ok(false);
            }
            if self.fire_event(&t.pre, &t.event, &t.binding)? != t.post {
                return Ok(false);
            }
            cur = &t.post;
        }
        Ok(true)
    }

    /// Evaluates an expression in a state (convenience for reports and tests).
    pub fn eval(&self, s: &State, e: &Expr) -> Result<Value, RuntimeError> {
        Ok(self.ev.eval_expr(e, &s.env())?)
    }
}
