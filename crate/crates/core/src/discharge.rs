//! Bounded exhaustive discharge of proof obligations.
//!
//! A verdict is relative to the bounds: `Discharged` means no counterexample
//! exists among the enumerated instantiations, states and bindings.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::{CmpOp, Expr, Pred};
use crate::enumerate::{instantiations, BoundSpec, EnumError, StateSpace};
use crate::eval::{Env, Evaluator};
use crate::po::{generate_pos, PoKind, ProofObligation};
use crate::runtime::{Binding, Instantiation, Runtime, RuntimeError, State};
use crate::types::{TypedEvent, TypedModel, Typing};
use crate::value::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Discharged,
    Failed,
    /// No case satisfied the hypotheses.
    Vacuous,
    /// A powerset bound was hit before the sweep completed.
    BoundExceeded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Discharged => "discharged",
            Verdict::Failed => "failed",
            Verdict::Vacuous => "vacuous",
            Verdict::BoundExceeded => "bound-exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// The pre-state (for INIT obligations, the initial state).
    pub state: State,
    pub binding: Option<Binding>,
}

impl Counterexample {
    pub fn inst(&self) -> &Instantiation {
        &self.state.inst
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.state.inst, self.state.describe_vars())?;
        if let Some(b) = self.binding.as_ref().filter(|b| !b.is_empty()) {
            write!(f, " | {b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DischargeReport {
    pub po: ProofObligation,
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    /// Cases satisfying the hypotheses that were checked.
    pub cases_checked: u64,
    /// Wall time of the sweep that produced this report.
    pub elapsed: Duration,
    pub note: Option<String>,
}

/// Equality ignores timing.
impl PartialEq for DischargeReport {
    fn eq(&self, o: &Self) -> bool {
        self.po == o.po
            && self.verdict == o.verdict
            && self.counterexample == o.counterexample
            && self.cases_checked == o.cases_checked
            && self.note == o.note
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DischargeError {
    #[error(transparent)]
    Enum(#[from] EnumError),
    #[error("unknown event `{0}` in obligation")]
    UnknownEvent(String),
}

impl From<RuntimeError> for DischargeError {
    fn from(e: RuntimeError) -> Self {
        DischargeError::Enum(EnumError::Runtime(e))
    }
}

impl From<crate::value::EvalError> for DischargeError {
    fn from(e: crate::value::EvalError) -> Self {
        DischargeError::Enum(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardStatus {
    /// Some case makes this guard alone false.
    Falsifiable,
    /// Whenever the other guards hold, so does this one.
    Vacuous,
    /// Typing guard of a parameter; true by construction of the bindings.
    Typing,
}

impl fmt::Display for GuardStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardStatus::Falsifiable => "falsifiable",
            GuardStatus::Vacuous => "vacuous",
            GuardStatus::Typing => "typing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardVacuity {
    pub event: Name,
    pub label: Name,
    pub status: GuardStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalReport {
    pub label: String,
    pub pred: Pred,
    /// Instantiations in which some reachable state satisfies the goal.
    pub reached_in: usize,
    /// Instantiations in which no invariant-satisfying state satisfies it.
    pub unsatisfiable_in: usize,
    pub instantiations: usize,
    pub witness: Option<State>,
    pub states_explored: u64,
}

impl GoalReport {
    /// Reached in every instantiation where some state satisfies it.
    pub fn met(&self) -> bool {
        self.reached_in + self.unsatisfiable_in == self.instantiations
    }
}

/// Per-obligation accumulator during a sweep.
#[derive(Default, Clone)]
struct Acc {
    cases: u64,
    failed: Option<Counterexample>,
}

/// Obligations sharing one event, evaluated over a single binding sweep.
struct Group<'a> {
    ev: &'a TypedEvent,
    /// Guards to evaluate after `k` parameters are bound, indexed by `k`.
    guards_at: Vec<Vec<&'a Pred>>,
    pos: Vec<usize>,
}

fn is_bare_typing(p: &Pred, name: &Name, typing: &Typing) -> bool {
    match (typing, p) {
        (Typing::Member(e), Pred::Cmp(CmpOp::In, Expr::Ident(x), e2))
        | (Typing::Subset(e), Pred::Cmp(CmpOp::Subset, Expr::Ident(x), e2)) => x == name && e == e2,
        _ => false,
    }
}

impl<'a> Group<'a> {
    fn new(ev: &'a TypedEvent) -> Self {
        let n = ev.params.len();
        let mut guards_at = vec![Vec::new(); n + 1];
        for g in &ev.event.guards {
            if ev
                .params
                .iter()
                .any(|p| p.guard == g.label && is_bare_typing(&g.body, &p.name, &p.typing))
            {
                continue;
            }
            let free = g.body.free_idents();
            let k = ev
                .params
                .iter()
                .rposition(|p| free.contains(&p.name))
                .map_or(0, |k| k + 1);
            guards_at[k].push(&g.body);
        }
        Group {
            ev,
            guards_at,
            pos: Vec::new(),
        }
    }
}

pub struct Discharger<'m> {
    model: &'m TypedModel,
    bounds: BoundSpec,
    ev: Evaluator,
}

impl<'m> Discharger<'m> {
    pub fn new(model: &'m TypedModel, bounds: BoundSpec) -> Self {
        let ev = bounds.evaluator();
        Discharger { model, bounds, ev }
    }

    pub fn bounds(&self) -> &BoundSpec {
        &self.bounds
    }

    pub fn discharge(&self, po: &ProofObligation) -> Result<DischargeReport, DischargeError> {
        let mut r = self.discharge_all(std::slice::from_ref(po))?;
        Ok(r.remove(0))
    }

    /// Discharges all obligations in one sweep over the state space.
    pub fn discharge_all(&self, pos: &[ProofObligation]) -> Result<Vec<DischargeReport>, DischargeError> {
        let start = Instant::now();
        let mut accs = vec![Acc::default(); pos.len()];
        let outcome = self.sweep(pos, &mut accs);
        let elapsed = start.elapsed();
        let exceeded = match outcome {
            Ok(()) => false,
            Err(DischargeError::Enum(e)) if e.is_bound_exceeded() => true,
            Err(e) => return Err(e),
        };
        Ok(pos
            .iter()
            .zip(accs)
            .map(|(po, acc)| {
                let (verdict, note) = match (&acc.failed, exceeded, acc.cases) {
                    (Some(_), _, _) => (Verdict::Failed, None),
                    (None, true, _) => (
                        Verdict::BoundExceeded,
                        Some(format!(
                            "powerset bound {} exceeded; raise it or lower the cardinalities",
                            self.bounds.powerset_bound
                        )),
                    ),
                    (None, false, 0) => (
                        Verdict::Vacuous,
                        Some("no case satisfies the hypotheses".to_string()),
                    ),
                    (None, false, _) => (Verdict::Discharged, self.variable_free_note(po)),
                };
                DischargeReport {
                    po: po.clone(),
                    verdict,
                    counterexample: acc.failed,
                    cases_checked: acc.cases,
                    elapsed,
                    note,
                }
            })
            .collect())
    }

    /// Flags an INV obligation whose goal reads no machine variable: the
    /// event cannot affect it, so discharging it says nothing about the event.
    fn variable_free_note(&self, po: &ProofObligation) -> Option<String> {
        let vars = &self.model.target().variables;
        let reads_var = po.goal.free_idents().iter().any(|n| vars.iter().any(|v| v.name == *n));
        (po.kind == PoKind::Inv && !reads_var).then(|| "invariant mentions no machine variable".to_string())
    }

    fn sweep(&self, pos: &[ProofObligation], accs: &mut [Acc]) -> Result<(), DischargeError> {
        let scope = self.model.target();
        let rt = Runtime::with_evaluator(self.model, self.ev);
        let mut init_pos = Vec::new();
        let mut groups: Vec<Group> = Vec::new();
        for (k, po) in pos.iter().enumerate() {
            if po.kind == PoKind::Init || (po.kind == PoKind::Sim && po.params.is_empty() && scope.event(&po.event).is_some_and(|e| e.event.is_initialisation())) {
                init_pos.push(k);
                continue;
            }
            let ev = scope
                .event(&po.event)
                .ok_or_else(|| DischargeError::UnknownEvent(po.event.to_string()))?;
            match groups.iter_mut().find(|g| g.ev.name() == ev.name()) {
                Some(g) => g.pos.push(k),
                None => {
                    let mut g = Group::new(ev);
                    g.pos.push(k);
                    groups.push(g);
                }
            }
        }

        let insts = instantiations(self.model, &self.bounds)?;
        let space = StateSpace::new(self.model, &self.bounds);
        let open = |accs: &[Acc]| accs.iter().any(|a| a.failed.is_none());
        for inst in insts {
            if !open(accs) {
                break;
            }
            let inst = Arc::new(inst);
            for &k in &init_pos {
                if accs[k].failed.is_some() {
                    continue;
                }
                accs[k].cases += 1;
                if !self.ev.eval_pred(&pos[k].goal, inst.env())? {
                    let state = rt.initial_state_unchecked(inst.clone())?;
                    accs[k].failed = Some(Counterexample {
                        state,
                        binding: None,
                    });
                }
            }
            if groups.is_empty() {
                continue;
            }
            let flow = space.for_each(&inst, |s| {
                let mut env = s.env();
                for g in &groups {
                    if g.pos.iter().all(|&k| accs[k].failed.is_some()) {
                        continue;
                    }
                    let mut acc = Vec::new();
                    self.bind(g, 0, s, &mut env, &mut acc, pos, accs)?;
                }
                Ok(if open(accs) {
                    ControlFlow::Continue(())
                } else {
                    ControlFlow::Break(())
                })
            })?;
            if flow.is_break() {
                break;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn bind(
        &self,
        g: &Group<'_>,
        k: usize,
        s: &State,
        env: &mut Env,
        acc: &mut Vec<(Name, crate::value::Value)>,
        pos: &[ProofObligation],
        accs: &mut [Acc],
    ) -> Result<(), EnumError> {
        for guard in &g.guards_at[k] {
            if !self.ev.eval_pred(guard, env)? {
                return Ok(());
            }
        }
        let Some(p) = g.ev.params.get(k) else {
            for &i in &g.pos {
                if accs[i].failed.is_some() {
                    continue;
                }
                accs[i].cases += 1;
                if !self.ev.eval_pred(&pos[i].goal, env)? {
                    accs[i].failed = Some(Counterexample {
                        state: s.clone(),
                        binding: Some(Binding(acc.clone())),
                    });
                }
            }
            return Ok(());
        };
        for v in self.ev.range_values(p.typing.range(), env)? {
            env.set(p.name.clone(), v.clone());
            acc.push((p.name.clone(), v));
            self.bind(g, k + 1, s, env, acc, pos, accs)?;
            acc.pop();
            if g.pos.iter().all(|&i| accs[i].failed.is_some()) {
                break;
            }
        }
        Ok(())
    }

    /// Classifies every guard of every transition event.
    pub fn detect_vacuous_guards(&self) -> Result<Vec<GuardVacuity>, DischargeError> {
        let scope = self.model.target();
        let rt = Runtime::with_evaluator(self.model, self.ev);
        let mut out = Vec::new();
        let insts = instantiations(self.model, &self.bounds)?;
        let space = StateSpace::new(self.model, &self.bounds);
        for ev in scope.transition_events() {
            let labels: Vec<&Name> = ev.event.guards.iter().map(|g| &g.label).collect();
            let typing: Vec<bool> = labels.iter().map(|l| ev.is_typing_guard(l)).collect();
            let mut falsified: Vec<bool> = typing.clone();
            for inst in &insts {
                if falsified.iter().all(|f| *f) {
                    break;
                }
                let inst = Arc::new(inst.clone());
                let _ = space.for_each(&inst, |s| {
                    for b in rt.bindings(s, ev.name())? {
                        let report = rt.event_enabled(s, ev.name(), &b)?;
                        let failing: Vec<usize> = report
                            .results
                            .iter()
                            .enumerate()
                            .filter(|(_, (_, ok))| !ok)
                            .map(|(k, _)| k)
                            .collect();
                        if let [k] = failing[..] {
                            falsified[k] = true;
                        }
                    }
                    Ok(if falsified.iter().all(|f| *f) {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    })
                })?;
            }
            for (k, l) in labels.iter().enumerate() {
                let status = if typing[k] {
                    GuardStatus::Typing
                } else if falsified[k] {
                    GuardStatus::Falsifiable
                } else {
                    GuardStatus::Vacuous
                };
                out.push(GuardVacuity {
                    event: ev.event.name.clone(),
                    label: (*l).clone(),
                    status,
                });
            }
        }
        Ok(out)
    }

    /// For each goal invariant, whether a state satisfying it is reachable.
    pub fn reach_goals(&self) -> Result<Vec<GoalReport>, DischargeError> {
        let insts = instantiations(self.model, &self.bounds)?;
        let space = StateSpace::new(self.model, &self.bounds);
        let mut reports: Vec<GoalReport> = self
            .model
            .goals
            .iter()
            .map(|g| GoalReport {
                label: g.label.clone(),
                pred: g.pred.clone(),
                reached_in: 0,
                unsatisfiable_in: 0,
                instantiations: insts.len(),
                witness: None,
                states_explored: 0,
            })
            .collect();
        if reports.is_empty() {
            return Ok(reports);
        }
        for inst in insts {
            let inst = Arc::new(inst);
            let mut hit = vec![false; reports.len()];
            let _ = space.for_each_reachable(
                &inst,
                &mut |s: &State| {
                    let env = s.env();
                    for (k, r) in reports.iter_mut().enumerate() {
                        r.states_explored += 1;
                        if !hit[k] && self.ev.eval_pred(&r.pred, &env)? {
                            hit[k] = true;
                            if r.witness.is_none() {
                                r.witness = Some(s.clone());
                            }
                        }
                    }
                    Ok(ControlFlow::Continue(()))
                },
                false,
            )?;
            for (k, r) in reports.iter_mut().enumerate() {
                r.reached_in += usize::from(hit[k]);
            }
            let mut sat = hit.clone();
            if sat.iter().all(|b| *b) {
                continue;
            }
            let _ = space.for_each_invariant_state(&inst, &mut |s: &State| {
                let env = s.env();
                for (k, r) in reports.iter().enumerate() {
                    if !sat[k] && self.ev.eval_pred(&r.pred, &env)? {
                        sat[k] = true;
                    }
                }
                Ok(if sat.iter().all(|b| *b) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                })
            })?;
            for (k, r) in reports.iter_mut().enumerate() {
                r.unsatisfiable_in += usize::from(!sat[k]);
            }
        }
        Ok(reports)
    }
}

/// Re-executes a counterexample through the runtime. Returns true when the
/// violation reproduces.
pub fn replay_counterexample(
    model: &TypedModel,
    po: &ProofObligation,
    cx: &Counterexample,
) -> Result<bool, RuntimeError> {
    let rt = Runtime::new(model);
    let inv_false = |s: &State| -> Result<bool, RuntimeError> {
        Ok(rt
            .check_invariants(s)?
            .iter()
            .any(|(l, ok)| *l == po.subject && !ok))
    };
    match po.kind {
        PoKind::Init => {
            let s = rt.initial_state(cx.inst())?;
            inv_false(&s)
        }
        PoKind::Inv => {
            let b = cx.binding.clone().unwrap_or_default();
            if !rt.check_invariants(&cx.state)?.iter().all(|(_, ok)| *ok) {
                return Ok(false);
            }
            let post = rt.fire_event(&cx.state, &po.event, &b)?;
            inv_false(&post)
        }
        PoKind::Grd | PoKind::Sim => {
            let b = cx.binding.clone().unwrap_or_default();
            let Some(abs_model) = model.abstract_model() else {
                return Ok(false);
            };
            let conc = model
                .target()
                .event(&po.event)
                .ok_or_else(|| RuntimeError::UnknownEvent(po.event.to_string()))?;
            let abs_name = if conc.event.is_initialisation() {
                conc.event.name.clone()
            } else {
                conc.event
                    .refines
                    .clone()
                    .ok_or_else(|| RuntimeError::UnknownEvent(po.event.to_string()))?
            };
            let abs_scope = abs_model.target();
            let abs_ev = abs_scope
                .event(&abs_name)
                .ok_or_else(|| RuntimeError::UnknownEvent(abs_name.to_string()))?;
            let abs_state = State {
                inst: cx.state.inst.clone(),
                vars: cx
                    .state
                    .vars
                    .iter()
                    .filter(|(k, _)| abs_scope.variable(k).is_some())
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect::<BTreeMap<_, _>>(),
            };
            let abs_binding = Binding(
                b.0.iter()
                    .filter(|(k, _)| abs_ev.params.iter().any(|p| p.name == *k))
                    .cloned()
                    .collect(),
            );
            let abs_rt = Runtime::new(&abs_model);
            if po.kind == PoKind::Grd {
                if !rt.event_enabled(&cx.state, &po.event, &b)?.enabled() {
                    return Ok(false);
                }
                let r = abs_rt.event_enabled(&abs_state, &abs_name, &abs_binding)?;
                return Ok(r.get(&po.subject) == Some(false));
            }
            let var = po.variable.clone().unwrap_or_default();
            let post_c = rt.fire_event(&cx.state, &po.event, &b)?;
            let mut env = abs_state.env();
            for (k, v) in &abs_binding.0 {
                env.set(k.clone(), v.clone());
            }
            let post_a = abs_rt.apply_actions(&abs_state, abs_ev, &env)?;
            Ok(post_c.var(&var) != post_a.var(&var))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefinementError {
    #[error("{concrete} does not refine {abstract_}")]
    NotARefinement { abstract_: String, concrete: String },
    #[error("not a superposition refinement: variable {variable} {reason}")]
    NotSuperposition { variable: String, reason: String },
    #[error(transparent)]
    Discharge(#[from] DischargeError),
}

/// Checks that `concrete` superposes `abstract_` and discharges its GRD and
/// SIM obligations.
pub fn check_refinement(
    abstract_: &TypedModel,
    concrete: &TypedModel,
    bounds: &BoundSpec,
) -> Result<Vec<DischargeReport>, RefinementError> {
    let a = abstract_.target();
    let c = concrete.target();
    let parent_ok = concrete.parent().is_some_and(|p| p.name == a.name);
    if c.refines.as_ref() != Some(&a.name) || !parent_ok {
        return Err(RefinementError::NotARefinement {
            abstract_: a.name.to_string(),
            concrete: c.name.to_string(),
        });
    }
    for v in &a.variables {
        let Some(cv) = c.variable(&v.name) else {
            return Err(RefinementError::NotSuperposition {
                variable: v.name.to_string(),
                reason: "is removed".into(),
            });
        };
        if cv.ty != v.ty || cv.typing.declared_domain() != v.typing.declared_domain() {
            return Err(RefinementError::NotSuperposition {
                variable: v.name.to_string(),
                reason: format!(
                    "is retyped from {} to {}",
                    crate::dsl::print_expr(&v.typing.declared_domain()),
                    crate::dsl::print_expr(&cv.typing.declared_domain())
                ),
            });
        }
    }
    let pos: Vec<ProofObligation> = generate_pos(concrete)
        .into_iter()
        .filter(|p| matches!(p.kind, PoKind::Grd | PoKind::Sim))
        .collect();
    Ok(Discharger::new(concrete, bounds.clone()).discharge_all(&pos)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_context, parse_machine};
    use crate::types::typecheck_model;

    const CTX: &str = "CONTEXT c SETS S END";
    const M: &str = "MACHINE m SEES c VARIABLES x y
        INVARIANTS @inv1: x ⊆ S @inv2: y ⊆ S @inv3: x ∩ y = ∅
        EVENT add ANY e WHERE @grd1: e ∈ S @grd2: e ∉ y THEN @act1: x ≔ x ∪ {e} END
        EVENT put ANY e WHERE @grd1: e ∈ S @grd2: e ∉ x THEN @act1: y ≔ y ∪ {e} END
        END";

    fn model(m: &str) -> TypedModel {
        typecheck_model(&[parse_context(CTX).unwrap()], &[parse_machine(m).unwrap()]).unwrap()
    }

    fn bounds(n: usize) -> BoundSpec {
        let mut b = BoundSpec::default();
        b.cardinalities.insert("S".into(), n);
        b
    }

    #[test]
    fn disjointness_is_preserved() {
        let m = model(M);
        let reports = Discharger::new(&m, bounds(3)).discharge_all(&generate_pos(&m)).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Discharged), "{reports:?}");
    }

    #[test]
    fn dropped_guard_yields_replayable_counterexample() {
        let mut mach = parse_machine(M).unwrap();
        assert!(mach.drop_label("grd2"));
        let m = typecheck_model(&[parse_context(CTX).unwrap()], &[mach]).unwrap();
        let pos = generate_pos(&m);
        let reports = Discharger::new(&m, bounds(2)).discharge_all(&pos).unwrap();
        let failed: Vec<&DischargeReport> =
            reports.iter().filter(|r| r.verdict == Verdict::Failed).collect();
        let names: Vec<&str> = failed.iter().map(|r| r.po.name.as_str()).collect();
        assert_eq!(names, ["add/inv3/INV", "put/inv3/INV"]);
        for r in failed {
            let cx = r.counterexample.as_ref().unwrap();
            assert!(replay_counterexample(&m, &r.po, cx).unwrap());
        }
    }

    #[test]
    fn deterministic_reports() {
        let mut mach = parse_machine(M).unwrap();
        mach.drop_label("grd2");
        let m = typecheck_model(&[parse_context(CTX).unwrap()], &[mach]).unwrap();
        let pos = generate_pos(&m);
        let a = Discharger::new(&m, bounds(2)).discharge_all(&pos).unwrap();
        let b = Discharger::new(&m, bounds(2)).discharge_all(&pos).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vacuous_guard() {
        let src = "MACHINE m SEES c VARIABLES x INVARIANTS @inv1: x ⊆ S
            EVENT add ANY e WHERE @grd1: e ∈ S @grd2: e ∈ S ∪ x @grd3: e ∉ x
            THEN @act1: x ≔ x ∪ {e} END END";
        let m = model(src);
        let v = Discharger::new(&m, bounds(2)).detect_vacuous_guards().unwrap();
        let st: Vec<(&str, GuardStatus)> = v.iter().map(|g| (&*g.label, g.status)).collect();
        assert_eq!(
            st,
            [
                ("grd1", GuardStatus::Typing),
                ("grd2", GuardStatus::Vacuous),
                ("grd3", GuardStatus::Falsifiable)
            ]
        );
    }

    #[test]
    fn bound_exceeded_verdict() {
        let m = model(M);
        let mut b = bounds(3);
        b.powerset_bound = 2;
        let r = Discharger::new(&m, b).discharge_all(&generate_pos(&m)).unwrap();
        assert!(r.iter().any(|r| r.verdict == Verdict::BoundExceeded));
    }
}
