//! Finite instantiations and state spaces for bounded checking.
//!
//! Carrier sets are instantiated by Venn region: for a carrier with subset
//! constants `c1…cm`, every non-empty combination of constants gets its own
//! block of fresh atoms, plus an optional block belonging to no constant.
//! Cardinalities are upper bounds, so a bound of `(2,2,2)` covers every
//! instantiation with between one and two elements in each constrained set.
//! Atom names are canonical per region, which quotients away symmetric
//! relabelings.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::cell::RefCell;
use std::ops::ControlFlow;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::ast::Pred;
use crate::eval::{Env, Evaluator};
use crate::runtime::{Instantiation, Runtime, RuntimeError, State};
use crate::types::{Ty, Typing, TypedModel};
use crate::value::{EvalError, Name, SetV, Value, DEFAULT_POWERSET_BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum StateSource {
    /// Every state satisfying all invariants.
    #[default]
    AllInvariantStates,
    /// States reachable by events from the seed states.
    ReachableOnly,
}

impl FromStr for StateSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "all-invariant-states" | "all" => Ok(StateSource::AllInvariantStates),
            "reachable-only" | "reachable" => Ok(StateSource::ReachableOnly),
            _ => Err(format!(
                "unknown state source `{s}` (expected all-invariant-states or reachable-only)"
            )),
        }
    }
}

impl std::fmt::Display for StateSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StateSource::AllInvariantStates => "all-invariant-states",
            StateSource::ReachableOnly => "reachable-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundSpec {
    /// Upper bound per carrier set or subset constant.
    pub cardinalities: BTreeMap<String, usize>,
    /// Overrides generation when present.
    pub instantiations: Option<Vec<Instantiation>>,
    pub state_source: StateSource,
    pub powerset_bound: usize,
    /// Allow empty carriers and empty subset constants.
    pub allow_empty: bool,
    /// Atom prefix per constant (or carrier); `*` names the overlap prefix.
    pub prefixes: BTreeMap<String, String>,
}

impl Default for BoundSpec {
    fn default() -> Self {
        BoundSpec {
            cardinalities: BTreeMap::new(),
            instantiations: None,
            state_source: StateSource::default(),
            powerset_bound: DEFAULT_POWERSET_BOUND,
            allow_empty: false,
            prefixes: BTreeMap::new(),
        }
    }
}

impl BoundSpec {
    /// Bounds for the trust contexts: trustors, trustees and tasks.
    pub fn trust(trustors: usize, trustees: usize, tasks: usize) -> BoundSpec {
        let mut b = BoundSpec::default();
        b.cardinalities.insert("trustors".into(), trustors);
        b.cardinalities.insert("trustees".into(), trustees);
        b.cardinalities.insert("TASKS".into(), tasks);
        b.prefixes.insert("trustors".into(), "u".into());
        b.prefixes.insert("trustees".into(), "v".into());
        b.prefixes.insert("TASKS".into(), "t".into());
        b.prefixes.insert("*".into(), "w".into());
        b
    }

    pub fn with_source(mut self, s: StateSource) -> Self {
        self.state_source = s;
        self
    }

    pub fn with_instantiations(mut self, insts: Vec<Instantiation>) -> Self {
        self.instantiations = Some(insts);
        self
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self.powerset_bound)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumError {
    #[error("no cardinality bound for `{0}`")]
    MissingCardinality(String),
    #[error("constant `{0}` is not a subset of a carrier; supply explicit instantiations")]
    UnsupportedConstant(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl From<EvalError> for EnumError {
    fn from(e: EvalError) -> Self {
        EnumError::Runtime(RuntimeError::Eval(e))
    }
}

impl EnumError {
    pub fn is_bound_exceeded(&self) -> bool {
        matches!(
            self,
            EnumError::Runtime(RuntimeError::Eval(EvalError::BoundExceeded { .. }))
        )
    }
}

/// One instantiation option for a single carrier.
struct CarrierOption {
    size: usize,
    carrier: SetV,
    constants: Vec<(Name, Value)>,
}

fn prefix_for(bounds: &BoundSpec, name: &str) -> String {
    bounds.prefixes.get(name).cloned().unwrap_or_else(|| {
        name.chars()
            .next()
            .map(|c| c.to_lowercase().collect())
            .unwrap_or_else(|| "x".into())
    })
}

fn carrier_options(
    model: &TypedModel,
    carrier: &Name,
    bounds: &BoundSpec,
) -> Result<Vec<CarrierOption>, EnumError> {
    let subset_ty = Ty::set(Ty::Carrier(carrier.clone()));
    let consts: Vec<&Name> = model
        .constants
        .iter()
        .filter(|(_, t)| *t == subset_ty)
        .map(|(n, _)| n)
        .collect();
    let lo = usize::from(!bounds.allow_empty);
    let card = |n: &str| {
        bounds
            .cardinalities
            .get(n)
            .copied()
            .ok_or_else(|| EnumError::MissingCardinality(n.to_string()))
    };

    if consts.is_empty() {
        let n = card(carrier)?;
        let p = prefix_for(bounds, carrier);
        return Ok((lo..=n)
            .map(|k| CarrierOption {
                size: k,
                carrier: (1..=k).map(|i| Value::atom(&format!("{p}{i}"))).collect(),
                constants: Vec::new(),
            })
            .collect());
    }

    let m = consts.len();
    let caps: Vec<usize> = consts.iter().map(|c| card(c)).collect::<Result<_, _>>()?;
    // regions: non-empty constant combinations by popcount, then the free region
    let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
    masks.sort_by_key(|x| (x.count_ones(), *x));
    masks.push(0);
    let free_cap = bounds.cardinalities.get(&**carrier).copied().unwrap_or(0);
    let region_cap: Vec<usize> = masks
        .iter()
        .map(|&mask| {
            if mask == 0 {
                free_cap
            } else {
                (0..m).filter(|k| mask & (1 << k) != 0).map(|k| caps[k]).min().unwrap_or(0)
            }
        })
        .collect();
    let multi: Vec<u32> = masks.iter().copied().filter(|x| x.count_ones() > 1).collect();
    let mut prefixes: Vec<String> = masks
        .iter()
        .map(|&mask| match mask.count_ones() {
            0 => prefix_for(bounds, carrier),
            1 => prefix_for(bounds, consts[mask.trailing_zeros() as usize]),
            _ => {
                let base = bounds.prefixes.get("*").cloned().unwrap_or_else(|| "w".into());
                if multi.len() == 1 {
                    base
                } else {
                    format!("{base}{}_", multi.iter().position(|x| *x == mask).unwrap_or(0) + 1)
                }
            }
        })
        .collect();
    let unique: BTreeSet<&String> = prefixes.iter().collect();
    if unique.len() != prefixes.len() {
        for (k, p) in prefixes.iter_mut().enumerate() {
            *p = format!("{p}{}_", k + 1);
        }
    }

    let mut out = Vec::new();
    let mut counts = vec![0usize; masks.len()];
    loop {
        let sums: Vec<usize> = (0..m)
            .map(|c| {
                masks
                    .iter()
                    .zip(&counts)
                    .filter(|(mask, _)| **mask & (1 << c) != 0)
                    .map(|(_, n)| *n)
                    .sum()
            })
            .collect();
        let total: usize = counts.iter().sum();
        if sums.iter().zip(&caps).all(|(s, cap)| *s >= lo && s <= cap) && total >= lo {
            let mut atoms: Vec<Vec<Value>> = Vec::new();
            for (r, n) in counts.iter().enumerate() {
                atoms.push(
                    (1..=*n)
                        .map(|i| Value::atom(&format!("{}{i}", prefixes[r])))
                        .collect(),
                );
            }
            let carrier_set: SetV = atoms.iter().flatten().cloned().collect();
            let constants = consts
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    let members: SetV = masks
                        .iter()
                        .zip(&atoms)
                        .filter(|(mask, _)| **mask & (1 << c) != 0)
                        .flat_map(|(_, a)| a.iter().cloned())
                        .collect();
                    ((*name).clone(), Value::Set(members))
                })
                .collect();
            out.push(CarrierOption {
                size: total,
                carrier: carrier_set,
                constants,
            });
        }
        // odometer over region counts, last region fastest
        let mut k = counts.len();
        loop {
            if k == 0 {
                out.sort_by_key(|o| o.size);
                return Ok(out);
            }
            k -= 1;
            if counts[k] < region_cap[k] {
                counts[k] += 1;
                break;
            }
            counts[k] = 0;
        }
    }
}

/// Instantiations satisfying the axioms, smallest first.
pub fn instantiations(model: &TypedModel, bounds: &BoundSpec) -> Result<Vec<Instantiation>, EnumError> {
    let rt = Runtime::with_evaluator(model, bounds.evaluator());
    if let Some(given) = &bounds.instantiations {
        for i in given {
            rt.check_axioms(i)?;
        }
        return Ok(given.clone());
    }
    for (c, t) in &model.constants {
        let ok = matches!(t, Ty::Set(inner) if matches!(**inner, Ty::Carrier(_)));
        if !ok {
            return Err(EnumError::UnsupportedConstant(c.to_string()));
        }
    }
    let per_carrier: Vec<Vec<CarrierOption>> = model
        .carriers
        .iter()
        .map(|c| carrier_options(model, c, bounds))
        .collect::<Result<_, _>>()?;

    let mut combos: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    for opts in &per_carrier {
        let mut next = Vec::new();
        for (size, idx) in &combos {
            for (k, o) in opts.iter().enumerate() {
                let mut idx = idx.clone();
                idx.push(k);
                next.push((size + o.size, idx));
            }
        }
        combos = next;
    }
    combos.sort();

    let mut out = Vec::new();
    for (_, idx) in combos {
        let mut carriers = BTreeMap::new();
        let mut constants = BTreeMap::new();
        for ((name, opts), k) in model.carriers.iter().zip(&per_carrier).zip(idx) {
            let o = &opts[k];
            carriers.insert(name.clone(), o.carrier.clone());
            for (c, v) in &o.constants {
                constants.insert(c.clone(), v.clone());
            }
        }
        let inst = Instantiation::new(carriers, constants);
        match rt.check_axioms(&inst) {
            Ok(()) => out.push(inst),
            Err(RuntimeError::AxiomViolation { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

struct VarPlan {
    name: Name,
    typing: Typing,
    /// Identifiers the range depends on.
    deps: Vec<Name>,
    /// Invariant indices decidable once this variable is bound.
    checks: Vec<usize>,
}

/// Streams the state space of a model for one instantiation at a time.
pub struct StateSpace<'m> {
    model: &'m TypedModel,
    ev: Evaluator,
    source: StateSource,
    plan: Vec<VarPlan>,
    /// Invariants mentioning no variable.
    static_checks: Vec<usize>,
    /// Last generated range per plan entry, keyed by the dependency values.
    cache: RefCell<Vec<Option<RangeCache>>>,
}

type RangeCache = (Vec<Option<Value>>, Rc<Vec<Value>>);

impl<'m> StateSpace<'m> {
    pub fn new(model: &'m TypedModel, bounds: &BoundSpec) -> Self {
        let scope = model.target();
        let var_names: BTreeSet<&str> = scope.variables.iter().map(|v| &*v.name).collect();

        // dependency order: a variable's range may mention earlier variables
        let mut order: Vec<usize> = Vec::new();
        let mut placed: BTreeSet<&str> = BTreeSet::new();
        while order.len() < scope.variables.len() {
            let before = order.len();
            for (k, v) in scope.variables.iter().enumerate() {
                if placed.contains(&*v.name) {
                    continue;
                }
                let deps = v.typing.expr().free_idents();
                if deps
                    .iter()
                    .all(|d| !var_names.contains(&**d) || placed.contains(&**d))
                {
                    order.push(k);
                    placed.insert(&v.name);
                }
            }
            if order.len() == before {
                // cyclic ranges cannot occur after typechecking; keep declared order
                for k in 0..scope.variables.len() {
                    if !order.contains(&k) {
                        order.push(k);
                    }
                }
            }
        }

        let invs = model.invariants();
        let mut plan: Vec<VarPlan> = order
            .iter()
            .map(|&k| {
                let v = &scope.variables[k];
                VarPlan {
                    name: v.name.clone(),
                    typing: v.typing.clone(),
                    deps: v.typing.expr().free_idents().into_iter().collect(),
                    checks: Vec::new(),
                }
            })
            .collect();
        let mut static_checks = Vec::new();
        for (i, inv) in invs.iter().enumerate() {
            // the generator already guarantees a bare typing clause
            let redundant = plan.iter().any(|p| match (&p.typing, &inv.pred) {
                (Typing::Member(e), Pred::Cmp(crate::ast::CmpOp::In, crate::ast::Expr::Ident(x), e2))
                | (Typing::Subset(e), Pred::Cmp(crate::ast::CmpOp::Subset, crate::ast::Expr::Ident(x), e2)) => {
                    *x == p.name && e == e2
                }
                _ => false,
            });
            if redundant {
                continue;
            }
            let free = inv.pred.free_idents();
            let last = plan
                .iter()
                .rposition(|p| free.contains(&p.name));
            match last {
                Some(k) => plan[k].checks.push(i),
                None => static_checks.push(i),
            }
        }
        StateSpace {
            model,
            ev: bounds.evaluator(),
            source: bounds.state_source,
            cache: RefCell::new(vec![None; plan.len()]),
            plan,
            static_checks,
        }
    }

    /// Calls `f` on every state of the configured source, in canonical order.
    pub fn for_each<F>(&self, inst: &Arc<Instantiation>, mut f: F) -> Result<ControlFlow<()>, EnumError>
    where
        F: FnMut(&State) -> Result<ControlFlow<()>, EnumError>,
    {
        match self.source {
            StateSource::AllInvariantStates => self.for_each_invariant_state(inst, &mut f),
            StateSource::ReachableOnly => self.for_each_reachable(inst, &mut f, true),
        }
    }

    /// Every state satisfying all invariants.
    pub fn for_each_invariant_state<F>(
        &self,
        inst: &Arc<Instantiation>,
        f: &mut F,
    ) -> Result<ControlFlow<()>, EnumError>
    where
        F: FnMut(&State) -> Result<ControlFlow<()>, EnumError>,
    {
        let invs = self.model.invariants();
        let mut env = inst.env().clone();
        for &i in &self.static_checks {
            if !self.ev.eval_pred(&invs[i].pred, &env)? {
                return Ok(ControlFlow::Continue(()));
            }
        }
        let mut vars = BTreeMap::new();
        self.assign(0, inst, &mut env, &mut vars, &mut |s| f(s))
    }

    fn assign(
        &self,
        k: usize,
        inst: &Arc<Instantiation>,
        env: &mut Env,
        vars: &mut BTreeMap<Name, Value>,
        f: &mut dyn FnMut(&State) -> Result<ControlFlow<()>, EnumError>,
    ) -> Result<ControlFlow<()>, EnumError> {
        let Some(p) = self.plan.get(k) else {
            let s = State {
                inst: inst.clone(),
                vars: vars.clone(),
            };
            return f(&s);
        };
        let invs = self.model.invariants();
        let values = self.range_of(k, env)?;
        'values: for v in values.iter().cloned() {
            env.set(p.name.clone(), v.clone());
            for &i in &p.checks {
                if !self.ev.eval_pred(&invs[i].pred, env)? {
                    continue 'values;
                }
            }
            vars.insert(p.name.clone(), v);
            if self.assign(k + 1, inst, env, vars, f)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    fn range_of(&self, k: usize, env: &Env) -> Result<Rc<Vec<Value>>, EnumError> {
        let p = &self.plan[k];
        let key: Vec<Option<Value>> = p.deps.iter().map(|d| env.get(d).cloned()).collect();
        if let Some((ck, vals)) = &self.cache.borrow()[k] {
            if *ck == key {
                return Ok(vals.clone());
            }
        }
        let vals = Rc::new(self.ev.range_values(p.typing.range(), env)?);
        self.cache.borrow_mut()[k] = Some((key, vals.clone()));
        Ok(vals)
    }

    /// Variables assigned by no transition event: inputs to the machine.
    pub fn environment_variables(&self) -> Vec<Name> {
        let scope = self.model.target();
        scope
            .variables
            .iter()
            .filter(|v| {
                !scope
                    .transition_events()
                    .any(|e| e.event.action_for(&v.name).is_some())
            })
            .map(|v| v.name.clone())
            .collect()
    }

    /// Seed states: the initial state with every environment variable
    /// ranging over its declared type.
    pub fn seeds(&self, inst: &Arc<Instantiation>) -> Result<Vec<State>, EnumError> {
        let rt = Runtime::with_evaluator(self.model, self.ev);
        let init = rt.initial_state_unchecked(inst.clone())?;
        let envs: BTreeSet<Name> = self.environment_variables().into_iter().collect();
        let mut out = vec![init];
        for p in &self.plan {
            if !envs.contains(&p.name) {
                continue;
            }
            let mut next = Vec::new();
            for s in &out {
                let env = s.env();
                for v in self.ev.range_values(p.typing.range(), &env)? {
                    let mut t = s.clone();
                    t.vars.insert(p.name.clone(), v);
                    next.push(t);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Breadth-first exploration from the seeds. With `filter`, only states
    /// satisfying every invariant are passed to `f`.
    pub fn for_each_reachable<F>(
        &self,
        inst: &Arc<Instantiation>,
        f: &mut F,
        filter: bool,
    ) -> Result<ControlFlow<()>, EnumError>
    where
        F: FnMut(&State) -> Result<ControlFlow<()>, EnumError>,
    {
        let rt = Runtime::with_evaluator(self.model, self.ev);
        let mut seen: BTreeSet<BTreeMap<Name, Value>> = BTreeSet::new();
        let mut queue: VecDeque<State> = VecDeque::new();
        for s in self.seeds(inst)? {
            if seen.insert(s.vars.clone()) {
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            let keep = !filter || rt.check_invariants(&s)?.iter().all(|(_, b)| *b);
            if keep && f(&s)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
            for t in rt.enumerate_transitions(&s)? {
                if seen.insert(t.post.vars.clone()) {
                    queue.push_back(t.post);
                }
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_context, parse_machine};
    use crate::types::typecheck_model;

    fn model(ctx: &str) -> TypedModel {
        let m = parse_machine("MACHINE m SEES c END").unwrap();
        typecheck_model(&[parse_context(ctx).unwrap()], &[m]).unwrap()
    }

    const PART: &str = "CONTEXT c SETS AGENTS TASKS CONSTANTS trustors trustees
        AXIOMS @axm1: trustors ⊆ AGENTS @axm2: trustees ⊆ AGENTS
        @axm3: partition(AGENTS, trustors, trustees) END";
    const COVER: &str = "CONTEXT c SETS AGENTS TASKS CONSTANTS trustors trustees
        AXIOMS @axm1: trustors ⊆ AGENTS @axm2: trustees ⊆ AGENTS
        @axm3: AGENTS = trustors ∪ trustees END";

    #[test]
    fn partitioned_instantiations_up_to_bounds() {
        let insts = instantiations(&model(PART), &BoundSpec::trust(2, 2, 2)).unwrap();
        // 2 × 2 × 2 size choices, no overlap possible
        assert_eq!(insts.len(), 8);
        let first = &insts[0];
        assert_eq!(first.to_string(), "AGENTS={u1, v1} TASKS={t1} trustees={v1} trustors={u1}");
        assert!(insts.iter().all(|i| {
            let Value::Set(a) = i.constant("trustors").unwrap() else { return false };
            let Value::Set(b) = i.constant("trustees").unwrap() else { return false };
            a.intersection(b).is_empty()
        }));
    }

    #[test]
    fn covering_context_admits_overlap() {
        let insts = instantiations(&model(COVER), &BoundSpec::trust(1, 1, 1)).unwrap();
        let names: Vec<String> = insts.iter().map(|i| i.to_string()).collect();
        assert_eq!(
            names,
            [
                "AGENTS={w1} TASKS={t1} trustees={w1} trustors={w1}",
                "AGENTS={u1, v1} TASKS={t1} trustees={v1} trustors={u1}",
            ]
        );
    }

    #[test]
    fn missing_cardinality() {
        let mut b = BoundSpec::trust(1, 1, 1);
        b.cardinalities.remove("TASKS");
        assert_eq!(
            instantiations(&model(PART), &b).unwrap_err(),
            EnumError::MissingCardinality("TASKS".into())
        );
    }

    #[test]
    fn state_source_parsing() {
        assert_eq!("reachable_only".parse(), Ok(StateSource::ReachableOnly));
        assert_eq!("all-invariant-states".parse(), Ok(StateSource::AllInvariantStates));
        assert!("sometimes".parse::<StateSource>().is_err());
    }
}
