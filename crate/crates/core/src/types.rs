//! Set-theoretic typing of contexts and machine refinement chains.
//!
//! Types are derived, not declared: carriers give base types, constants are
//! typed by axioms of the form `c ⊆ E`, `c ∈ E`, `c = E` or
//! `partition(E, …, c, …)`, variables by invariants `v ∈ E` / `v ⊆ E`, and
//! event parameters by guards of the same shape.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::*;
use crate::value::Name;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Carrier(Name),
    Bool,
    Set(Box<Ty>),
    Pair(Box<Ty>, Box<Ty>),
    /// Element type of `∅` before unification.
    Unknown,
}

impl Ty {
    pub fn set(t: Ty) -> Ty {
        Ty::Set(Box::new(t))
    }

    pub fn pair(a: Ty, b: Ty) -> Ty {
        Ty::Pair(Box::new(a), Box::new(b))
    }

    /// Most specific common type, if any.
    pub fn unify(&self, other: &Ty) -> Option<Ty> {
        match (self, other) {
            (Ty::Unknown, t) | (t, Ty::Unknown) => Some(t.clone()),
            (Ty::Carrier(a), Ty::Carrier(b)) if a == b => Some(self.clone()),
            (Ty::Bool, Ty::Bool) => Some(Ty::Bool),
            (Ty::Set(a), Ty::Set(b)) => Some(Ty::set(a.unify(b)?)),
            (Ty::Pair(a1, b1), Ty::Pair(a2, b2)) => Some(Ty::pair(a1.unify(a2)?, b1.unify(b2)?)),
            _ => None,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Carrier(n) => f.write_str(n),
            Ty::Bool => f.write_str("BOOL"),
            Ty::Set(t) => write!(f, "ℙ({t})"),
            Ty::Pair(a, b) => {
                write!(f, "{a} × ")?;
                if matches!(**b, Ty::Pair(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Ty::Unknown => f.write_str("?"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("{location}: unresolved reference `{name}`")]
    UnresolvedReference { location: String, name: String },
    #[error("{location}: type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        location: String,
        expected: String,
        found: String,
    },
    #[error("variable `{variable}` has no type invariant (`{variable} ∈ …` or `{variable} ⊆ …`)")]
    MissingTypeInvariant { variable: String },
    #[error("constant `{constant}` is not typed by any axiom")]
    UntypedConstant { constant: String },
    #[error("{event}: parameter `{param}` has no typing guard")]
    UntypedParameter { event: String, param: String },
    #[error("{location}: no finite range (`{variable} ∈ …` or `{variable} ⊆ …`) for bound variable `{variable}`")]
    NonFiniteQuantifierDomain { location: String, variable: String },
    #[error("{location}: bound variable `{name}` shadows an identifier in scope")]
    Shadowing { location: String, name: String },
    #[error("name `{name}` is declared more than once")]
    DuplicateName { name: String },
    #[error("machine `{machine}` does not refine abstract event `{event}`")]
    UnrefinedEvent { machine: String, event: String },
    #[error("{event}: abstract parameter `{param}` is missing or retyped in the refinement")]
    ParameterDisappears { event: String, param: String },
    #[error("no machine to typecheck")]
    NoMachine,
}

/// An axiom or invariant with its (possibly qualified) label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopedPred {
    /// Label as reported; inherited labels that clash are `origin.label`.
    pub label: String,
    /// Label as written in the declaring component.
    pub base: Name,
    /// Declaring context or machine.
    pub origin: Name,
    pub pred: Pred,
}

/// The clause that gives a variable or parameter its finite range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Typing {
    Member(Expr),
    Subset(Expr),
}

impl Typing {
    pub fn range(&self) -> Range<'_> {
        match self {
            Typing::Member(e) => Range::Member(e),
            Typing::Subset(e) => Range::Subset(e),
        }
    }

    pub fn expr(&self) -> &Expr {
        match self {
            Typing::Member(e) | Typing::Subset(e) => e,
        }
    }

    /// The declared domain written as a set expression, e.g. `ℙ(ℙ(trustees) × TASKS)`.
    pub fn declared_domain(&self) -> Expr {
        fn as_set(e: &Expr) -> Expr {
            match e {
                Expr::Rel(_, a, b) => Expr::Pow(Box::new(Expr::SetOp(
                    SetOp::Product,
                    Box::new(a.as_ref().clone()),
                    Box::new(b.as_ref().clone()),
                ))),
                other => other.clone(),
            }
        }
        match self {
            Typing::Member(e) => as_set(e),
            Typing::Subset(e) => Expr::Pow(Box::new(e.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: Name,
    pub ty: Ty,
    /// Label of the invariant providing the type.
    pub typing_label: String,
    pub typing: Typing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: Name,
    pub ty: Ty,
    pub guard: Name,
    pub typing: Typing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedEvent {
    pub event: Event,
    pub params: Vec<ParamInfo>,
}

impl TypedEvent {
    pub fn name(&self) -> &str {
        &self.event.name
    }

    /// Whether guard `label` is the typing guard of some parameter.
    pub fn is_typing_guard(&self, label: &str) -> bool {
        self.params.iter().any(|p| &*p.guard == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineScope {
    pub name: Name,
    pub refines: Option<Name>,
    pub variables: Vec<VarInfo>,
    pub invariants: Vec<ScopedPred>,
    pub events: Vec<TypedEvent>,
}

impl MachineScope {
    pub fn event(&self, name: &str) -> Option<&TypedEvent> {
        self.events.iter().find(|e| e.name() == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VarInfo> {
        self.variables.iter().find(|v| &*v.name == name)
    }

    pub fn initialisation(&self) -> Option<&TypedEvent> {
        self.events.iter().find(|e| e.event.is_initialisation())
    }

    /// Non-initialisation events, in declaration order.
    pub fn transition_events(&self) -> impl Iterator<Item = &TypedEvent> {
        self.events.iter().filter(|e| !e.event.is_initialisation())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedModel {
    /// Seen context chain, root first.
    pub contexts: Vec<Context>,
    /// Refinement chain, most abstract first; the last machine is the target.
    pub machines: Vec<Machine>,
    pub scopes: Vec<MachineScope>,
    pub carriers: Vec<Name>,
    pub constants: Vec<(Name, Ty)>,
    pub axioms: Vec<ScopedPred>,
    /// Invariants of the target reclassified as reachability goals.
    pub goals: Vec<ScopedPred>,
}

impl TypedModel {
    pub fn target(&self) -> &MachineScope {
        self.scopes.last().expect("typed model has a machine")
    }

    pub fn target_machine(&self) -> &Machine {
        self.machines.last().expect("typed model has a machine")
    }

    pub fn invariants(&self) -> &[ScopedPred] {
        &self.target().invariants
    }

    pub fn parent(&self) -> Option<&MachineScope> {
        let n = self.scopes.len();
        (n >= 2).then(|| &self.scopes[n - 2])
    }

    pub fn invariant(&self, label: &str) -> Option<&ScopedPred> {
        self.invariants().iter().find(|i| i.label == label)
    }

    /// Type of a carrier, constant or target variable.
    pub fn type_of(&self, name: &str) -> Option<Ty> {
        if self.carriers.iter().any(|c| &**c == name) {
            return Some(Ty::set(Ty::Carrier(Name::from(name))));
        }
        if let Some((_, t)) = self.constants.iter().find(|(c, _)| &**c == name) {
            return Some(t.clone());
        }
        self.target().variable(name).map(|v| v.ty.clone())
    }

    /// Display form of the declared domain of a target variable.
    pub fn declared_type(&self, var: &str) -> Option<String> {
        self.target()
            .variable(var)
            .map(|v| crate::dsl::print_expr(&v.typing.declared_domain()))
    }

    /// The model truncated to its abstract machine, if it refines one.
    pub fn abstract_model(&self) -> Option<TypedModel> {
        let n = self.machines.len();
        if n < 2 {
            return None;
        }
        let machs = self.machines[..n - 1].to_vec();
        let sees = machs.last()?.sees.clone();
        let ctxs: Vec<Context> = match sees {
            Some(s) => {
                let k = self.contexts.iter().position(|c| c.name == s)?;
                self.contexts[..=k].to_vec()
            }
            None => Vec::new(),
        };
        typecheck_model(&ctxs, &machs).ok()
    }

    /// Moves target invariants with these labels to the goal list.
    pub fn with_goal_invariants(mut self, labels: &[String]) -> Result<TypedModel, String> {
        for l in labels {
            let scope = self.scopes.last_mut().expect("machine");
            let Some(k) = scope.invariants.iter().position(|i| &i.label == l) else {
                return Err(l.clone());
            };
            let inv = scope.invariants.remove(k);
            if scope.variables.iter().any(|v| v.typing_label == inv.label) {
                scope.invariants.insert(k, inv);
                return Err(l.clone());
            }
            self.goals.push(inv);
        }
        Ok(self)
    }
}

/// Typechecks the refinement chain ending at the last machine of `machs`.
pub fn typecheck_model(ctxs: &[Context], machs: &[Machine]) -> Result<TypedModel, TypeError> {
    let target = machs.last().ok_or(TypeError::NoMachine)?;

    // refinement chain, abstract first
    let mut chain = vec![target.clone()];
    while let Some(r) = chain.last().and_then(|m| m.refines.clone()) {
        let parent = machs.iter().find(|m| m.name == r).ok_or_else(|| {
            TypeError::UnresolvedReference {
                location: format!("{}", chain.last().map(|m| &*m.name).unwrap_or("")),
                name: r.to_string(),
            }
        })?;
        if chain.iter().any(|m| m.name == parent.name) {
            return Err(TypeError::DuplicateName {
                name: parent.name.to_string(),
            });
        }
        chain.push(parent.clone());
    }
    chain.reverse();

    // seen context chain, root first
    let mut contexts: Vec<Context> = Vec::new();
    if let Some(s) = &target.sees {
        let mut cur = Some(s.clone());
        while let Some(n) = cur {
            let c = ctxs.iter().find(|c| c.name == n).ok_or_else(|| {
                TypeError::UnresolvedReference {
                    location: target.name.to_string(),
                    name: n.to_string(),
                }
            })?;
            if contexts.iter().any(|x| x.name == c.name) {
                return Err(TypeError::DuplicateName {
                    name: c.name.to_string(),
                });
            }
            contexts.push(c.clone());
            cur = c.extends.clone();
        }
        contexts.reverse();
    }
    for m in &chain {
        if let Some(s) = &m.sees {
            if !contexts.iter().any(|c| &c.name == s) {
                return Err(TypeError::UnresolvedReference {
                    location: m.name.to_string(),
                    name: s.to_string(),
                });
            }
        }
    }

    let mut tc = Checker::default();
    let mut carriers = Vec::new();
    let mut const_names = Vec::new();
    for c in &contexts {
        for s in &c.sets {
            tc.declare(s, Ty::set(Ty::Carrier(s.clone())))?;
            carriers.push(s.clone());
        }
        for k in &c.constants {
            if tc.globals.contains_key(k) || const_names.contains(k) {
                return Err(TypeError::DuplicateName { name: k.to_string() });
            }
            const_names.push(k.clone());
        }
    }

    let mut axioms = Vec::new();
    for c in &contexts {
        for a in &c.axioms {
            let clash = axioms.iter().any(|x: &ScopedPred| x.base == a.label);
            axioms.push(ScopedPred {
                label: if clash {
                    format!("{}.{}", c.name, a.label)
                } else {
                    a.label.to_string()
                },
                base: a.label.clone(),
                origin: c.name.clone(),
                pred: a.body.clone(),
            });
        }
    }

    // constants: fixpoint over typing axioms
    let mut constants: Vec<(Name, Ty)> = Vec::new();
    let mut pending: Vec<Name> = const_names.clone();
    loop {
        let before = pending.len();
        pending.retain(|k| match tc.constant_type(k, &axioms) {
            Some(t) => {
                constants.push((k.clone(), t.clone()));
                tc.globals.insert(k.clone(), t);
                false
            }
            None => true,
        });
        if pending.is_empty() || pending.len() == before {
            break;
        }
    }
    if let Some(k) = pending.first() {
        return Err(TypeError::UntypedConstant {
            constant: k.to_string(),
        });
    }
    constants.sort_by_key(|(k, _)| const_names.iter().position(|n| n == k));
    for a in &axioms {
        tc.check_pred(&a.pred, &format!("{}/{}", a.origin, a.base))?;
    }

    let context_globals = tc.globals.clone();
    let mut scopes: Vec<MachineScope> = Vec::new();
    for m in &chain {
        tc.globals = context_globals.clone();
        let scope = tc.machine_scope(m, scopes.last())?;
        scopes.push(scope);
    }

    Ok(TypedModel {
        contexts,
        machines: chain,
        scopes,
        carriers,
        constants,
        axioms,
        goals: Vec::new(),
    })
}

#[derive(Default)]
struct Checker {
    globals: BTreeMap<Name, Ty>,
    locals: Vec<(Name, Ty)>,
}

fn typing_conjunct<'a>(p: &'a Pred, var: &str) -> Option<Typing> {
    p.conjuncts().into_iter().find_map(|c| match c.as_range_of(var)? {
        Range::Member(e) => Some(Typing::Member(e.clone())),
        Range::Subset(e) => Some(Typing::Subset(e.clone())),
    })
}

impl Checker {
    fn declare(&mut self, n: &Name, t: Ty) -> Result<(), TypeError> {
        if self.globals.insert(n.clone(), t).is_some() {
            return Err(TypeError::DuplicateName { name: n.to_string() });
        }
        Ok(())
    }

    fn lookup(&self, n: &str) -> Option<&Ty> {
        self.locals
            .iter()
            .rev()
            .find(|(k, _)| &**k == n)
            .map(|(_, t)| t)
            .or_else(|| self.globals.get(n))
    }

    fn resolvable(&self, e: &Expr) -> bool {
        e.free_idents().iter().all(|n| self.lookup(n).is_some())
    }

    fn constant_type(&mut self, k: &Name, axioms: &[ScopedPred]) -> Option<Ty> {
        for a in axioms {
            for c in a.pred.conjuncts() {
                let found = match c {
                    Pred::Cmp(CmpOp::Subset, Expr::Ident(x), e) if x == k => Some((e, false)),
                    Pred::Cmp(CmpOp::In, Expr::Ident(x), e) if x == k => Some((e, true)),
                    Pred::Cmp(CmpOp::Eq, Expr::Ident(x), e) if x == k => Some((e, false)),
                    Pred::Partition(e, parts) if parts.iter().any(|p| p == &Expr::Ident(k.clone())) => {
                        Some((e, false))
                    }
                    _ => None,
                };
                if let Some((e, elem)) = found {
                    if e.mentions(k) || !self.resolvable(e) {
                        continue;
                    }
                    let Ok(t) = self.ty_expr(e, "") else { continue };
                    if elem {
                        if let Ty::Set(inner) = t {
                            return Some(*inner);
                        }
                        continue;
                    }
                    return Some(t);
                }
            }
        }
        None
    }

    fn machine_scope(
        &mut self,
        m: &Machine,
        parent: Option<&MachineScope>,
    ) -> Result<MachineScope, TypeError> {
        let mut seen = BTreeSet::new();
        for v in &m.variables {
            if self.globals.contains_key(v) || !seen.insert(v.clone()) {
                return Err(TypeError::DuplicateName { name: v.to_string() });
            }
        }
        let own: BTreeSet<Name> = m.invariants.iter().map(|i| i.label.clone()).collect();
        let vars: BTreeSet<Name> = m.variables.iter().cloned().collect();
        let in_scope = |p: &Pred, globals: &BTreeMap<Name, Ty>| {
            p.free_idents()
                .iter()
                .all(|n| vars.contains(n) || globals.contains_key(n))
        };

        let mut invariants = Vec::new();
        if let Some(parent) = parent {
            for inv in &parent.invariants {
                if !in_scope(&inv.pred, &self.globals) {
                    continue;
                }
                let label = if own.contains(inv.label.as_str()) {
                    format!("{}.{}", inv.origin, inv.base)
                } else {
                    inv.label.clone()
                };
                invariants.push(ScopedPred {
                    label,
                    ..inv.clone()
                });
            }
        }
        for i in &m.invariants {
            invariants.push(ScopedPred {
                label: i.label.to_string(),
                base: i.label.clone(),
                origin: m.name.clone(),
                pred: i.body.clone(),
            });
        }

        // variables: fixpoint over typing invariants
        let mut typed: Vec<VarInfo> = Vec::new();
        let mut pending: Vec<Name> = m.variables.clone();
        loop {
            let before = pending.len();
            let mut k = 0;
            while k < pending.len() {
                let v = pending[k].clone();
                let found = invariants.iter().find_map(|inv| {
                    let t = typing_conjunct(&inv.pred, &v)?;
                    self.resolvable(t.expr()).then_some((inv, t))
                });
                match found {
                    Some((inv, typing)) => {
                        let loc = format!("{}/{}", m.name, inv.label);
                        let set_ty = self.ty_expr(typing.expr(), &loc)?;
                        let ty = match (&typing, set_ty) {
                            (Typing::Member(_), Ty::Set(t)) => *t,
                            (Typing::Subset(_), t @ Ty::Set(_)) => t,
                            (_, other) => {
                                return Err(TypeError::TypeMismatch {
                                    location: loc,
                                    expected: "a set".into(),
                                    found: other.to_string(),
                                })
                            }
                        };
                        self.globals.insert(v.clone(), ty.clone());
                        typed.push(VarInfo {
                            name: v,
                            ty,
                            typing_label: inv.label.clone(),
                            typing,
                        });
                        pending.remove(k);
                    }
                    None => k += 1,
                }
            }
            if pending.is_empty() || pending.len() == before {
                break;
            }
        }
        if let Some(v) = pending.first() {
            return Err(TypeError::MissingTypeInvariant {
                variable: v.to_string(),
            });
        }
        typed.sort_by_key(|v| m.variables.iter().position(|n| *n == v.name));

        if let Some(parent) = parent {
            for pv in &parent.variables {
                if let Some(cv) = typed.iter().find(|v| v.name == pv.name) {
                    if cv.ty != pv.ty {
                        return Err(TypeError::TypeMismatch {
                            location: format!("{}/{}", m.name, cv.typing_label),
                            expected: pv.ty.to_string(),
                            found: cv.ty.to_string(),
                        });
                    }
                }
            }
        }

        for inv in &invariants {
            self.check_pred(&inv.pred, &format!("{}/{}", m.name, inv.label))?;
        }

        let mut events = Vec::new();
        for e in &m.events {
            events.push(self.event(m, e, parent)?);
        }
        if let Some(parent) = parent {
            for ae in parent.transition_events() {
                let refined = m.events.iter().any(|e| {
                    e.refines.as_deref() == Some(ae.name()) || (e.refines.is_none() && &*e.name == ae.name())
                });
                if !refined {
                    return Err(TypeError::UnrefinedEvent {
                        machine: m.name.to_string(),
                        event: ae.name().to_string(),
                    });
                }
            }
        }

        Ok(MachineScope {
            name: m.name.clone(),
            refines: m.refines.clone(),
            variables: typed,
            invariants,
            events,
        })
    }

    fn event(
        &mut self,
        m: &Machine,
        e: &Event,
        parent: Option<&MachineScope>,
    ) -> Result<TypedEvent, TypeError> {
        let base = self.globals.clone();
        let mut seen = BTreeSet::new();
        for p in &e.params {
            if self.globals.contains_key(p) || !seen.insert(p.clone()) {
                return Err(TypeError::DuplicateName { name: p.to_string() });
            }
        }
        let mut params: Vec<ParamInfo> = Vec::new();
        let mut pending = e.params.clone();
        loop {
            let before = pending.len();
            let mut k = 0;
            while k < pending.len() {
                let p = pending[k].clone();
                let found = e.guards.iter().find_map(|g| {
                    let t = typing_conjunct(&g.body, &p)?;
                    self.resolvable(t.expr()).then_some((g, t))
                });
                match found {
                    Some((g, typing)) => {
                        let loc = format!("{}/{}/{}", m.name, e.name, g.label);
                        let set_ty = self.ty_expr(typing.expr(), &loc)?;
                        let ty = match (&typing, set_ty) {
                            (Typing::Member(_), Ty::Set(t)) => *t,
                            (Typing::Subset(_), t @ Ty::Set(_)) => t,
                            (_, other) => {
                                return Err(TypeError::TypeMismatch {
                                    location: loc,
                                    expected: "a set".into(),
                                    found: other.to_string(),
                                })
                            }
                        };
                        self.globals.insert(p.clone(), ty.clone());
                        params.push(ParamInfo {
                            name: p,
                            ty,
                            guard: g.label.clone(),
                            typing,
                        });
                        pending.remove(k);
                    }
                    None => k += 1,
                }
            }
            if pending.is_empty() || pending.len() == before {
                break;
            }
        }
        if let Some(p) = pending.first() {
            self.globals = base;
            return Err(TypeError::UntypedParameter {
                event: format!("{}/{}", m.name, e.name),
                param: p.to_string(),
            });
        }
        params.sort_by_key(|p| e.params.iter().position(|n| *n == p.name));

        let result = (|| {
            for g in &e.guards {
                self.check_pred(&g.body, &format!("{}/{}/{}", m.name, e.name, g.label))?;
            }
            for a in &e.actions {
                let loc = format!("{}/{}/{}", m.name, e.name, a.label);
                let vt = match m.variables.contains(&a.body.var) {
                    true => self.globals.get(&a.body.var).cloned(),
                    false => None,
                }
                .ok_or_else(|| TypeError::UnresolvedReference {
                    location: loc.clone(),
                    name: a.body.var.to_string(),
                })?;
                let et = self.ty_expr(&a.body.expr, &loc)?;
                if vt.unify(&et).is_none() {
                    return Err(TypeError::TypeMismatch {
                        location: loc,
                        expected: vt.to_string(),
                        found: et.to_string(),
                    });
                }
            }
            if let (Some(parent), Some(r)) = (parent, e.refines.as_ref().or(Some(&e.name))) {
                if let Some(ae) = parent.event(r) {
                    for ap in &ae.params {
                        if !params.iter().any(|p| p.name == ap.name && p.ty == ap.ty) {
                            return Err(TypeError::ParameterDisappears {
                                event: format!("{}/{}", m.name, e.name),
                                param: ap.name.to_string(),
                            });
                        }
                    }
                } else if e.refines.is_some() {
                    return Err(TypeError::UnresolvedReference {
                        location: format!("{}/{}", m.name, e.name),
                        name: r.to_string(),
                    });
                }
            }
            Ok(())
        })();
        self.globals = base;
        result?;
        Ok(TypedEvent {
            event: e.clone(),
            params,
        })
    }

    fn mismatch(loc: &str, expected: impl fmt::Display, found: &Ty) -> TypeError {
        TypeError::TypeMismatch {
            location: loc.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn elem(t: Ty, loc: &str) -> Result<Ty, TypeError> {
        match t {
            Ty::Set(e) => Ok(*e),
            Ty::Unknown => Ok(Ty::Unknown),
            other => Err(Self::mismatch(loc, "a set", &other)),
        }
    }

    fn pair_parts(t: Ty, loc: &str) -> Result<(Ty, Ty), TypeError> {
        match t {
            Ty::Set(inner) => match *inner {
                Ty::Pair(a, b) => Ok((*a, *b)),
                Ty::Unknown => Ok((Ty::Unknown, Ty::Unknown)),
                other => Err(Self::mismatch(loc, "a relation", &Ty::set(other))),
            },
            Ty::Unknown => Ok((Ty::Unknown, Ty::Unknown)),
            other => Err(Self::mismatch(loc, "a relation", &other)),
        }
    }

    fn ty_expr(&mut self, e: &Expr, loc: &str) -> Result<Ty, TypeError> {
        Ok(match e {
            Expr::Ident(n) => self
                .lookup(n)
                .cloned()
                .ok_or_else(|| TypeError::UnresolvedReference {
                    location: loc.to_string(),
                    name: n.to_string(),
                })?,
            Expr::Bool(_) => Ty::Bool,
            Expr::BoolSet => Ty::set(Ty::Bool),
            Expr::Empty => Ty::set(Ty::Unknown),
            Expr::Enum(items) => {
                let mut t = Ty::Unknown;
                for i in items {
                    let it = self.ty_expr(i, loc)?;
                    t = t.unify(&it).ok_or_else(|| Self::mismatch(loc, &t, &it))?;
                }
                Ty::set(t)
            }
            Expr::Maplet(a, b) => Ty::pair(self.ty_expr(a, loc)?, self.ty_expr(b, loc)?),
            Expr::SetOp(op, a, b) => {
                let ta = self.ty_expr(a, loc)?;
                let tb = self.ty_expr(b, loc)?;
                if *op == SetOp::Product {
                    Ty::set(Ty::pair(Self::elem(ta, loc)?, Self::elem(tb, loc)?))
                } else {
                    Self::elem(ta.clone(), loc)?;
                    ta.unify(&tb).ok_or_else(|| Self::mismatch(loc, &ta, &tb))?
                }
            }
            Expr::Rel(_, a, b) => {
                let ta = Self::elem(self.ty_expr(a, loc)?, loc)?;
                let tb = Self::elem(self.ty_expr(b, loc)?, loc)?;
                Ty::set(Ty::set(Ty::pair(ta, tb)))
            }
            Expr::Pow(s) => {
                let t = self.ty_expr(s, loc)?;
                Self::elem(t.clone(), loc)?;
                Ty::set(t)
            }
            Expr::Dom(r) => Ty::set(Self::pair_parts(self.ty_expr(r, loc)?, loc)?.0),
            Expr::Ran(r) => Ty::set(Self::pair_parts(self.ty_expr(r, loc)?, loc)?.1),
            Expr::Image(r, s) => {
                let (a, b) = Self::pair_parts(self.ty_expr(r, loc)?, loc)?;
                let ts = self.ty_expr(s, loc)?;
                let want = Ty::set(a);
                if want.unify(&ts).is_none() {
                    return Err(Self::mismatch(loc, &want, &ts));
                }
                Ty::set(b)
            }
            Expr::Apply(f, x) => {
                let (a, b) = Self::pair_parts(self.ty_expr(f, loc)?, loc)?;
                let tx = self.ty_expr(x, loc)?;
                if a.unify(&tx).is_none() {
                    return Err(Self::mismatch(loc, &a, &tx));
                }
                b
            }
        })
    }

    fn check_pred(&mut self, p: &Pred, loc: &str) -> Result<(), TypeError> {
        match p {
            Pred::True | Pred::False => Ok(()),
            Pred::Not(q) => self.check_pred(q, loc),
            Pred::And(a, b) | Pred::Or(a, b) | Pred::Implies(a, b) | Pred::Equiv(a, b) => {
                self.check_pred(a, loc)?;
                self.check_pred(b, loc)
            }
            Pred::Cmp(op, a, b) => {
                let ta = self.ty_expr(a, loc)?;
                let tb = self.ty_expr(b, loc)?;
                match op {
                    CmpOp::Eq | CmpOp::Ne | CmpOp::Subset | CmpOp::NotSubset => {
                        if matches!(op, CmpOp::Subset | CmpOp::NotSubset) {
                            Self::elem(ta.clone(), loc)?;
                        }
                        if ta.unify(&tb).is_none() {
                            return Err(Self::mismatch(loc, &ta, &tb));
                        }
                    }
                    CmpOp::In | CmpOp::NotIn => {
                        let want = Ty::set(ta.clone());
                        if want.unify(&tb).is_none() {
                            return Err(Self::mismatch(loc, &want, &tb));
                        }
                    }
                }
                Ok(())
            }
            Pred::Partition(s, parts) => {
                let ts = self.ty_expr(s, loc)?;
                Self::elem(ts.clone(), loc)?;
                for part in parts {
                    let tp = self.ty_expr(part, loc)?;
                    if ts.unify(&tp).is_none() {
                        return Err(Self::mismatch(loc, &ts, &tp));
                    }
                }
                Ok(())
            }
            Pred::Forall(vs, body) | Pred::Exists(vs, body) => {
                let universal = matches!(p, Pred::Forall(..));
                let ranges = Pred::quantifier_ranges(vs, body, universal).map_err(|v| {
                    TypeError::NonFiniteQuantifierDomain {
                        location: loc.to_string(),
                        variable: v.to_string(),
                    }
                })?;
                let n = self.locals.len();
                let result = (|| {
                    for (v, r) in ranges {
                        if self.lookup(v).is_some() {
                            return Err(TypeError::Shadowing {
                                location: loc.to_string(),
                                name: v.to_string(),
                            });
                        }
                        let st = self.ty_expr(r.expr(), loc)?;
                        let t = match r {
                            Range::Member(_) => Self::elem(st, loc)?,
                            Range::Subset(_) => {
                                Self::elem(st.clone(), loc)?;
                                st
                            }
                        };
                        self.locals.push((v.clone(), t));
                    }
                    self.check_pred(body, loc)
                })();
                self.locals.truncate(n);
                result
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_context, parse_machine};

    const CTX: &str = "CONTEXT c0 SETS AGENTS TASKS CONSTANTS trustors trustees
        AXIOMS @axm1: trustors ⊆ AGENTS @axm2: trustees ⊆ AGENTS
        @axm3: partition(AGENTS, trustors, trustees) END";

    fn model(m: &str) -> Result<TypedModel, TypeError> {
        typecheck_model(&[parse_context(CTX).unwrap()], &[parse_machine(m).unwrap()])
    }

    #[test]
    fn variable_types_come_from_invariants() {
        let m = model(
            "MACHINE m SEES c0 VARIABLES agent_task
             INVARIANTS @inv1: agent_task ∈ ℙ(trustees) ⇸ TASKS END",
        )
        .unwrap();
        assert_eq!(
            m.type_of("agent_task").unwrap().to_string(),
            "ℙ(ℙ(AGENTS) × TASKS)"
        );
        assert_eq!(m.declared_type("agent_task").unwrap(), "ℙ(ℙ(trustees) × TASKS)");
        assert_eq!(m.type_of("trustors").unwrap().to_string(), "ℙ(AGENTS)");
    }

    #[test]
    fn missing_type_invariant() {
        let err = model("MACHINE m SEES c0 VARIABLES x INVARIANTS @inv1: x = x END").unwrap_err();
        assert_eq!(err, TypeError::MissingTypeInvariant { variable: "x".into() });
    }

    #[test]
    fn image_argument_must_be_a_set_of_domain_elements() {
        let err = model(
            "MACHINE m SEES c0 VARIABLES agent_task
             INVARIANTS @inv1: agent_task ∈ ℙ(trustees) ⇸ TASKS
             EVENT e ANY j t WHERE @grd1: j ∈ ℙ(trustees) @grd2: t ∈ TASKS
               @grd3: t ∈ agent_task[j] END END",
        )
        .unwrap_err();
        let TypeError::TypeMismatch { location, expected, found } = err else {
            panic!("{err}")
        };
        assert_eq!(location, "m/e/grd3");
        assert_eq!(expected, "ℙ(ℙ(AGENTS))");
        assert_eq!(found, "ℙ(AGENTS)");
    }

    #[test]
    fn unresolved_reference() {
        let err = model("MACHINE m SEES nope END").unwrap_err();
        assert!(matches!(err, TypeError::UnresolvedReference { .. }));
        let err = model(
            "MACHINE m SEES c0 VARIABLES x INVARIANTS @inv1: x ⊆ trustors @inv2: x = y END",
        )
        .unwrap_err();
        assert_eq!(
            err,
            TypeError::UnresolvedReference {
                location: "m/inv2".into(),
                name: "y".into()
            }
        );
    }

    #[test]
    fn shadowing_is_rejected() {
        let err = model(
            "MACHINE m SEES c0 VARIABLES x INVARIANTS @inv1: x ⊆ trustors
             @inv2: ∀ x · x ∈ trustors ⇒ x ∈ AGENTS END",
        )
        .unwrap_err();
        assert!(matches!(err, TypeError::Shadowing { .. }));
    }

    #[test]
    fn untyped_parameter() {
        let err = model("MACHINE m SEES c0 EVENT e ANY p WHERE @grd1: p = p END END").unwrap_err();
        assert!(matches!(err, TypeError::UntypedParameter { .. }));
    }

    #[test]
    fn goal_invariants_cannot_be_type_invariants() {
        let m = model(
            "MACHINE m SEES c0 VARIABLES x INVARIANTS @inv1: x ⊆ trustors @inv2: x ≠ ∅ END",
        )
        .unwrap();
        assert!(m.clone().with_goal_invariants(&["inv1".into()]).is_err());
        let g = m.with_goal_invariants(&["inv2".into()]).unwrap();
        assert_eq!(g.invariants().len(), 1);
        assert_eq!(g.goals[0].label, "inv2");
    }
}
