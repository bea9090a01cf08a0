//! Abstract syntax for contexts, machines and their formulas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::value::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetOp {
    Union,
    Inter,
    Diff,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelKind {
    Relation,
    Partial,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    In,
    NotIn,
    Subset,
    NotSubset,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Ident(Name),
    Bool(bool),
    BoolSet,
    Empty,
    Enum(Vec<Expr>),
    Maplet(Box<Expr>, Box<Expr>),
    SetOp(SetOp, Box<Expr>, Box<Expr>),
    Rel(RelKind, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>),
    Dom(Box<Expr>),
    Ran(Box<Expr>),
    Image(Box<Expr>, Box<Expr>),
    Apply(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pred {
    True,
    False,
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Implies(Box<Pred>, Box<Pred>),
    Equiv(Box<Pred>, Box<Pred>),
    Cmp(CmpOp, Expr, Expr),
    Partition(Expr, Vec<Expr>),
    Forall(Vec<Name>, Box<Pred>),
    Exists(Vec<Name>, Box<Pred>),
}

/// A labelled clause. Positions are informational and ignored by equality.
#[derive(Debug, Clone)]
pub struct Labeled<T> {
    pub label: Name,
    pub body: T,
    pub pos: Pos,
}

impl<T: PartialEq> PartialEq for Labeled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.body == other.body
    }
}

impl<T: Eq> Eq for Labeled<T> {}

impl<T> Labeled<T> {
    pub fn new(label: &str, body: T) -> Self {
        Labeled {
            label: Name::from(label),
            body,
            pos: Pos::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub var: Name,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub name: Name,
    pub extends: Option<Name>,
    pub sets: Vec<Name>,
    pub constants: Vec<Name>,
    pub axioms: Vec<Labeled<Pred>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub name: Name,
    pub refines: Option<Name>,
    pub params: Vec<Name>,
    pub guards: Vec<Labeled<Pred>>,
    pub actions: Vec<Labeled<Action>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub name: Name,
    pub refines: Option<Name>,
    pub sees: Option<Name>,
    pub variables: Vec<Name>,
    pub invariants: Vec<Labeled<Pred>>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    Context(Context),
    Machine(Machine),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub components: Vec<Component>,
}

pub const INITIALISATION: &str = "INITIALISATION";

impl Event {
    pub fn is_initialisation(&self) -> bool {
        &*self.name == INITIALISATION
    }

    pub fn action_for(&self, var: &str) -> Option<&Labeled<Action>> {
        self.actions.iter().find(|a| &*a.body.var == var)
    }
}

impl Machine {
    pub fn event(&self, name: &str) -> Option<&Event> {
        self.events.iter().find(|e| &*e.name == name)
    }

    /// Removes every guard or invariant labelled `label`; reports whether any matched.
    pub fn drop_label(&mut self, label: &str) -> bool {
        let before = self.invariants.len()
            + self.events.iter().map(|e| e.guards.len()).sum::<usize>();
        self.invariants.retain(|i| &*i.label != label);
        for e in &mut self.events {
            e.guards.retain(|g| &*g.label != label);
        }
        let after = self.invariants.len()
            + self.events.iter().map(|e| e.guards.len()).sum::<usize>();
        after < before
    }
}

impl Document {
    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.components.iter().filter_map(|c| match c {
            Component::Context(c) => Some(c),
            _ => None,
        })
    }

    pub fn machines(&self) -> impl Iterator<Item = &Machine> {
        self.components.iter().filter_map(|c| match c {
            Component::Machine(m) => Some(m),
            _ => None,
        })
    }
}

/// How a quantified or parameter variable is given a finite range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range<'a> {
    /// `x ∈ E`
    Member(&'a Expr),
    /// `x ⊆ E`
    Subset(&'a Expr),
}

impl<'a> Range<'a> {
    pub fn expr(&self) -> &'a Expr {
        match self {
            Range::Member(e) | Range::Subset(e) => e,
        }
    }
}

impl Pred {
    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Pred> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Pred, out: &mut Vec<&'a Pred>) {
            if let Pred::And(l, r) = p {
                go(l, out);
                go(r, out);
            } else {
                out.push(p);
            }
        }
        go(self, &mut out);
        out
    }

    /// `x ∈ E` or `x ⊆ E` with `x` the given variable and `E` not mentioning it.
    pub fn as_range_of(&self, var: &str) -> Option<Range<'_>> {
        match self {
            Pred::Cmp(op @ (CmpOp::In | CmpOp::Subset), Expr::Ident(x), e)
                if &**x == var && !e.mentions(var) =>
            {
                Some(if *op == CmpOp::In {
                    Range::Member(e)
                } else {
                    Range::Subset(e)
                })
            }
            _ => None,
        }
    }

    /// The region searched for range conjuncts of a quantifier body:
    /// the antecedent of `∀ xs · A ⇒ B`, or the whole body of `∃`.
    pub fn range_region(&self, universal: bool) -> &Pred {
        match (universal, self) {
            (true, Pred::Implies(a, _)) => a,
            _ => self,
        }
    }

    /// Ranges for bound `vars`, in order; `Err(var)` names the first without one.
    pub fn quantifier_ranges<'a>(
        vars: &'a [Name],
        body: &'a Pred,
        universal: bool,
    ) -> Result<Vec<(&'a Name, Range<'a>)>, Name> {
        let conj = body.range_region(universal).conjuncts();
        vars.iter()
            .map(|v| {
                conj.iter()
                    .find_map(|c| c.as_range_of(v))
                    .map(|r| (v, r))
                    .ok_or_else(|| v.clone())
            })
            .collect()
    }

    pub fn and(self, other: Pred) -> Pred {
        Pred::And(Box::new(self), Box::new(other))
    }

    pub fn implies(self, other: Pred) -> Pred {
        Pred::Implies(Box::new(self), Box::new(other))
    }

    pub fn not(self) -> Pred {
        Pred::Not(Box::new(self))
    }

    pub fn free_idents(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.free_idents().iter().any(|n| &**n == name)
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Pred::True | Pred::False => {}
            Pred::Not(p) => p.collect_free(bound, out),
            Pred::And(a, b) | Pred::Or(a, b) | Pred::Implies(a, b) | Pred::Equiv(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Pred::Cmp(_, a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Pred::Partition(s, parts) => {
                s.collect_free(bound, out);
                for p in parts {
                    p.collect_free(bound, out);
                }
            }
            Pred::Forall(vs, body) | Pred::Exists(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of identifiers.
    pub fn subst(&self, map: &BTreeMap<Name, Expr>) -> Pred {
        if map.is_empty() {
            return self.clone();
        }
        let bin = |a: &Pred, b: &Pred| (Box::new(a.subst(map)), Box::new(b.subst(map)));
        match self {
            Pred::True => Pred::True,
            Pred::False => Pred::False,
            Pred::Not(p) => Pred::Not(Box::new(p.subst(map))),
            Pred::And(a, b) => {
                let (a, b) = bin(a, b);
                Pred::And(a, b)
            }
            Pred::Or(a, b) => {
                let (a, b) = bin(a, b);
                Pred::Or(a, b)
            }
            Pred::Implies(a, b) => {
                let (a, b) = bin(a, b);
                Pred::Implies(a, b)
            }
            Pred::Equiv(a, b) => {
                let (a, b) = bin(a, b);
                Pred::Equiv(a, b)
            }
            Pred::Cmp(op, a, b) => Pred::Cmp(*op, a.subst(map), b.subst(map)),
            Pred::Partition(s, parts) => {
                Pred::Partition(s.subst(map), parts.iter().map(|p| p.subst(map)).collect())
            }
            Pred::Forall(vs, body) | Pred::Exists(vs, body) => {
                let (vs, body) = subst_binder(vs, body, map);
                if matches!(self, Pred::Forall(..)) {
                    Pred::Forall(vs, Box::new(body))
                } else {
                    Pred::Exists(vs, Box::new(body))
                }
            }
        }
    }
}

/// Substitutes under a binder, renaming bound variables that would capture
/// free identifiers of the replacement expressions.
fn subst_binder(vs: &[Name], body: &Pred, map: &BTreeMap<Name, Expr>) -> (Vec<Name>, Pred) {
    // bound names shadow the substitution
    let mut inner: BTreeMap<Name, Expr> = map
        .iter()
        .filter(|(k, _)| !vs.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (vs.to_vec(), body.clone());
    }
    let body_free = body.free_idents();
    let replacement_free: BTreeSet<Name> = inner
        .iter()
        .filter(|(k, _)| body_free.contains(*k))
        .flat_map(|(_, e)| e.free_idents())
        .collect();
    let mut taken: BTreeSet<Name> = body_free
        .iter()
        .chain(replacement_free.iter())
        .chain(vs.iter())
        .cloned()
        .collect();
    taken.extend(inner.keys().cloned());
    let mut new_vs = Vec::with_capacity(vs.len());
    for v in vs {
        if replacement_free.contains(v) {
            let fresh = fresh_name(v, &taken);
            taken.insert(fresh.clone());
            inner.insert(v.clone(), Expr::Ident(fresh.clone()));
            new_vs.push(fresh);
        } else {
            new_vs.push(v.clone());
        }
    }
    (new_vs, body.subst(&inner))
}

fn fresh_name(base: &str, taken: &BTreeSet<Name>) -> Name {
    (1..)
        .map(|k| Name::from(format!("{base}_{k}")))
        .find(|n| !taken.contains(n))
        .expect("unbounded supply of names")
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(Name::from(name))
    }

    pub fn free_idents(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Ident(n) => &**n == name,
            Expr::Bool(_) | Expr::BoolSet | Expr::Empty => false,
            Expr::Enum(items) => items.iter().any(|e| e.mentions(name)),
            Expr::Maplet(a, b)
            | Expr::SetOp(_, a, b)
            | Expr::Rel(_, a, b)
            | Expr::Image(a, b)
            | Expr::Apply(a, b) => a.mentions(name) || b.mentions(name),
            Expr::Pow(e) | Expr::Dom(e) | Expr::Ran(e) => e.mentions(name),
        }
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Ident(n) => {
                if !bound.contains(n) {
                    out.insert(n.clone());
                }
            }
            Expr::Bool(_) | Expr::BoolSet | Expr::Empty => {}
            Expr::Enum(items) => items.iter().for_each(|e| e.collect_free(bound, out)),
            Expr::Maplet(a, b)
            | Expr::SetOp(_, a, b)
            | Expr::Rel(_, a, b)
            | Expr::Image(a, b)
            | Expr::Apply(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Pow(e) | Expr::Dom(e) | Expr::Ran(e) => e.collect_free(bound, out),
        }
    }

    pub fn subst(&self, map: &BTreeMap<Name, Expr>) -> Expr {
        let b = |e: &Expr| Box::new(e.subst(map));
        match self {
            Expr::Ident(n) => map.get(n).cloned().unwrap_or_else(|| self.clone()),
            Expr::Bool(_) | Expr::BoolSet | Expr::Empty => self.clone(),
            Expr::Enum(items) => Expr::Enum(items.iter().map(|e| e.subst(map)).collect()),
            Expr::Maplet(x, y) => Expr::Maplet(b(x), b(y)),
            Expr::SetOp(op, x, y) => Expr::SetOp(*op, b(x), b(y)),
            Expr::Rel(k, x, y) => Expr::Rel(*k, b(x), b(y)),
            Expr::Pow(e) => Expr::Pow(b(e)),
            Expr::Dom(e) => Expr::Dom(b(e)),
            Expr::Ran(e) => Expr::Ran(b(e)),
            Expr::Image(x, y) => Expr::Image(b(x), b(y)),
            Expr::Apply(x, y) => Expr::Apply(b(x), b(y)),
        }
    }
}

/// Terse constructors for building formulas in code.
pub mod build {
    use super::*;

    pub fn id(n: &str) -> Expr {
        Expr::ident(n)
    }
    pub fn set(items: Vec<Expr>) -> Expr {
        Expr::Enum(items)
    }
    pub fn maplet(a: Expr, b: Expr) -> Expr {
        Expr::Maplet(Box::new(a), Box::new(b))
    }
    pub fn union(a: Expr, b: Expr) -> Expr {
        Expr::SetOp(SetOp::Union, Box::new(a), Box::new(b))
    }
    pub fn product(a: Expr, b: Expr) -> Expr {
        Expr::SetOp(SetOp::Product, Box::new(a), Box::new(b))
    }
    pub fn rel(k: RelKind, a: Expr, b: Expr) -> Expr {
        Expr::Rel(k, Box::new(a), Box::new(b))
    }
    pub fn pow(e: Expr) -> Expr {
        Expr::Pow(Box::new(e))
    }
    pub fn dom(e: Expr) -> Expr {
        Expr::Dom(Box::new(e))
    }
    pub fn image(r: Expr, s: Expr) -> Expr {
        Expr::Image(Box::new(r), Box::new(s))
    }
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Pred {
        Pred::Cmp(op, a, b)
    }
    pub fn mem(a: Expr, b: Expr) -> Pred {
        Pred::Cmp(CmpOp::In, a, b)
    }
    pub fn and_all(ps: Vec<Pred>) -> Pred {
        ps.into_iter()
            .reduce(|a, b| a.and(b))
            .unwrap_or(Pred::True)
    }
    pub fn forall(vs: &[&str], body: Pred) -> Pred {
        Pred::Forall(vs.iter().map(|v| Name::from(*v)).collect(), Box::new(body))
    }
    pub fn exists(vs: &[&str], body: Pred) -> Pred {
        Pred::Exists(vs.iter().map(|v| Name::from(*v)).collect(), Box::new(body))
    }
    pub fn names(ns: &[&str]) -> Vec<Name> {
        ns.iter().map(|n| Name::from(*n)).collect()
    }
    pub fn clause(label: &str, p: Pred) -> Labeled<Pred> {
        Labeled::new(label, p)
    }
    pub fn assign(label: &str, var: &str, e: Expr) -> Labeled<Action> {
        Labeled::new(
            label,
            Action {
                var: Name::from(var),
                expr: e,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    #[test]
    fn substitution_avoids_capture() {
        // ∀ j · j ∈ S ⇒ x ≠ j   with x := j
        let p = forall(
            &["j"],
            mem(id("j"), id("S")).implies(cmp(CmpOp::Ne, id("x"), id("j"))),
        );
        let mut map = BTreeMap::new();
        map.insert(Name::from("x"), id("j"));
        let q = p.subst(&map);
        let Pred::Forall(vs, body) = &q else { panic!() };
        assert_eq!(&*vs[0], "j_1");
        assert_eq!(
            **body,
            mem(id("j_1"), id("S")).implies(cmp(CmpOp::Ne, id("j"), id("j_1")))
        );
        assert_eq!(q.free_idents(), ["S", "j"].iter().map(|s| Name::from(*s)).collect());
    }

    #[test]
    fn bound_names_shadow_substitution() {
        let p = exists(&["x"], mem(id("x"), id("S")));
        let mut map = BTreeMap::new();
        map.insert(Name::from("x"), id("y"));
        assert_eq!(p.subst(&map), p);
    }

    #[test]
    fn ranges_come_from_antecedent() {
        let body = mem(id("i"), id("trustors"))
            .and(cmp(CmpOp::Subset, id("j"), id("trustees")))
            .implies(Pred::True);
        let vs = names(&["i", "j"]);
        let r = Pred::quantifier_ranges(&vs, &body, true).unwrap();
        assert_eq!(r[0].1, Range::Member(&id("trustors")));
        assert_eq!(r[1].1, Range::Subset(&id("trustees")));

        let vs = names(&["k"]);
        assert_eq!(
            Pred::quantifier_ranges(&vs, &body, true).unwrap_err(),
            Name::from("k")
        );
    }

    #[test]
    fn drop_label_reports_matches() {
        let mut m = Machine {
            name: "M".into(),
            refines: None,
            sees: None,
            variables: vec![],
            invariants: vec![clause("inv1", Pred::True)],
            events: vec![Event {
                name: "e".into(),
                refines: None,
                params: vec![],
                guards: vec![clause("grd1", Pred::True)],
                actions: vec![],
            }],
        };
        assert!(m.drop_label("grd1"));
        assert!(!m.drop_label("grd1"));
        assert!(m.drop_label("inv1"));
        assert!(m.invariants.is_empty());
    }
}
