//! Evaluation of expressions and predicates over finite values.

use crate::ast::{CmpOp, Expr, Pred, Range, RelKind, SetOp};
use crate::value::{
    apply_function, check_function_kind, domain, function_space, powerset, range,
    relational_image, EvalError, FunctionKind, Name, SetV, Value, DEFAULT_POWERSET_BOUND,
};

/// Identifier bindings, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Env {
    entries: Vec<(Name, Value)>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    /// Adds a binding; rebinding an existing name is an error.
    pub fn bind(&mut self, name: impl Into<Name>, value: Value) -> Result<(), EvalError> {
        let name = name.into();
        match self.search(&name) {
            Ok(_) => Err(EvalError::DuplicateBinding(name.to_string())),
            Err(k) => {
                self.entries.insert(k, (name, value));
                Ok(())
            }
        }
    }

    /// Adds or replaces a binding.
    pub fn set(&mut self, name: impl Into<Name>, value: Value) {
        let name = name.into();
        match self.search(&name) {
            Ok(k) => self.entries[k].1 = value,
            Err(k) => self.entries.insert(k, (name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.search(name).ok().map(|k| &self.entries[k].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.entries.iter().map(|(n, v)| (n, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn search(&self, name: &str) -> Result<usize, usize> {
        self.entries.binary_search_by(|(n, _)| (**n).cmp(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluator {
    pub powerset_bound: usize,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator {
            powerset_bound: DEFAULT_POWERSET_BOUND,
        }
    }
}

impl Evaluator {
    pub fn new(powerset_bound: usize) -> Self {
        Evaluator { powerset_bound }
    }

    pub fn eval_expr(&self, e: &Expr, env: &Env) -> Result<Value, EvalError> {
        Frame::new(*self, env).expr(e)
    }

    pub fn eval_pred(&self, p: &Pred, env: &Env) -> Result<bool, EvalError> {
        Frame::new(*self, env).pred(p)
    }

    /// Evaluates each predicate with extra bindings that shadow `env`.
    pub fn eval_preds_with<'p>(
        &self,
        ps: impl IntoIterator<Item = &'p Pred>,
        env: &Env,
        locals: Vec<(Name, Value)>,
    ) -> Result<Vec<bool>, EvalError> {
        let mut f = Frame::new(*self, env);
        f.locals = locals;
        ps.into_iter().map(|p| f.pred(p)).collect()
    }

    /// Values a variable ranges over given its range conjunct.
    pub fn range_values(&self, r: Range<'_>, env: &Env) -> Result<Vec<Value>, EvalError> {
        Frame::new(*self, env).range_values(r)
    }
}

pub(crate) fn rel_kind(k: RelKind) -> FunctionKind {
    match k {
        RelKind::Relation => FunctionKind::Relation,
        RelKind::Partial => FunctionKind::PartialFn,
        RelKind::Total => FunctionKind::TotalFn,
    }
}

/// Evaluation state: the caller's environment plus quantifier locals.
struct Frame<'a> {
    ev: Evaluator,
    env: &'a Env,
    locals: Vec<(Name, Value)>,
}

impl<'a> Frame<'a> {
    fn new(ev: Evaluator, env: &'a Env) -> Self {
        Frame {
            ev,
            env,
            locals: Vec::new(),
        }
    }

    fn lookup(&self, name: &str) -> Result<&Value, EvalError> {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| &**n == name)
            .map(|(_, v)| v)
            .or_else(|| self.env.get(name))
            .ok_or_else(|| EvalError::UnboundIdentifier(name.to_string()))
    }

    fn set_of(&mut self, e: &Expr) -> Result<SetV, EvalError> {
        match self.expr(e)? {
            Value::Set(s) => Ok(s),
            other => Err(EvalError::Shape {
                expected: "a set",
                found: other.to_string(),
            }),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Ident(n) => self.lookup(n)?.clone(),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::BoolSet => Value::set([Value::Bool(false), Value::Bool(true)]),
            Expr::Empty => Value::empty_set(),
            Expr::Enum(items) => {
                let mut vs = Vec::with_capacity(items.len());
                for i in items {
                    vs.push(self.expr(i)?);
                }
                Value::set(vs)
            }
            Expr::Maplet(a, b) => Value::pair(self.expr(a)?, self.expr(b)?),
            Expr::SetOp(op, a, b) => {
                let (a, b) = (self.set_of(a)?, self.set_of(b)?);
                Value::Set(match op {
                    SetOp::Union => a.union(&b),
                    SetOp::Inter => a.intersection(&b),
                    SetOp::Diff => a.difference(&b),
                    SetOp::Product => a.product(&b),
                })
            }
            Expr::Rel(k, a, b) => {
                let (a, b) = (self.set_of(a)?, self.set_of(b)?);
                let all = function_space(&a, &b, rel_kind(*k), self.ev.powerset_bound)?;
                Value::Set(all.into_iter().map(Value::Set).collect())
            }
            Expr::Pow(s) => Value::Set(powerset(&self.set_of(s)?, self.ev.powerset_bound)?),
            Expr::Dom(r) => Value::Set(domain(&self.set_of(r)?)?),
            Expr::Ran(r) => Value::Set(range(&self.set_of(r)?)?),
            Expr::Image(r, s) => {
                let (r, s) = (self.set_of(r)?, self.set_of(s)?);
                Value::Set(relational_image(&r, &s)?)
            }
            Expr::Apply(f, x) => {
                let f = self.set_of(f)?;
                let x = self.expr(x)?;
                apply_function(&f, &x)?
            }
        })
    }

    /// `x ∈ e`, without materialising powersets or function spaces.
    fn member(&mut self, x: &Value, e: &Expr) -> Result<bool, EvalError> {
        match e {
            Expr::Pow(s) => match x {
                Value::Set(xs) => self.subset_of(xs, s),
                _ => Ok(false),
            },
            Expr::Rel(k, a, b) => match x {
                Value::Set(xs) => {
                    let (a, b) = (self.set_of(a)?, self.set_of(b)?);
                    Ok(check_function_kind(xs, &a, &b, rel_kind(*k)))
                }
                _ => Ok(false),
            },
            Expr::BoolSet => Ok(matches!(x, Value::Bool(_))),
            Expr::SetOp(SetOp::Product, a, b) => match x {
                Value::Pair(p) => Ok(self.member(&p.0, a)? && self.member(&p.1, b)?),
                _ => Ok(false),
            },
            _ => Ok(self.set_of(e)?.contains(x)),
        }
    }

    fn subset_of(&mut self, xs: &SetV, e: &Expr) -> Result<bool, EvalError> {
        match e {
            Expr::Pow(_) | Expr::Rel(..) | Expr::BoolSet | Expr::SetOp(SetOp::Product, ..) => {
                for x in xs {
                    if !self.member(x, e)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Ok(xs.is_subset(&self.set_of(e)?)),
        }
    }

    fn pred(&mut self, p: &Pred) -> Result<bool, EvalError> {
        Ok(match p {
            Pred::True => true,
            Pred::False => false,
            Pred::Not(q) => !self.pred(q)?,
            Pred::And(a, b) => self.pred(a)? && self.pred(b)?,
            Pred::Or(a, b) => self.pred(a)? || self.pred(b)?,
            Pred::Implies(a, b) => !self.pred(a)? || self.pred(b)?,
            Pred::Equiv(a, b) => self.pred(a)? == self.pred(b)?,
            Pred::Cmp(op, a, b) => match op {
                CmpOp::Eq => self.expr(a)? == self.expr(b)?,
                CmpOp::Ne => self.expr(a)? != self.expr(b)?,
                CmpOp::In => {
                    let x = self.expr(a)?;
                    self.member(&x, b)?
                }
                CmpOp::NotIn => {
                    let x = self.expr(a)?;
                    !self.member(&x, b)?
                }
                CmpOp::Subset => {
                    let xs = self.set_of(a)?;
                    self.subset_of(&xs, b)?
                }
                CmpOp::NotSubset => {
                    let xs = self.set_of(a)?;
                    !self.subset_of(&xs, b)?
                }
            },
            Pred::Partition(s, parts) => {
                let whole = self.set_of(s)?;
                let mut acc = SetV::empty();
                for part in parts {
                    let part = self.set_of(part)?;
                    if !acc.intersection(&part).is_empty() {
                        return Ok(false);
                    }
                    acc = acc.union(&part);
                }
                acc == whole
            }
            Pred::Forall(vs, body) => self.quantifier(true, vs, body)?,
            Pred::Exists(vs, body) => self.quantifier(false, vs, body)?,
        })
    }

    fn quantifier(&mut self, universal: bool, vs: &[Name], body: &Pred) -> Result<bool, EvalError> {
        let ranges = Pred::quantifier_ranges(vs, body, universal)
            .map_err(|v| EvalError::NonFiniteQuantifierDomain(v.to_string()))?;
        let ranges: Vec<Range<'_>> = ranges.into_iter().map(|(_, r)| r).collect();
        self.quantify(universal, vs, &ranges, body)
    }

    fn quantify(
        &mut self,
        universal: bool,
        vs: &[Name],
        ranges: &[Range<'_>],
        body: &Pred,
    ) -> Result<bool, EvalError> {
        let Some((r, rest)) = ranges.split_first() else {
            return self.pred(body);
        };
        let values = self.range_values(*r)?;
        for v in values {
            self.locals.push((vs[0].clone(), v));
            let res = self.quantify(universal, &vs[1..], rest, body);
            self.locals.pop();
            // ∀ stops at the first counterexample, ∃ at the first witness
            if res? != universal {
                return Ok(!universal);
            }
        }
        Ok(universal)
    }

    fn range_values(&mut self, r: Range<'_>) -> Result<Vec<Value>, EvalError> {
        let bound = self.ev.powerset_bound;
        Ok(match r {
            Range::Member(Expr::Pow(s)) => {
                let s = self.set_of(s)?;
                s.subsets(bound)?.into_iter().map(Value::Set).collect()
            }
            Range::Member(Expr::Rel(k, a, b)) => {
                let (a, b) = (self.set_of(a)?, self.set_of(b)?);
                function_space(&a, &b, rel_kind(*k), bound)?
                    .into_iter()
                    .map(Value::Set)
                    .collect()
            }
            Range::Member(e) => self.set_of(e)?.iter().cloned().collect(),
            Range::Subset(e) => {
                let s = self.set_of(e)?;
                s.subsets(bound)?.into_iter().map(Value::Set).collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::build::*;

    fn a(n: &str) -> Value {
        Value::atom(n)
    }

    fn trust_env() -> Env {
        let mut env = Env::new();
        env.bind("trustors", Value::set([a("u1")])).unwrap();
        env.bind("trustees", Value::set([a("v1"), a("v2")])).unwrap();
        env.bind("TASKS", Value::set([a("t1")])).unwrap();
        env
    }

    #[test]
    fn env_rejects_duplicates() {
        let mut env = Env::new();
        env.bind("x", Value::Bool(true)).unwrap();
        assert_eq!(
            env.bind("x", Value::Bool(false)),
            Err(EvalError::DuplicateBinding("x".into()))
        );
        env.set("x", Value::Bool(false));
        assert_eq!(env.get("x"), Some(&Value::Bool(false)));
    }

    #[test]
    fn unbound_identifier() {
        let ev = Evaluator::default();
        assert_eq!(
            ev.eval_expr(&id("nope"), &Env::new()),
            Err(EvalError::UnboundIdentifier("nope".into()))
        );
    }

    #[test]
    fn membership_in_type_constructors() {
        let ev = Evaluator::default();
        let mut env = trust_env();
        env.bind(
            "agent_task",
            Value::set([Value::pair(Value::set([a("v1")]), a("t1"))]),
        )
        .unwrap();
        let inv = mem(
            id("agent_task"),
            rel(RelKind::Partial, pow(id("trustees")), id("TASKS")),
        );
        assert!(ev.eval_pred(&inv, &env).unwrap());
        let total = mem(
            id("agent_task"),
            rel(RelKind::Total, pow(id("trustees")), id("TASKS")),
        );
        assert!(!ev.eval_pred(&total, &env).unwrap());
    }

    #[test]
    fn quantifiers_over_powersets() {
        let ev = Evaluator::default();
        let env = trust_env();
        // ∃ j · j ∈ ℙ(trustees) ∧ j ≠ ∅
        let p = exists(
            &["j"],
            mem(id("j"), pow(id("trustees"))).and(cmp(CmpOp::Ne, id("j"), Expr::Empty)),
        );
        assert!(ev.eval_pred(&p, &env).unwrap());
        // ∀ j · j ∈ ℙ(trustees) ⇒ j ≠ ∅
        let q = forall(
            &["j"],
            mem(id("j"), pow(id("trustees"))).implies(cmp(CmpOp::Ne, id("j"), Expr::Empty)),
        );
        assert!(!ev.eval_pred(&q, &env).unwrap());
    }

    #[test]
    fn quantifier_without_range_is_rejected() {
        let ev = Evaluator::default();
        let p = forall(&["x"], cmp(CmpOp::Eq, id("x"), id("x")));
        assert_eq!(
            ev.eval_pred(&p, &Env::new()),
            Err(EvalError::NonFiniteQuantifierDomain("x".into()))
        );
    }

    #[test]
    fn partition_semantics() {
        let ev = Evaluator::default();
        let mut env = Env::new();
        env.bind("A", Value::set([a("x"), a("y")])).unwrap();
        env.bind("p", Value::set([a("x")])).unwrap();
        env.bind("q", Value::set([a("y")])).unwrap();
        env.bind("r", Value::set([a("x"), a("y")])).unwrap();
        let ok = Pred::Partition(id("A"), vec![id("p"), id("q")]);
        let overlap = Pred::Partition(id("A"), vec![id("p"), id("r")]);
        let short = Pred::Partition(id("A"), vec![id("p")]);
        assert!(ev.eval_pred(&ok, &env).unwrap());
        assert!(!ev.eval_pred(&overlap, &env).unwrap());
        assert!(!ev.eval_pred(&short, &env).unwrap());
    }

    #[test]
    fn image_of_singleton_triple() {
        let ev = Evaluator::default();
        let mut env = trust_env();
        let triple = Value::pair(a("u1"), Value::pair(Value::set([a("v1")]), a("t1")));
        env.bind("c", Value::set([Value::pair(triple.clone(), Value::Bool(true))]))
            .unwrap();
        env.bind("i", a("u1")).unwrap();
        env.bind("j", Value::set([a("v1")])).unwrap();
        env.bind("t", a("t1")).unwrap();
        let e = image(
            id("c"),
            set(vec![maplet(id("i"), maplet(id("j"), id("t")))]),
        );
        assert_eq!(
            ev.eval_expr(&e, &env).unwrap(),
            Value::set([Value::Bool(true)])
        );
    }
}
