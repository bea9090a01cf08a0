//! Closed universe of finite set-theoretic values.
//!
//! Every term the trust models talk about lives here: agents and tasks are
//! atoms, trustee groups are sets of atoms, trust triples are nested pairs
//! and commitments are pairs whose right component is a boolean. Sets are
//! kept in canonical form (sorted under the derived total order, no
//! duplicates), so structural equality, ordering and hashing all agree.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Identifier type shared by the AST, environments and atoms.
pub type Name = Arc<str>;

/// Default ceiling on the size of a set whose powerset may be enumerated.
pub const DEFAULT_POWERSET_BOUND: usize = 12;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Atom(Name),
    Bool(bool),
    Set(SetV),
    Pair(Arc<(Value, Value)>),
}

/// A finite, duplicate-free set in canonical order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetV(Arc<[Value]>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound identifier `{0}`")]
    UnboundIdentifier(String),
    #[error("identifier `{0}` is already bound")]
    DuplicateBinding(String),
    #[error("function application outside domain: {func} applied to {arg}")]
    ApplicationOutsideDomain { func: String, arg: String },
    #[error("relation is not functional at {0}")]
    NotFunctional(String),
    #[error("not a relation: element {0} is not a pair")]
    NotARelation(String),
    #[error("enumeration needs 2^{size} candidates, bound is 2^{bound}")]
    BoundExceeded { size: usize, bound: usize },
    #[error("cannot enumerate a domain for bound variable `{0}`")]
    NonFiniteQuantifierDomain(String),
    #[error("expected {expected}, found {found}")]
    Shape { expected: &'static str, found: String },
}

/// The three relation kinds used as type constructors in the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionKind {
    /// `S ↔ T`
    Relation,
    /// `S ⇸ T`
    PartialFn,
    /// `S → T`
    TotalFn,
}

impl Value {
    pub fn atom(name: &str) -> Value {
        Value::Atom(Name::from(name))
    }

    pub fn pair(left: Value, right: Value) -> Value {
        Value::Pair(Arc::new((left, right)))
    }

    pub fn set<I: IntoIterator<Item = Value>>(items: I) -> Value {
        Value::Set(SetV::from_values(items))
    }

    pub fn empty_set() -> Value {
        Value::Set(SetV::empty())
    }

    pub fn as_set(&self) -> Result<&SetV, EvalError> {
        match self {
            Value::Set(s) => Ok(s),
            other => Err(EvalError::Shape {
                expected: "a set",
                found: other.to_string(),
            }),
        }
    }

    pub fn as_pair(&self) -> Result<(&Value, &Value), EvalError> {
        match self {
            Value::Pair(p) => Ok((&p.0, &p.1)),
            other => Err(EvalError::Shape {
                expected: "a pair",
                found: other.to_string(),
            }),
        }
    }

    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(EvalError::Shape {
                expected: "a boolean",
                found: other.to_string(),
            }),
        }
    }

    pub fn as_atom(&self) -> Option<&Name> {
        match self {
            Value::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Nesting depth; atoms and booleans have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Value::Atom(_) | Value::Bool(_) => 0,
            Value::Set(s) => 1 + s.iter().map(Value::depth).max().unwrap_or(0),
            Value::Pair(p) => 1 + p.0.depth().max(p.1.depth()),
        }
    }
}

impl SetV {
    pub fn empty() -> SetV {
        SetV(Arc::from(Vec::new()))
    }

    pub fn from_values<I: IntoIterator<Item = Value>>(items: I) -> SetV {
        let mut v: Vec<Value> = items.into_iter().collect();
        v.sort();
        v.dedup();
        SetV(Arc::from(v))
    }

    /// Callers guarantee `v` is strictly increasing.
    fn from_sorted(v: Vec<Value>) -> SetV {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        SetV(Arc::from(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Value> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Value] {
        &self.0
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.0.binary_search(v).is_ok()
    }

    pub fn is_subset(&self, other: &SetV) -> bool {
        if self.len() > other.len() {
            return false;
        }
        self.iter().all(|v| other.contains(v))
    }

    pub fn union(&self, other: &SetV) -> SetV {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let (a, b) = (self.as_slice(), other.as_slice());
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        SetV::from_sorted(out)
    }

    pub fn intersection(&self, other: &SetV) -> SetV {
        SetV::from_sorted(self.iter().filter(|v| other.contains(v)).cloned().collect())
    }

    pub fn difference(&self, other: &SetV) -> SetV {
        SetV::from_sorted(self.iter().filter(|v| !other.contains(v)).cloned().collect())
    }

    pub fn product(&self, other: &SetV) -> SetV {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in self.iter() {
            for b in other.iter() {
                out.push(Value::pair(a.clone(), b.clone()));
            }
        }
        // pairs order by left then right, so nested iteration is already sorted
        SetV::from_sorted(out)
    }

    pub fn with(&self, v: Value) -> SetV {
        self.union(&SetV::from_sorted(vec![v]))
    }

    /// Subset selected by the bits of `mask` (bit k keeps element k).
    fn select(&self, mask: u64) -> SetV {
        SetV::from_sorted(
            self.iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, v)| v.clone())
                .collect(),
        )
    }

    /// Every subset, in canonical order of the resulting sets.
    pub fn subsets(&self, bound: usize) -> Result<Vec<SetV>, EvalError> {
        if self.len() > bound || self.len() >= 63 {
            return Err(EvalError::BoundExceeded {
                size: self.len(),
                bound,
            });
        }
        let mut out: Vec<SetV> = (0..(1u64 << self.len())).map(|m| self.select(m)).collect();
        out.sort();
        Ok(out)
    }
}

impl FromIterator<Value> for SetV {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        SetV::from_values(iter)
    }
}

impl<'a> IntoIterator for &'a SetV {
    type Item = &'a Value;
    type IntoIter = std::slice::Iter<'a, Value>;
    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// `ℙ(S)`: all `2^|S|` subsets of `s`.
pub fn powerset(s: &SetV, bound: usize) -> Result<SetV, EvalError> {
    Ok(SetV::from_sorted(
        s.subsets(bound)?.into_iter().map(Value::Set).collect(),
    ))
}

/// `r[S] = {y | ∃x · x ∈ S ∧ x ↦ y ∈ r}`.
pub fn relational_image(r: &SetV, s: &SetV) -> Result<SetV, EvalError> {
    let mut out = Vec::new();
    for p in r {
        let (x, y) = pair_of(p)?;
        if s.contains(x) {
            out.push(y.clone());
        }
    }
    Ok(SetV::from_values(out))
}

/// `dom(r)`
pub fn domain(r: &SetV) -> Result<SetV, EvalError> {
    let mut out = Vec::with_capacity(r.len());
    for p in r {
        out.push(pair_of(p)?.0.clone());
    }
    // left components of a sorted pair list are already non-decreasing
    out.dedup();
    Ok(SetV::from_sorted(out))
}

/// `ran(r)`
pub fn range(r: &SetV) -> Result<SetV, EvalError> {
    let mut out = Vec::with_capacity(r.len());
    for p in r {
        out.push(pair_of(p)?.1.clone());
    }
    Ok(SetV::from_values(out))
}

/// `f(x)`: the unique `y` with `x ↦ y ∈ f`.
pub fn apply_function(f: &SetV, x: &Value) -> Result<Value, EvalError> {
    let mut found: Option<&Value> = None;
    for p in f {
        let (l, r) = pair_of(p)?;
        if l == x {
            if found.is_some() {
                return Err(EvalError::NotFunctional(x.to_string()));
            }
            found = Some(r);
        }
    }
    found.cloned().ok_or_else(|| EvalError::ApplicationOutsideDomain {
        func: Value::Set(f.clone()).to_string(),
        arg: x.to_string(),
    })
}

/// Membership of `r` in `dom_ty ↔ ran_ty`, `dom_ty ⇸ ran_ty` or `dom_ty → ran_ty`.
pub fn check_function_kind(r: &SetV, dom_ty: &SetV, ran_ty: &SetV, kind: FunctionKind) -> bool {
    let mut prev_left: Option<&Value> = None;
    let mut covered = 0usize;
    for p in r {
        let Value::Pair(p) = p else { return false };
        let (l, rv) = (&p.0, &p.1);
        if !dom_ty.contains(l) || !ran_ty.contains(rv) {
            return false;
        }
        // canonical order groups pairs with the same left component
        if prev_left == Some(l) {
            if kind != FunctionKind::Relation {
                return false;
            }
        } else {
            covered += 1;
        }
        prev_left = Some(l);
    }
    kind != FunctionKind::TotalFn || covered == dom_ty.len()
}

/// Every member of `dom ↔ ran` / `dom ⇸ ran` / `dom → ran`, in canonical order.
///
/// Fails with `BoundExceeded` when the candidate count exceeds `2^bound`.
pub fn function_space(
    dom: &SetV,
    ran: &SetV,
    kind: FunctionKind,
    bound: usize,
) -> Result<Vec<SetV>, EvalError> {
    match kind {
        FunctionKind::Relation => dom.product(ran).subsets(bound),
        FunctionKind::PartialFn | FunctionKind::TotalFn => {
            let choices = ran.len() + usize::from(kind == FunctionKind::PartialFn);
            let bits = candidate_bits(choices, dom.len());
            if bits > bound {
                return Err(EvalError::BoundExceeded { size: bits, bound });
            }
            let mut out = Vec::new();
            let mut digits = vec![0usize; dom.len()];
            if choices == 0 && !dom.is_empty() {
                return Ok(out);
            }
            loop {
                let mut pairs = Vec::with_capacity(dom.len());
                for (x, &d) in dom.iter().zip(&digits) {
                    let pick = if kind == FunctionKind::PartialFn {
                        if d == 0 {
                            continue;
                        }
                        d - 1
                    } else {
                        d
                    };
                    pairs.push(Value::pair(x.clone(), ran.as_slice()[pick].clone()));
                }
                out.push(SetV::from_sorted(pairs));
                // odometer increment
                let mut k = 0;
                loop {
                    if k == digits.len() {
                        out.sort();
                        return Ok(out);
                    }
                    digits[k] += 1;
                    if digits[k] < choices {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
            }
        }
    }
}

/// `ceil(log2(choices^n))`, the bit budget a function space needs.
fn candidate_bits(choices: usize, n: usize) -> usize {
    if choices <= 1 || n == 0 {
        return 0;
    }
    let per = usize::BITS as usize - (choices - 1).leading_zeros() as usize;
    let exact = (choices as f64).log2() * n as f64;
    (exact.ceil() as usize).min(per * n)
}

fn pair_of(v: &Value) -> Result<(&Value, &Value), EvalError> {
    match v {
        Value::Pair(p) => Ok((&p.0, &p.1)),
        other => Err(EvalError::NotARelation(other.to_string())),
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(a) => f.write_str(a),
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Set(s) => write!(f, "{s}"),
            Value::Pair(p) => {
                write!(f, "{} ↦ ", p.0)?;
                if matches!(p.1, Value::Pair(_)) {
                    write!(f, "({})", p.1)
                } else {
                    write!(f, "{}", p.1)
                }
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for SetV {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("∅");
        }
        f.write_str("{")?;
        for (k, v) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for SetV {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Value {
        Value::atom(n)
    }

    fn s(items: &[Value]) -> SetV {
        SetV::from_values(items.iter().cloned())
    }

    fn p(l: Value, r: Value) -> Value {
        Value::pair(l, r)
    }

    #[test]
    fn sets_are_canonical() {
        let x = s(&[a("b"), a("a"), a("b")]);
        let y = s(&[a("a"), a("b")]);
        assert_eq!(x, y);
        assert_eq!(x.len(), 2);
        assert_eq!(Value::Set(x).to_string(), "{a, b}");
    }

    #[test]
    fn union_of_singletons() {
        let u = s(&[a("a")]).union(&s(&[a("b")]));
        assert_eq!(u, s(&[a("a"), a("b")]));
    }

    #[test]
    fn powerset_small_cases() {
        assert_eq!(
            powerset(&SetV::empty(), 12).unwrap(),
            s(&[Value::empty_set()])
        );
        assert_eq!(
            powerset(&s(&[a("v1")]), 12).unwrap(),
            s(&[Value::empty_set(), Value::set([a("v1")])])
        );
        let two = powerset(&s(&[a("v1"), a("v2")]), 12).unwrap();
        assert_eq!(two.len(), 4);
        assert!(two.contains(&Value::set([a("v1"), a("v2")])));
    }

    #[test]
    fn powerset_respects_bound() {
        let big: SetV = (0..13).map(|k| a(&format!("x{k:02}"))).collect();
        assert_eq!(
            powerset(&big, 12),
            Err(EvalError::BoundExceeded { size: 13, bound: 12 })
        );
    }

    #[test]
    fn image_examples() {
        assert!(relational_image(&SetV::empty(), &s(&[a("u1")]))
            .unwrap()
            .is_empty());

        let g1 = Value::set([a("v1")]);
        let g12 = Value::set([a("v1"), a("v2")]);
        let agent_task = s(&[p(g1.clone(), a("t1")), p(g12, a("t2"))]);
        assert_eq!(
            relational_image(&agent_task, &s(&[g1])).unwrap(),
            s(&[a("t1")])
        );

        let knowledge = s(&[p(a("u1"), a("v1")), p(a("u1"), a("v2"))]);
        assert_eq!(
            relational_image(&knowledge, &s(&[a("u1")])).unwrap(),
            s(&[a("v1"), a("v2")])
        );
    }

    #[test]
    fn image_rejects_non_pairs() {
        assert!(matches!(
            relational_image(&s(&[a("x")]), &SetV::empty()),
            Err(EvalError::NotARelation(_))
        ));
    }

    #[test]
    fn application_examples() {
        let triple = p(a("u1"), p(Value::set([a("v1")]), a("t1")));
        let f = s(&[p(triple.clone(), Value::Bool(true))]);
        assert_eq!(apply_function(&f, &triple).unwrap(), Value::Bool(true));

        assert!(matches!(
            apply_function(&SetV::empty(), &a("x")),
            Err(EvalError::ApplicationOutsideDomain { .. })
        ));

        let g = s(&[p(a("a"), a("1")), p(a("a"), a("2"))]);
        assert!(matches!(
            apply_function(&g, &a("a")),
            Err(EvalError::NotFunctional(_))
        ));
    }

    #[test]
    fn function_kind_examples() {
        let dom = s(&[a("a")]);
        let ran = s(&[a("b")]);
        assert!(check_function_kind(&SetV::empty(), &dom, &ran, FunctionKind::PartialFn));
        assert!(!check_function_kind(&SetV::empty(), &dom, &ran, FunctionKind::TotalFn));

        let g1 = Value::set([a("v1")]);
        let r = s(&[p(g1.clone(), a("t1")), p(g1.clone(), a("t2"))]);
        let dom = s(&[Value::empty_set(), g1]);
        let ran = s(&[a("t1"), a("t2")]);
        assert!(!check_function_kind(&r, &dom, &ran, FunctionKind::PartialFn));
        assert!(check_function_kind(&r, &dom, &ran, FunctionKind::Relation));
    }

    #[test]
    fn function_space_counts() {
        let dom = s(&[a("x"), a("y")]);
        let ran = s(&[a("0"), a("1"), a("2")]);
        assert_eq!(function_space(&dom, &ran, FunctionKind::Relation, 12).unwrap().len(), 64);
        assert_eq!(function_space(&dom, &ran, FunctionKind::PartialFn, 12).unwrap().len(), 16);
        assert_eq!(function_space(&dom, &ran, FunctionKind::TotalFn, 12).unwrap().len(), 9);
        assert_eq!(
            function_space(&SetV::empty(), &ran, FunctionKind::TotalFn, 12).unwrap(),
            vec![SetV::empty()]
        );
        assert!(function_space(&dom, &SetV::empty(), FunctionKind::TotalFn, 12)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn function_space_members_have_their_kind() {
        let dom = s(&[a("x"), a("y"), a("z")]);
        let ran = s(&[a("0"), a("1")]);
        for kind in [FunctionKind::Relation, FunctionKind::PartialFn, FunctionKind::TotalFn] {
            let all = function_space(&dom, &ran, kind, 12).unwrap();
            assert!(all.windows(2).all(|w| w[0] < w[1]));
            assert!(all.iter().all(|r| check_function_kind(r, &dom, &ran, kind)));
        }
    }

    #[test]
    fn pair_display_parenthesises_right_nesting() {
        let triple = p(a("u1"), p(Value::set([a("v1")]), a("t1")));
        assert_eq!(triple.to_string(), "u1 ↦ ({v1} ↦ t1)");
        assert_eq!(p(p(a("a"), a("b")), a("c")).to_string(), "a ↦ b ↦ c");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn atom() -> impl Strategy<Value = Value> {
            prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(Value::atom)
        }

        fn small_set() -> impl Strategy<Value = SetV> {
            prop::collection::vec(atom(), 0..5).prop_map(SetV::from_values)
        }

        fn relation() -> impl Strategy<Value = SetV> {
            prop::collection::vec((atom(), atom()), 0..8)
                .prop_map(|v| v.into_iter().map(|(l, r)| Value::pair(l, r)).collect())
        }

        proptest! {
            #[test]
            fn image_within_range(r in relation(), s in small_set()) {
                let img = relational_image(&r, &s).unwrap();
                prop_assert!(img.is_subset(&range(&r).unwrap()));
            }

            #[test]
            fn powerset_cardinality(s in small_set()) {
                prop_assert_eq!(powerset(&s, 12).unwrap().len(), 1usize << s.len());
            }

            #[test]
            fn application_agrees_with_image(r in relation(), x in atom()) {
                if let Ok(y) = apply_function(&r, &x) {
                    let img = relational_image(&r, &SetV::from_values([x])).unwrap();
                    prop_assert_eq!(img, SetV::from_values([y]));
                }
            }

            #[test]
            fn union_is_order_insensitive(x in small_set(), y in small_set()) {
                prop_assert_eq!(x.union(&y), y.union(&x));
                let naive: SetV = x.iter().chain(y.iter()).cloned().collect();
                prop_assert_eq!(x.union(&y), naive);
            }
        }
    }
}
