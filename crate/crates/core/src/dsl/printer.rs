//! Canonical Unicode rendering with minimal parentheses.
//!
//! Parenthesisation mirrors the parser's binding powers, so printing and
//! re-parsing yields the same tree.

use std::fmt;

use crate::ast::*;

fn pred_bp(p: &Pred) -> u8 {
    match p {
        Pred::Forall(..) | Pred::Exists(..) => 0,
        Pred::Equiv(..) => 10,
        Pred::Implies(..) => 20,
        Pred::Or(..) => 30,
        Pred::And(..) => 40,
        Pred::Not(..) => 50,
        _ => 100,
    }
}

fn expr_bp(e: &Expr) -> u8 {
    match e {
        Expr::Rel(..) => 70,
        Expr::Maplet(..) => 80,
        Expr::SetOp(..) => 90,
        _ => 100,
    }
}

fn set_op(o: SetOp) -> &'static str {
    match o {
        SetOp::Union => "∪",
        SetOp::Inter => "∩",
        SetOp::Diff => "∖",
        SetOp::Product => "×",
    }
}

fn rel_op(k: RelKind) -> &'static str {
    match k {
        RelKind::Relation => "↔",
        RelKind::Partial => "⇸",
        RelKind::Total => "→",
    }
}

fn cmp_op(c: CmpOp) -> &'static str {
    match c {
        CmpOp::Eq => "=",
        CmpOp::Ne => "≠",
        CmpOp::In => "∈",
        CmpOp::NotIn => "∉",
        CmpOp::Subset => "⊆",
        CmpOp::NotSubset => "⊈",
    }
}

fn expr_min(e: &Expr, min: u8, out: &mut String) {
    if expr_bp(e) < min {
        out.push('(');
        expr(e, out);
        out.push(')');
    } else {
        expr(e, out);
    }
}

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Ident(n) => out.push_str(n),
        Expr::Bool(true) => out.push_str("TRUE"),
        Expr::Bool(false) => out.push_str("FALSE"),
        Expr::BoolSet => out.push_str("BOOL"),
        Expr::Empty => out.push('∅'),
        Expr::Enum(items) => {
            out.push('{');
            for (k, i) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                expr(i, out);
            }
            out.push('}');
        }
        Expr::Maplet(a, b) => binary_expr(a, "↦", b, 80, out),
        // mixed set operators are always bracketed on the left
        Expr::SetOp(o, a, b) => match &**a {
            Expr::SetOp(o2, ..) if o2 != o => binary_expr(a, set_op(*o), b, 91, out),
            _ => binary_expr(a, set_op(*o), b, 90, out),
        },
        Expr::Rel(k, a, b) => binary_expr(a, rel_op(*k), b, 70, out),
        Expr::Pow(x) => wrapped("ℙ", x, out),
        Expr::Dom(x) => wrapped("dom", x, out),
        Expr::Ran(x) => wrapped("ran", x, out),
        Expr::Image(r, s) => {
            expr_min(r, 100, out);
            out.push('[');
            expr(s, out);
            out.push(']');
        }
        Expr::Apply(f, x) => {
            expr_min(f, 100, out);
            out.push('(');
            expr(x, out);
            out.push(')');
        }
    }
}

fn wrapped(head: &str, x: &Expr, out: &mut String) {
    out.push_str(head);
    out.push('(');
    expr(x, out);
    out.push(')');
}

/// Left-associative binary operator at binding power `bp`.
fn binary_expr(a: &Expr, op: &str, b: &Expr, bp: u8, out: &mut String) {
    expr_min(a, bp, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    expr_min(b, bp + 1, out);
}

fn pred_min(p: &Pred, min: u8, out: &mut String) {
    if pred_bp(p) < min {
        out.push('(');
        pred(p, out);
        out.push(')');
    } else {
        pred(p, out);
    }
}

fn binary_pred(a: &Pred, op: &str, b: &Pred, lmin: u8, rmin: u8, out: &mut String) {
    pred_min(a, lmin, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    pred_min(b, rmin, out);
}

fn pred(p: &Pred, out: &mut String) {
    match p {
        Pred::True => out.push('⊤'),
        Pred::False => out.push('⊥'),
        Pred::Not(q) => {
            out.push('¬');
            pred_min(q, 50, out);
        }
        Pred::And(a, b) => binary_pred(a, "∧", b, 40, 41, out),
        Pred::Or(a, b) => binary_pred(a, "∨", b, 30, 31, out),
        Pred::Implies(a, b) => binary_pred(a, "⇒", b, 21, 20, out),
        Pred::Equiv(a, b) => binary_pred(a, "⇔", b, 11, 11, out),
        Pred::Cmp(c, a, b) => {
            expr(a, out);
            out.push(' ');
            out.push_str(cmp_op(*c));
            out.push(' ');
            expr(b, out);
        }
        Pred::Partition(s, parts) => {
            out.push_str("partition(");
            expr(s, out);
            for part in parts {
                out.push_str(", ");
                expr(part, out);
            }
            out.push(')');
        }
        Pred::Forall(vs, body) | Pred::Exists(vs, body) => {
            out.push(if matches!(p, Pred::Forall(..)) { '∀' } else { '∃' });
            out.push(' ');
            out.push_str(&vs.iter().map(|v| &**v).collect::<Vec<_>>().join(", "));
            out.push_str(" · ");
            pred(body, out);
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(e, &mut s);
    s
}

pub fn print_pred(p: &Pred) -> String {
    let mut s = String::new();
    pred(p, &mut s);
    s
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_pred(self))
    }
}

fn names(ns: &[crate::value::Name]) -> String {
    ns.iter().map(|n| &**n).collect::<Vec<_>>().join(" ")
}

fn clause(indent: &str, c: &Labeled<Pred>, lines: &mut Vec<String>) {
    lines.push(format!("{indent}@{}: {}", c.label, print_pred(&c.body)));
}

pub fn print_context(c: &Context) -> String {
    let mut head = format!("CONTEXT {}", c.name);
    if let Some(p) = &c.extends {
        head.push_str(&format!(" EXTENDS {p}"));
    }
    if c.sets.is_empty() && c.constants.is_empty() && c.axioms.is_empty() {
        return head + " END";
    }
    let mut lines = vec![head];
    if !c.sets.is_empty() {
        lines.push(format!("SETS {}", names(&c.sets)));
    }
    if !c.constants.is_empty() {
        lines.push(format!("CONSTANTS {}", names(&c.constants)));
    }
    if !c.axioms.is_empty() {
        lines.push("AXIOMS".into());
        for a in &c.axioms {
            clause("  ", a, &mut lines);
        }
    }
    lines.push("END".into());
    lines.join("\n")
}

pub fn print_machine(m: &Machine) -> String {
    let mut lines = vec![format!("MACHINE {}", m.name)];
    if let Some(r) = &m.refines {
        lines.push(format!("REFINES {r}"));
    }
    if let Some(s) = &m.sees {
        lines.push(format!("SEES {s}"));
    }
    if !m.variables.is_empty() {
        lines.push(format!("VARIABLES {}", names(&m.variables)));
    }
    if !m.invariants.is_empty() {
        lines.push("INVARIANTS".into());
        for i in &m.invariants {
            clause("  ", i, &mut lines);
        }
    }
    for e in &m.events {
        let mut head = format!("EVENT {}", e.name);
        if let Some(r) = &e.refines {
            head.push_str(&format!(" REFINES {r}"));
        }
        lines.push(head);
        if !e.params.is_empty() {
            lines.push(format!("  ANY {}", names(&e.params)));
        }
        if !e.guards.is_empty() {
            lines.push("  WHERE".into());
            for g in &e.guards {
                clause("    ", g, &mut lines);
            }
        }
        if !e.actions.is_empty() {
            lines.push("  THEN".into());
            for a in &e.actions {
                lines.push(format!(
                    "    @{}: {} ≔ {}",
                    a.label,
                    a.body.var,
                    print_expr(&a.body.expr)
                ));
            }
        }
        lines.push("END".into());
    }
    lines.push("END".into());
    lines.join("\n")
}

/// Canonical text of a whole document, newline-terminated.
pub fn pretty_print(doc: &Document) -> String {
    let parts: Vec<String> = doc
        .components
        .iter()
        .map(|c| match c {
            Component::Context(c) => print_context(c),
            Component::Machine(m) => print_machine(m),
        })
        .collect();
    parts.join("\n\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::super::{parse_expr, parse_pred};
    use super::*;

    #[test]
    fn minimal_parentheses() {
        for src in [
            "i ↦ (j ↦ t)",
            "a ↦ b ↦ c",
            "ℙ(trustees) ⇸ TASKS",
            "trustors × agent_task → BOOL",
            "(a ∪ b)[s]",
            "ttt ∪ {i ↦ (j ↦ t)}",
            "a ∪ (b ∩ c)",
        ] {
            assert_eq!(print_expr(&parse_expr(src).unwrap()), src);
        }
        for src in [
            "a ∈ A ∧ b ∈ B ⇒ (∃ j · j ∈ S ∧ j ≠ ∅)",
            "¬(a ∈ A ∧ b ∈ B)",
            "(a ∈ A ⇒ b ∈ B) ⇒ c ∈ C",
            "a ∈ A ⇒ b ∈ B ⇒ c ∈ C",
            "∀ i, j · i ∈ S ∧ j ∈ ℙ(T) ⇒ i ∉ j",
            "(∀ x · x ∈ S ⇒ x ∈ T) ∧ a = b",
        ] {
            assert_eq!(print_pred(&parse_pred(src).unwrap()), src);
        }
    }

    #[test]
    fn redundant_parentheses_are_dropped() {
        let p = parse_pred("((a ∈ A) ∧ (b ∈ (B)))").unwrap();
        assert_eq!(print_pred(&p), "a ∈ A ∧ b ∈ B");
    }
}
