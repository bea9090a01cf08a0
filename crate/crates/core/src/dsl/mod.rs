//! Textual syntax for contexts and machines.
//!
//! Accepts Unicode Event-B notation and the usual Rodin ASCII spellings.
//! Clauses carry `@label:` (or bare `label :`) prefixes; `END` closes a
//! component or event and may be omitted where the next keyword or the end
//! of input makes the boundary unambiguous.

mod lexer;
mod parser;
mod printer;

use thiserror::Error;

use crate::ast::{Component, Context, Document, Machine, Pos};
use crate::value::Value;

pub use printer::{print_context, print_expr, print_machine, print_pred, pretty_print};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: duplicate label `{label}`")]
    DuplicateLabel {
        line: usize,
        col: usize,
        label: String,
    },
    #[error("{line}:{col}: duplicate name `{name}`")]
    DuplicateName {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: variable `{variable}` is assigned more than once")]
    MultipleAssignment {
        line: usize,
        col: usize,
        variable: String,
    },
}

impl ParseError {
    pub(crate) fn syntax(pos: Pos, expected: &str, found: &str) -> ParseError {
        ParseError::Syntax {
            line: pos.line,
            col: pos.col,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn position(&self) -> Pos {
        let (line, col) = match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::DuplicateLabel { line, col, .. }
            | ParseError::DuplicateName { line, col, .. }
            | ParseError::MultipleAssignment { line, col, .. } => (*line, *col),
        };
        Pos { line, col }
    }
}

pub fn parse_document(src: &str) -> Result<Document, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let doc = p.document()?;
    p.expect_eof()?;
    Ok(doc)
}

pub fn parse_context(src: &str) -> Result<Context, ParseError> {
    let doc = parse_document(src)?;
    match <[Component; 1]>::try_from(doc.components) {
        Ok([Component::Context(c)]) => Ok(c),
        _ => Err(ParseError::syntax(
            Pos { line: 1, col: 1 },
            "exactly one CONTEXT",
            "other components",
        )),
    }
}

pub fn parse_machine(src: &str) -> Result<Machine, ParseError> {
    let doc = parse_document(src)?;
    match <[Component; 1]>::try_from(doc.components) {
        Ok([Component::Machine(m)]) => Ok(m),
        _ => Err(ParseError::syntax(
            Pos { line: 1, col: 1 },
            "exactly one MACHINE",
            "other components",
        )),
    }
}

pub fn parse_pred(src: &str) -> Result<crate::ast::Pred, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let r = p.pred()?;
    p.expect_eof()?;
    Ok(r)
}

pub fn parse_expr(src: &str) -> Result<crate::ast::Expr, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let r = p.expr()?;
    p.expect_eof()?;
    Ok(r)
}

/// Parses a value literal such as `{v1} ↦ t1` or `u1 ↦ ({v1} ↦ t1)`.
pub fn parse_value(src: &str) -> Result<Value, ParseError> {
    let e = parse_expr(src)?;
    parser::literal_value(&e).ok_or_else(|| {
        ParseError::syntax(Pos { line: 1, col: 1 }, "a value literal", "an operator expression")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::build::*;
    use crate::ast::Pred;

    #[test]
    fn minimal_context() {
        let c = parse_context("CONTEXT c SETS S END").unwrap();
        assert_eq!(&*c.name, "c");
        assert_eq!(c.sets.len(), 1);
        assert!(c.constants.is_empty() && c.axioms.is_empty());
    }

    #[test]
    fn empty_context_prints_on_one_line() {
        let c = parse_context("CONTEXT c END").unwrap();
        assert_eq!(print_context(&c), "CONTEXT c END");
    }

    #[test]
    fn duplicate_guard_label() {
        let src = "MACHINE m\nEVENT e\nANY x\nWHERE\n@grd1: x ∈ S\n@grd1: x ∈ S\nEND\nEND";
        assert_eq!(
            parse_machine(src).unwrap_err(),
            ParseError::DuplicateLabel {
                line: 6,
                col: 1,
                label: "grd1".into()
            }
        );
    }

    #[test]
    fn multiple_assignment() {
        let src = "MACHINE m VARIABLES v\nEVENT e THEN @a1: v ≔ ∅ @a2: v ≔ ∅ END END";
        assert!(matches!(
            parse_machine(src).unwrap_err(),
            ParseError::MultipleAssignment { .. }
        ));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_context("CONTEXT c\nAXIOMS\n  @a: x ∈ ∈ S\nEND").unwrap_err();
        assert_eq!(err.position(), Pos { line: 3, col: 11 });
        assert!(err.to_string().starts_with("3:11: syntax error"));
    }

    #[test]
    fn bare_labels_and_trailing_end_optional() {
        let src = "CONTEXT c SETS A CONSTANTS p q\nAXIOMS\n axm1 : p ⊆ A\n axm2 : partition(A, p, q)";
        let c = parse_context(src).unwrap();
        assert_eq!(c.axioms.len(), 2);
        assert_eq!(
            c.axioms[1].body,
            Pred::Partition(id("A"), vec![id("p"), id("q")])
        );
    }

    #[test]
    fn values() {
        assert_eq!(
            parse_value("u1 |-> ({v1} |-> t1)").unwrap(),
            Value::pair(
                Value::atom("u1"),
                Value::pair(Value::set([Value::atom("v1")]), Value::atom("t1"))
            )
        );
        assert_eq!(parse_value("∅").unwrap(), Value::empty_set());
    }
}
