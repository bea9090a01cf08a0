use std::collections::BTreeSet;

use crate::ast::*;
use crate::value::{Name, Value};

use super::lexer::{lex, Kw, Sym, Tok};
use super::ParseError;

const MAX_DEPTH: usize = 128;
const POSTFIX_BP: u8 = 100;

enum Node {
    E(Expr),
    P(Pred),
}

enum Infix {
    Equiv,
    Implies,
    Or,
    And,
    Cmp(CmpOp),
    Rel(RelKind),
    Maplet,
    Set(SetOp),
}

/// `(left bp, right bp, operator)`.
fn infix(s: Sym) -> Option<(u8, u8, Infix)> {
    use Sym::*;
    Some(match s {
        Equiv => (10, 11, Infix::Equiv),
        Implies => (20, 20, Infix::Implies),
        Or => (30, 31, Infix::Or),
        And => (40, 41, Infix::And),
        Colon | In => (60, 61, Infix::Cmp(CmpOp::In)),
        NotIn => (60, 61, Infix::Cmp(CmpOp::NotIn)),
        Subset => (60, 61, Infix::Cmp(CmpOp::Subset)),
        NotSubset => (60, 61, Infix::Cmp(CmpOp::NotSubset)),
        Eq => (60, 61, Infix::Cmp(CmpOp::Eq)),
        Ne => (60, 61, Infix::Cmp(CmpOp::Ne)),
        Relation => (70, 71, Infix::Rel(RelKind::Relation)),
        Partial => (70, 71, Infix::Rel(RelKind::Partial)),
        Total => (70, 71, Infix::Rel(RelKind::Total)),
        Maplet => (80, 81, Infix::Maplet),
        Union => (90, 91, Infix::Set(SetOp::Union)),
        Inter => (90, 91, Infix::Set(SetOp::Inter)),
        Diff => (90, 91, Infix::Set(SetOp::Diff)),
        Product => (90, 91, Infix::Set(SetOp::Product)),
        _ => return None,
    })
}

pub struct Parser {
    toks: Vec<(Tok, Pos)>,
    k: usize,
    depth: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            k: 0,
            depth: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.k].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.k + n).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.k].1
    }

    fn advance(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.k].clone();
        if self.k + 1 < self.toks.len() {
            self.k += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::syntax(self.pos(), expected, &self.peek().describe()))
    }

    fn eat_sym(&mut self, s: Sym) -> bool {
        if *self.peek() == Tok::Sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: Sym) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("`{}`", super::lexer::sym_text(s)))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(Name, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(n) => {
                let p = self.pos();
                self.advance();
                Ok((n, p))
            }
            _ => self.error(what),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    // ---- formulas ----

    pub fn pred(&mut self) -> Result<Pred, ParseError> {
        let p = self.pos();
        let n = self.node(0)?;
        self.to_pred(n, p)
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let p = self.pos();
        let n = self.node(0)?;
        self.to_expr(n, p)
    }

    fn to_pred(&self, n: Node, at: Pos) -> Result<Pred, ParseError> {
        match n {
            Node::P(p) => Ok(p),
            Node::E(_) => Err(ParseError::syntax(at, "a predicate", "an expression")),
        }
    }

    fn to_expr(&self, n: Node, at: Pos) -> Result<Expr, ParseError> {
        match n {
            Node::E(e) => Ok(e),
            Node::P(_) => Err(ParseError::syntax(at, "an expression", "a predicate")),
        }
    }

    fn node(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("a shallower formula (nesting limit reached)");
        }
        let r = self.node_inner(min_bp);
        self.depth -= 1;
        r
    }

    fn node_inner(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let start = self.pos();
        let mut lhs = self.nud()?;
        loop {
            let Tok::Sym(s) = *self.peek() else { break };
            if matches!(s, Sym::LBrack | Sym::LParen)
                && matches!(lhs, Node::E(_))
                && POSTFIX_BP >= min_bp
            {
                self.advance();
                let Node::E(f) = lhs else { unreachable!() };
                let arg = self.expr()?;
                lhs = Node::E(if s == Sym::LBrack {
                    self.expect_sym(Sym::RBrack)?;
                    Expr::Image(Box::new(f), Box::new(arg))
                } else {
                    self.expect_sym(Sym::RParen)?;
                    Expr::Apply(Box::new(f), Box::new(arg))
                });
                continue;
            }
            let Some((lbp, rbp, op)) = infix(s) else { break };
            if lbp < min_bp {
                break;
            }
            self.advance();
            let rhs_pos = self.pos();
            let rhs = self.node(rbp)?;
            lhs = self.combine(op, lhs, start, rhs, rhs_pos)?;
        }
        Ok(lhs)
    }

    fn combine(
        &self,
        op: Infix,
        lhs: Node,
        lpos: Pos,
        rhs: Node,
        rpos: Pos,
    ) -> Result<Node, ParseError> {
        if let Infix::Equiv | Infix::Implies | Infix::Or | Infix::And = op {
            let a = Box::new(self.to_pred(lhs, lpos)?);
            let b = Box::new(self.to_pred(rhs, rpos)?);
            return Ok(Node::P(match op {
                Infix::Equiv => Pred::Equiv(a, b),
                Infix::Implies => Pred::Implies(a, b),
                Infix::Or => Pred::Or(a, b),
                _ => Pred::And(a, b),
            }));
        }
        let a = self.to_expr(lhs, lpos)?;
        let b = self.to_expr(rhs, rpos)?;
        Ok(match op {
            Infix::Cmp(c) => Node::P(Pred::Cmp(c, a, b)),
            Infix::Rel(k) => Node::E(Expr::Rel(k, Box::new(a), Box::new(b))),
            Infix::Maplet => Node::E(Expr::Maplet(Box::new(a), Box::new(b))),
            Infix::Set(o) => Node::E(Expr::SetOp(o, Box::new(a), Box::new(b))),
            _ => unreachable!("logical operators handled above"),
        })
    }

    fn paren_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym(Sym::LParen)?;
        let e = self.expr()?;
        self.expect_sym(Sym::RParen)?;
        Ok(e)
    }

    fn nud(&mut self) -> Result<Node, ParseError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Ident(n) => {
                self.advance();
                Ok(Node::E(Expr::Ident(n)))
            }
            Tok::Sym(s) => {
                match s {
                    Sym::TrueLit | Sym::FalseLit => {
                        self.advance();
                        Ok(Node::E(Expr::Bool(s == Sym::TrueLit)))
                    }
                    Sym::BoolSet => {
                        self.advance();
                        Ok(Node::E(Expr::BoolSet))
                    }
                    Sym::Empty => {
                        self.advance();
                        Ok(Node::E(Expr::Empty))
                    }
                    Sym::Top | Sym::Bot => {
                        self.advance();
                        Ok(Node::P(if s == Sym::Top { Pred::True } else { Pred::False }))
                    }
                    Sym::LBrace => {
                        self.advance();
                        if self.eat_sym(Sym::RBrace) {
                            return Ok(Node::E(Expr::Empty));
                        }
                        let mut items = vec![self.expr()?];
                        while self.eat_sym(Sym::Comma) {
                            items.push(self.expr()?);
                        }
                        self.expect_sym(Sym::RBrace)?;
                        Ok(Node::E(Expr::Enum(items)))
                    }
                    Sym::LParen => {
                        self.advance();
                        let n = self.node(0)?;
                        self.expect_sym(Sym::RParen)?;
                        Ok(n)
                    }
                    Sym::Pow | Sym::Dom | Sym::Ran => {
                        self.advance();
                        let e = Box::new(self.paren_expr()?);
                        Ok(Node::E(match s {
                            Sym::Pow => Expr::Pow(e),
                            Sym::Dom => Expr::Dom(e),
                            _ => Expr::Ran(e),
                        }))
                    }
                    Sym::Partition => {
                        self.advance();
                        self.expect_sym(Sym::LParen)?;
                        let whole = self.expr()?;
                        let mut parts = Vec::new();
                        while self.eat_sym(Sym::Comma) {
                            parts.push(self.expr()?);
                        }
                        self.expect_sym(Sym::RParen)?;
                        Ok(Node::P(Pred::Partition(whole, parts)))
                    }
                    Sym::Not => {
                        self.advance();
                        let p = self.pos();
                        let n = self.node(50)?;
                        Ok(Node::P(Pred::Not(Box::new(self.to_pred(n, p)?))))
                    }
                    Sym::Forall | Sym::Exists => {
                        self.advance();
                        let mut vars = vec![self.expect_ident("a bound variable")?.0];
                        while self.eat_sym(Sym::Comma) {
                            vars.push(self.expect_ident("a bound variable")?.0);
                        }
                        self.expect_sym(Sym::Dot)?;
                        let body = Box::new(self.pred()?);
                        Ok(Node::P(if s == Sym::Forall {
                            Pred::Forall(vars, body)
                        } else {
                            Pred::Exists(vars, body)
                        }))
                    }
                    _ => self.error("an expression or predicate"),
                }
            }
            _ => self.error("an expression or predicate"),
        }
    }

    // ---- components ----

    /// A clause label: `@lbl:` or a bare `lbl :`.
    fn clause_label(&mut self) -> Result<Option<(Name, Pos)>, ParseError> {
        match self.peek().clone() {
            Tok::Label(n) => {
                let p = self.pos();
                self.advance();
                self.expect_sym(Sym::Colon)?;
                Ok(Some((n, p)))
            }
            Tok::Ident(n) if *self.peek_at(1) == Tok::Sym(Sym::Colon) => {
                let p = self.pos();
                self.advance();
                self.advance();
                Ok(Some((n, p)))
            }
            _ => Ok(None),
        }
    }

    fn clauses(&mut self, seen: &mut BTreeSet<Name>) -> Result<Vec<Labeled<Pred>>, ParseError> {
        let mut out = Vec::new();
        while let Some((label, pos)) = self.clause_label()? {
            if !seen.insert(label.clone()) {
                return Err(ParseError::DuplicateLabel {
                    line: pos.line,
                    col: pos.col,
                    label: label.to_string(),
                });
            }
            let body = self.pred()?;
            out.push(Labeled { label, body, pos });
        }
        Ok(out)
    }

    fn idents(&mut self, seen: &mut BTreeSet<Name>) -> Result<Vec<Name>, ParseError> {
        let mut out = Vec::new();
        while let Tok::Ident(n) = self.peek().clone() {
            if *self.peek_at(1) == Tok::Sym(Sym::Colon) {
                break;
            }
            let p = self.pos();
            if !seen.insert(n.clone()) {
                return Err(ParseError::DuplicateName {
                    line: p.line,
                    col: p.col,
                    name: n.to_string(),
                });
            }
            self.advance();
            out.push(n);
            // optional commas between names
            self.eat_sym(Sym::Comma);
        }
        Ok(out)
    }

    pub fn document(&mut self) -> Result<Document, ParseError> {
        let mut doc = Document::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(doc),
                Tok::Kw(Kw::Context) => {
                    let c = self.context()?;
                    doc.components.push(Component::Context(c));
                }
                Tok::Kw(Kw::Machine) => {
                    let m = self.machine()?;
                    doc.components.push(Component::Machine(m));
                }
                _ => return self.error("CONTEXT or MACHINE"),
            }
        }
    }

    fn context(&mut self) -> Result<Context, ParseError> {
        self.advance();
        let (name, _) = self.expect_ident("a context name")?;
        let mut c = Context {
            name,
            extends: None,
            sets: Vec::new(),
            constants: Vec::new(),
            axioms: Vec::new(),
        };
        let mut names = BTreeSet::new();
        let mut labels = BTreeSet::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::Extends) => {
                    self.advance();
                    c.extends = Some(self.expect_ident("a context name")?.0);
                }
                Tok::Kw(Kw::Sets) => {
                    self.advance();
                    c.sets.extend(self.idents(&mut names)?);
                }
                Tok::Kw(Kw::Constants) => {
                    self.advance();
                    c.constants.extend(self.idents(&mut names)?);
                }
                Tok::Kw(Kw::Axioms) => {
                    self.advance();
                    c.axioms.extend(self.clauses(&mut labels)?);
                }
                Tok::Kw(Kw::End) => {
                    self.advance();
                    return Ok(c);
                }
                Tok::Kw(Kw::Context | Kw::Machine) | Tok::Eof => return Ok(c),
                _ => return self.error("EXTENDS, SETS, CONSTANTS, AXIOMS, a labelled axiom or END"),
            }
        }
    }

    fn machine(&mut self) -> Result<Machine, ParseError> {
        self.advance();
        let (name, _) = self.expect_ident("a machine name")?;
        let mut m = Machine {
            name,
            refines: None,
            sees: None,
            variables: Vec::new(),
            invariants: Vec::new(),
            events: Vec::new(),
        };
        let mut vars = BTreeSet::new();
        let mut labels = BTreeSet::new();
        let mut events = BTreeSet::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::Refines) => {
                    self.advance();
                    m.refines = Some(self.expect_ident("a machine name")?.0);
                }
                Tok::Kw(Kw::Sees) => {
                    self.advance();
                    m.sees = Some(self.expect_ident("a context name")?.0);
                }
                Tok::Kw(Kw::Variables) => {
                    self.advance();
                    m.variables.extend(self.idents(&mut vars)?);
                }
                Tok::Kw(Kw::Invariants) => {
                    self.advance();
                    m.invariants.extend(self.clauses(&mut labels)?);
                }
                Tok::Kw(Kw::Events) => {
                    self.advance();
                }
                Tok::Kw(Kw::Event) => {
                    let p = self.pos();
                    let e = self.event()?;
                    if !events.insert(e.name.clone()) {
                        return Err(ParseError::DuplicateName {
                            line: p.line,
                            col: p.col,
                            name: e.name.to_string(),
                        });
                    }
                    m.events.push(e);
                }
                Tok::Kw(Kw::End) => {
                    self.advance();
                    return Ok(m);
                }
                Tok::Kw(Kw::Context | Kw::Machine) | Tok::Eof => return Ok(m),
                _ => {
                    return self.error(
                        "REFINES, SEES, VARIABLES, INVARIANTS, EVENT, a labelled invariant or END",
                    )
                }
            }
        }
    }

    fn event(&mut self) -> Result<Event, ParseError> {
        self.advance();
        let name = match self.peek().clone() {
            Tok::Ident(n) => {
                self.advance();
                n
            }
            _ => return self.error("an event name"),
        };
        let mut e = Event {
            name,
            refines: None,
            params: Vec::new(),
            guards: Vec::new(),
            actions: Vec::new(),
        };
        let mut params = BTreeSet::new();
        let mut guard_labels = BTreeSet::new();
        let mut action_labels = BTreeSet::new();
        let mut assigned = BTreeSet::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::Refines) => {
                    self.advance();
                    e.refines = Some(self.expect_ident("an event name")?.0);
                }
                Tok::Kw(Kw::Any) => {
                    self.advance();
                    e.params.extend(self.idents(&mut params)?);
                }
                Tok::Kw(Kw::Where) => {
                    self.advance();
                    e.guards.extend(self.clauses(&mut guard_labels)?);
                }
                Tok::Kw(Kw::Then | Kw::Begin) => {
                    self.advance();
                    while let Some((label, pos)) = self.clause_label()? {
                        if !action_labels.insert(label.clone()) {
                            return Err(ParseError::DuplicateLabel {
                                line: pos.line,
                                col: pos.col,
                                label: label.to_string(),
                            });
                        }
                        let (var, vpos) = self.expect_ident("an assigned variable")?;
                        self.expect_sym(Sym::Assign)?;
                        let expr = self.expr()?;
                        if !assigned.insert(var.clone()) {
                            return Err(ParseError::MultipleAssignment {
                                line: vpos.line,
                                col: vpos.col,
                                variable: var.to_string(),
                            });
                        }
                        e.actions.push(Labeled {
                            label,
                            body: Action { var, expr },
                            pos,
                        });
                    }
                }
                Tok::Kw(Kw::End) => {
                    self.advance();
                    return Ok(e);
                }
                Tok::Kw(Kw::Event | Kw::Context | Kw::Machine) | Tok::Eof => return Ok(e),
                _ => return self.error("REFINES, ANY, WHERE, THEN, a labelled clause or END"),
            }
        }
    }
}

/// Converts a literal expression to a value: atoms, booleans, sets and pairs.
pub fn literal_value(e: &Expr) -> Option<Value> {
    Some(match e {
        Expr::Ident(n) => Value::Atom(n.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::BoolSet => Value::set([Value::Bool(false), Value::Bool(true)]),
        Expr::Empty => Value::empty_set(),
        Expr::Enum(items) => Value::set(items.iter().map(literal_value).collect::<Option<Vec<_>>>()?),
        Expr::Maplet(a, b) => Value::pair(literal_value(a)?, literal_value(b)?),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::build::*;

    fn p(s: &str) -> Pred {
        let mut ps = Parser::new(s).unwrap();
        let r = ps.pred().unwrap();
        ps.expect_eof().unwrap();
        r
    }

    fn e(s: &str) -> Expr {
        let mut ps = Parser::new(s).unwrap();
        let r = ps.expr().unwrap();
        ps.expect_eof().unwrap();
        r
    }

    #[test]
    fn maplet_nesting_and_union() {
        assert_eq!(
            e("ttt ∪ {i ↦ (j ↦ t)}"),
            union(id("ttt"), set(vec![maplet(id("i"), maplet(id("j"), id("t")))]))
        );
        assert_eq!(e("a ↦ b ↦ c"), maplet(maplet(id("a"), id("b")), id("c")));
    }

    #[test]
    fn relation_constructors_bind_loosest() {
        assert_eq!(
            e("ℙ(trustees) ⇸ TASKS"),
            rel(RelKind::Partial, pow(id("trustees")), id("TASKS"))
        );
        assert_eq!(
            e("trustors × agent_task → BOOL"),
            rel(
                RelKind::Total,
                product(id("trustors"), id("agent_task")),
                Expr::BoolSet
            )
        );
    }

    #[test]
    fn logical_precedence() {
        let a = mem(id("a"), id("A"));
        let b = mem(id("b"), id("B"));
        let c = mem(id("c"), id("C"));
        assert_eq!(p("a ∈ A ∧ b ∈ B ⇒ c ∈ C"), a.clone().and(b.clone()).implies(c.clone()));
        assert_eq!(
            p("a ∈ A ∨ b ∈ B ∧ c ∈ C"),
            Pred::Or(Box::new(a.clone()), Box::new(b.clone().and(c.clone())))
        );
        assert_eq!(p("¬a ∈ A ∧ b ∈ B"), a.clone().not().and(b.clone()));
        assert_eq!(
            p("a ∈ A ⇒ b ∈ B ⇒ c ∈ C"),
            a.implies(b.implies(c))
        );
    }

    #[test]
    fn quantifier_body_extends_right() {
        let q = p("∀ i , j · i ∈ S ∧ j ∈ T ⇒ i ≠ j");
        let Pred::Forall(vs, body) = q else { panic!() };
        assert_eq!(vs.len(), 2);
        assert!(matches!(*body, Pred::Implies(..)));
    }

    #[test]
    fn image_and_application() {
        assert_eq!(
            e("commitments[{i ↦ (j ↦ t)}]"),
            image(id("commitments"), set(vec![maplet(id("i"), maplet(id("j"), id("t")))]))
        );
        assert_eq!(
            e("f(x)[s]"),
            image(Expr::Apply(Box::new(id("f")), Box::new(id("x"))), id("s"))
        );
    }

    #[test]
    fn kind_errors_are_located() {
        let mut ps = Parser::new("a ∧ b").unwrap();
        let err = ps.pred().unwrap_err();
        assert_eq!(err.position(), Pos { line: 1, col: 1 });
    }

    #[test]
    fn depth_limit() {
        let deep = format!("{}x{}", "(".repeat(500), ")".repeat(500));
        assert!(Parser::new(&deep).unwrap().expr().is_err());
    }

    #[test]
    fn literal_values() {
        assert_eq!(
            literal_value(&e("{adv1} ↦ deliver5kg")),
            Some(Value::pair(Value::set([Value::atom("adv1")]), Value::atom("deliver5kg")))
        );
        assert_eq!(literal_value(&e("a ∪ b")), None);
    }
}
