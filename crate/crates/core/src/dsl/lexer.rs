use crate::ast::Pos;
use crate::value::Name;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Context,
    Extends,
    Sets,
    Constants,
    Axioms,
    Machine,
    Refines,
    Sees,
    Variables,
    Invariants,
    Events,
    Event,
    Any,
    Where,
    Then,
    Begin,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sym {
    Colon,
    In,
    NotIn,
    Subset,
    NotSubset,
    Eq,
    Ne,
    And,
    Or,
    Not,
    Implies,
    Equiv,
    Forall,
    Exists,
    Dot,
    Maplet,
    Union,
    Inter,
    Diff,
    Product,
    Relation,
    Partial,
    Total,
    Pow,
    Empty,
    Assign,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Top,
    Bot,
    TrueLit,
    FalseLit,
    BoolSet,
    Dom,
    Ran,
    Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(Name),
    Label(Name),
    Kw(Kw),
    Sym(Sym),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Label(n) => format!("label `@{n}`"),
            Tok::Kw(k) => format!("keyword {}", format!("{k:?}").to_uppercase()),
            Tok::Sym(s) => format!("`{}`", sym_text(*s)),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

pub fn sym_text(s: Sym) -> &'static str {
    use Sym::*;
    match s {
        Colon => ":",
        In => "∈",
        NotIn => "∉",
        Subset => "⊆",
        NotSubset => "⊈",
        Eq => "=",
        Ne => "≠",
        And => "∧",
        Or => "∨",
        Not => "¬",
        Implies => "⇒",
        Equiv => "⇔",
        Forall => "∀",
        Exists => "∃",
        Dot => "·",
        Maplet => "↦",
        Union => "∪",
        Inter => "∩",
        Diff => "∖",
        Product => "×",
        Relation => "↔",
        Partial => "⇸",
        Total => "→",
        Pow => "ℙ",
        Empty => "∅",
        Assign => "≔",
        LParen => "(",
        RParen => ")",
        LBrack => "[",
        RBrack => "]",
        LBrace => "{",
        RBrace => "}",
        Comma => ",",
        Top => "⊤",
        Bot => "⊥",
        TrueLit => "TRUE",
        FalseLit => "FALSE",
        BoolSet => "BOOL",
        Dom => "dom",
        Ran => "ran",
        Partition => "partition",
    }
}

fn unicode_sym(c: char) -> Option<Sym> {
    use Sym::*;
    Some(match c {
        '∈' => In,
        '∉' => NotIn,
        '⊆' => Subset,
        '⊈' | '⊄' => NotSubset,
        '=' => Eq,
        '≠' => Ne,
        '∧' | '&' => And,
        '∨' => Or,
        '¬' => Not,
        '⇒' => Implies,
        '⇔' => Equiv,
        '∀' | '!' => Forall,
        '∃' | '#' => Exists,
        '·' | '⋅' | '∙' | '.' => Dot,
        '↦' => Maplet,
        '∪' => Union,
        '∩' => Inter,
        '∖' | '\\' => Diff,
        '×' => Product,
        '↔' => Relation,
        '⇸' => Partial,
        '→' => Total,
        'ℙ' => Pow,
        '∅' => Empty,
        '≔' => Assign,
        '(' => LParen,
        ')' => RParen,
        '[' => LBrack,
        ']' => RBrack,
        '{' => LBrace,
        '}' => RBrace,
        ',' => Comma,
        '⊤' => Top,
        '⊥' => Bot,
        ':' => Colon,
        _ => return None,
    })
}

/// Rodin-style ASCII spellings, longest first.
const ASCII: &[(&str, Sym)] = &[
    ("<=>", Sym::Equiv),
    ("<->", Sym::Relation),
    ("+->", Sym::Partial),
    ("-->", Sym::Total),
    ("|->", Sym::Maplet),
    ("/<:", Sym::NotSubset),
    ("/:", Sym::NotIn),
    ("/=", Sym::Ne),
    ("/\\", Sym::Inter),
    ("\\/", Sym::Union),
    ("<:", Sym::Subset),
    ("=>", Sym::Implies),
    (":=", Sym::Assign),
    ("**", Sym::Product),
];

fn word(w: &str) -> Tok {
    let kw = match w.to_ascii_uppercase().as_str() {
        "CONTEXT" => Some(Kw::Context),
        "EXTENDS" => Some(Kw::Extends),
        "SETS" => Some(Kw::Sets),
        "CONSTANTS" => Some(Kw::Constants),
        "AXIOMS" => Some(Kw::Axioms),
        "MACHINE" => Some(Kw::Machine),
        "REFINES" => Some(Kw::Refines),
        "SEES" => Some(Kw::Sees),
        "VARIABLES" => Some(Kw::Variables),
        "INVARIANTS" => Some(Kw::Invariants),
        "EVENTS" => Some(Kw::Events),
        "EVENT" => Some(Kw::Event),
        "ANY" => Some(Kw::Any),
        "WHERE" => Some(Kw::Where),
        "THEN" => Some(Kw::Then),
        "BEGIN" => Some(Kw::Begin),
        "END" => Some(Kw::End),
        _ => None,
    };
    if let Some(k) = kw {
        return Tok::Kw(k);
    }
    let sym = match w {
        "TRUE" => Some(Sym::TrueLit),
        "FALSE" => Some(Sym::FalseLit),
        "BOOL" => Some(Sym::BoolSet),
        "POW" => Some(Sym::Pow),
        "dom" => Some(Sym::Dom),
        "ran" => Some(Sym::Ran),
        "partition" => Some(Sym::Partition),
        "or" => Some(Sym::Or),
        "not" => Some(Sym::Not),
        "true" => Some(Sym::Top),
        "false" => Some(Sym::Bot),
        _ => None,
    };
    match sym {
        Some(s) => Tok::Sym(s),
        None => Tok::Ident(Name::from(w)),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut k, mut line, mut col) = (0usize, 1usize, 1usize);
    let starts_with = |k: usize, s: &str| {
        let mut j = k;
        for c in s.chars() {
            if chars.get(j) != Some(&c) {
                return false;
            }
            j += 1;
        }
        true
    };
    while k < chars.len() {
        let c = chars[k];
        let pos = Pos { line, col };
        if c == '\n' {
            k += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            k += 1;
            col += 1;
            continue;
        }
        if starts_with(k, "//") {
            while k < chars.len() && chars[k] != '\n' {
                k += 1;
            }
            continue;
        }
        if let Some((text, sym)) = ASCII.iter().find(|(t, _)| starts_with(k, t)) {
            let n = text.chars().count();
            k += n;
            col += n;
            out.push((Tok::Sym(*sym), pos));
            continue;
        }
        if c == '@' {
            let start = k + 1;
            let mut j = start;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            if j == start {
                return Err(ParseError::syntax(pos, "a label name after `@`", "`@`"));
            }
            let name: String = chars[start..j].iter().collect();
            col += j - k;
            k = j;
            out.push((Tok::Label(Name::from(name)), pos));
            continue;
        }
        if let Some(sym) = unicode_sym(c) {
            k += 1;
            col += 1;
            out.push((Tok::Sym(sym), pos));
            continue;
        }
        if is_ident_start(c) || c.is_ascii_digit() {
            let mut j = k;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let w: String = chars[k..j].iter().collect();
            col += j - k;
            k = j;
            out.push((word(&w), pos));
            continue;
        }
        return Err(ParseError::syntax(pos, "a token", &format!("`{c}`")));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn ascii_and_unicode_agree() {
        assert_eq!(
            toks("x : POW(S) +-> T & a |-> b /= c")[1..],
            toks("x : ℙ(S) ⇸ T ∧ a ↦ b ≠ c")[1..]
        );
        assert_eq!(toks("a /: b <=> c <: d"), toks("a ∉ b ⇔ c ⊆ d"));
        assert_eq!(toks("!i.i : S => i /= j"), toks("∀i·i : S ⇒ i ≠ j"));
    }

    #[test]
    fn colon_is_distinct_from_membership() {
        assert_eq!(toks(":")[0], Tok::Sym(Sym::Colon));
        assert_eq!(toks("∈")[0], Tok::Sym(Sym::In));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(toks("event Any END")[..3], [
            Tok::Kw(Kw::Event),
            Tok::Kw(Kw::Any),
            Tok::Kw(Kw::End)
        ]);
    }

    #[test]
    fn positions_and_comments() {
        let t = lex("a // note\n  @grd1: b").unwrap();
        assert_eq!(t[1].0, Tok::Label("grd1".into()));
        assert_eq!(t[1].1, Pos { line: 2, col: 3 });
    }

    #[test]
    fn unknown_character() {
        let e = lex("a $ b").unwrap_err();
        assert_eq!(e.position(), Pos { line: 1, col: 3 });
    }
}
