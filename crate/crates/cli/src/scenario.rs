//! Scenario scripts: a universe declaration followed by trust commands.
//!
//! ```text
//! trustors i
//! trustees adv1
//! tasks deliver5kg
//! level 2
//!
//! allocate {adv1} ↦ deliver5kg
//! learn i adv1
//! commit i {adv1} deliver5kg TRUE
//! trust i {adv1} deliver5kg
//! ```
//!
//! Commands are separated by newlines or `;`, `#` starts a comment. A
//! group is `{a, b}`, `{}` or a single atom.

use std::fmt;

use thiserror::Error;
use trustb_core::trust::{build_model, Group, TrustDecision, TrustError, TrustLevel, TrustState, Universe};
use trustb_core::{Name, Runtime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: undeclared atom `{name}`")]
    UndeclaredAtom { name: String, line: usize, col: usize },
}

impl ScenarioError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ScenarioError::Syntax { line, col, .. } | ScenarioError::UndeclaredAtom { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Allocate { group: Group, task: Name },
    Learn { trustor: Name, trustee: Name },
    Commit { trustor: Name, group: Group, task: Name, value: bool },
    Trust { trustor: Name, group: Group, task: Name },
    Query { trustor: Name, group: Group, task: Name },
    /// Empty means every invariant of the level machine.
    AssertInvariant(Vec<String>),
}

fn fmt_group(g: &Group) -> String {
    let items: Vec<&str> = g.iter().map(|a| &**a).collect();
    format!("{{{}}}", items.join(", "))
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Allocate { group, task } => write!(f, "allocate {} ↦ {task}", fmt_group(group)),
            Command::Learn { trustor, trustee } => write!(f, "learn {trustor} {trustee}"),
            Command::Commit { trustor, group, task, value } => write!(
                f,
                "commit {trustor} {} {task} {}",
                fmt_group(group),
                if *value { "TRUE" } else { "FALSE" }
            ),
            Command::Trust { trustor, group, task } => write!(f, "trust {trustor} {} {task}", fmt_group(group)),
            Command::Query { trustor, group, task } => write!(f, "query {trustor} {} {task}", fmt_group(group)),
            Command::AssertInvariant(ls) if ls.is_empty() => write!(f, "assert-invariant"),
            Command::AssertInvariant(ls) => write!(f, "assert-invariant {}", ls.join(" ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioScript {
    pub universe: Universe,
    pub level: TrustLevel,
    /// Commands with their source line.
    pub commands: Vec<(usize, Command)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Comma,
    Maplet,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

fn tokenize(line: &str, lno: usize) -> Result<Vec<Spanned>, ScenarioError> {
    let mut out = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let col = k + 1;
        match c {
            _ if c.is_whitespace() => k += 1,
            '{' | '}' | ',' | '↦' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    _ => Tok::Maplet,
                };
                out.push(Spanned { tok, col });
                k += 1;
            }
            '|' if chars[k..].starts_with(&['|', '-', '>']) => {
                out.push(Spanned { tok: Tok::Maplet, col });
                k += 3;
            }
            _ if c.is_alphanumeric() || c == '_' || c == '-' => {
                let start = k;
                while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_' || chars[k] == '-') {
                    k += 1;
                }
                out.push(Spanned {
                    tok: Tok::Word(chars[start..k].iter().collect()),
                    col,
                });
            }
            _ => {
                return Err(ScenarioError::Syntax {
                    line: lno,
                    col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    k: usize,
    line: usize,
    end_col: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Syntax {
            line: self.line,
            col: self.toks.get(self.k).map_or(self.end_col, |t| t.col),
            message: message.into(),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize), ScenarioError> {
        match self.toks.get(self.k) {
            Some(Spanned { tok: Tok::Word(w), col }) => {
                self.k += 1;
                Ok((w.clone(), *col))
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.toks.get(self.k).map(|s| &s.tok) == Some(t) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    /// Atoms of a group with their columns.
    fn group(&mut self) -> Result<Vec<(String, usize)>, ScenarioError> {
        if !self.eat(&Tok::LBrace) {
            return Ok(vec![self.word("a group `{…}` or an atom")?]);
        }
        let mut out = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            out.push(self.word("an atom")?);
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.err("expected `,` or `}`"));
            }
        }
    }

    fn done(&self) -> Result<(), ScenarioError> {
        if self.k < self.toks.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

fn is_atom(w: &str) -> bool {
    w.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') && !w.contains('-')
}

/// Parses and validates a script; undeclared atoms are rejected here.
pub fn parse_scenario(src: &str) -> Result<ScenarioScript, ScenarioError> {
    let mut sets: [Option<Vec<String>>; 3] = [None, None, None];
    let mut level = TrustLevel::Commitment;
    let mut raw: Vec<(usize, String, Vec<Spanned>)> = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let lno = n + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut offset = 0;
        for part in line.split(';') {
            let toks: Vec<Spanned> = tokenize(part, lno)
                .map_err(|e| match e {
                    ScenarioError::Syntax { line, col, message } => ScenarioError::Syntax {
                        line,
                        col: col + offset,
                        message,
                    },
                    e => e,
                })?
                .into_iter()
                .map(|mut t| {
                    t.col += offset;
                    t
                })
                .collect();
            let end_col = offset + part.chars().count() + 1;
            offset += part.chars().count() + 1;
            let Some(Spanned { tok: Tok::Word(head), col }) = toks.first().cloned() else {
                if let Some(t) = toks.first() {
                    return Err(ScenarioError::Syntax {
                        line: lno,
                        col: t.col,
                        message: "expected a declaration or command".into(),
                    });
                }
                continue;
            };
            let mut cur = Cursor {
                toks: &toks,
                k: 1,
                line: lno,
                end_col,
            };
            let slot = match head.as_str() {
                "trustors" => Some(0),
                "trustees" => Some(1),
                "tasks" => Some(2),
                _ => None,
            };
            if let Some(slot) = slot {
                if !raw.is_empty() {
                    return Err(ScenarioError::Syntax {
                        line: lno,
                        col,
                        message: "declarations must precede commands".into(),
                    });
                }
                if sets[slot].is_some() {
                    return Err(ScenarioError::Syntax {
                        line: lno,
                        col,
                        message: format!("`{head}` declared twice"),
                    });
                }
                let mut atoms = Vec::new();
                while cur.k < toks.len() {
                    cur.eat(&Tok::Comma);
                    let (w, c) = cur.word("an atom")?;
                    if !is_atom(&w) {
                        return Err(ScenarioError::Syntax {
                            line: lno,
                            col: c,
                            message: format!("`{w}` is not an atom name"),
                        });
                    }
                    atoms.push(w);
                }
                sets[slot] = Some(atoms);
            } else if head == "level" {
                if !raw.is_empty() {
                    return Err(ScenarioError::Syntax {
                        line: lno,
                        col,
                        message: "declarations must precede commands".into(),
                    });
                }
                let (w, c) = cur.word("a level (0, 1 or 2)")?;
                level = w.parse().map_err(|m: String| ScenarioError::Syntax {
                    line: lno,
                    col: c,
                    message: m,
                })?;
                cur.done()?;
            } else {
                raw.push((lno, head, toks));
            }
        }
    }
    let names = |k: usize| sets[k].clone().unwrap_or_default();
    let (trs, tes, tks) = (names(0), names(1), names(2));
    fn as_refs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    let universe = Universe::new(&as_refs(&trs), &as_refs(&tes), &as_refs(&tks));

    let mut commands = Vec::new();
    for (lno, head, toks) in &raw {
        let mut cur = Cursor {
            toks,
            k: 1,
            line: *lno,
            end_col: toks.last().map_or(1, |t| t.col + 1),
        };
        let atom = |(w, col): (String, usize)| -> Result<Name, ScenarioError> {
            if universe.declares(&w) {
                Ok(Name::from(w))
            } else {
                Err(ScenarioError::UndeclaredAtom { name: w, line: *lno, col })
            }
        };
        let group = |ws: Vec<(String, usize)>| -> Result<Group, ScenarioError> { ws.into_iter().map(atom).collect() };
        let cmd = match head.as_str() {
            "allocate" => {
                let group = group(cur.group()?)?;
                cur.eat(&Tok::Maplet);
                let task = atom(cur.word("a task")?)?;
                Command::Allocate { group, task }
            }
            "learn" => {
                let trustor = atom(cur.word("a trustor")?)?;
                let trustee = atom(cur.word("a trustee")?)?;
                Command::Learn { trustor, trustee }
            }
            "commit" => {
                let trustor = atom(cur.word("a trustor")?)?;
                let group = group(cur.group()?)?;
                let task = atom(cur.word("a task")?)?;
                let value = match cur.word("TRUE or FALSE")?.0.as_str() {
                    "TRUE" => true,
                    "FALSE" => false,
                    _ => {
                        cur.k -= 1;
                        return Err(cur.err("expected TRUE or FALSE"));
                    }
                };
                Command::Commit { trustor, group, task, value }
            }
            "trust" | "query" => {
                let trustor = atom(cur.word("a trustor")?)?;
                let group = group(cur.group()?)?;
                let task = atom(cur.word("a task")?)?;
                if head == "trust" {
                    Command::Trust { trustor, group, task }
                } else {
                    Command::Query { trustor, group, task }
                }
            }
            "assert-invariant" => {
                let mut labels = Vec::new();
                while cur.k < toks.len() {
                    labels.push(cur.word("an invariant label")?.0);
                }
                Command::AssertInvariant(labels)
            }
            _ => {
                cur.k = 0;
                return Err(cur.err(format!("unknown command `{head}`")));
            }
        };
        cur.done()?;
        commands.push((*lno, cmd));
    }
    Ok(ScenarioScript {
        universe,
        level,
        commands,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Trust(TrustDecision),
    Query(TrustDecision),
    /// Checked labels with their truth values.
    Assertion(Vec<(String, bool)>),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub command: Command,
    pub outcome: StepOutcome,
    /// State after the command.
    pub state: TrustState,
    /// Invariants of the level machine violated after the command.
    pub violations: Vec<String>,
}

impl Step {
    pub fn failed(&self) -> bool {
        match &self.outcome {
            StepOutcome::Assertion(r) => r.iter().any(|(_, b)| !b),
            StepOutcome::Error(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub initial: TrustState,
    pub steps: Vec<Step>,
}

impl ScenarioRun {
    pub fn final_state(&self) -> &TrustState {
        self.steps.last().map_or(&self.initial, |s| &s.state)
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.failed()).count()
    }
}

fn apply(s: &TrustState, level: TrustLevel, cmd: &Command) -> Result<(TrustState, StepOutcome), TrustError> {
    Ok(match cmd {
        Command::Allocate { group, task } => (s.allocate_task(group, task)?, StepOutcome::Applied),
        Command::Learn { trustor, trustee } => (s.learn(trustor, trustee)?, StepOutcome::Applied),
        Command::Commit {
            trustor,
            group,
            task,
            value,
        } => (s.commit(trustor, group, task, *value)?, StepOutcome::Applied),
        Command::Trust { trustor, group, task } => match s.establish_trust(trustor, group, task, level) {
            Ok(next) => {
                let d = trustb_core::trust::trust_query(s, trustor, group, task, level)?;
                (next, StepOutcome::Trust(d))
            }
            Err(TrustError::TrustDenied(d)) => (s.clone(), StepOutcome::Trust(d)),
            Err(e) => return Err(e),
        },
        Command::Query { trustor, group, task } => (
            s.clone(),
            StepOutcome::Query(trustb_core::trust::trust_query(s, trustor, group, task, level)?),
        ),
        Command::AssertInvariant(_) => (s.clone(), StepOutcome::Applied),
    })
}

fn invariants(rt: &Runtime<'_>, s: &TrustState, level: TrustLevel) -> Result<Vec<(String, bool)>, String> {
    rt.check_invariants(&s.embed(level)).map_err(|e| e.to_string())
}

impl ScenarioScript {
    /// Runs every command; stops after the first command that errors.
    pub fn run(&self) -> ScenarioRun {
        let model = build_model(self.level);
        let rt = Runtime::new(&model);
        let initial = TrustState::new(self.universe.clone());
        let mut steps: Vec<Step> = Vec::new();
        let mut s = initial.clone();
        for (line, cmd) in &self.commands {
            let (next, mut outcome) = match apply(&s, self.level, cmd) {
                Ok(r) => r,
                Err(e) => (s.clone(), StepOutcome::Error(e.to_string())),
            };
            let mut violations = Vec::new();
            match invariants(&rt, &next, self.level) {
                Ok(invs) => {
                    violations = invs.iter().filter(|(_, b)| !b).map(|(l, _)| l.clone()).collect();
                    if let Command::AssertInvariant(labels) = cmd {
                        outcome = if labels.is_empty() {
                            StepOutcome::Assertion(invs)
                        } else {
                            match labels.iter().find(|l| !invs.iter().any(|(x, _)| x == *l)) {
                                Some(l) => StepOutcome::Error(format!("no invariant labelled `{l}`")),
                                None => StepOutcome::Assertion(
                                    invs.into_iter().filter(|(x, _)| labels.contains(x)).collect(),
                                ),
                            }
                        };
                    }
                }
                Err(e) => outcome = StepOutcome::Error(e),
            }
            let stop = matches!(outcome, StepOutcome::Error(_));
            steps.push(Step {
                line: *line,
                command: cmd.clone(),
                outcome,
                state: next.clone(),
                violations,
            });
            s = next;
            if stop {
                break;
            }
        }
        ScenarioRun { initial, steps }
    }
}
