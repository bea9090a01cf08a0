//! The built-in contexts and machines, as constructors and as embedded text.
//!
//! The `.ebt` files are the printed form of the constructors; a test keeps
//! the two byte-identical.

use std::fmt;
use std::str::FromStr;

use crate::ast::build::*;
use crate::ast::{CmpOp, Context, Event, Expr, Machine, Pred, RelKind};
use crate::types::{typecheck_model, TypeError, TypedModel};

pub const CNTX0_SRC: &str = include_str!("../../models/cntx0.ebt");
pub const CNTX0_NP_SRC: &str = include_str!("../../models/cntx0_np.ebt");
pub const CNTX1_SRC: &str = include_str!("../../models/cntx1.ebt");
pub const CNTX2_SRC: &str = include_str!("../../models/cntx2.ebt");
pub const M0_ABS_SRC: &str = include_str!("../../models/m0_abs.ebt");
pub const M0_REL_SRC: &str = include_str!("../../models/m0_rel.ebt");
pub const M1_KNWL_SRC: &str = include_str!("../../models/m1_knwl.ebt");
pub const M2_INT_SRC: &str = include_str!("../../models/m2_int.ebt");
pub const M2_MUTANT_SRC: &str = include_str!("../../models/m2_int_mutant.ebt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrustLevel {
    Strategic = 0,
    Epistemic = 1,
    Commitment = 2,
}

impl TrustLevel {
    pub const ALL: [TrustLevel; 3] = [TrustLevel::Strategic, TrustLevel::Epistemic, TrustLevel::Commitment];

    pub fn from_index(n: u8) -> Option<TrustLevel> {
        TrustLevel::ALL.get(n as usize).copied()
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn machine_name(self) -> &'static str {
        ["M0_abs", "M1_knwl", "M2_int"][self as usize]
    }

    /// Guard labels of the `trust` event at this level.
    pub fn guards(self) -> &'static [&'static str] {
        const G: [&str; 8] = ["grd1", "grd2", "grd3", "grd4", "grd5", "grd6", "grd7", "grd8"];
        &G[..6 + self as usize]
    }
}

impl fmt::Display for TrustLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TrustLevel::Strategic => "strategic",
            TrustLevel::Epistemic => "epistemic",
            TrustLevel::Commitment => "commitment",
        };
        write!(f, "{} ({name})", self.index())
    }
}

impl FromStr for TrustLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = match s {
            "0" | "strategic" => 0,
            "1" | "epistemic" => 1,
            "2" | "commitment" => 2,
            _ => return Err(format!("unknown trust level `{s}` (expected 0, 1 or 2)")),
        };
        Ok(TrustLevel::ALL[n])
    }
}

/// Model variants beyond the literal listings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Variant {
    /// `AGENTS = trustors ∪ trustees` instead of the partition axiom.
    pub non_partitioned: bool,
    /// inv2 as a relation (`↔`), allowing several triples per trustor.
    pub relational_inv2: bool,
    /// Level-2 inv4 read as a safety property over established triples.
    pub safety_inv4: bool,
    /// Level-2 act1 records the whole trustee set; not a refinement of M1.
    pub mutant_act1: bool,
}

fn ttt() -> Expr {
    id("trustor_trustee_task")
}

fn triple() -> Expr {
    maplet(id("i"), maplet(id("j"), id("t")))
}

fn ne(a: Expr, b: Expr) -> Pred {
    cmp(CmpOp::Ne, a, b)
}

pub fn cntx0() -> Context {
    partition_context("cntx0", pred_partition())
}

pub fn cntx0_np() -> Context {
    partition_context(
        "cntx0_np",
        cmp(CmpOp::Eq, id("AGENTS"), union(id("trustors"), id("trustees"))),
    )
}

fn pred_partition() -> Pred {
    Pred::Partition(id("AGENTS"), vec![id("trustors"), id("trustees")])
}

fn partition_context(name: &str, axm3: Pred) -> Context {
    Context {
        name: name.into(),
        extends: None,
        sets: names(&["AGENTS", "TASKS"]),
        constants: names(&["trustors", "trustees"]),
        axioms: vec![
            clause("axm1", cmp(CmpOp::Subset, id("trustors"), id("AGENTS"))),
            clause("axm2", cmp(CmpOp::Subset, id("trustees"), id("AGENTS"))),
            clause("axm3", axm3),
        ],
    }
}

fn empty_extension(name: &str, parent: &str) -> Context {
    Context {
        name: name.into(),
        extends: Some(parent.into()),
        sets: Vec::new(),
        constants: Vec::new(),
        axioms: Vec::new(),
    }
}

pub fn cntx1() -> Context {
    empty_extension("cntx1", "cntx0")
}

pub fn cntx2() -> Context {
    empty_extension("cntx2", "cntx1")
}

fn guard(label: &str) -> crate::ast::Labeled<Pred> {
    let p = match label {
        "grd1" => mem(id("i"), id("trustors")),
        "grd2" => mem(id("j"), pow(id("trustees"))),
        "grd3" => mem(id("t"), id("TASKS")),
        "grd4" => mem(id("t"), image(id("agent_task"), set(vec![id("j")]))),
        "grd5" => cmp(CmpOp::NotIn, id("i"), id("j")),
        "grd6" => ne(id("j"), Expr::Empty),
        "grd7" => cmp(CmpOp::Subset, id("j"), image(id("knowledge"), set(vec![id("i")]))),
        "grd8" => cmp(
            CmpOp::Eq,
            image(id("commitments"), set(vec![triple()])),
            set(vec![Expr::Bool(true)]),
        ),
        other => unreachable!("no guard {other}"),
    };
    clause(label, p)
}

fn trust_event(level: TrustLevel, added: Expr) -> Event {
    Event {
        name: "trust".into(),
        refines: (level != TrustLevel::Strategic).then(|| "trust".into()),
        params: names(&["i", "j", "t"]),
        guards: level.guards().iter().map(|g| guard(g)).collect(),
        actions: vec![assign(
            "act1",
            "trustor_trustee_task",
            union(ttt(), set(vec![added])),
        )],
    }
}

fn m0(name: &str, inv2: RelKind) -> Machine {
    let inv3 = forall(
        &["i", "j"],
        and_all(vec![
            mem(id("i"), id("trustors")),
            mem(id("j"), pow(id("trustees"))),
            mem(id("i"), dom(ttt())),
        ])
        .implies(cmp(CmpOp::NotIn, id("i"), id("j"))),
    );
    let inv4 = forall(
        &["i", "t"],
        mem(id("i"), id("trustors"))
            .and(mem(id("t"), id("TASKS")))
            .implies(exists(
                &["j"],
                mem(id("j"), pow(id("trustees"))).and(ne(id("j"), Expr::Empty)),
            )),
    );
    Machine {
        name: name.into(),
        refines: None,
        sees: Some("cntx0".into()),
        variables: names(&["agent_task", "trustor_trustee_task"]),
        invariants: vec![
            clause(
                "inv1",
                mem(id("agent_task"), rel(RelKind::Partial, pow(id("trustees")), id("TASKS"))),
            ),
            clause("inv2", mem(ttt(), rel(inv2, id("trustors"), id("agent_task")))),
            clause("inv3", inv3),
            clause("inv4", inv4),
        ],
        events: vec![trust_event(TrustLevel::Strategic, triple())],
    }
}

pub fn m0_abs() -> Machine {
    m0("M0_abs", RelKind::Partial)
}

pub fn m0_rel() -> Machine {
    m0("M0_rel", RelKind::Relation)
}

pub fn m1_knwl() -> Machine {
    Machine {
        name: "M1_knwl".into(),
        refines: Some("M0_abs".into()),
        sees: Some("cntx1".into()),
        variables: names(&["agent_task", "trustor_trustee_task", "knowledge"]),
        invariants: vec![clause(
            "inv1",
            mem(id("knowledge"), rel(RelKind::Relation, id("trustors"), id("trustees"))),
        )],
        events: vec![trust_event(TrustLevel::Epistemic, triple())],
    }
}

fn m2(name: &str, added: Expr) -> Machine {
    let inv4 = forall(
        &["i", "t"],
        mem(id("i"), id("trustors"))
            .and(mem(id("t"), id("TASKS")))
            .implies(exists(
                &["j"],
                and_all(vec![
                    mem(id("j"), pow(id("trustees"))),
                    ne(id("j"), Expr::Empty),
                    mem(maplet(id("j"), id("t")), id("agent_task")),
                    cmp(CmpOp::Subset, id("j"), image(id("knowledge"), set(vec![id("i")]))),
                    cmp(
                        CmpOp::Eq,
                        image(id("commitments"), set(vec![triple()])),
                        set(vec![Expr::Bool(true)]),
                    ),
                    mem(triple(), ttt()),
                ]),
            )),
    );
    Machine {
        name: name.into(),
        refines: Some("M1_knwl".into()),
        sees: Some("cntx2".into()),
        variables: names(&["agent_task", "trustor_trustee_task", "knowledge", "commitments"]),
        invariants: vec![
            clause(
                "inv1",
                mem(
                    id("commitments"),
                    rel(RelKind::Total, product(id("trustors"), id("agent_task")), Expr::BoolSet),
                ),
            ),
            clause("inv4", inv4),
        ],
        events: vec![trust_event(TrustLevel::Commitment, added)],
    }
}

/// Every established triple is backed by knowledge and commitment.
pub fn safety_inv4() -> Pred {
    forall(
        &["i", "j", "t"],
        and_all(vec![
            mem(id("i"), id("trustors")),
            mem(id("j"), pow(id("trustees"))),
            mem(id("t"), id("TASKS")),
            mem(triple(), ttt()),
        ])
        .implies(
            cmp(CmpOp::Subset, id("j"), image(id("knowledge"), set(vec![id("i")]))).and(cmp(
                CmpOp::Eq,
                image(id("commitments"), set(vec![triple()])),
                set(vec![Expr::Bool(true)]),
            )),
        ),
    )
}

pub fn m2_int() -> Machine {
    m2("M2_int", triple())
}

/// M2 with act1 recording the whole trustee set instead of `j`.
pub fn m2_int_mutant() -> Machine {
    m2(
        "M2_int_mutant",
        maplet(id("i"), maplet(id("trustees"), id("t"))),
    )
}

/// Context chain and refinement chain for a level, root first.
pub fn model_chain(level: TrustLevel, variant: Variant) -> (Vec<Context>, Vec<Machine>) {
    let mut ctxs = vec![cntx0(), cntx1(), cntx2()];
    let mut machs = vec![m0_abs(), m1_knwl(), m2_int()];
    if variant.non_partitioned {
        ctxs[0] = cntx0_np();
        ctxs[1].extends = Some("cntx0_np".into());
        machs[0].sees = Some("cntx0_np".into());
    }
    if variant.relational_inv2 {
        let sees = machs[0].sees.clone();
        machs[0] = m0_rel();
        machs[0].sees = sees;
        machs[1].refines = Some("M0_rel".into());
    }
    if variant.mutant_act1 {
        machs[2] = m2_int_mutant();
    }
    if variant.safety_inv4 {
        if let Some(inv4) = machs[2].invariants.iter_mut().find(|i| &*i.label == "inv4") {
            inv4.body = safety_inv4();
        }
    }
    let n = level as usize + 1;
    ctxs.truncate(n);
    machs.truncate(n);
    (ctxs, machs)
}

pub fn build_model(level: TrustLevel) -> TypedModel {
    build_variant(level, Variant::default()).expect("built-in models typecheck")
}

pub fn build_variant(level: TrustLevel, variant: Variant) -> Result<TypedModel, TypeError> {
    let (c, m) = model_chain(level, variant);
    typecheck_model(&c, &m)
}

/// The mutant at level 2, refining the regular M1.
pub fn build_mutant() -> TypedModel {
    let v = Variant {
        mutant_act1: true,
        ..Variant::default()
    };
    build_variant(TrustLevel::Commitment, v).expect("mutant typechecks")
}

/// Embedded sources by file stem.
pub fn sources() -> [(&'static str, &'static str); 9] {
    [
        ("cntx0", CNTX0_SRC),
        ("cntx0_np", CNTX0_NP_SRC),
        ("cntx1", CNTX1_SRC),
        ("cntx2", CNTX2_SRC),
        ("m0_abs", M0_ABS_SRC),
        ("m0_rel", M0_REL_SRC),
        ("m1_knwl", M1_KNWL_SRC),
        ("m2_int", M2_INT_SRC),
        ("m2_int_mutant", M2_MUTANT_SRC),
    ]
}
