//! Proof obligation generation: INV (including initialisation), GRD and SIM.

use std::collections::BTreeMap;
use std::fmt;

use crate::ast::{Expr, Pred, INITIALISATION};
use crate::types::{MachineScope, Ty, TypedEvent, TypedModel};
use crate::value::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoKind {
    /// Invariant establishment by initialisation.
    Init,
    /// Invariant preservation by an event.
    Inv,
    /// Guard strengthening of a refining event.
    Grd,
    /// Action simulation of a refining event.
    Sim,
}

impl fmt::Display for PoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoKind::Init | PoKind::Inv => "INV",
            PoKind::Grd => "GRD",
            PoKind::Sim => "SIM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HypKind {
    Axiom,
    Invariant,
    Guard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub kind: HypKind,
    pub label: String,
    pub pred: Pred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofObligation {
    /// `event/label/KIND`, e.g. `trust/inv2/INV` or `trust/grd7/GRD`.
    pub name: String,
    pub machine: Name,
    pub kind: PoKind,
    pub event: Name,
    pub params: Vec<Name>,
    pub hypothesis: Vec<Hypothesis>,
    pub goal: Pred,
    /// The invariant, abstract guard or action label the PO is about.
    pub subject: String,
    /// For SIM: the abstract variable whose update must agree.
    pub variable: Option<Name>,
}

impl ProofObligation {
    pub fn guards(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypothesis.iter().filter(|h| h.kind == HypKind::Guard)
    }

    /// The whole sequent as one implication.
    pub fn as_pred(&self) -> Pred {
        let hyp = self
            .hypothesis
            .iter()
            .map(|h| h.pred.clone())
            .reduce(Pred::and)
            .unwrap_or(Pred::True);
        let body = hyp.implies(self.goal.clone());
        if self.params.is_empty() {
            body
        } else {
            Pred::Forall(self.params.clone(), Box::new(body))
        }
    }
}

impl fmt::Display for ProofObligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.name)?;
        for h in &self.hypothesis {
            writeln!(f, "  {}: {}", h.label, h.pred)?;
        }
        write!(f, "  ⊢ {}", self.goal)
    }
}

fn default_expr(ty: &Ty) -> Expr {
    match ty {
        Ty::Bool => Expr::Bool(false),
        _ => Expr::Empty,
    }
}

fn axioms(model: &TypedModel) -> Vec<Hypothesis> {
    model
        .axioms
        .iter()
        .map(|a| Hypothesis {
            kind: HypKind::Axiom,
            label: a.label.clone(),
            pred: a.pred.clone(),
        })
        .collect()
}

fn state_hyps(model: &TypedModel, ev: &TypedEvent) -> Vec<Hypothesis> {
    let mut h = axioms(model);
    h.extend(model.invariants().iter().map(|i| Hypothesis {
        kind: HypKind::Invariant,
        label: i.label.clone(),
        pred: i.pred.clone(),
    }));
    h.extend(ev.event.guards.iter().map(|g| Hypothesis {
        kind: HypKind::Guard,
        label: g.label.to_string(),
        pred: g.body.clone(),
    }));
    h
}

fn abstract_event<'a>(parent: Option<&'a MachineScope>, ev: &TypedEvent) -> Option<&'a TypedEvent> {
    let parent = parent?;
    if ev.event.is_initialisation() {
        return parent.initialisation();
    }
    ev.event.refines.as_ref().and_then(|r| parent.event(r))
}

/// All obligations of the target machine: initialisation first, then per
/// event its INV, GRD and SIM obligations in label order.
pub fn generate_pos(model: &TypedModel) -> Vec<ProofObligation> {
    let scope = model.target();
    let parent = model.parent();
    let mut out = Vec::new();

    let init = scope.initialisation();
    let mut init_map = BTreeMap::new();
    for v in &scope.variables {
        let e = init
            .and_then(|e| e.event.action_for(&v.name))
            .map(|a| a.body.expr.clone())
            .unwrap_or_else(|| default_expr(&v.ty));
        init_map.insert(v.name.clone(), e);
    }
    for inv in model.invariants() {
        out.push(ProofObligation {
            name: format!("{INITIALISATION}/{}/INV", inv.label),
            machine: scope.name.clone(),
            kind: PoKind::Init,
            event: Name::from(INITIALISATION),
            params: Vec::new(),
            hypothesis: axioms(model),
            goal: inv.pred.subst(&init_map),
            subject: inv.label.clone(),
            variable: None,
        });
    }
    if let (Some(init), Some(_)) = (init, parent) {
        out.extend(sim_pos(model, init));
    }

    for ev in scope.transition_events() {
        let map: BTreeMap<Name, Expr> = ev
            .event
            .actions
            .iter()
            .map(|a| (a.body.var.clone(), a.body.expr.clone()))
            .collect();
        let hyp = state_hyps(model, ev);
        for inv in model.invariants() {
            out.push(ProofObligation {
                name: format!("{}/{}/INV", ev.name(), inv.label),
                machine: scope.name.clone(),
                kind: PoKind::Inv,
                event: ev.event.name.clone(),
                params: ev.event.params.clone(),
                hypothesis: hyp.clone(),
                goal: inv.pred.subst(&map),
                subject: inv.label.clone(),
                variable: None,
            });
        }
        if let Some(abs) = abstract_event(parent, ev) {
            for g in &abs.event.guards {
                out.push(ProofObligation {
                    name: format!("{}/{}/GRD", ev.name(), g.label),
                    machine: scope.name.clone(),
                    kind: PoKind::Grd,
                    event: ev.event.name.clone(),
                    params: ev.event.params.clone(),
                    hypothesis: hyp.clone(),
                    goal: g.body.clone(),
                    subject: g.label.to_string(),
                    variable: None,
                });
            }
            out.extend(sim_pos(model, ev));
        }
    }
    out
}

/// `E_concrete = E_abstract` for every abstract variable either side assigns.
fn sim_pos(model: &TypedModel, ev: &TypedEvent) -> Vec<ProofObligation> {
    let scope = model.target();
    let Some(parent) = model.parent() else {
        return Vec::new();
    };
    let Some(abs) = abstract_event(Some(parent), ev) else {
        return Vec::new();
    };
    let hyp = if ev.event.is_initialisation() {
        axioms(model)
    } else {
        state_hyps(model, ev)
    };
    let mut out = Vec::new();
    for v in &parent.variables {
        let ca = ev.event.action_for(&v.name);
        let aa = abs.event.action_for(&v.name);
        let label = match (aa, ca) {
            (Some(a), _) | (None, Some(a)) => a.label.to_string(),
            (None, None) => continue,
        };
        let fallback = || {
            if ev.event.is_initialisation() {
                default_expr(&v.ty)
            } else {
                Expr::Ident(v.name.clone())
            }
        };
        let ec = ca.map(|a| a.body.expr.clone()).unwrap_or_else(fallback);
        let ea = aa.map(|a| a.body.expr.clone()).unwrap_or_else(fallback);
        out.push(ProofObligation {
            name: format!("{}/{label}/SIM", ev.name()),
            machine: scope.name.clone(),
            kind: PoKind::Sim,
            event: ev.event.name.clone(),
            params: ev.event.params.clone(),
            hypothesis: hyp.clone(),
            goal: Pred::Cmp(crate::ast::CmpOp::Eq, ec, ea),
            subject: label,
            variable: Some(v.name.clone()),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_context, parse_machine};
    use crate::types::typecheck_model;

    fn model(machs: &[&str]) -> TypedModel {
        let c = parse_context("CONTEXT c SETS S END").unwrap();
        let ms: Vec<_> = machs.iter().map(|m| parse_machine(m).unwrap()).collect();
        typecheck_model(&[c], &ms).unwrap()
    }

    const M: &str = "MACHINE m SEES c VARIABLES x y
        INVARIANTS @inv1: x ⊆ S @inv2: y ⊆ S @inv3: x ∩ y = ∅
        EVENT add ANY e WHERE @grd1: e ∈ S @grd2: e ∉ y THEN @act1: x ≔ x ∪ {e} END
        EVENT put ANY e WHERE @grd1: e ∈ S THEN @act1: y ≔ y ∪ {e} END
        END";

    #[test]
    fn one_inv_po_per_event_and_invariant() {
        let pos = generate_pos(&model(&[M]));
        assert_eq!(pos.len(), 3 * 3);
        let names: Vec<&str> = pos.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(&names[..4], ["INITIALISATION/inv1/INV", "INITIALISATION/inv2/INV", "INITIALISATION/inv3/INV", "add/inv1/INV"]);
        let p = pos.iter().find(|p| p.name == "add/inv3/INV").unwrap();
        assert_eq!(p.goal.to_string(), "(x ∪ {e}) ∩ y = ∅");
        assert_eq!(p.guards().count(), 2);
        assert_eq!(pos[0].goal.to_string(), "∅ ⊆ S");
    }

    #[test]
    fn refinement_adds_grd_and_sim() {
        let r = "MACHINE r REFINES m SEES c VARIABLES x y z
            INVARIANTS @inv4: z ⊆ S
            EVENT add REFINES add ANY e WHERE @grd1: e ∈ S @grd3: e ∉ z THEN @act1: x ≔ x ∪ {e} @act2: z ≔ z ∪ {e} END
            EVENT put REFINES put ANY e WHERE @grd1: e ∈ S THEN @act1: y ≔ y ∪ {e} END
            END";
        let pos = generate_pos(&model(&[M, r]));
        let grd: Vec<&str> = pos.iter().filter(|p| p.kind == PoKind::Grd).map(|p| p.name.as_str()).collect();
        assert_eq!(grd, ["add/grd1/GRD", "add/grd2/GRD", "put/grd1/GRD"]);
        let sim: Vec<&ProofObligation> = pos.iter().filter(|p| p.kind == PoKind::Sim).collect();
        assert_eq!(sim.len(), 2);
        assert_eq!(sim[0].goal.to_string(), "x ∪ {e} = x ∪ {e}");
        assert_eq!(sim[0].variable.as_deref(), Some("x"));
    }
}
