//! Discharge results on the shipped trust models.

use trustb_core::discharge::{check_refinement, replay_counterexample, GuardStatus};
use trustb_core::trust::{build_model, build_mutant, build_variant, TrustLevel, Variant};
use trustb_core::{generate_pos, typecheck_model, BoundSpec, DischargeReport, Discharger, StateSource, TypedModel, Verdict};

fn run(m: &TypedModel, b: BoundSpec) -> Vec<DischargeReport> {
    Discharger::new(m, b).discharge_all(&generate_pos(m)).unwrap()
}

fn verdict<'a>(rs: &'a [DischargeReport], name: &str) -> &'a DischargeReport {
    rs.iter().find(|r| r.po.name == name).unwrap_or_else(|| panic!("no PO {name}"))
}

fn dropped(level: TrustLevel, variant: Variant, label: &str) -> TypedModel {
    let m = build_variant(level, variant).unwrap();
    let mut ms = m.machines.clone();
    assert!(ms.last_mut().unwrap().drop_label(label));
    typecheck_model(&m.contexts, &ms).unwrap()
}

#[test]
fn strategic_model() {
    let m = build_model(TrustLevel::Strategic);
    let rs = run(&m, BoundSpec::trust(2, 2, 2));
    for name in ["trust/inv1/INV", "trust/inv3/INV", "trust/inv4/INV", "INITIALISATION/inv2/INV"] {
        assert_eq!(verdict(&rs, name).verdict, Verdict::Discharged, "{name}");
    }
    // the abstract inv4 reads no variable
    assert!(verdict(&rs, "trust/inv4/INV").note.is_some());
    assert!(verdict(&rs, "trust/inv3/INV").note.is_none());
    let inv2 = verdict(&rs, "trust/inv2/INV");
    assert_eq!(inv2.verdict, Verdict::Failed);
    let cx = inv2.counterexample.as_ref().unwrap();
    // the trustor already holds a triple
    let i = cx.binding.as_ref().unwrap().get("i").unwrap().clone();
    let ttt = cx.state.var("trustor_trustee_task").unwrap().as_set().unwrap();
    assert!(ttt.iter().any(|p| p.as_pair().unwrap().0 == &i));
    assert!(replay_counterexample(&m, &inv2.po, cx).unwrap());
}

#[test]
fn inv2_also_fails_on_reachable_states() {
    let m = build_model(TrustLevel::Strategic);
    let rs = run(&m, BoundSpec::trust(1, 2, 1).with_source(StateSource::ReachableOnly));
    assert_eq!(verdict(&rs, "trust/inv2/INV").verdict, Verdict::Failed);
    assert_eq!(verdict(&rs, "trust/inv3/INV").verdict, Verdict::Discharged);
}

#[test]
fn relational_variant_is_clean() {
    let v = Variant {
        relational_inv2: true,
        ..Variant::default()
    };
    let m = build_variant(TrustLevel::Strategic, v).unwrap();
    assert!(run(&m, BoundSpec::trust(2, 2, 2)).iter().all(|r| r.verdict == Verdict::Discharged));
}

#[test]
fn refinements_are_valid_and_the_mutant_is_not() {
    let b = BoundSpec::trust(1, 2, 2);
    let [m0, m1, m2] = TrustLevel::ALL.map(build_model);
    for (a, c) in [(&m0, &m1), (&m1, &m2)] {
        let rs = check_refinement(a, c, &b).unwrap();
        assert!(!rs.is_empty());
        assert!(rs.iter().all(|r| r.verdict == Verdict::Discharged), "{}", c.target().name);
    }
    let rs = check_refinement(&m1, &build_mutant(), &b).unwrap();
    let sim = verdict(&rs, "trust/act1/SIM");
    assert_eq!(sim.verdict, Verdict::Failed);
    assert!(replay_counterexample(&build_mutant(), &sim.po, sim.counterexample.as_ref().unwrap()).unwrap());
    assert!(check_refinement(&m0, &m2, &b).is_err());
}

#[test]
fn grd5_vacuity_depends_on_the_partition() {
    let np = Variant {
        non_partitioned: true,
        ..Variant::default()
    };
    for b in [(1, 1, 1), (2, 2, 1)] {
        let bounds = BoundSpec::trust(b.0, b.1, b.2);
        let status = |m: &TypedModel| {
            let vs = Discharger::new(m, bounds.clone()).detect_vacuous_guards().unwrap();
            vs.into_iter().find(|g| &*g.label == "grd5").unwrap().status
        };
        assert_eq!(status(&build_model(TrustLevel::Strategic)), GuardStatus::Vacuous);
        assert_eq!(status(&build_variant(TrustLevel::Strategic, np).unwrap()), GuardStatus::Falsifiable);
    }
    let rs = run(&dropped(TrustLevel::Strategic, np, "grd5"), BoundSpec::trust(1, 1, 1));
    assert_eq!(verdict(&rs, "trust/inv3/INV").verdict, Verdict::Failed);
}

#[test]
fn literal_inv4_survives_guard_deletion() {
    // the refined inv4 only asks for some trusted triple to exist, so
    // adding triples cannot break it
    for g in ["grd7", "grd8"] {
        let rs = run(&dropped(TrustLevel::Commitment, Variant::default(), g), BoundSpec::trust(1, 2, 1));
        assert_eq!(verdict(&rs, "trust/inv4/INV").verdict, Verdict::Discharged, "{g}");
    }
}

#[test]
fn safety_inv4_needs_both_guards() {
    let v = Variant {
        safety_inv4: true,
        ..Variant::default()
    };
    let m = build_variant(TrustLevel::Commitment, v).unwrap();
    let rs = run(&m, BoundSpec::trust(1, 2, 1));
    assert_eq!(verdict(&rs, "trust/inv4/INV").verdict, Verdict::Discharged);
    for g in ["grd7", "grd8"] {
        let m = dropped(TrustLevel::Commitment, v, g);
        let rs = run(&m, BoundSpec::trust(1, 2, 1));
        let r = verdict(&rs, "trust/inv4/INV");
        assert_eq!(r.verdict, Verdict::Failed, "{g}");
        assert!(replay_counterexample(&m, &r.po, r.counterexample.as_ref().unwrap()).unwrap());
    }
}

#[test]
fn reports_are_deterministic() {
    let m = build_model(TrustLevel::Epistemic);
    assert_eq!(run(&m, BoundSpec::trust(1, 2, 2)), run(&m, BoundSpec::trust(1, 2, 2)));
}
