//! Independent oracle: every typed trust state checked against the runtime.

use std::collections::{BTreeSet, HashMap};

use trustb_core::enumerate::instantiations;
use trustb_core::runtime::{Binding, GuardReport, State};
use trustb_core::trust::{build_model, trust_query, Group, TrustLevel, TrustState, Universe};
use trustb_core::value::{function_space, FunctionKind};
use trustb_core::{BoundSpec, Name, Runtime, SetV, Value};

fn atoms(v: &Value) -> Vec<Name> {
    v.as_set().unwrap().iter().map(|x| x.as_atom().unwrap().clone()).collect()
}

/// Every trust state whose variables satisfy the level-2 typing invariants,
/// with no established triples (no guard reads them).
pub fn typed_states(u: &Universe) -> Vec<TrustState> {
    let trustees: SetV = u.trustees.iter().map(|a| Value::Atom(a.clone())).collect();
    let trustors: SetV = u.trustors.iter().map(|a| Value::Atom(a.clone())).collect();
    let tasks: SetV = u.tasks.iter().map(|a| Value::Atom(a.clone())).collect();
    let groups = SetV::from_values(trustees.subsets(12).unwrap().into_iter().map(Value::Set));
    let mut out = Vec::new();
    let base = TrustState::new(u.clone());
    for at in function_space(&groups, &tasks, FunctionKind::PartialFn, 12).unwrap() {
        let mut s0 = base.clone();
        for p in at.iter() {
            let (g, t) = p.as_pair().unwrap();
            let g: Group = atoms(g).into_iter().collect();
            s0 = s0.allocate_task(&g, t.as_atom().unwrap()).unwrap();
        }
        let pairs = trustors.product(&trustees);
        for kn in pairs.subsets(12).unwrap() {
            let mut s1 = s0.clone();
            for p in kn.iter() {
                let (i, j) = p.as_pair().unwrap();
                s1 = s1.learn(i.as_atom().unwrap(), j.as_atom().unwrap()).unwrap();
            }
            let dom = trustors.product(&at);
            let bools = SetV::from_values([Value::Bool(false), Value::Bool(true)]);
            for cm in function_space(&dom, &bools, FunctionKind::TotalFn, 12).unwrap() {
                let mut s2 = s1.clone();
                for p in cm.iter() {
                    let (k, b) = p.as_pair().unwrap();
                    let (i, rest) = k.as_pair().unwrap();
                    let (g, t) = rest.as_pair().unwrap();
                    let g: Group = atoms(g).into_iter().collect();
                    s2 = s2
                        .commit(i.as_atom().unwrap(), &g, t.as_atom().unwrap(), b.as_bool().unwrap())
                        .unwrap();
                }
                out.push(s2);
            }
        }
    }
    out
}

/// Compares every query with the runtime; returns (cases, mismatches).
pub fn compare(bounds: (usize, usize, usize)) -> (u64, u64) {
    let models: Vec<_> = TrustLevel::ALL.iter().map(|l| build_model(*l)).collect();
    let runtimes: Vec<_> = models.iter().map(Runtime::new).collect();
    let insts = instantiations(&models[2], &BoundSpec::trust(bounds.0, bounds.1, bounds.2)).unwrap();
    let (mut cases, mut mismatches) = (0u64, 0u64);
    for inst in insts {
        let u = Universe::from_instantiation(&inst).unwrap();
        let agents: Vec<Name> = u.agents().into_iter().collect();
        let agent_set: BTreeSet<Name> = agents.iter().cloned().collect();
        let agent_vals: SetV = agents.iter().map(|a| Value::Atom(a.clone())).collect();
        let groups: Vec<Group> = agent_vals
            .subsets(12)
            .unwrap()
            .iter()
            .map(|s| atoms(&Value::Set(s.clone())).into_iter().collect())
            .collect();
        let mut queries = Vec::new();
        let mut bindings = Vec::new();
        for i in &agents {
            for j in &groups {
                assert!(j.is_subset(&agent_set));
                for t in &u.tasks {
                    queries.push((i, j, t));
                    bindings.push(Binding(vec![
                        (Name::from("i"), Value::Atom(i.clone())),
                        (Name::from("j"), Value::Set(j.iter().map(|a| Value::Atom(a.clone())).collect())),
                        (Name::from("t"), Value::Atom(t.clone())),
                    ]));
                }
            }
        }
        // The runtime only sees the embedded state, so its tables are
        // memoised per embedding; trust_query runs on every case.
        let mut tables: [HashMap<State, Vec<GuardReport>>; 3] = Default::default();
        for s in typed_states(&u) {
            for (level, rt) in TrustLevel::ALL.iter().zip(&runtimes) {
                let reports = tables[level.index() as usize]
                    .entry(s.embed(*level))
                    .or_insert_with_key(|st| rt.guard_table(st, "trust", &bindings).unwrap());
                for (&(i, j, t), r) in queries.iter().zip(reports.iter()) {
                    let d = trust_query(&s, i, j, t, *level).unwrap();
                    cases += 1;
                    let same = d.granted == r.enabled()
                        && d.guard_results.len() == r.results.len()
                        && d.guard_results.iter().zip(&r.results).all(|((l1, b1), (l2, b2))| *l1 == &**l2 && b1 == b2);
                    if !same {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    (cases, mismatches)
}
