//! Direct evaluation of the trust guards, independent of the machine runtime.

use std::fmt;

use super::models::TrustLevel;
use super::state::{Group, Triple, TrustError, TrustState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustDecision {
    pub granted: bool,
    pub level: TrustLevel,
    /// Every guard of the level, in label order.
    pub guard_results: Vec<(&'static str, bool)>,
    pub failing: Vec<&'static str>,
}

impl fmt::Display for TrustDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.granted {
            write!(f, "granted")?;
        } else {
            write!(f, "denied: {}", self.failing.join(", "))?;
        }
        for (l, b) in &self.guard_results {
            write!(f, "\n  {l}: {}", if *b { "true" } else { "false" })?;
        }
        Ok(())
    }
}

/// Evaluates the `trust` guards of the machine at `level` for `(i, j, t)`.
pub fn trust_query(
    s: &TrustState,
    i: &str,
    j: &Group,
    t: &str,
    level: TrustLevel,
) -> Result<TrustDecision, TrustError> {
    let u = &s.universe;
    u.check_agent(i)?;
    u.check_group(j)?;
    u.check_task(t)?;
    let known = |x: &str| s.knowledge.iter().any(|(a, b)| &**a == i && &**b == x);
    let mut guard_results = Vec::with_capacity(8);
    for &label in level.guards() {
        let ok = match label {
            "grd1" => u.trustors.contains(i),
            "grd2" => j.iter().all(|a| u.trustees.contains(a)),
            "grd3" => u.tasks.contains(t),
            "grd4" => s.agent_task.get(j).is_some_and(|x| &**x == t),
            "grd5" => !j.contains(i),
            "grd6" => !j.is_empty(),
            "grd7" => j.iter().all(|a| known(a)),
            "grd8" => s.committed(&Triple {
                trustor: i.into(),
                group: j.clone(),
                task: t.into(),
            }),
            _ => unreachable!(),
        };
        guard_results.push((label, ok));
    }
    let failing: Vec<&'static str> = guard_results.iter().filter(|(_, b)| !b).map(|(l, _)| *l).collect();
    Ok(TrustDecision {
        granted: failing.is_empty(),
        level,
        guard_results,
        failing,
    })
}
