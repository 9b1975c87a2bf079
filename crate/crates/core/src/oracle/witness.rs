use serde::Serialize;
use thiserror::Error;

use crate::semantics::{ActionKind, Computation};
use crate::traces::{delaying_threads, delays_per_action, node_of_actions, HbThrough};

/// Positions of the decomposition τ1·isu_st·τ2·a·τ3·st·τ4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub attacker: usize,
    pub isu_st: usize,
    pub a: usize,
    pub st: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessVerdict {
    pub decomposition: Decomposition,
    pub w1: bool,
    pub w2: bool,
    pub w3: bool,
    pub w4: bool,
    pub w5: bool,
}

impl WitnessVerdict {
    pub fn all(&self) -> bool {
        self.w1 && self.w2 && self.w3 && self.w4 && self.w5
    }

    fn score(&self) -> usize {
        [self.w1, self.w2, self.w3, self.w4, self.w5].iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no delayed store to split the computation at")]
pub struct NoDecomposition;

fn check(c: &Computation, hb: &HbThrough, delays: &[u64], d: Decomposition) -> WitnessVerdict {
    let t = d.attacker;
    let delayed = |k: usize| c.actions[k].is_retirement() && delays[k] > 0;
    let threads = delaying_threads(c);
    let w1 = threads.len() == 1 && threads.contains(&t);
    let w2 = c.actions[d.a + 1..d.st].iter().all(|x| x.thread != t);
    // A store's delay shows at its memory effect; τ4 is allowed to hold them.
    let w3 = (0..d.st).all(|k| !delayed(k));
    let w4 = (d.a + 1..=d.st)
        .filter(|&k| !c.actions[k].is_issue())
        .all(|k| hb.query(d.a, k));
    let w5 = (d.st + 1..c.len()).all(|k| delayed(k) && c.actions[k].thread == t);
    WitnessVerdict {
        decomposition: d,
        w1,
        w2,
        w3,
        w4,
        w5,
    }
}

/// Split a cyclic computation at each delayed store `st`, with `a` the last
/// action of its thread before it, and check the witness conditions. The
/// first decomposition meeting all of them is returned, otherwise the one
/// meeting the most.
pub fn is_witness(c: &Computation) -> Result<WitnessVerdict, NoDecomposition> {
    let delays = delays_per_action(c);
    let hb = HbThrough::new(c);
    let mut best: Option<WitnessVerdict> = None;
    for (st, act) in c.actions.iter().enumerate() {
        if !matches!(act.kind, ActionKind::Store { .. }) || delays[st] == 0 {
            continue;
        }
        let isu_st = c.partner[st].expect("retired store has an issue");
        let t = act.thread;
        let a = (isu_st + 1..st)
            .rev()
            .find(|&k| c.actions[k].thread == t)
            .expect("a delayed store has a same-thread action in its window");
        let v = check(c, &hb, &delays, Decomposition { attacker: t, isu_st, a, st });
        if v.all() {
            return Ok(v);
        }
        if best.as_ref().is_none_or(|b| v.score() > b.score()) {
            best = Some(v);
        }
    }
    best.ok_or(NoDecomposition)
}

/// One failed instance of the cycle property for overtaken actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleViolation {
    /// Position of the overtaken action.
    pub overtaken: usize,
    /// Position of the overtaking store or fence.
    pub overtaking: usize,
}

/// For every delayed store or fence `b` and every action `a` of its thread
/// that `b` overtakes, check the happens-before chain that closes a cycle:
/// through the actions between `a` and `b` when `a` is program-order later
/// than `b`, or from `isu_b` to `a` otherwise. Meant for minimal violations.
pub fn check_overtaking_cycles(c: &Computation) -> Vec<CycleViolation> {
    let delays = delays_per_action(c);
    let hb = HbThrough::new(c);
    let node = node_of_actions(c);
    let mut out = Vec::new();
    for (j, b) in c.actions.iter().enumerate() {
        if !b.is_retirement() || delays[j] == 0 {
            continue;
        }
        let i = c.partner[j].unwrap();
        for k in i + 1..j {
            let a = &c.actions[k];
            if a.thread != b.thread || a.is_issue() {
                continue;
            }
            let ok = if node[k] > node[j] {
                hb.query(k, j)
            } else {
                hb.query(i, k)
            };
            if !ok {
                out.push(CycleViolation {
                    overtaken: k,
                    overtaking: j,
                });
            }
        }
    }
    out
}
