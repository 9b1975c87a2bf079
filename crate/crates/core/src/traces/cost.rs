use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::semantics::{ActionKind, Computation};

/// (delays, reorders, length), compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct CostTriple {
    pub delays: u64,
    pub reorders: u64,
    pub length: u64,
}

impl fmt::Display for CostTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.delays, self.reorders, self.length)
    }
}

/// For every store/fence retirement: the number of same-thread actions
/// strictly between its issue and itself. Zero at other positions.
pub fn delays_per_action(c: &Computation) -> Vec<u64> {
    c.actions
        .iter()
        .enumerate()
        .map(|(j, a)| match (a.is_retirement(), c.partner[j]) {
            (true, Some(i)) => c.actions[i + 1..j]
                .iter()
                .filter(|b| b.thread == a.thread)
                .count() as u64,
            _ => 0,
        })
        .collect()
}

fn reorders_of(c: &Computation, i: usize, j: usize) -> u64 {
    let t = c.actions[j].thread;
    (i + 1..j)
        .filter(|&k| {
            c.actions[k].thread == t
                && c.actions[k].is_retirement()
                && c.partner[k].is_some_and(|ik| ik > i)
        })
        .count() as u64
}

pub fn cost(c: &Computation) -> CostTriple {
    let mut out = CostTriple {
        length: c.len() as u64,
        ..Default::default()
    };
    for (j, d) in delays_per_action(c).into_iter().enumerate() {
        out.delays += d;
        if let (true, Some(i)) = (c.actions[j].is_retirement(), c.partner[j]) {
            out.reorders += reorders_of(c, i, j);
        }
    }
    out
}

/// Number of stores with at least one delay.
pub fn delayed_store_count(c: &Computation) -> usize {
    delays_per_action(c)
        .iter()
        .zip(&c.actions)
        .filter(|(d, a)| **d > 0 && matches!(a.kind, ActionKind::Store { .. }))
        .count()
}

/// Threads with at least one delayed store or fence.
pub fn delaying_threads(c: &Computation) -> BTreeSet<usize> {
    delays_per_action(c)
        .iter()
        .zip(&c.actions)
        .filter(|(d, _)| **d > 0)
        .map(|(_, a)| a.thread)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::{mp, tau, tau_prime, TAU_PRIME_STEPS, TAU_STEPS};
    use super::*;
    use crate::semantics::{Machine, Recorder};

    #[test]
    fn costs_of_the_two_example_computations() {
        let m = Machine::new(&mp());
        let t = tau(&m);
        assert_eq!(
            cost(&t),
            CostTriple {
                delays: 6,
                reorders: 3,
                length: 9
            }
        );
        assert_eq!(delayed_store_count(&t), 2);
        let t2 = tau_prime(&m);
        assert_eq!(
            cost(&t2),
            CostTriple {
                delays: 4,
                reorders: 2,
                length: 9
            }
        );
        assert_eq!(delayed_store_count(&t2), 1);
        assert_eq!(delaying_threads(&t2), BTreeSet::from([0]));
    }

    #[test]
    fn sc_computations_cost_nothing() {
        let m = Machine::new(&mp());
        let run = m.run_sc(&[0, 0, 0, 0]).unwrap();
        let c = cost(&run.computation);
        assert_eq!((c.delays, c.reorders, c.length), (0, 0, 7));
    }

    #[test]
    fn ordering_is_lexicographic() {
        let a = CostTriple { delays: 4, reorders: 9, length: 99 };
        let b = CostTriple { delays: 6, reorders: 0, length: 1 };
        assert!(a < b);
    }

    #[test]
    fn recorder_counters_agree_with_the_definition() {
        let m = Machine::new(&mp());
        for steps in [TAU_STEPS, TAU_PRIME_STEPS] {
            let mut rec = Recorder::new(2);
            let mut s = m.initial_state();
            for i in m.resolve_steps(steps).unwrap() {
                let tr = m.apply(&s, i).unwrap();
                rec.record(&tr);
                s = tr.target;
            }
            let c = cost(rec.computation());
            assert_eq!((rec.delays, rec.reorders), (c.delays, c.reorders));
            assert_eq!(rec.delayed_store_count(), delayed_store_count(rec.computation()));
        }
    }
}
