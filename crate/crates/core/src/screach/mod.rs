//! Explicit-state SC reachability, and robustness checking on top of it by
//! instrumenting each attack.

mod robustness;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::semantics::{Computation, Machine, MachineState, Rule, Transition};
use crate::syntax::{validate, Program, Value};

pub use robustness::{check_robustness, AttackReport, RobustnessConfig, RobustnessMode, RobustnessVerdict, Verdict};

/// Can some SC run reach a state with `mem[goal] != 0`?
#[derive(Debug, Clone)]
pub struct ReachQuery {
    pub program: Program,
    pub goal: Value,
    /// Give up after this many distinct states.
    pub max_states: Option<usize>,
}

impl ReachQuery {
    pub fn new(program: Program, goal: Value) -> Self {
        ReachQuery {
            program,
            goal,
            max_states: None,
        }
    }

    pub fn with_max_states(mut self, n: usize) -> Self {
        self.max_states = Some(n);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReachStats {
    pub states_visited: usize,
    pub transitions: usize,
    pub peak_frontier: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReachWitness {
    /// Choice indices into the SC transitions, replayable with
    /// [`Machine::run_sc`].
    pub schedule: Vec<usize>,
    #[serde(skip)]
    pub computation: Computation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReachResult {
    pub reachable: bool,
    pub witness: Option<ReachWitness>,
    pub stats: ReachStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("state budget exhausted after {} states", .0.states_visited)]
    BudgetExhausted(ReachStats),
}

/// Breadth-first search; the witness is a shortest schedule.
pub fn reachable(q: &ReachQuery) -> Result<ReachResult, ReachError> {
    search(q, false)
}

/// Like [`reachable`] but expands only an ample subset where possible: a
/// thread whose enabled steps all leave memory alone is explored alone,
/// unless one of its successors was already seen. Runs of single such steps
/// are taken at once and only their last state is stored.
pub fn por_reduce(q: &ReachQuery) -> Result<ReachResult, ReachError> {
    search(q, true)
}

/// Registers of terminated threads can no longer be read.
fn canonical(m: &Machine, mut s: MachineState) -> MachineState {
    for t in 0..m.thread_count() {
        if m.is_terminated(&s, t) {
            for r in m.register_range(t) {
                s.regs[r] = 0;
            }
        }
    }
    s
}

fn is_local(tr: &Transition) -> bool {
    matches!(tr.rule, Rule::LocalAssign | Rule::Assert | Rule::ScFence | Rule::AtomicFence)
}

fn ample(m: &Machine, ts: &[Transition], seen: &HashMap<MachineState, u32>) -> Option<Vec<usize>> {
    let mut start = 0;
    while start < ts.len() {
        let t = ts[start].thread;
        let end = ts[start..]
            .iter()
            .position(|tr| tr.thread != t)
            .map_or(ts.len(), |k| start + k);
        let group = &ts[start..end];
        if group.iter().all(is_local)
            && group
                .iter()
                .all(|tr| !seen.contains_key(&canonical(m, tr.target.clone())))
        {
            return Some((start..end).collect());
        }
        start = end;
    }
    None
}

fn search(q: &ReachQuery, reduce: bool) -> Result<ReachResult, ReachError> {
    let diags = validate(&q.program);
    if !diags.is_empty() {
        return Err(ReachError::InvalidQuery(format!(
            "program is not well-formed: {}",
            diags[0].message
        )));
    }
    if q.goal >= q.program.domain_size {
        return Err(ReachError::InvalidQuery(format!(
            "goal address {} is outside the domain 0..{}",
            q.goal, q.program.domain_size
        )));
    }
    let m = Machine::new(&q.program).sc();
    let goal = q.goal as usize;
    let init = canonical(&m, m.initial_state());
    let mut stats = ReachStats {
        states_visited: 1,
        ..Default::default()
    };
    let witness = |parent: &[(u32, Vec<u32>)], mut i: usize| {
        let mut schedule = Vec::new();
        while i != 0 {
            let (p, path) = &parent[i];
            schedule.extend(path.iter().rev().map(|&c| c as usize));
            i = *p as usize;
        }
        schedule.reverse();
        let run = m.run(&schedule).expect("witness schedule replays");
        debug_assert_ne!(run.state.mem[goal], 0);
        ReachWitness {
            schedule,
            computation: run.computation,
        }
    };
    if init.mem[goal] != 0 {
        return Ok(ReachResult {
            reachable: true,
            witness: Some(witness(&[], 0)),
            stats,
        });
    }

    let mut states = vec![init.clone()];
    let mut parent: Vec<(u32, Vec<u32>)> = vec![(0, vec![])];
    let mut seen: HashMap<MachineState, u32> = HashMap::from([(init, 0)]);
    // Ordered by the number of underlying steps, so fused runs do not jump
    // ahead of the rest of the frontier.
    let mut depth = vec![0usize];
    let mut queue = BinaryHeap::from([Reverse((0usize, 0usize))]);
    while let Some(Reverse((_, i))) = queue.pop() {
        let ts = m.transitions(&states[i]);
        let chosen = if reduce { ample(&m, &ts, &seen) } else { None };
        let chosen = chosen.unwrap_or_else(|| (0..ts.len()).collect());
        for c in chosen {
            stats.transitions += 1;
            let mut n = canonical(&m, ts[c].target.clone());
            let mut path = vec![c as u32];
            if reduce {
                // Run through steps that only the successor's own thread
                // can take and that leave memory alone, storing the end only.
                let mut chain = std::collections::HashSet::new();
                loop {
                    let next = m.transitions(&n);
                    match ample(&m, &next, &seen) {
                        Some(a) if a.len() == 1 && chain.insert(n.clone()) => {
                            stats.transitions += 1;
                            path.push(a[0] as u32);
                            n = canonical(&m, next[a[0]].target.clone());
                        }
                        _ => break,
                    }
                }
            }
            if seen.contains_key(&n) {
                continue;
            }
            let id = states.len();
            seen.insert(n.clone(), id as u32);
            depth.push(depth[i] + path.len());
            parent.push((i as u32, path));
            let hit = n.mem[goal] != 0;
            states.push(n);
            stats.states_visited += 1;
            if hit {
                return Ok(ReachResult {
                    reachable: true,
                    witness: Some(witness(&parent, id)),
                    stats,
                });
            }
            queue.push(Reverse((depth[id], id)));
            if q.max_states.is_some_and(|b| stats.states_visited > b) {
                return Err(ReachError::BudgetExhausted(stats));
            }
        }
        stats.peak_frontier = stats.peak_frontier.max(queue.len());
    }
    Ok(ReachResult {
        reachable: false,
        witness: None,
        stats,
    })
}
