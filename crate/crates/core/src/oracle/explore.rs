use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::semantics::{Computation, Machine, MachineState, Recorder};
use crate::syntax::Program;
use crate::traces::build_trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Relaxed,
    Sc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub buffer_bound: usize,
    pub max_actions: usize,
    pub mode: Mode,
    /// Emit every computation (every prefix ending with empty buffers)
    /// instead of only maximal ones.
    pub include_prefixes: bool,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            buffer_bound: 3,
            max_actions: 24,
            mode: Mode::Relaxed,
            include_prefixes: false,
        }
    }
}

impl ExplorationConfig {
    pub fn relaxed(buffer_bound: usize, max_actions: usize) -> Self {
        ExplorationConfig {
            buffer_bound,
            max_actions,
            mode: Mode::Relaxed,
            include_prefixes: false,
        }
    }

    pub fn sc(max_actions: usize) -> Self {
        ExplorationConfig {
            buffer_bound: 0,
            max_actions,
            mode: Mode::Sc,
            include_prefixes: false,
        }
    }

    pub fn with_prefixes(mut self) -> Self {
        self.include_prefixes = true;
        self
    }

    pub(crate) fn machine(&self, p: &Program) -> Machine {
        let m = Machine::new(p).with_buffer_bound(self.buffer_bound);
        match self.mode {
            Mode::Sc => m.sc(),
            Mode::Relaxed => m,
        }
    }
}

/// What the visitor wants after seeing a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Visit {
    Continue,
    /// Do not expand this node.
    Prune,
    Stop,
}

/// A node of the exploration: the state reached and how.
pub(crate) struct Node<'a> {
    pub state: &'a MachineState,
    pub rec: &'a Recorder,
    /// No transition is enabled (buffers are then empty).
    pub maximal: bool,
}

/// Depth-first exploration of the transition system in enumeration order.
/// Paths that produce the same computation and state are explored once.
pub(crate) struct Explorer {
    pub machine: Machine,
    pub max_actions: usize,
    seen: HashSet<u64>,
    pub truncated: bool,
    pub nodes: u64,
    /// Merge paths that reach the same state with the same trace and cost
    /// bookkeeping, even if their computations differ.
    pub by_trace: bool,
}

impl Explorer {
    pub fn new(p: &Program, cfg: &ExplorationConfig) -> Self {
        Explorer {
            machine: cfg.machine(p),
            max_actions: cfg.max_actions,
            seen: HashSet::new(),
            truncated: false,
            nodes: 0,
            by_trace: false,
        }
    }

    /// Explorer that only distinguishes paths by what their extensions can
    /// still produce: trace, cost and delay bookkeeping.
    pub fn by_trace(p: &Program, cfg: &ExplorationConfig) -> Self {
        Explorer {
            by_trace: true,
            ..Self::new(p, cfg)
        }
    }

    fn fingerprint(&self, s: &MachineState, rec: &Recorder) -> u64 {
        let mut h = DefaultHasher::new();
        s.hash(&mut h);
        if self.by_trace {
            build_trace(rec.computation()).hash(&mut h);
            rec.hash_summary(&mut h);
        } else {
            rec.computation().hash(&mut h);
        }
        h.finish()
    }

    /// Run the search; returns false if the visitor stopped it.
    pub fn run(&mut self, visit: &mut dyn FnMut(&Node) -> Visit) -> bool {
        let s = self.machine.initial_state();
        let rec = Recorder::new(self.machine.thread_count());
        self.dfs(s, rec, visit)
    }

    fn dfs(&mut self, s: MachineState, rec: Recorder, visit: &mut dyn FnMut(&Node) -> Visit) -> bool {
        let fp = self.fingerprint(&s, &rec);
        if !self.seen.insert(fp) {
            return true;
        }
        self.nodes += 1;
        let ts = self.machine.transitions(&s);
        let node = Node {
            state: &s,
            rec: &rec,
            maximal: ts.is_empty(),
        };
        match visit(&node) {
            Visit::Stop => return false,
            Visit::Prune => return true,
            Visit::Continue => {}
        }
        for tr in ts {
            if rec.len() + tr.actions.len() > self.max_actions {
                self.truncated = true;
                continue;
            }
            let mut next = rec.clone();
            next.record(&tr);
            if !self.dfs(tr.target, next, visit) {
                return false;
            }
        }
        true
    }
}

/// Computations found within bounds, in enumeration order.
#[derive(Debug, Clone, Default)]
pub struct Enumeration {
    pub computations: Vec<Computation>,
    /// Some path was cut by `max_actions`.
    pub bound_exhausted: bool,
}

/// All maximal computations within bounds (or all computations, with
/// `include_prefixes`), each once, in depth-first enumeration order.
pub fn enumerate_computations(p: &Program, cfg: &ExplorationConfig) -> Enumeration {
    let mut out = Vec::new();
    let mut ex = Explorer::new(p, cfg);
    let prefixes = cfg.include_prefixes;
    ex.run(&mut |n| {
        if n.state.buffers_empty() && (n.maximal || prefixes) {
            out.push(n.rec.computation().clone());
        }
        Visit::Continue
    });
    Enumeration {
        computations: out,
        bound_exhausted: ex.truncated,
    }
}

/// Visit every computation within bounds, maximal or not, without
/// collecting them. The callback returns false to stop.
pub fn for_each_computation(
    p: &Program,
    cfg: &ExplorationConfig,
    mut f: impl FnMut(&Computation) -> bool,
) -> bool {
    let mut ex = Explorer::new(p, cfg);
    let prefixes = cfg.include_prefixes;
    ex.run(&mut |n| {
        if n.state.buffers_empty() && (n.maximal || prefixes) && !f(n.rec.computation()) {
            return Visit::Stop;
        }
        Visit::Continue
    });
    ex.truncated
}
