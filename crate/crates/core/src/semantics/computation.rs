use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Rule, Transition};
use crate::syntax::{Program, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Store { addr: Value, value: Value },
    Load { addr: Value, value: Value },
    Issue,
    Local,
    ScFence,
    Fence { addrs: Vec<Value> },
}

/// Element of the action alphabet: the executing thread plus what it did.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub thread: usize,
    pub kind: ActionKind,
}

impl Action {
    /// Memory effect of a store or fence that was issued earlier.
    pub fn is_retirement(&self) -> bool {
        matches!(self.kind, ActionKind::Store { .. } | ActionKind::Fence { .. })
    }

    pub fn is_issue(&self) -> bool {
        matches!(self.kind, ActionKind::Issue)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Store { addr, value } => write!(f, "st({addr},{value})"),
            ActionKind::Load { addr, value } => write!(f, "ld({addr},{value})"),
            ActionKind::Issue => f.write_str("isu"),
            ActionKind::Local => f.write_str("loc"),
            ActionKind::ScFence => f.write_str("scfence"),
            ActionKind::Fence { addrs } => {
                let a: Vec<String> = addrs.iter().map(|a| a.to_string()).collect();
                write!(f, "fence({})", a.join(","))
            }
        }
    }
}

/// A sequence of actions together with the pairing between every issue and
/// the store or fence it introduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Computation {
    pub actions: Vec<Action>,
    /// `partner[i]` links an issue to its retirement and back. `None` for
    /// other actions and for issues still sitting in a buffer.
    pub partner: Vec<Option<usize>>,
}

impl Computation {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Index of the matching issue for every store/fence action, `None`
    /// elsewhere.
    pub fn issue_index(&self) -> Vec<Option<usize>> {
        self.actions
            .iter()
            .zip(&self.partner)
            .map(|(a, p)| if a.is_retirement() { *p } else { None })
            .collect()
    }

    /// Every issue has been retired.
    pub fn is_complete(&self) -> bool {
        self.actions
            .iter()
            .zip(&self.partner)
            .all(|(a, p)| !a.is_issue() || p.is_some())
    }

    /// Checks the pairing invariant: a bijection between issues and
    /// stores/fences of the same thread, with stores to one address and
    /// everything leaving the thread's all-addresses buffer in issue order.
    pub fn pairing_is_consistent(&self) -> bool {
        for (i, a) in self.actions.iter().enumerate() {
            if let Some(j) = self.partner[i] {
                if self.partner.get(j).copied().flatten() != Some(i) {
                    return false;
                }
                let b = &self.actions[j];
                if a.thread != b.thread || a.is_issue() == b.is_issue() {
                    return false;
                }
                if a.is_issue() != (i < j) {
                    return false;
                }
            } else if a.is_retirement() {
                return false;
            }
        }
        // Same-address stores of one thread keep their issue order.
        for (j, b) in self.actions.iter().enumerate() {
            let ActionKind::Store { addr, .. } = b.kind else { continue };
            let i = self.partner[j].unwrap();
            for (j2, b2) in self.actions.iter().enumerate().skip(j + 1) {
                if b2.thread == b.thread
                    && matches!(b2.kind, ActionKind::Store { addr: a2, .. } if a2 == addr)
                    && self.partner[j2].unwrap() < i
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let actions: Vec<serde_json::Value> = self
            .actions
            .iter()
            .map(|a| {
                let thread = p.threads[a.thread].name.clone();
                match &a.kind {
                    ActionKind::Store { addr, value } => {
                        serde_json::json!({"thread": thread, "kind": "st", "addr": addr, "value": value})
                    }
                    ActionKind::Load { addr, value } => {
                        serde_json::json!({"thread": thread, "kind": "ld", "addr": addr, "value": value})
                    }
                    ActionKind::Issue => serde_json::json!({"thread": thread, "kind": "isu"}),
                    ActionKind::Local => serde_json::json!({"thread": thread, "kind": "loc"}),
                    ActionKind::ScFence => serde_json::json!({"thread": thread, "kind": "scfence"}),
                    ActionKind::Fence { addrs } => {
                        serde_json::json!({"thread": thread, "kind": "fence", "addrs": addrs})
                    }
                }
            })
            .collect();
        serde_json::json!({ "actions": actions, "issue_index": self.issue_index() })
    }

    /// One action per line, `thread: action`, with symbolic addresses.
    pub fn render(&self, p: &Program) -> String {
        let mut out = String::new();
        for (i, a) in self.actions.iter().enumerate() {
            let t = &p.threads[a.thread].name;
            let body = match &a.kind {
                ActionKind::Store { addr, value } => format!("st {} = {value}", p.value_name(*addr)),
                ActionKind::Load { addr, value } => format!("ld {} = {value}", p.value_name(*addr)),
                ActionKind::Issue => match self.partner[i] {
                    Some(j) => format!("isu (retired at {j})"),
                    None => "isu (pending)".to_string(),
                },
                ActionKind::Local => "loc".into(),
                ActionKind::ScFence => "scfence".into(),
                ActionKind::Fence { addrs } => {
                    let a: Vec<String> = addrs.iter().map(|a| p.value_name(*a)).collect();
                    format!("fence {}", a.join(", "))
                }
            };
            out.push_str(&format!("{i:>3}  {t}: {body}\n"));
        }
        out
    }
}

/// Builds a [`Computation`] from a sequence of transitions and keeps running
/// penalty counters that only ever grow along a path.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    comp: Computation,
    /// Issue positions per (thread, address) mirroring the per-address buffers.
    buf1: Vec<(usize, Value, VecDeque<usize>)>,
    /// Issue positions per thread mirroring the all-addresses buffers.
    buf2: Vec<VecDeque<usize>>,
    /// Delays accumulated so far by each issue position.
    delay: Vec<u32>,
    issued_store: Vec<bool>,
    pub delays: u64,
    pub reorders: u64,
}

impl Recorder {
    pub fn new(threads: usize) -> Self {
        Recorder {
            buf2: vec![VecDeque::new(); threads],
            ..Default::default()
        }
    }

    pub fn computation(&self) -> &Computation {
        &self.comp
    }

    pub fn into_computation(self) -> Computation {
        self.comp
    }

    pub fn len(&self) -> usize {
        self.comp.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comp.actions.is_empty()
    }

    fn pending(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.buf1
            .iter()
            .filter(move |(th, _, _)| *th == t)
            .flat_map(|(_, _, q)| q.iter().copied())
            .chain(self.buf2[t].iter().copied())
    }

    /// Stores (pending or retired) that have been delayed at least once.
    pub fn delayed_store_count(&self) -> usize {
        self.delay
            .iter()
            .zip(&self.issued_store)
            .filter(|(d, s)| **d > 0 && **s)
            .count()
    }

    /// Threads owning a store or fence that has been delayed.
    pub fn delaying_threads(&self) -> Vec<usize> {
        let mut ts: Vec<usize> = self
            .delay
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0)
            .map(|(i, _)| self.comp.actions[i].thread)
            .collect();
        ts.sort_unstable();
        ts.dedup();
        ts
    }

    /// Feed everything that decides the future cost and the delay
    /// restrictions into `h`, leaving out the order of independent actions.
    /// Together with the machine state and the trace of the computation this
    /// determines the traces and costs of all extensions.
    pub fn hash_summary<H: std::hash::Hasher>(&self, h: &mut H) {
        use std::hash::Hash;
        (self.delays, self.reorders, self.len()).hash(h);
        self.delayed_store_count().hash(h);
        self.delaying_threads().hash(h);
        let mut queues: Vec<_> = self.buf1.iter().collect();
        queues.sort_by_key(|(t, a, _)| (*t, *a));
        for (t, a, q) in queues {
            (t, a).hash(h);
            for &p in q {
                (self.delay[p] > 0).hash(h);
            }
        }
        for q in &self.buf2 {
            q.len().hash(h);
            for &p in q {
                (self.delay[p] > 0).hash(h);
            }
        }
    }

    fn bump_pending(&mut self, t: usize) {
        let pending: Vec<usize> = self.pending(t).collect();
        for p in pending {
            self.delay[p] += 1;
            self.delays += 1;
        }
    }

    fn push_action(&mut self, a: Action) -> usize {
        self.comp.actions.push(a);
        self.comp.partner.push(None);
        self.delay.push(0);
        self.issued_store.push(false);
        self.comp.actions.len() - 1
    }

    fn retire(&mut self, isu: usize, at: usize) {
        self.comp.partner[isu] = Some(at);
        self.comp.partner[at] = Some(isu);
    }

    pub fn record(&mut self, tr: &Transition) {
        let t = tr.thread;
        match tr.rule {
            Rule::AdvanceBuffer => {
                let addr = tr.addr.expect("advance carries its address");
                let i = self
                    .buf1
                    .iter()
                    .position(|(th, a, _)| *th == t && *a == addr)
                    .expect("advance from an empty per-address buffer");
                let isu = self.buf1[i].2.pop_front().unwrap();
                if self.buf1[i].2.is_empty() {
                    self.buf1.remove(i);
                }
                self.buf2[t].push_back(isu);
            }
            Rule::IssueStore | Rule::IssueFence => {
                self.bump_pending(t);
                let at = self.push_action(tr.actions[0].clone());
                if tr.rule == Rule::IssueStore {
                    self.issued_store[at] = true;
                    let addr = tr.addr.expect("issue carries its address");
                    match self.buf1.iter_mut().find(|(th, a, _)| *th == t && *a == addr) {
                        Some((_, _, q)) => q.push_back(at),
                        None => self.buf1.push((t, addr, VecDeque::from([at]))),
                    }
                } else {
                    self.buf2[t].push_back(at);
                }
            }
            Rule::StoreToMemory | Rule::Fence => {
                let isu = self.buf2[t].pop_front().expect("retire from an empty buffer");
                let at = self.push_action(tr.actions[0].clone());
                self.retire(isu, at);
                self.reorders += self.pending(t).filter(|&p| p < isu).count() as u64;
                self.bump_pending(t);
            }
            Rule::AtomicStore | Rule::AtomicFence => {
                self.bump_pending(t);
                let isu = self.push_action(tr.actions[0].clone());
                self.issued_store[isu] = tr.rule == Rule::AtomicStore;
                self.bump_pending(t);
                let at = self.push_action(tr.actions[1].clone());
                self.retire(isu, at);
            }
            _ => {
                for a in &tr.actions {
                    self.bump_pending(t);
                    self.push_action(a.clone());
                }
            }
        }
    }
}
