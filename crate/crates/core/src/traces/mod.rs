//! Happens-before traces of computations: construction, acyclicity,
//! comparison, chains through a segment, and the cost of a computation.

mod cost;
mod export;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantics::{ActionKind, Computation};
use crate::syntax::Value;

pub use cost::{cost, delayed_store_count, delaying_threads, delays_per_action, CostTriple};

/// What a node stands for. Stores and fences carry the payload of their
/// memory effect; their issue maps to the same node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NodeKind {
    Store { addr: Value, value: Value },
    Load { addr: Value, value: Value },
    Local,
    ScFence,
    Fence { addrs: Vec<Value> },
    /// Issued but never retired; only appears for incomplete computations.
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceNode {
    pub thread: usize,
    pub per_thread_index: usize,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Po,
    St,
    Src,
    Cf,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Po => "po",
            EdgeKind::St => "st",
            EdgeKind::Src => "src",
            EdgeKind::Cf => "cf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Nodes are sorted by (thread, per-thread index), so node ids line up for
/// any two computations of the same program with the same per-thread
/// sequences. Program order and store order are kept as covering edges;
/// conflict edges are kept in full.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace {
    pub nodes: Vec<TraceNode>,
    pub edges: BTreeSet<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("traces have different node sets")]
pub struct IncomparableTraces;

impl Trace {
    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.kind == kind)
            .map(|e| (e.from, e.to))
    }

    pub fn has_edge(&self, from: usize, to: usize, kind: EdgeKind) -> bool {
        self.edges.contains(&Edge { from, to, kind })
    }

    pub fn node_id(&self, thread: usize, per_thread_index: usize) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.thread == thread && n.per_thread_index == per_thread_index)
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            succ[e.from].push(e.to);
        }
        for s in &mut succ {
            s.dedup();
        }
        succ
    }

    /// A directed cycle as a node list (first node not repeated), if any.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let succ = self.successors();
        let mut mark = vec![Mark::New; self.nodes.len()];
        for root in 0..self.nodes.len() {
            if mark[root] != Mark::New {
                continue;
            }
            // Stack of (node, next successor to visit).
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Open;
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                if let Some(&w) = succ[v].get(*k) {
                    *k += 1;
                    match mark[w] {
                        Mark::New => {
                            mark[w] = Mark::Open;
                            stack.push((w, 0));
                        }
                        Mark::Open => {
                            let start = stack.iter().position(|&(u, _)| u == w).unwrap();
                            return Some(stack[start..].iter().map(|&(u, _)| u).collect());
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }
}

/// Whether the happens-before relation of the trace has a cycle.
pub fn is_cyclic(t: &Trace) -> bool {
    t.find_cycle().is_some()
}

/// Labeled-graph equality. Fails when the node sets differ.
pub fn traces_equal(a: &Trace, b: &Trace) -> Result<bool, IncomparableTraces> {
    if a.nodes != b.nodes {
        return Err(IncomparableTraces);
    }
    Ok(a.edges == b.edges)
}

/// Node id of every action: issues and their retirements share a node.
/// Retirements without an issue (impossible for recorded computations) and
/// nothing else are left unmapped.
pub fn node_of_actions(c: &Computation) -> Vec<usize> {
    let threads = c.actions.iter().map(|a| a.thread + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; threads];
    let mut local = vec![usize::MAX; c.len()];
    for (i, a) in c.actions.iter().enumerate() {
        if !a.is_retirement() {
            local[i] = counts[a.thread];
            counts[a.thread] += 1;
        }
    }
    let mut offset = vec![0usize; threads + 1];
    for t in 0..threads {
        offset[t + 1] = offset[t] + counts[t];
    }
    (0..c.len())
        .map(|i| {
            let a = &c.actions[i];
            let j = if a.is_retirement() {
                c.partner[i].expect("retirement without issue")
            } else {
                i
            };
            offset[a.thread] + local[j]
        })
        .collect()
}

/// Per-thread node sequences in issue order, as action positions of the
/// non-retirement actions.
pub fn program_order(c: &Computation) -> Vec<Vec<usize>> {
    let threads = c.actions.iter().map(|a| a.thread + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); threads];
    for (i, a) in c.actions.iter().enumerate() {
        if !a.is_retirement() {
            out[a.thread].push(i);
        }
    }
    out
}

/// Source store of every load, as action positions of store retirements.
/// `None` for non-loads and for loads of the initial value.
pub fn source_function(c: &Computation) -> Vec<Option<usize>> {
    c.actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let ActionKind::Load { addr, .. } = a.kind else { return None };
            // Newest same-thread store to `addr` issued before and retired after.
            let early = (0..i).rev().find_map(|k| {
                let j = c.partner[k]?;
                (c.actions[k].is_issue()
                    && c.actions[k].thread == a.thread
                    && j > i
                    && matches!(c.actions[j].kind, ActionKind::Store { addr: x, .. } if x == addr))
                .then_some(j)
            });
            early.or_else(|| {
                (0..i)
                    .rev()
                    .find(|&k| matches!(c.actions[k].kind, ActionKind::Store { addr: x, .. } if x == addr))
            })
        })
        .collect()
}

/// Per-node facts used to decide single happens-before steps.
struct HbIndex {
    thread: Vec<usize>,
    index: Vec<usize>,
    /// (address, rank in the address's store order) for store nodes.
    store: Vec<Option<(Value, usize)>>,
    /// For load nodes: (address, source node).
    load: Vec<Option<(Value, Option<usize>)>>,
}

impl HbIndex {
    fn new(t: &Trace) -> Self {
        let n = t.nodes.len();
        let mut store = vec![None; n];
        let mut load = vec![None; n];
        for (v, node) in t.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Store { addr, .. } => store[v] = Some((addr, 0)),
                NodeKind::Load { addr, .. } => load[v] = Some((addr, None)),
                _ => {}
            }
        }
        // Ranks follow covering store-order edges from the first store.
        let mut has_pred = vec![false; n];
        let mut next = vec![None; n];
        for (a, b) in t.edges_of(EdgeKind::St) {
            has_pred[b] = true;
            next[a] = Some(b);
        }
        for v in 0..n {
            if store[v].is_some() && !has_pred[v] {
                let mut r = 0;
                let mut cur = Some(v);
                while let Some(u) = cur {
                    store[u].as_mut().unwrap().1 = r;
                    r += 1;
                    cur = next[u];
                }
            }
        }
        for (s, l) in t.edges_of(EdgeKind::Src) {
            load[l].as_mut().unwrap().1 = Some(s);
        }
        HbIndex {
            thread: t.nodes.iter().map(|x| x.thread).collect(),
            index: t.nodes.iter().map(|x| x.per_thread_index).collect(),
            store,
            load,
        }
    }

    /// u →po+ v, u →src v, u →st+ v or u →cf v.
    fn step(&self, u: usize, v: usize) -> bool {
        if u == v {
            return false;
        }
        if self.thread[u] == self.thread[v] && self.index[u] < self.index[v] {
            return true;
        }
        if let Some((_, Some(s))) = self.load[v] {
            if s == u {
                return true;
            }
        }
        if let (Some((a, ru)), Some((b, rv))) = (self.store[u], self.store[v]) {
            if a == b && ru < rv {
                return true;
            }
        }
        if let (Some((a, src)), Some((b, rv))) = (self.load[u], self.store[v]) {
            if a == b {
                return match src {
                    Some(s) => self.store[s].is_some_and(|(_, rs)| rs < rv),
                    None => rv == 0,
                };
            }
        }
        false
    }
}

/// Build the happens-before trace of a computation.
pub fn build_trace(c: &Computation) -> Trace {
    let node_of = node_of_actions(c);
    let n = node_of.iter().map(|v| v + 1).max().unwrap_or(0);
    let mut nodes: Vec<Option<TraceNode>> = vec![None; n];
    let po = program_order(c);
    for seq in &po {
        for (k, &i) in seq.iter().enumerate() {
            let a = &c.actions[i];
            let kind = match &a.kind {
                ActionKind::Issue => match c.partner[i].map(|j| &c.actions[j].kind) {
                    Some(ActionKind::Store { addr, value }) => NodeKind::Store { addr: *addr, value: *value },
                    Some(ActionKind::Fence { addrs }) => NodeKind::Fence { addrs: addrs.clone() },
                    _ => NodeKind::Pending,
                },
                ActionKind::Load { addr, value } => NodeKind::Load { addr: *addr, value: *value },
                ActionKind::Local => NodeKind::Local,
                ActionKind::ScFence => NodeKind::ScFence,
                ActionKind::Store { .. } | ActionKind::Fence { .. } => unreachable!(),
            };
            nodes[node_of[i]] = Some(TraceNode {
                thread: a.thread,
                per_thread_index: k,
                kind,
            });
        }
    }
    let nodes: Vec<TraceNode> = nodes.into_iter().map(Option::unwrap).collect();
    let mut edges = BTreeSet::new();

    for seq in &po {
        for w in seq.windows(2) {
            edges.insert(Edge {
                from: node_of[w[0]],
                to: node_of[w[1]],
                kind: EdgeKind::Po,
            });
        }
    }

    // Store order: retirement order per address.
    let mut by_addr: std::collections::BTreeMap<Value, Vec<usize>> = Default::default();
    for (i, a) in c.actions.iter().enumerate() {
        if let ActionKind::Store { addr, .. } = a.kind {
            by_addr.entry(addr).or_default().push(i);
        }
    }
    for stores in by_addr.values() {
        for w in stores.windows(2) {
            edges.insert(Edge {
                from: node_of[w[0]],
                to: node_of[w[1]],
                kind: EdgeKind::St,
            });
        }
    }

    let src = source_function(c);
    for (i, a) in c.actions.iter().enumerate() {
        let ActionKind::Load { addr, .. } = a.kind else { continue };
        let ld = node_of[i];
        let stores = by_addr.get(&addr).map(Vec::as_slice).unwrap_or(&[]);
        match src[i] {
            Some(s) => {
                edges.insert(Edge {
                    from: node_of[s],
                    to: ld,
                    kind: EdgeKind::Src,
                });
                let rank = stores.iter().position(|&x| x == s).unwrap();
                for &later in &stores[rank + 1..] {
                    edges.insert(Edge {
                        from: ld,
                        to: node_of[later],
                        kind: EdgeKind::Cf,
                    });
                }
            }
            None => {
                if let Some(&first) = stores.first() {
                    edges.insert(Edge {
                        from: ld,
                        to: node_of[first],
                        kind: EdgeKind::Cf,
                    });
                }
            }
        }
    }
    Trace { nodes, edges }
}

/// Whether action `i` happens before action `j` through the actions strictly
/// between them: a chain `i = a0, a1, .., an, an+1 = j` with the inner
/// actions drawn in order from positions `i+1..j`, each consecutive pair
/// related by po+, src, st or cf. Issue actions are not chain members;
/// stores and fences take part at their retirement position.
pub fn hb_through(c: &Computation, i: usize, j: usize) -> bool {
    if i >= j || j >= c.len() {
        return false;
    }
    let t = build_trace(c);
    let node_of = node_of_actions(c);
    hb_through_with(&HbIndex::new(&t), &node_of, c, i, j)
}

fn hb_through_with(hb: &HbIndex, node_of: &[usize], c: &Computation, i: usize, j: usize) -> bool {
    let mut reached: Vec<usize> = vec![node_of[i]];
    let target = node_of[j];
    for k in i + 1..j {
        if c.actions[k].is_issue() {
            continue;
        }
        let v = node_of[k];
        if reached.iter().any(|&u| hb.step(u, v)) {
            reached.push(v);
        }
    }
    reached.iter().any(|&u| hb.step(u, target))
}

/// Reusable form of [`hb_through`] for many queries on one computation.
pub struct HbThrough<'a> {
    c: &'a Computation,
    node_of: Vec<usize>,
    hb: HbIndex,
}

impl<'a> HbThrough<'a> {
    pub fn new(c: &'a Computation) -> Self {
        let t = build_trace(c);
        HbThrough {
            c,
            node_of: node_of_actions(c),
            hb: HbIndex::new(&t),
        }
    }

    pub fn query(&self, i: usize, j: usize) -> bool {
        i < j && j < self.c.len() && hb_through_with(&self.hb, &self.node_of, self.c, i, j)
    }

    /// A single happens-before step between the nodes of two actions.
    pub fn step(&self, i: usize, j: usize) -> bool {
        self.hb.step(self.node_of[i], self.node_of[j])
    }
}
