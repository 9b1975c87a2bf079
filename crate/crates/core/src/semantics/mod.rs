//! Relaxed operational semantics with per-address buffers feeding one
//! all-addresses buffer per thread, and its SC restriction.

mod compiled;
mod computation;
mod state;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Instruction, Program, Value};
use compiled::{compile, CInstr, CThread};

pub use compiled::eval_expr;
pub use computation::{Action, ActionKind, Computation, Recorder};
pub use state::{AddrQueue, BufferEntry, MachineState};

/// Transition rules, declared in the order used to sort enabled transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    EarlyRead1,
    EarlyRead2,
    ReadMemory,
    IssueStore,
    /// The SC bundle of issue, advance and store to memory.
    AtomicStore,
    AdvanceBuffer,
    StoreToMemory,
    ScFence,
    IssueFence,
    /// The SC bundle of issue fence and fence.
    AtomicFence,
    Fence,
    LocalAssign,
    Assert,
}

/// One enabled step: the rule, the recorded actions (none for an advance)
/// and the successor state.
#[derive(Debug, Clone)]
pub struct Transition {
    pub thread: usize,
    pub rule: Rule,
    /// Index into the thread's instruction list, for instruction-driven rules.
    pub instruction: Option<usize>,
    /// Address touched by loads, stores and buffer moves.
    pub addr: Option<Value>,
    pub actions: Vec<Action>,
    pub target: MachineState,
}

impl Transition {
    pub fn is_internal(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("choice {choice} is out of range: only {enabled} transitions are enabled")]
pub struct InvalidChoice {
    pub choice: usize,
    pub enabled: usize,
}

/// Result of replaying a schedule to its end.
#[derive(Debug, Clone)]
pub struct Run {
    pub computation: Computation,
    pub state: MachineState,
}

/// A schedule step that named no enabled transition.
#[derive(Debug, Clone, Error)]
#[error("schedule is stuck at step {index}: choice {choice} of {enabled} enabled transitions")]
pub struct StuckReport {
    pub index: usize,
    pub choice: usize,
    pub enabled: usize,
    pub prefix: Computation,
    pub state: MachineState,
    /// Why each thread cannot take (other) steps, one line per blocked premise.
    pub reasons: Vec<String>,
}

/// A program prepared for execution. `buffer_bound` limits every buffer
/// queue; `Some(0)` is the same as SC.
#[derive(Debug, Clone)]
pub struct Machine {
    program: Program,
    threads: Vec<CThread>,
    buffer_bound: Option<usize>,
    sc: bool,
}

impl Machine {
    /// Relaxed machine with unbounded buffers. The program must validate.
    pub fn new(p: &Program) -> Self {
        Machine {
            program: p.clone(),
            threads: compile(p),
            buffer_bound: None,
            sc: false,
        }
    }

    pub fn with_buffer_bound(mut self, bound: usize) -> Self {
        self.buffer_bound = Some(bound);
        self
    }

    /// Make [`Machine::transitions`] use the SC restriction.
    pub fn sc(mut self) -> Self {
        self.sc = true;
        self
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn buffer_bound(&self) -> Option<usize> {
        self.buffer_bound
    }

    pub fn is_sc(&self) -> bool {
        self.sc || self.buffer_bound == Some(0)
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn initial_state(&self) -> MachineState {
        let n = self.threads.len();
        MachineState {
            pc: self.threads.iter().map(|t| t.init).collect(),
            regs: vec![0; self.threads.last().map_or(0, |t| t.reg_range.end)],
            mem: vec![0; self.program.domain_size as usize],
            buf1: vec![Vec::new(); n],
            buf2: vec![VecDeque::new(); n],
        }
    }

    /// Label name of thread `t`'s program counter.
    pub fn label(&self, s: &MachineState, t: usize) -> &str {
        &self.threads[t].labels[s.pc[t] as usize]
    }

    pub fn is_terminated(&self, s: &MachineState, t: usize) -> bool {
        self.threads[t].is_terminal(s.pc[t])
    }

    pub fn all_terminated(&self, s: &MachineState) -> bool {
        (0..self.threads.len()).all(|t| self.is_terminated(s, t))
    }

    /// Flat register indices owned by thread `t`.
    pub fn register_range(&self, t: usize) -> std::ops::Range<usize> {
        self.threads[t].reg_range.clone()
    }

    /// Relaxed or SC successors, depending on how the machine was built.
    pub fn transitions(&self, s: &MachineState) -> Vec<Transition> {
        if self.is_sc() {
            self.sc_enabled_transitions(s)
        } else {
            self.enabled_transitions(s)
        }
    }

    fn fits(&self, len: usize) -> bool {
        self.buffer_bound.is_none_or(|b| len < b)
    }

    fn eval(&self, e: &compiled::CExpr, s: &MachineState) -> Value {
        e.eval(&s.regs, self.program.domain_size)
    }

    fn act(t: usize, kind: ActionKind) -> Action {
        Action { thread: t, kind }
    }

    /// Successors under the relaxed rules, sorted by thread, then rule,
    /// then instruction, then buffer address.
    pub fn enabled_transitions(&self, s: &MachineState) -> Vec<Transition> {
        if self.buffer_bound == Some(0) {
            return self.sc_enabled_transitions(s);
        }
        let mut out = Vec::new();
        for (t, th) in self.threads.iter().enumerate() {
            let start = out.len();
            for &i in &th.outgoing[s.pc[t] as usize] {
                let (instr, next) = &th.instrs[i];
                self.instruction_step(s, t, i, instr, *next, false, &mut out);
            }
            for q in &s.buf1[t] {
                if !self.fits(s.buf2[t].len()) {
                    break;
                }
                let mut n = s.clone();
                let v = n.pop_per_address(t, q.addr).unwrap();
                n.buf2[t].push_back(BufferEntry::Store { addr: q.addr, value: v });
                out.push(Transition {
                    thread: t,
                    rule: Rule::AdvanceBuffer,
                    instruction: None,
                    addr: Some(q.addr),
                    actions: vec![],
                    target: n,
                });
            }
            if let Some(head) = s.buf2[t].front() {
                let mut n = s.clone();
                n.buf2[t].pop_front();
                let tr = match head {
                    BufferEntry::Store { addr, value } => {
                        n.mem[*addr as usize] = *value;
                        Transition {
                            thread: t,
                            rule: Rule::StoreToMemory,
                            instruction: None,
                            addr: Some(*addr),
                            actions: vec![Self::act(t, ActionKind::Store { addr: *addr, value: *value })],
                            target: n,
                        }
                    }
                    BufferEntry::Fence(addrs) => Transition {
                        thread: t,
                        rule: Rule::Fence,
                        instruction: None,
                        addr: None,
                        actions: vec![Self::act(t, ActionKind::Fence { addrs: addrs.clone() })],
                        target: n,
                    },
                };
                out.push(tr);
            }
            // Stable: ties keep source order and ascending buffer addresses.
            out[start..].sort_by_key(|tr| tr.rule);
        }
        out
    }

    /// Successors under SC: stores and fences take effect in one bundled
    /// transition, so buffers stay empty.
    pub fn sc_enabled_transitions(&self, s: &MachineState) -> Vec<Transition> {
        let mut out = Vec::new();
        for (t, th) in self.threads.iter().enumerate() {
            let start = out.len();
            for &i in &th.outgoing[s.pc[t] as usize] {
                let (instr, next) = &th.instrs[i];
                self.instruction_step(s, t, i, instr, *next, true, &mut out);
            }
            out[start..].sort_by_key(|tr| tr.rule);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn instruction_step(
        &self,
        s: &MachineState,
        t: usize,
        i: usize,
        instr: &CInstr,
        next: compiled::LabelId,
        sc: bool,
        out: &mut Vec<Transition>,
    ) {
        let mut n = s.clone();
        n.pc[t] = next;
        let mk = |rule, addr, actions, target| Transition {
            thread: t,
            rule,
            instruction: Some(i),
            addr,
            actions,
            target,
        };
        match instr {
            CInstr::Load { dest, addr } => {
                let a = self.eval(addr, s);
                let (rule, v) = if let Some(v) = s.per_address(t, a).and_then(|q| q.back()) {
                    (Rule::EarlyRead1, *v)
                } else if let Some(v) = s.buf2[t].iter().rev().find_map(|e| match e {
                    BufferEntry::Store { addr, value } if *addr == a => Some(*value),
                    _ => None,
                }) {
                    (Rule::EarlyRead2, v)
                } else {
                    (Rule::ReadMemory, s.mem[a as usize])
                };
                n.regs[*dest] = v;
                out.push(mk(rule, Some(a), vec![Self::act(t, ActionKind::Load { addr: a, value: v })], n));
            }
            CInstr::Store { addr, value } => {
                let a = self.eval(addr, s);
                let v = self.eval(value, s);
                if sc {
                    n.mem[a as usize] = v;
                    let acts = vec![
                        Self::act(t, ActionKind::Issue),
                        Self::act(t, ActionKind::Store { addr: a, value: v }),
                    ];
                    out.push(mk(Rule::AtomicStore, Some(a), acts, n));
                } else if self.fits(s.per_address_len(t, a)) {
                    n.push_per_address(t, a, v);
                    out.push(mk(Rule::IssueStore, Some(a), vec![Self::act(t, ActionKind::Issue)], n));
                }
            }
            CInstr::Local { dest, expr } => {
                n.regs[*dest] = self.eval(expr, s);
                out.push(mk(Rule::LocalAssign, None, vec![Self::act(t, ActionKind::Local)], n));
            }
            CInstr::Assert(e) => {
                if self.eval(e, s) != 0 {
                    // Assertions record a local action.
                    out.push(mk(Rule::Assert, None, vec![Self::act(t, ActionKind::Local)], n));
                }
            }
            CInstr::ScFence => {
                if s.thread_buffers_empty(t) {
                    out.push(mk(Rule::ScFence, None, vec![Self::act(t, ActionKind::ScFence)], n));
                }
            }
            CInstr::Fence(addrs) => {
                let addrs: Vec<Value> = addrs.iter().map(|e| self.eval(e, s)).collect();
                if sc {
                    let acts = vec![
                        Self::act(t, ActionKind::Issue),
                        Self::act(t, ActionKind::Fence { addrs }),
                    ];
                    out.push(mk(Rule::AtomicFence, None, acts, n));
                } else if addrs.iter().all(|a| s.per_address_len(t, *a) == 0)
                    && self.fits(s.buf2[t].len())
                {
                    n.buf2[t].push_back(BufferEntry::Fence(addrs));
                    out.push(mk(Rule::IssueFence, None, vec![Self::act(t, ActionKind::Issue)], n));
                }
            }
        }
    }

    /// Pick the `choice`-th transition of [`Machine::transitions`].
    pub fn apply(&self, s: &MachineState, choice: usize) -> Result<Transition, InvalidChoice> {
        let mut ts = self.transitions(s);
        let enabled = ts.len();
        if choice < enabled {
            Ok(ts.swap_remove(choice))
        } else {
            Err(InvalidChoice { choice, enabled })
        }
    }

    /// Replay a schedule of choice indices from the initial state.
    pub fn run(&self, schedule: &[usize]) -> Result<Run, Box<StuckReport>> {
        let mut s = self.initial_state();
        let mut rec = Recorder::new(self.threads.len());
        for (index, &choice) in schedule.iter().enumerate() {
            match self.apply(&s, choice) {
                Ok(tr) => {
                    rec.record(&tr);
                    s = tr.target;
                }
                Err(e) => {
                    return Err(Box::new(StuckReport {
                        index,
                        choice,
                        enabled: e.enabled,
                        prefix: rec.into_computation(),
                        reasons: self.blocked_reasons(&s),
                        state: s,
                    }))
                }
            }
        }
        Ok(Run {
            computation: rec.into_computation(),
            state: s,
        })
    }

    /// Replay under SC regardless of how the machine was built.
    pub fn run_sc(&self, schedule: &[usize]) -> Result<Run, Box<StuckReport>> {
        self.clone().sc().run(schedule)
    }

    /// Failed premises of instructions at each thread's program counter.
    pub fn blocked_reasons(&self, s: &MachineState) -> Vec<String> {
        let mut out = Vec::new();
        let sc = self.is_sc();
        for (t, th) in self.threads.iter().enumerate() {
            let name = &self.program.threads[t].name;
            let label = &th.labels[s.pc[t] as usize];
            if th.is_terminal(s.pc[t]) {
                out.push(format!("{name}: terminated at `{label}`"));
                continue;
            }
            for &i in &th.outgoing[s.pc[t] as usize] {
                let src = &self.program.threads[t].instructions[i].instruction;
                let why = match &th.instrs[i].0 {
                    CInstr::Assert(e) if self.eval(e, s) == 0 => Some("assertion evaluates to 0".to_string()),
                    CInstr::ScFence if !s.thread_buffers_empty(t) => {
                        Some("scfence needs all buffers of the thread to be empty".to_string())
                    }
                    CInstr::Fence(addrs) if !sc => {
                        let busy: Vec<String> = addrs
                            .iter()
                            .map(|e| self.eval(e, s))
                            .filter(|a| s.per_address_len(t, *a) > 0)
                            .map(|a| self.program.value_name(a))
                            .collect();
                        if !busy.is_empty() {
                            Some(format!("issue fence needs empty per-address buffers of {}", busy.join(", ")))
                        } else if !self.fits(s.buf2[t].len()) {
                            Some("all-addresses buffer is at the bound".to_string())
                        } else {
                            None
                        }
                    }
                    CInstr::Store { addr, .. } if !sc => {
                        let a = self.eval(addr, s);
                        (!self.fits(s.per_address_len(t, a))).then(|| {
                            format!(
                                "per-address buffer of {} is at the bound",
                                self.program.value_name(a)
                            )
                        })
                    }
                    _ => None,
                };
                if let Some(why) = why {
                    out.push(format!("{name}: `{label}: {src}` blocked: {why}"));
                }
            }
        }
        out
    }

    /// Human-readable dump of a state with symbolic names.
    pub fn render_state(&self, s: &MachineState) -> String {
        let p = &self.program;
        let mut out = String::new();
        for (t, th) in self.threads.iter().enumerate() {
            let _ = write!(out, "{}: pc={}", p.threads[t].name, th.labels[s.pc[t] as usize]);
            for (k, r) in p.threads[t].registers.iter().enumerate() {
                let _ = write!(out, " {r}={}", s.regs[th.reg_range.start + k]);
            }
            for q in &s.buf1[t] {
                let vals: Vec<String> = q.values.iter().map(|v| v.to_string()).collect();
                let _ = write!(out, " buf1[{}]=[{}]", p.value_name(q.addr), vals.join(","));
            }
            if !s.buf2[t].is_empty() {
                let es: Vec<String> = s.buf2[t].iter().map(|e| e.to_string()).collect();
                let _ = write!(out, " buf2=[{}]", es.join(","));
            }
            out.push('\n');
        }
        let mem: Vec<String> = s
            .mem
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(a, v)| format!("{}={v}", p.value_name(a as Value)))
            .collect();
        let _ = writeln!(out, "mem: {}", if mem.is_empty() { "all 0".into() } else { mem.join(" ") });
        out
    }

    /// Index of the first enabled transition of `thread` using `rule`
    /// (and touching `addr`, when given).
    pub fn choice_index(
        &self,
        s: &MachineState,
        thread: usize,
        rule: Rule,
        addr: Option<Value>,
    ) -> Option<usize> {
        self.transitions(s)
            .iter()
            .position(|tr| tr.thread == thread && tr.rule == rule && (addr.is_none() || tr.addr == addr))
    }

    /// Turn a description of steps into a schedule of choice indices.
    pub fn resolve_steps(&self, steps: &[(usize, Rule, Option<Value>)]) -> Option<Vec<usize>> {
        let mut s = self.initial_state();
        let mut out = Vec::with_capacity(steps.len());
        for &(t, rule, addr) in steps {
            let i = self.choice_index(&s, t, rule, addr)?;
            s = self.apply(&s, i).ok()?.target;
            out.push(i);
        }
        Some(out)
    }

    /// Source instruction behind a transition, if any.
    pub fn instruction_of(&self, tr: &Transition) -> Option<&Instruction> {
        tr.instruction
            .map(|i| &self.program.threads[tr.thread].instructions[i].instruction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::load_program;

    pub(crate) const MP: &str = "program MessagePassing
        const d1 = 0
        const d2 = 1
        const flag = 2
        thread tw regs init l0 begin
          l0: mem[d1] <- 1; goto l1;
          l1: mem[d2] <- 1; goto l2;
          l2: mem[flag] <- 1; goto l3;
        end
        thread tr regs r init lx begin
          lx: r <- mem[flag]; goto ly;
          ly: assert r = 1; goto lz;
          lz: r <- mem[d1]; goto l;
        end";

    #[test]
    fn initial_state_of_message_passing() {
        let m = Machine::new(&load_program(MP).unwrap());
        let s = m.initial_state();
        assert_eq!(m.label(&s, 0), "l0");
        assert_eq!(m.label(&s, 1), "lx");
        assert!(s.mem.iter().all(|v| *v == 0));
        assert!(s.buffers_empty());
    }

    #[test]
    fn initial_transitions_of_message_passing() {
        let m = Machine::new(&load_program(MP).unwrap());
        let ts = m.enabled_transitions(&m.initial_state());
        let shape: Vec<(usize, Rule)> = ts.iter().map(|t| (t.thread, t.rule)).collect();
        assert_eq!(shape, vec![(0, Rule::IssueStore), (1, Rule::ReadMemory)]);
        assert_eq!(ts[1].actions[0].kind, ActionKind::Load { addr: 2, value: 0 });
    }

    #[test]
    fn early_read_after_issue() {
        let p = load_program(
            "program p thread t regs r init a begin a: mem[1] <- 1; goto b; b: r <- mem[1]; goto c; end",
        )
        .unwrap();
        let m = Machine::new(&p);
        let s = m.apply(&m.initial_state(), 0).unwrap().target;
        let ts = m.enabled_transitions(&s);
        assert_eq!(ts[0].rule, Rule::EarlyRead1);
        assert_eq!(ts[0].actions[0].kind, ActionKind::Load { addr: 1, value: 1 });
        // Once advanced, the value is found in the all-addresses buffer.
        let adv = ts.iter().position(|t| t.rule == Rule::AdvanceBuffer).unwrap();
        let s = ts[adv].target.clone();
        let ts = m.enabled_transitions(&s);
        assert_eq!(ts[0].rule, Rule::EarlyRead2);
    }

    #[test]
    fn fence_waits_for_named_per_address_buffers() {
        let p = load_program(
            "program p thread t regs init a begin a: mem[1] <- 1; goto b; b: fence 1; goto c; end",
        )
        .unwrap();
        let m = Machine::new(&p);
        let s = m.apply(&m.initial_state(), 0).unwrap().target;
        assert!(m.enabled_transitions(&s).iter().all(|t| t.rule != Rule::IssueFence));
        let s = m.apply(&s, 0).unwrap().target; // advance
        assert_eq!(m.enabled_transitions(&s)[0].rule, Rule::StoreToMemory);
        assert!(m.enabled_transitions(&s).iter().any(|t| t.rule == Rule::IssueFence));
    }

    #[test]
    fn fence_retirement_keeps_the_program_counter() {
        let p = load_program("program p thread t regs init a begin a: fence 0; goto b; end").unwrap();
        let m = Machine::new(&p);
        let s = m.apply(&m.initial_state(), 0).unwrap().target;
        assert_eq!(m.label(&s, 0), "b");
        let tr = m.apply(&s, 0).unwrap();
        assert_eq!(tr.rule, Rule::Fence);
        assert_eq!(m.label(&tr.target, 0), "b");
        assert!(tr.target.buffers_empty());
    }

    #[test]
    fn assertion_blocks_on_zero() {
        let p = load_program("program p thread t regs r init a begin a: assert r; goto b; end").unwrap();
        let m = Machine::new(&p);
        assert!(m.enabled_transitions(&m.initial_state()).is_empty());
    }

    #[test]
    fn tau_prime_replays_to_nine_actions() {
        use Rule::*;
        let m = Machine::new(&load_program(MP).unwrap());
        let steps = [
            (0, IssueStore, None),
            (0, IssueStore, None),
            (0, AdvanceBuffer, Some(1)),
            (0, StoreToMemory, None),
            (0, IssueStore, None),
            (0, AdvanceBuffer, Some(2)),
            (0, StoreToMemory, None),
            (1, ReadMemory, None),
            (1, Assert, None),
            (1, ReadMemory, None),
            (0, AdvanceBuffer, Some(0)),
            (0, StoreToMemory, None),
        ];
        let sched = m.resolve_steps(&steps).unwrap();
        let run = m.run(&sched).unwrap();
        assert_eq!(run.computation.len(), 9);
        assert!(run.computation.is_complete());
        assert!(run.computation.pairing_is_consistent());
        assert!(run.state.buffers_empty());
        assert_eq!(run.computation.issue_index()[8], Some(0));
    }

    #[test]
    fn empty_schedule_and_stuck_scfence() {
        let p = load_program(
            "program p thread t regs init a begin a: mem[0] <- 1; goto b; b: scfence; goto c; end",
        )
        .unwrap();
        let m = Machine::new(&p);
        assert!(m.run(&[]).unwrap().computation.is_empty());
        // After issuing, index 0 is the advance; there is no second choice.
        let err = m.run(&[0, 1]).unwrap_err();
        assert_eq!(err.index, 1);
        assert_eq!(err.prefix.len(), 1);
        assert!(err.reasons.iter().any(|r| r.contains("scfence")));
    }

    #[test]
    fn sc_writer_bundles_issue_and_store() {
        let p = load_program(
            "program w const d1 = 0 const d2 = 1 const flag = 2 thread tw regs init l0 begin
              l0: mem[d1] <- 1; goto l1; l1: mem[d2] <- 1; goto l2; l2: mem[flag] <- 1; goto l3; end",
        )
        .unwrap();
        let m = Machine::new(&p);
        let run = m.run_sc(&[0, 0, 0]).unwrap();
        let kinds: Vec<String> = run.computation.actions.iter().map(|a| a.kind.to_string()).collect();
        assert_eq!(kinds, ["isu", "st(0,1)", "isu", "st(1,1)", "isu", "st(2,1)"]);
        assert!(run.state.buffers_empty());
    }

    #[test]
    fn buffer_bound_disables_issue() {
        let p = load_program(
            "program p thread t regs init a begin a: mem[0] <- 1; goto b; b: mem[0] <- 1; goto c; end",
        )
        .unwrap();
        let m = Machine::new(&p).with_buffer_bound(1);
        let s = m.apply(&m.initial_state(), 0).unwrap().target;
        assert!(m.enabled_transitions(&s).iter().all(|t| t.rule != Rule::IssueStore));
        assert!(m.blocked_reasons(&s).iter().any(|r| r.contains("bound")));
    }
}
