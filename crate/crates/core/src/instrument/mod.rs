//! Source-to-source translation of a program and an attack into a program
//! whose SC runs can set the `suc` flag iff the attack is feasible.
//!
//! The extended domain is laid out as `[0, N)` base addresses, `[N, 2N)` the
//! delayed values `d(x)`, `[2N, 3N)` the access levels `hb_a(x)`, then the
//! flags `hb = 3N` and `suc = 3N + 1`. Delayed values are stored as `v + 1`
//! so 0 means "nothing delayed".

mod attack;
mod attacker;
mod helper;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::syntax::{is_keyword, validate, BinOp, Expr, Instruction, LabeledInstruction, Program, Symbol, Thread, Value};

pub use attack::{enumerate_attacks, Attack, InstrumentError};

pub const LEVEL_LOAD: Value = 1;
pub const LEVEL_STORE: Value = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentMode {
    Locality,
    Singularity,
}

impl std::str::FromStr for InstrumentMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "locality" => Ok(InstrumentMode::Locality),
            "singularity" => Ok(InstrumentMode::Singularity),
            _ => Err(format!("unknown instrumentation mode `{s}`")),
        }
    }
}

/// Where the auxiliary addresses live in the extended domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressLayout {
    /// Size of the source domain.
    pub base: Value,
    pub delayed_offset: Value,
    pub level_offset: Value,
    pub hb: Value,
    pub suc: Value,
    /// Size of the extended domain. A multiple of `base`, so lifted
    /// arithmetic can reduce modulo `base` exactly.
    pub domain_size: Value,
}

impl AddressLayout {
    pub fn new(base: Value) -> Self {
        let need = 3 * base + 2;
        AddressLayout {
            base,
            delayed_offset: base,
            level_offset: 2 * base,
            hb: 3 * base,
            suc: 3 * base + 1,
            domain_size: need.div_ceil(base) * base,
        }
    }

    pub fn is_delayed_address(&self, a: Value) -> bool {
        (self.delayed_offset..self.level_offset).contains(&a)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub attack: Attack,
    pub attack_labels: String,
    pub mode: InstrumentMode,
    pub address_map: AddressLayout,
    pub source_instructions: usize,
    pub instrumented_instructions: usize,
    pub size_ratio: f64,
    /// Instructions whose address expression targets `d(·)`.
    pub delayed_value_accesses: usize,
}

#[derive(Debug, Clone)]
pub struct InstrumentedProgram {
    pub program: Program,
    pub manifest: Manifest,
}

impl InstrumentedProgram {
    pub fn suc(&self) -> Value {
        self.manifest.address_map.suc
    }
}

/// Names in use in one output thread: program symbols, registers and labels
/// share no namespace in the syntax, but fresh names must not shadow any of
/// them or a keyword.
pub(crate) struct Names {
    taken: HashSet<String>,
}

impl Names {
    fn new(p: &Program, extra_symbols: &[&str], t: &Thread) -> Self {
        let mut taken: HashSet<String> = p.symbols.iter().map(|s| s.name.clone()).collect();
        taken.extend(extra_symbols.iter().map(|s| s.to_string()));
        taken.extend(t.registers.iter().cloned());
        for li in &t.instructions {
            taken.insert(li.label.clone());
            taken.insert(li.next.clone());
        }
        taken.insert(t.init_label.clone());
        if let Some(ex) = &t.exit_labels {
            taken.extend(ex.iter().cloned());
        }
        Names { taken }
    }

    pub fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut k = 1;
        while self.taken.contains(&name) || is_keyword(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.taken.insert(name.clone());
        name
    }
}

/// Every label a thread mentions, in first-occurrence order.
fn all_labels(t: &Thread) -> Vec<String> {
    let mut out = vec![t.init_label.clone()];
    for li in &t.instructions {
        for l in [&li.label, &li.next] {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
    }
    out
}

/// Output buffer for one thread plus the helpers used by the translations.
pub(crate) struct Emitter<'a> {
    pub names: Names,
    pub layout: &'a AddressLayout,
    pub hb: Expr,
    pub suc: Expr,
    pub out: Vec<LabeledInstruction>,
    pub delayed_accesses: usize,
}

impl<'a> Emitter<'a> {
    fn new(names: Names, layout: &'a AddressLayout, sym: &Syms) -> Self {
        Emitter {
            names,
            layout,
            hb: Expr::var(&sym.hb),
            suc: Expr::var(&sym.suc),
            out: Vec::new(),
            delayed_accesses: 0,
        }
    }

    /// A fresh copy label for each label of `t`.
    pub fn copy_labels(&mut self, t: &Thread) -> BTreeMap<String, String> {
        all_labels(t)
            .into_iter()
            .map(|l| {
                let c = self.names.fresh(&format!("{l}'"));
                (l, c)
            })
            .collect()
    }

    pub fn push(&mut self, label: &str, instruction: Instruction, next: &str) {
        if let Instruction::Load { addr, .. } | Instruction::Store { addr, .. } = &instruction {
            if self.targets_delayed(addr) {
                self.delayed_accesses += 1;
            }
        }
        self.out.push(LabeledInstruction {
            label: label.into(),
            instruction,
            next: next.into(),
        });
    }

    fn targets_delayed(&self, addr: &Expr) -> bool {
        match addr {
            Expr::Const(c) => self.layout.is_delayed_address(*c),
            Expr::Binary(BinOp::Add, a, _) => matches!(**a, Expr::Const(c) if c == self.layout.delayed_offset),
            _ => false,
        }
    }

    /// Emit `instrs` in sequence from `from` to `to` through fresh labels.
    pub fn chain(&mut self, from: &str, instrs: Vec<Instruction>, to: &str) {
        let n = instrs.len();
        assert!(n > 0, "empty chain");
        let mut cur = from.to_string();
        for (i, ins) in instrs.into_iter().enumerate() {
            let next = if i + 1 == n {
                to.to_string()
            } else {
                self.names.fresh(&format!("{from}_"))
            };
            self.push(&cur, ins, &next);
            cur = next;
        }
    }

    pub fn delayed(&self, e: &Expr) -> Expr {
        offset(self.layout.delayed_offset, e)
    }

    pub fn level(&self, e: &Expr) -> Expr {
        offset(self.layout.level_offset, e)
    }
}

pub(crate) struct Syms {
    hb: String,
    suc: String,
}

fn offset(k: Value, e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(k + c),
        _ => Expr::bin(BinOp::Add, Expr::Const(k), e.clone()),
    }
}

pub(crate) fn load(dest: &str, addr: Expr) -> Instruction {
    Instruction::Load {
        dest: dest.into(),
        addr,
    }
}

pub(crate) fn store(addr: Expr, value: Expr) -> Instruction {
    Instruction::Store { addr, value }
}

pub(crate) fn local(dest: &str, expr: Expr) -> Instruction {
    Instruction::Local {
        dest: dest.into(),
        expr,
    }
}

pub(crate) fn assert_cmp(op: BinOp, a: Expr, b: Expr) -> Instruction {
    Instruction::Assert(Expr::bin(op, a, b))
}

/// Re-express `e` over the extended domain so it evaluates to the same
/// value it had over `0..n`.
pub(crate) fn lift(e: &Expr, n: Value) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Not(x) => {
            let inner = Expr::not(lift(x, n));
            if n < 2 {
                Expr::bin(BinOp::Rem, inner, Expr::Const(n))
            } else {
                inner
            }
        }
        Expr::Binary(op, a, b) => {
            let inner = Expr::bin(*op, lift(a, n), lift(b, n));
            let wraps = matches!(op, BinOp::Add | BinOp::Sub | BinOp::Mul) || (op.is_comparison() && n < 2);
            if wraps {
                Expr::bin(BinOp::Rem, inner, Expr::Const(n))
            } else {
                inner
            }
        }
    }
}

pub(crate) fn lift_instruction(i: &Instruction, n: Value) -> Instruction {
    match i {
        Instruction::Load { dest, addr } => load(dest, lift(addr, n)),
        Instruction::Store { addr, value } => store(lift(addr, n), lift(value, n)),
        Instruction::Local { dest, expr } => local(dest, lift(expr, n)),
        Instruction::Assert(e) => Instruction::Assert(lift(e, n)),
        Instruction::ScFence => Instruction::ScFence,
        Instruction::Fence(addrs) => Instruction::Fence(addrs.iter().map(|a| lift(a, n)).collect()),
    }
}

/// Translate `p` for `attack`: the attacker thread per `mode`, every other
/// thread as a helper.
pub fn instrument_program(
    p: &Program,
    attack: &Attack,
    mode: InstrumentMode,
) -> Result<InstrumentedProgram, InstrumentError> {
    attack.validate(p)?;
    if mode == InstrumentMode::Singularity && p.has_fence() {
        return Err(InstrumentError::PreconditionViolated(
            "the singularity translation requires a program without fence".into(),
        ));
    }
    let layout = AddressLayout::new(p.domain_size);
    let taken: HashSet<&str> = p
        .symbols
        .iter()
        .map(|s| s.name.as_str())
        .chain(p.threads.iter().flat_map(|t| t.registers.iter().map(String::as_str)))
        .collect();
    let fresh_sym = |base: &str| {
        let mut name = base.to_string();
        let mut k = 1;
        while taken.contains(name.as_str()) || is_keyword(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        name
    };
    let sym = Syms {
        hb: fresh_sym("hb"),
        suc: fresh_sym("suc"),
    };

    let mut threads = Vec::new();
    let mut delayed = 0;
    for t in &p.threads {
        let names = Names::new(p, &[&sym.hb, &sym.suc], t);
        let mut em = Emitter::new(names, &layout, &sym);
        let registers = if t.name == attack.attacker {
            match mode {
                InstrumentMode::Locality => attacker::locality(&mut em, t, attack)?,
                InstrumentMode::Singularity => attacker::singularity(&mut em, t, attack)?,
            }
        } else {
            helper::helper(&mut em, t)
        };
        delayed += em.delayed_accesses;
        threads.push(Thread {
            name: t.name.clone(),
            registers,
            init_label: t.init_label.clone(),
            exit_labels: None,
            instructions: em.out,
        });
    }

    let mut symbols = p.symbols.clone();
    symbols.push(Symbol {
        name: sym.hb,
        value: layout.hb,
    });
    symbols.push(Symbol {
        name: sym.suc,
        value: layout.suc,
    });
    let program = Program {
        name: format!("{}_{}", p.name, mode_name(mode)),
        domain_size: layout.domain_size,
        symbols,
        threads,
    };
    debug_assert!(validate(&program).is_empty(), "{:?}", validate(&program));
    let source = p.instruction_count();
    let emitted = program.instruction_count();
    Ok(InstrumentedProgram {
        manifest: Manifest {
            attack: attack.clone(),
            attack_labels: attack.describe(p),
            mode,
            address_map: layout,
            source_instructions: source,
            instrumented_instructions: emitted,
            size_ratio: emitted as f64 / source.max(1) as f64,
            delayed_value_accesses: delayed,
        },
        program,
    })
}

fn mode_name(m: InstrumentMode) -> &'static str {
    match m {
        InstrumentMode::Locality => "locality",
        InstrumentMode::Singularity => "singularity",
    }
}

#[cfg(test)]
mod tests;
