use std::collections::HashMap;

use crate::syntax::{BinOp, Expr, Instruction, Program, Value};

pub(crate) type LabelId = u32;

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Const(Value),
    Reg(usize),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub(crate) fn eval(&self, regs: &[Value], domain: Value) -> Value {
        let d = domain as u64;
        match self {
            CExpr::Const(c) => *c,
            CExpr::Reg(r) => regs[*r],
            CExpr::Not(e) => ((e.eval(regs, domain) == 0) as u64 % d) as Value,
            CExpr::Bin(op, a, b) => {
                let a = a.eval(regs, domain) as u64;
                let b = b.eval(regs, domain) as u64;
                let v = match op {
                    BinOp::Add => (a + b) % d,
                    BinOp::Sub => (a + d - b % d) % d,
                    BinOp::Mul => (a * b) % d,
                    BinOp::Rem => {
                        if b == 0 {
                            0
                        } else {
                            a % b
                        }
                    }
                    BinOp::Eq => (a == b) as u64 % d,
                    BinOp::Ne => (a != b) as u64 % d,
                    BinOp::Lt => (a < b) as u64 % d,
                    BinOp::Le => (a <= b) as u64 % d,
                };
                v as Value
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CInstr {
    Load { dest: usize, addr: CExpr },
    Store { addr: CExpr, value: CExpr },
    Local { dest: usize, expr: CExpr },
    Assert(CExpr),
    ScFence,
    Fence(Vec<CExpr>),
}

#[derive(Debug, Clone)]
pub(crate) struct CThread {
    pub labels: Vec<String>,
    pub init: LabelId,
    /// Instruction indices per label id, in source order.
    pub outgoing: Vec<Vec<usize>>,
    pub instrs: Vec<(CInstr, LabelId)>,
    pub reg_range: std::ops::Range<usize>,
}

impl CThread {
    pub(crate) fn is_terminal(&self, l: LabelId) -> bool {
        self.outgoing[l as usize].is_empty()
    }
}

/// Lower a validated program. Panics on unresolved names, which `validate`
/// rules out.
pub(crate) fn compile(p: &Program) -> Vec<CThread> {
    let mut offset = 0;
    p.threads
        .iter()
        .map(|t| {
            let regs: HashMap<&str, usize> = t
                .registers
                .iter()
                .enumerate()
                .map(|(i, r)| (r.as_str(), offset + i))
                .collect();
            let reg_range = offset..offset + t.registers.len();
            offset += t.registers.len();

            let mut labels: Vec<String> = Vec::new();
            let mut ids: HashMap<String, LabelId> = HashMap::new();
            let mut intern = |l: &str, labels: &mut Vec<String>| -> LabelId {
                *ids.entry(l.to_string()).or_insert_with(|| {
                    labels.push(l.to_string());
                    (labels.len() - 1) as LabelId
                })
            };
            let init = intern(&t.init_label, &mut labels);
            let mut instrs = Vec::new();
            let mut from = Vec::new();
            for li in &t.instructions {
                let l = intern(&li.label, &mut labels);
                let next = intern(&li.next, &mut labels);
                let ce = |e: &Expr| compile_expr(e, &regs, p);
                let ci = match &li.instruction {
                    Instruction::Load { dest, addr } => CInstr::Load {
                        dest: regs[dest.as_str()],
                        addr: ce(addr),
                    },
                    Instruction::Store { addr, value } => CInstr::Store {
                        addr: ce(addr),
                        value: ce(value),
                    },
                    Instruction::Local { dest, expr } => CInstr::Local {
                        dest: regs[dest.as_str()],
                        expr: ce(expr),
                    },
                    Instruction::Assert(e) => CInstr::Assert(ce(e)),
                    Instruction::ScFence => CInstr::ScFence,
                    Instruction::Fence(addrs) => CInstr::Fence(addrs.iter().map(ce).collect()),
                };
                instrs.push((ci, next));
                from.push(l);
            }
            let mut outgoing = vec![Vec::new(); labels.len()];
            for (i, l) in from.into_iter().enumerate() {
                outgoing[l as usize].push(i);
            }
            CThread {
                labels,
                init,
                outgoing,
                instrs,
                reg_range,
            }
        })
        .collect()
}

fn compile_expr(e: &Expr, regs: &HashMap<&str, usize>, p: &Program) -> CExpr {
    match e {
        Expr::Const(c) => CExpr::Const(*c),
        Expr::Var(v) => match regs.get(v.as_str()) {
            Some(&r) => CExpr::Reg(r),
            None => CExpr::Const(
                p.symbol(v)
                    .unwrap_or_else(|| panic!("unresolved name `{v}`; validate the program first")),
            ),
        },
        Expr::Not(e) => CExpr::Not(Box::new(compile_expr(e, regs, p))),
        Expr::Binary(op, a, b) => CExpr::Bin(
            *op,
            Box::new(compile_expr(a, regs, p)),
            Box::new(compile_expr(b, regs, p)),
        ),
    }
}

/// Evaluate a source expression under a register valuation given by name.
/// Intended for tests and tooling; the machine uses the compiled form.
pub fn eval_expr(
    p: &Program,
    e: &Expr,
    regs: &HashMap<String, Value>,
) -> Option<Value> {
    let names: Vec<&String> = regs.keys().collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let vals: Vec<Value> = names.iter().map(|n| regs[*n]).collect();
    fn lower(e: &Expr, index: &HashMap<&str, usize>, p: &Program) -> Option<CExpr> {
        Some(match e {
            Expr::Const(c) => CExpr::Const(*c),
            Expr::Var(v) => match index.get(v.as_str()) {
                Some(&i) => CExpr::Reg(i),
                None => CExpr::Const(p.symbol(v)?),
            },
            Expr::Not(e) => CExpr::Not(Box::new(lower(e, index, p)?)),
            Expr::Binary(op, a, b) => {
                CExpr::Bin(*op, Box::new(lower(a, index, p)?), Box::new(lower(b, index, p)?))
            }
        })
    }
    Some(lower(e, &index, p)?.eval(&vals, p.domain_size))
}
