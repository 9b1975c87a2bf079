use std::fmt;

use serde::{Deserialize, Serialize};

/// Element of the program domain. Addresses and data values share the
/// range `0..domain_size`.
pub type Value = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub domain_size: Value,
    /// Named domain elements, usually used as addresses (`const flag = 2`).
    pub symbols: Vec<Symbol>,
    pub threads: Vec<Thread>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Thread {
    pub name: String,
    pub registers: Vec<String>,
    pub init_label: String,
    /// Explicitly declared terminal labels. When present, every goto target
    /// without instructions must be listed here.
    pub exit_labels: Option<Vec<String>>,
    pub instructions: Vec<LabeledInstruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledInstruction {
    pub label: String,
    pub instruction: Instruction,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    Load { dest: String, addr: Expr },
    Store { addr: Expr, value: Expr },
    Local { dest: String, expr: Expr },
    Assert(Expr),
    ScFence,
    Fence(Vec<Expr>),
}

impl Instruction {
    pub fn is_store(&self) -> bool {
        matches!(self, Instruction::Store { .. })
    }

    pub fn is_load(&self) -> bool {
        matches!(self, Instruction::Load { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
}

impl BinOp {
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Rem => 3,
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Rem => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 1
    }
}

/// Expression over registers, named constants and literals.
///
/// Arithmetic wraps modulo the domain size, comparisons and `!` yield 1 or 0,
/// and `a % 0` is 0, so evaluation is total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Const(Value),
    /// A register of the enclosing thread or a program symbol.
    Var(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Names referenced by the expression, in syntactic order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(v),
            Expr::Not(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.vars().contains(&name)
    }

    pub(crate) fn literals(&self, out: &mut Vec<Value>) {
        match self {
            Expr::Const(c) => out.push(*c),
            Expr::Var(_) => {}
            Expr::Not(e) => e.literals(out),
            Expr::Binary(_, a, b) => {
                a.literals(out);
                b.literals(out);
            }
        }
    }
}

impl Program {
    pub fn thread(&self, name: &str) -> Option<&Thread> {
        self.threads.iter().find(|t| t.name == name)
    }

    pub fn symbol(&self, name: &str) -> Option<Value> {
        self.symbols.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn instruction_count(&self) -> usize {
        self.threads.iter().map(|t| t.instructions.len()).sum()
    }

    pub fn has_fence(&self) -> bool {
        self.threads.iter().any(|t| {
            t.instructions
                .iter()
                .any(|li| matches!(li.instruction, Instruction::Fence(_)))
        })
    }

    /// Name of a domain element for display purposes.
    pub fn value_name(&self, v: Value) -> String {
        self.symbols
            .iter()
            .find(|s| s.value == v)
            .map(|s| s.name.clone())
            .unwrap_or_else(|| v.to_string())
    }
}

impl Thread {
    /// Labels that carry at least one instruction, in first-occurrence order.
    pub fn defined_labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for li in &self.instructions {
            if !out.contains(&li.label.as_str()) {
                out.push(&li.label);
            }
        }
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::syntax::printer::write_expr(f, self, 0)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Load { dest, addr } => write!(f, "{dest} <- mem[{addr}]"),
            Instruction::Store { addr, value } => write!(f, "mem[{addr}] <- {value}"),
            Instruction::Local { dest, expr } => write!(f, "{dest} <- {expr}"),
            Instruction::Assert(e) => write!(f, "assert {e}"),
            Instruction::ScFence => write!(f, "scfence"),
            Instruction::Fence(addrs) => {
                write!(f, "fence")?;
                for (i, a) in addrs.iter().enumerate() {
                    if i == 0 {
                        write!(f, " {a}")?;
                    } else {
                        write!(f, ", {a}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for LabeledInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}; goto {};", self.label, self.instruction, self.next)
    }
}
