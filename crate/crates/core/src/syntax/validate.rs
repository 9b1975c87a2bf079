use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::ast::*;

/// Which well-formedness rule a [`Diagnostic`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    DomainEmpty,
    DuplicateThread,
    DuplicateSymbol,
    SymbolOutOfDomain,
    DuplicateRegister,
    RegisterShadowsSymbol,
    UndeclaredName,
    UndeclaredRegister,
    LiteralOutOfDomain,
    UndefinedInitLabel,
    UndefinedLabel,
    EmptyFence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub thread: Option<String>,
    pub label: Option<String>,
    pub rule: RuleId,
    pub message: String,
}

/// Check the well-formedness rules of a parsed program. An empty result means
/// every expression resolves and evaluates under any register valuation.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let global = |rule, message: String| Diagnostic {
        thread: None,
        label: None,
        rule,
        message,
    };

    if p.domain_size == 0 {
        out.push(global(RuleId::DomainEmpty, "domain must contain at least the value 0".into()));
    }
    let mut seen = HashSet::new();
    for s in &p.symbols {
        if !seen.insert(s.name.as_str()) {
            out.push(global(
                RuleId::DuplicateSymbol,
                format!("constant `{}` is declared twice", s.name),
            ));
        }
        if s.value >= p.domain_size {
            out.push(global(
                RuleId::SymbolOutOfDomain,
                format!(
                    "constant `{}` = {} is outside the domain 0..{}",
                    s.name, s.value, p.domain_size
                ),
            ));
        }
    }
    let mut seen = HashSet::new();
    for t in &p.threads {
        if !seen.insert(t.name.as_str()) {
            out.push(Diagnostic {
                thread: Some(t.name.clone()),
                label: None,
                rule: RuleId::DuplicateThread,
                message: format!("thread `{}` is declared twice", t.name),
            });
        }
        validate_thread(p, t, &mut out);
    }
    out
}

fn validate_thread(p: &Program, t: &Thread, out: &mut Vec<Diagnostic>) {
    let diag = |label: Option<&str>, rule, message: String| Diagnostic {
        thread: Some(t.name.clone()),
        label: label.map(str::to_string),
        rule,
        message,
    };

    let mut regs = HashSet::new();
    for r in &t.registers {
        if !regs.insert(r.as_str()) {
            out.push(diag(None, RuleId::DuplicateRegister, format!("register `{r}` is declared twice")));
        }
        if p.symbol(r).is_some() {
            out.push(diag(
                None,
                RuleId::RegisterShadowsSymbol,
                format!("register `{r}` has the same name as a constant"),
            ));
        }
    }

    let defined: HashSet<&str> = t.instructions.iter().map(|li| li.label.as_str()).collect();
    if !t.instructions.is_empty() && !defined.contains(t.init_label.as_str()) {
        out.push(diag(
            Some(&t.init_label),
            RuleId::UndefinedInitLabel,
            format!("initial label `{}` has no instruction", t.init_label),
        ));
    }
    if let Some(exits) = &t.exit_labels {
        let exits: HashSet<&str> = exits.iter().map(String::as_str).collect();
        let mut reported = BTreeSet::new();
        for li in &t.instructions {
            let target = li.next.as_str();
            if !defined.contains(target) && !exits.contains(target) && reported.insert(target) {
                out.push(diag(
                    Some(target),
                    RuleId::UndefinedLabel,
                    format!("goto target `{target}` has no instruction and is not an exit label"),
                ));
            }
        }
    }

    for li in &t.instructions {
        let label = Some(li.label.as_str());
        let (exprs, dest): (Vec<&Expr>, Option<&String>) = match &li.instruction {
            Instruction::Load { dest, addr } => (vec![addr], Some(dest)),
            Instruction::Store { addr, value } => (vec![addr, value], None),
            Instruction::Local { dest, expr } => (vec![expr], Some(dest)),
            Instruction::Assert(e) => (vec![e], None),
            Instruction::ScFence => (vec![], None),
            Instruction::Fence(addrs) => {
                if addrs.is_empty() {
                    out.push(diag(label, RuleId::EmptyFence, "fence lists no address".into()));
                }
                (addrs.iter().collect(), None)
            }
        };
        for e in exprs {
            for v in e.vars() {
                if !regs.contains(v) && p.symbol(v).is_none() {
                    out.push(diag(
                        label,
                        RuleId::UndeclaredName,
                        format!("`{v}` is neither a register of `{}` nor a constant", t.name),
                    ));
                }
            }
            let mut lits = Vec::new();
            e.literals(&mut lits);
            for c in lits {
                if c >= p.domain_size {
                    out.push(diag(
                        label,
                        RuleId::LiteralOutOfDomain,
                        format!("literal {c} is outside the domain 0..{}", p.domain_size),
                    ));
                }
            }
        }
        if let Some(dest) = dest {
            if !regs.contains(dest.as_str()) {
                out.push(diag(
                    label,
                    RuleId::UndeclaredRegister,
                    format!("assignment to undeclared register `{dest}`"),
                ));
            }
        }
    }
}
