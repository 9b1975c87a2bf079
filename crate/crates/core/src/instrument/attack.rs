use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Instruction, Program};

/// A thread, one of its store instructions whose instance gets delayed, and
/// one of its store or load instructions whose instance is the attacker's
/// last action. Instructions are indices into the thread's instruction list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attack {
    pub attacker: String,
    pub stinst: usize,
    pub lastinst: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("invalid attack: {0}")]
    InvalidAttack(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

impl Attack {
    /// `thread:stinst-label:lastinst-label`, resolving to instruction indices
    /// via the first instruction with that label of the right kind.
    pub fn describe(&self, p: &Program) -> String {
        let t = p.thread(&self.attacker);
        let lab = |i: usize| {
            t.and_then(|t| t.instructions.get(i))
                .map_or_else(|| format!("#{i}"), |li| li.label.clone())
        };
        format!("{}:{}:{}", self.attacker, lab(self.stinst), lab(self.lastinst))
    }

    /// Inverse of [`Attack::describe`]. Labels may also be given as `#index`.
    pub fn parse(p: &Program, s: &str) -> Result<Attack, InstrumentError> {
        let parts: Vec<&str> = s.split(':').collect();
        let [thread, st, last] = parts[..] else {
            return Err(InstrumentError::InvalidAttack(format!(
                "`{s}` is not of the form thread:stinst:lastinst"
            )));
        };
        let t = p
            .thread(thread)
            .ok_or_else(|| InstrumentError::InvalidAttack(format!("no thread `{thread}`")))?;
        let find = |lab: &str, ok: fn(&Instruction) -> bool| -> Result<usize, InstrumentError> {
            if let Some(i) = lab.strip_prefix('#') {
                return i
                    .parse()
                    .map_err(|_| InstrumentError::InvalidAttack(format!("bad index `{lab}`")));
            }
            t.instructions
                .iter()
                .position(|li| li.label == lab && ok(&li.instruction))
                .ok_or_else(|| {
                    InstrumentError::InvalidAttack(format!("no suitable instruction at label `{lab}` in `{thread}`"))
                })
        };
        let a = Attack {
            attacker: thread.to_string(),
            stinst: find(st, Instruction::is_store)?,
            lastinst: find(last, |i| i.is_store() || i.is_load())?,
        };
        a.validate(p)?;
        Ok(a)
    }

    pub fn validate(&self, p: &Program) -> Result<(), InstrumentError> {
        let t = p
            .thread(&self.attacker)
            .ok_or_else(|| InstrumentError::InvalidAttack(format!("no thread `{}`", self.attacker)))?;
        match t.instructions.get(self.stinst) {
            Some(li) if li.instruction.is_store() => {}
            _ => {
                return Err(InstrumentError::InvalidAttack(format!(
                    "instruction #{} of `{}` is not a store",
                    self.stinst, self.attacker
                )))
            }
        }
        match t.instructions.get(self.lastinst) {
            Some(li) if li.instruction.is_store() || li.instruction.is_load() => Ok(()),
            _ => Err(InstrumentError::InvalidAttack(format!(
                "instruction #{} of `{}` is neither a store nor a load",
                self.lastinst, self.attacker
            ))),
        }
    }
}

/// Every (thread, store, store-or-load) triple, by thread then instruction
/// order.
pub fn enumerate_attacks(p: &Program) -> Vec<Attack> {
    let mut out = Vec::new();
    for t in &p.threads {
        for (s, st) in t.instructions.iter().enumerate() {
            if !st.instruction.is_store() {
                continue;
            }
            for (l, last) in t.instructions.iter().enumerate() {
                if last.instruction.is_store() || last.instruction.is_load() {
                    out.push(Attack {
                        attacker: t.name.clone(),
                        stinst: s,
                        lastinst: l,
                    });
                }
            }
        }
    }
    out
}
