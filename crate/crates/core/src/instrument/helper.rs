use super::{assert_cmp, lift, lift_instruction, load, local, store, Emitter, LEVEL_LOAD, LEVEL_STORE};
use crate::syntax::{BinOp, Expr, Instruction, Thread};

/// Helper translation: the original code runs while `hb` is clear; a load
/// from an address at level `sta` or a store to an address at level at least
/// `lda` moves the helper into a copy that maintains access levels.
pub(crate) fn helper(em: &mut Emitter, t: &Thread) -> Vec<String> {
    let n = em.layout.base;
    let addr_reg = em.names.fresh("r_addr");
    let tmp = em.names.fresh("r_tmp");
    let copy = em.copy_labels(t);
    let tv = || Expr::var(&tmp);

    // One guard per label covers all of its alternatives.
    for label in t.defined_labels() {
        let guarded = em.names.fresh(&format!("{label}_"));
        em.chain(
            label,
            vec![load(&tmp, em.hb.clone()), assert_cmp(BinOp::Eq, tv(), Expr::Const(0))],
            &guarded,
        );
        for li in t.instructions.iter().filter(|li| li.label == label) {
            em.push(&guarded, lift_instruction(&li.instruction, n), &li.next);
        }
    }

    for li in &t.instructions {
        let alone = t.instructions.iter().filter(|o| o.label == li.label).count() == 1;
        match &li.instruction {
            Instruction::Load { dest, addr } => {
                let e = lift(addr, n);
                let mut seq = vec![
                    load(&tmp, em.level(&e)),
                    assert_cmp(BinOp::Eq, tv(), Expr::Const(LEVEL_STORE)),
                ];
                // With a single instruction at the label, the copy performs
                // exactly the remaining steps (its level update is a no-op at sta).
                if alone {
                    em.chain(&li.label, seq, &copy[&li.label]);
                } else {
                    seq.push(load(dest, e));
                    em.chain(&li.label, seq, &copy[&li.next]);
                }
            }
            Instruction::Store { addr, value } => {
                let e1 = lift(addr, n);
                let mut seq = vec![
                    load(&tmp, em.level(&e1)),
                    assert_cmp(BinOp::Le, Expr::Const(LEVEL_LOAD), tv()),
                ];
                if alone {
                    em.chain(&li.label, seq, &copy[&li.label]);
                } else {
                    seq.push(store(e1.clone(), lift(value, n)));
                    seq.push(store(em.level(&e1), Expr::Const(LEVEL_STORE)));
                    em.chain(&li.label, seq, &copy[&li.next]);
                }
            }
            _ => {}
        }
    }

    for li in &t.instructions {
        let (from, to) = (&copy[&li.label], &copy[&li.next]);
        match &li.instruction {
            Instruction::Load { dest, addr } => {
                let e = lift(addr, n);
                // The address must survive the load into `dest`.
                let (mut seq, at) = if e.mentions(dest) {
                    (vec![local(&addr_reg, e)], Expr::var(&addr_reg))
                } else {
                    (vec![], e)
                };
                let raised = Expr::bin(BinOp::Add, tv(), Expr::bin(BinOp::Eq, tv(), Expr::Const(0)));
                seq.push(load(dest, at.clone()));
                seq.push(load(&tmp, em.level(&at)));
                seq.push(store(em.level(&at), raised));
                em.chain(from, seq, to);
            }
            Instruction::Store { addr, value } => {
                let e1 = lift(addr, n);
                em.chain(
                    from,
                    vec![
                        store(e1.clone(), lift(value, n)),
                        store(em.level(&e1), Expr::Const(LEVEL_STORE)),
                    ],
                    to,
                );
            }
            other => em.push(from, lift_instruction(other, n), to),
        }
    }

    let mut registers = t.registers.clone();
    registers.extend([addr_reg, tmp]);
    registers
}
