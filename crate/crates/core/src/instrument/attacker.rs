use super::{
    assert_cmp, lift, lift_instruction, load, local, store, Attack, Emitter, InstrumentError, LEVEL_LOAD,
    LEVEL_STORE,
};
use crate::syntax::{BinOp, Expr, Instruction, Thread};

/// Registers added to the attacker.
struct Regs {
    addr: String,
    /// `r_fence` for locality, `r_delayval` for singularity.
    extra: String,
    tmp: String,
}

fn one() -> Expr {
    Expr::Const(1)
}

fn zero() -> Expr {
    Expr::Const(0)
}

/// Phase 1 (the original code), the switch at `stinst`, and the wait region
/// shared by both attackers. Returns the register list.
fn frame(
    em: &mut Emitter,
    t: &Thread,
    extra: &str,
    body: impl FnOnce(&mut Emitter, &Regs, &std::collections::BTreeMap<String, String>, &str) -> Result<(), InstrumentError>,
) -> Result<Vec<String>, InstrumentError> {
    let n = em.layout.base;
    let regs = Regs {
        addr: em.names.fresh("r_attackaddr"),
        extra: em.names.fresh(extra),
        tmp: em.names.fresh("r_tmp"),
    };
    let copy = em.copy_labels(t);
    let wait = em.names.fresh("wait");
    let done = em.names.fresh("done");

    for li in &t.instructions {
        em.push(&li.label, lift_instruction(&li.instruction, n), &li.next);
    }
    body(em, &regs, &copy, &wait)?;
    em.chain(
        &wait,
        vec![
            load(&regs.tmp, em.level(&Expr::var(&regs.addr))),
            assert_cmp(BinOp::Ne, Expr::var(&regs.tmp), zero()),
            store(em.suc.clone(), one()),
        ],
        &done,
    );
    let mut registers = t.registers.clone();
    registers.extend([regs.addr, regs.extra, regs.tmp]);
    Ok(registers)
}

fn store_parts(i: &Instruction, n: u32) -> (Expr, Expr) {
    match i {
        Instruction::Store { addr, value } => (lift(addr, n), lift(value, n)),
        _ => unreachable!("validated attack"),
    }
}

fn encoded(e: Expr) -> Expr {
    Expr::bin(BinOp::Add, e, one())
}

/// Attacker for locality: delayed stores live in `d(·)`, a delayed fence
/// sets `r_fence` so later stores must be delayed too.
pub(crate) fn locality(em: &mut Emitter, t: &Thread, a: &Attack) -> Result<Vec<String>, InstrumentError> {
    let n = em.layout.base;
    frame(em, t, "r_fence", |em, r, copy, wait| {
        let tmp = || Expr::var(&r.tmp);
        let fence_clear = || assert_cmp(BinOp::Eq, Expr::var(&r.extra), zero());

        let st = &t.instructions[a.stinst];
        let (e1, e2) = store_parts(&st.instruction, n);
        em.chain(
            &st.label,
            vec![store(em.delayed(&e1), encoded(e2)), local(&r.addr, e1)],
            &copy[&st.next],
        );

        let last = &t.instructions[a.lastinst];
        let from = &copy[&last.label];
        match &last.instruction {
            Instruction::Load { addr, .. } => {
                let e = lift(addr, n);
                em.chain(
                    from,
                    vec![
                        load(&r.tmp, em.delayed(&e)),
                        assert_cmp(BinOp::Eq, tmp(), zero()),
                        store(em.hb.clone(), one()),
                        store(em.level(&e), Expr::Const(LEVEL_LOAD)),
                    ],
                    wait,
                );
            }
            Instruction::Store { .. } => {
                let (e1, e2) = store_parts(&last.instruction, n);
                em.chain(
                    from,
                    vec![
                        fence_clear(),
                        load(&r.tmp, em.delayed(&e1)),
                        assert_cmp(BinOp::Eq, tmp(), zero()),
                        store(e1.clone(), e2),
                        store(em.hb.clone(), one()),
                        store(em.level(&e1), Expr::Const(LEVEL_STORE)),
                    ],
                    wait,
                );
            }
            _ => unreachable!("validated attack"),
        }

        for li in &t.instructions {
            let (from, to) = (&copy[&li.label], &copy[&li.next]);
            match &li.instruction {
                Instruction::Load { dest, addr } => {
                    let e = lift(addr, n);
                    let mid = em.names.fresh(&format!("{from}_"));
                    em.push(from, load(&r.tmp, em.delayed(&e)), &mid);
                    em.chain(&mid, vec![assert_cmp(BinOp::Eq, tmp(), zero()), load(dest, e)], to);
                    em.chain(
                        &mid,
                        vec![
                            assert_cmp(BinOp::Ne, tmp(), zero()),
                            local(dest, Expr::bin(BinOp::Sub, tmp(), one())),
                        ],
                        to,
                    );
                }
                Instruction::Store { .. } => {
                    let (e1, e2) = store_parts(&li.instruction, n);
                    em.chain(
                        from,
                        vec![
                            fence_clear(),
                            load(&r.tmp, em.delayed(&e1)),
                            assert_cmp(BinOp::Eq, tmp(), zero()),
                            store(e1.clone(), e2.clone()),
                        ],
                        to,
                    );
                    em.chain(from, vec![store(em.delayed(&e1), encoded(e2))], to);
                }
                Instruction::Local { .. } | Instruction::Assert(_) => {
                    em.push(from, lift_instruction(&li.instruction, n), to);
                }
                Instruction::ScFence => {}
                Instruction::Fence(addrs) => {
                    em.chain(from, vec![local(&r.extra, one())], to);
                    let mut checks = Vec::new();
                    for x in addrs {
                        checks.push(load(&r.tmp, em.delayed(&lift(x, n))));
                        checks.push(assert_cmp(BinOp::Eq, tmp(), zero()));
                    }
                    em.chain(from, checks, to);
                }
            }
        }
        Ok(())
    })
}

/// Attacker for singularity: the single delayed store is kept in registers,
/// so no `d(·)` address is touched.
pub(crate) fn singularity(em: &mut Emitter, t: &Thread, a: &Attack) -> Result<Vec<String>, InstrumentError> {
    let n = em.layout.base;
    frame(em, t, "r_delayval", |em, r, copy, wait| {
        let attacked = || Expr::var(&r.addr);

        let st = &t.instructions[a.stinst];
        let (e1, e2) = store_parts(&st.instruction, n);
        em.chain(
            &st.label,
            vec![local(&r.extra, e2), local(&r.addr, e1)],
            &copy[&st.next],
        );

        let last = &t.instructions[a.lastinst];
        let from = &copy[&last.label];
        match &last.instruction {
            Instruction::Load { addr, .. } => {
                let e = lift(addr, n);
                em.chain(
                    from,
                    vec![
                        assert_cmp(BinOp::Ne, attacked(), e.clone()),
                        store(em.hb.clone(), one()),
                        store(em.level(&e), Expr::Const(LEVEL_LOAD)),
                    ],
                    wait,
                );
            }
            Instruction::Store { .. } => {
                let (e1, e2) = store_parts(&last.instruction, n);
                em.chain(
                    from,
                    vec![
                        assert_cmp(BinOp::Ne, attacked(), e1.clone()),
                        store(e1.clone(), e2),
                        store(em.hb.clone(), one()),
                        store(em.level(&e1), Expr::Const(LEVEL_STORE)),
                    ],
                    wait,
                );
            }
            _ => unreachable!("validated attack"),
        }

        for li in &t.instructions {
            let (from, to) = (&copy[&li.label], &copy[&li.next]);
            match &li.instruction {
                Instruction::Load { dest, addr } => {
                    let e = lift(addr, n);
                    em.chain(
                        from,
                        vec![assert_cmp(BinOp::Ne, attacked(), e.clone()), load(dest, e.clone())],
                        to,
                    );
                    em.chain(
                        from,
                        vec![assert_cmp(BinOp::Eq, attacked(), e), local(dest, Expr::var(&r.extra))],
                        to,
                    );
                }
                Instruction::Store { .. } => {
                    let (e1, e2) = store_parts(&li.instruction, n);
                    em.chain(
                        from,
                        vec![assert_cmp(BinOp::Ne, attacked(), e1.clone()), store(e1, e2)],
                        to,
                    );
                }
                Instruction::Local { .. } | Instruction::Assert(_) => {
                    em.push(from, lift_instruction(&li.instruction, n), to);
                }
                Instruction::ScFence => {}
                Instruction::Fence(_) => {
                    return Err(InstrumentError::PreconditionViolated(
                        "the singularity translation requires a program without fence".into(),
                    ))
                }
            }
        }
        Ok(())
    })
}
