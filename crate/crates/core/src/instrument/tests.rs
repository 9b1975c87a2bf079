use std::collections::HashMap;

use super::*;
use crate::semantics::eval_expr;
use crate::syntax::{load_program, parse_program, pretty_print};
use crate::traces::tests::mp;

const MP_FENCED: &str = "program mp_fenced const d1 = 0 const d2 = 1 const flag = 2
    thread tw regs init l0 begin
      l0: mem[d1] <- 1; goto l1; l1: mem[d2] <- 1; goto l2;
      l2: fence d1, d2; goto l3; l3: mem[flag] <- 1; goto l4;
    end
    thread tr regs r init lx begin
      lx: r <- mem[flag]; goto ly; ly: assert r = 1; goto lz; lz: r <- mem[d1]; goto l;
    end";

#[test]
fn message_passing_has_nine_attacks() {
    let attacks = enumerate_attacks(&mp());
    assert_eq!(attacks.len(), 9);
    assert!(attacks.iter().all(|a| a.attacker == "tw"));
    let mut sorted = attacks.clone();
    sorted.sort();
    assert_eq!(sorted, attacks);
}

#[test]
fn attacks_are_bounded_by_the_instruction_mix() {
    let p = load_program(MP_FENCED).unwrap();
    let bound: usize = p
        .threads
        .iter()
        .map(|t| {
            let st = t.instructions.iter().filter(|i| i.instruction.is_store()).count();
            let ld = t.instructions.iter().filter(|i| i.instruction.is_load()).count();
            st * (st + ld)
        })
        .sum();
    assert_eq!(enumerate_attacks(&p).len(), bound);
}

#[test]
fn every_instrumentation_round_trips_and_stays_linear() {
    for (p, modes) in [
        (mp(), vec![InstrumentMode::Locality, InstrumentMode::Singularity]),
        (load_program(MP_FENCED).unwrap(), vec![InstrumentMode::Locality]),
    ] {
        for a in enumerate_attacks(&p) {
            for &mode in &modes {
                let ip = instrument_program(&p, &a, mode).unwrap();
                assert!(validate(&ip.program).is_empty(), "{:?}", validate(&ip.program));
                let text = pretty_print(&ip.program);
                assert_eq!(parse_program(&text).unwrap(), ip.program);
                let s = p.instruction_count();
                assert!(ip.program.instruction_count() <= 6 * s + 40);
                if mode == InstrumentMode::Singularity {
                    assert_eq!(ip.manifest.delayed_value_accesses, 0);
                } else {
                    assert!(ip.manifest.delayed_value_accesses > 0);
                }
            }
        }
    }
}

#[test]
fn singularity_rejects_fences() {
    let p = load_program(MP_FENCED).unwrap();
    let a = enumerate_attacks(&p)[0].clone();
    assert!(matches!(
        instrument_program(&p, &a, InstrumentMode::Singularity),
        Err(InstrumentError::PreconditionViolated(_))
    ));
}

#[test]
fn attacks_must_name_a_store_and_an_access() {
    let p = mp();
    let bad = Attack {
        attacker: "tr".into(),
        stinst: 0,
        lastinst: 0,
    };
    assert!(matches!(
        instrument_program(&p, &bad, InstrumentMode::Locality),
        Err(InstrumentError::InvalidAttack(_))
    ));
    let a = Attack::parse(&p, "tw:l0:l2").unwrap();
    assert_eq!((a.stinst, a.lastinst), (0, 2));
    assert_eq!(a.describe(&p), "tw:l0:l2");
    assert!(Attack::parse(&p, "tr:ly:lx").is_err());
}

#[test]
fn layout_leaves_room_for_all_auxiliaries() {
    for n in 1..20 {
        let l = AddressLayout::new(n);
        assert!(l.suc < l.domain_size);
        assert_eq!(l.domain_size % n, 0);
        assert!(l.is_delayed_address(n) && !l.is_delayed_address(2 * n));
    }
}

#[test]
fn lifted_expressions_agree_with_the_source_domain() {
    let src = "program p thread t regs a b init l begin
        l: a <- (a - b) * 2 + !(a < b); goto m;
        m: b <- (a % b) - 1 * (a = b); goto n;
        end";
    let small = load_program(src).unwrap();
    for n in [1u32, 2, 3, 5] {
        let mut small = small.clone();
        small.domain_size = n;
        let mut big = small.clone();
        big.domain_size = AddressLayout::new(n).domain_size;
        for li in &small.threads[0].instructions {
            let Instruction::Local { expr, .. } = &li.instruction else { unreachable!() };
            for a in 0..n {
                for b in 0..n {
                    let regs = HashMap::from([("a".to_string(), a), ("b".to_string(), b)]);
                    assert_eq!(
                        eval_expr(&small, expr, &regs),
                        eval_expr(&big, &lift(expr, n), &regs),
                        "{expr} at n={n}, a={a}, b={b}"
                    );
                }
            }
        }
    }
}

#[test]
fn fresh_names_avoid_existing_ones() {
    let src = "program p const hb = 0 const r_tmp = 1
        thread t regs r_attackaddr init wait begin wait: mem[hb] <- 1; goto wait'; end
        thread u regs r_addr init a begin a: r_addr <- mem[r_tmp]; goto b; end";
    let p = load_program(src).unwrap();
    for a in enumerate_attacks(&p) {
        for mode in [InstrumentMode::Locality, InstrumentMode::Singularity] {
            let ip = instrument_program(&p, &a, mode).unwrap();
            assert!(validate(&ip.program).is_empty(), "{:?}", validate(&ip.program));
            assert_eq!(parse_program(&pretty_print(&ip.program)).unwrap(), ip.program);
        }
    }
}
