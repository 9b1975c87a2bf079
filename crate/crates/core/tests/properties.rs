use std::collections::HashSet;

use proptest::prelude::*;
use robcheck::instrument::{enumerate_attacks, instrument_program, InstrumentMode};
use robcheck::oracle::{
    enumerate_computations, find_minimal_violation, sc_trace_set, shasha_snir_check, ExplorationConfig, Search,
};
use robcheck::screach::{check_robustness, por_reduce, reachable, ReachQuery, RobustnessConfig, Verdict};
use robcheck::syntax::{load_program, parse_program, pretty_print, Program};
use robcheck::traces::{build_trace, cost, is_cyclic};

#[derive(Debug, Clone)]
enum Op {
    Store(usize, u8),
    Load(usize),
    Assert(u8),
    Fence,
    ScFence,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..2usize, 0..2u8).prop_map(|(a, v)| Op::Store(a, v)),
        3 => (0..2usize).prop_map(Op::Load),
        1 => (0..2u8).prop_map(Op::Assert),
        1 => Just(Op::Fence),
        1 => Just(Op::ScFence),
    ]
}

fn render(threads: &[Vec<Op>]) -> String {
    let addr = ["x", "y"];
    let mut s = String::from("program random\nconst x = 0\nconst y = 1\n");
    for (t, ops) in threads.iter().enumerate() {
        s += &format!("\nthread t{t}\nregs r\ninit a0\nbegin\n");
        for (i, o) in ops.iter().enumerate() {
            let body = match o {
                Op::Store(a, v) => format!("mem[{}] <- {v}", addr[*a]),
                Op::Load(a) => format!("r <- mem[{}]", addr[*a]),
                Op::Assert(v) => format!("assert r = {v}"),
                Op::Fence => "fence x, y".into(),
                Op::ScFence => "scfence".into(),
            };
            s += &format!("  a{i}: {body}; goto a{};\n", i + 1);
        }
        s += "end\n";
    }
    s
}

fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(prop::collection::vec(op(), 1..4), 2..=2)
        .prop_map(|ts| load_program(&render(&ts)).expect("generated program is well-formed"))
}

fn bounds() -> ExplorationConfig {
    ExplorationConfig::relaxed(2, 24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn print_parse_round_trip(p in program()) {
        let text = pretty_print(&p);
        let q = parse_program(&text).unwrap();
        prop_assert_eq!(pretty_print(&q), text);
    }

    #[test]
    fn sc_traces_are_acyclic(p in program()) {
        let e = enumerate_computations(&p, &ExplorationConfig::sc(24).with_prefixes());
        for c in &e.computations {
            prop_assert!(!is_cyclic(&build_trace(c)));
        }
    }

    #[test]
    fn zero_buffer_bound_gives_sc_traces(p in program()) {
        let relaxed: HashSet<_> = enumerate_computations(&p, &ExplorationConfig::relaxed(0, 24).with_prefixes())
            .computations
            .iter()
            .map(build_trace)
            .collect();
        let sc = sc_trace_set(&p, &ExplorationConfig::relaxed(0, 24));
        prop_assert_eq!(relaxed, sc.traces);
    }

    #[test]
    fn cyclic_iff_not_sc(p in program()) {
        let check = shasha_snir_check(&p, &bounds());
        prop_assert!(check.mismatches.is_empty());
    }

    #[test]
    fn minimal_violation_cost_matches_enumeration(p in program()) {
        let all = enumerate_computations(&p, &bounds().with_prefixes());
        prop_assume!(!all.bound_exhausted);
        let expected = all
            .computations
            .iter()
            .filter(|c| is_cyclic(&build_trace(c)))
            .map(cost)
            .min();
        let found = match find_minimal_violation(&p, &bounds()) {
            Search::Violation(v) => {
                prop_assert!(is_cyclic(&v.trace));
                Some(v.cost)
            }
            Search::NotFoundWithinBounds { .. } => None,
        };
        prop_assert_eq!(found, expected);
    }

    #[test]
    fn instrumentation_agrees_with_oracle(p in program()) {
        let all = enumerate_computations(&p, &bounds().with_prefixes());
        prop_assume!(!all.bound_exhausted);
        let oracle_robust = !all.computations.iter().any(|c| is_cyclic(&build_trace(c)));
        let v = check_robustness(&p, &RobustnessConfig::default()).unwrap();
        prop_assert_eq!(v.verdict == Verdict::Robust, oracle_robust);
        if !p.has_fence() {
            let cfg = RobustnessConfig { mode: robcheck::screach::RobustnessMode::Locality, ..Default::default() };
            let l = check_robustness(&p, &cfg).unwrap();
            prop_assert_eq!(l.verdict, v.verdict);
        }
    }

    #[test]
    fn reduction_keeps_reachability(p in program()) {
        let mode = if p.has_fence() { InstrumentMode::Locality } else { InstrumentMode::Singularity };
        for a in enumerate_attacks(&p) {
            let ip = instrument_program(&p, &a, mode).unwrap();
            let q = ReachQuery::new(ip.program, ip.manifest.address_map.suc);
            let plain = reachable(&q).unwrap();
            let reduced = por_reduce(&q).unwrap();
            prop_assert_eq!(plain.reachable, reduced.reachable);
            prop_assert!(reduced.stats.states_visited <= plain.stats.states_visited);
        }
    }
}
