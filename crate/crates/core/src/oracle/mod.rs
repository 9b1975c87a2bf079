//! Bounded exhaustive exploration of the relaxed and SC semantics, used as
//! ground truth for robustness and for the reduction properties.

mod explore;
mod search;
mod witness;

pub use explore::{enumerate_computations, for_each_computation, Enumeration, ExplorationConfig, Mode};
pub use search::{
    check_locality, check_singularity, find_minimal_violation, find_violation, sc_trace_set,
    shasha_snir_check, OracleError, PropertyVerdict, ScTraceSet, Search, ShashaSnirCheck,
    ViolationReport,
};
pub use witness::{check_overtaking_cycles, is_witness, CycleViolation, Decomposition, NoDecomposition, WitnessVerdict};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::Machine;
    use crate::syntax::load_program;
    use crate::traces::tests::{mp, tau, tau_prime};
    use crate::traces::{build_trace, traces_equal, CostTriple};

    const WRITER: &str = "program w const d1 = 0 const d2 = 1 const flag = 2
        thread tw regs init l0 begin
          l0: mem[d1] <- 1; goto l1; l1: mem[d2] <- 1; goto l2; l2: mem[flag] <- 1; goto l3;
        end";

    const MP_FENCED: &str = "program mp_fenced const d1 = 0 const d2 = 1 const flag = 2
        thread tw regs init l0 begin
          l0: mem[d1] <- 1; goto l1; l1: mem[d2] <- 1; goto l2;
          l2: fence d1, d2; goto l3; l3: mem[flag] <- 1; goto l4;
        end
        thread tr regs r init lx begin
          lx: r <- mem[flag]; goto ly; ly: assert r = 1; goto lz; lz: r <- mem[d1]; goto l;
        end";

    const DEKKER: &str = "program dekker const x = 0 const y = 1
        thread t1 regs r init a begin a: mem[x] <- 1; goto b; b: r <- mem[y]; goto c; c: assert r = 0; goto d; end
        thread t2 regs r init a begin a: mem[y] <- 1; goto b; b: r <- mem[x]; goto c; c: assert r = 0; goto d; end";

    #[test]
    fn writer_alone_has_one_sc_computation() {
        let p = load_program(WRITER).unwrap();
        let e = enumerate_computations(&p, &ExplorationConfig::sc(12));
        assert_eq!(e.computations.len(), 1);
        assert!(!e.bound_exhausted);
        assert_eq!(sc_trace_set(&p, &ExplorationConfig::sc(12)).traces.len(), 4);
    }

    #[test]
    fn relaxed_enumeration_contains_both_example_computations() {
        let p = mp();
        let m = Machine::new(&p);
        let e = enumerate_computations(&p, &ExplorationConfig::relaxed(2, 12));
        assert!(e.computations.contains(&tau(&m)));
        assert!(e.computations.contains(&tau_prime(&m)));
        let unique: std::collections::HashSet<_> = e.computations.iter().collect();
        assert_eq!(unique.len(), e.computations.len());
    }

    #[test]
    fn zero_bound_degenerates_to_sc() {
        let p = mp();
        let a = enumerate_computations(&p, &ExplorationConfig::relaxed(0, 12));
        let b = enumerate_computations(&p, &ExplorationConfig::sc(12));
        assert_eq!(a.computations, b.computations);
    }

    #[test]
    fn message_passing_violation_has_the_example_trace() {
        let p = mp();
        let v = find_violation(&p, &ExplorationConfig::relaxed(2, 14));
        let v = v.violation().expect("message passing is not robust");
        let m = Machine::new(&p);
        assert!(traces_equal(&v.trace, &build_trace(&tau(&m))).unwrap());
    }

    #[test]
    fn minimal_violation_of_message_passing() {
        let p = mp();
        let v = find_minimal_violation(&p, &ExplorationConfig::relaxed(2, 14));
        let v = v.violation().unwrap();
        assert_eq!(v.cost, CostTriple { delays: 4, reorders: 2, length: 9 });
        assert!(v.bounded_minimal);
        assert_eq!(v.delayed_store_count, 1);
        let w = is_witness(&v.computation).unwrap();
        assert!(w.all(), "{w:?}");
        assert!(check_overtaking_cycles(&v.computation).is_empty());
    }

    #[test]
    fn fenced_message_passing_is_robust_within_bounds() {
        let p = load_program(MP_FENCED).unwrap();
        let s = find_violation(&p, &ExplorationConfig::relaxed(3, 20));
        assert!(!s.is_violation());
    }

    #[test]
    fn single_thread_has_no_violation() {
        let p = load_program(WRITER).unwrap();
        assert!(!find_violation(&p, &ExplorationConfig::relaxed(3, 24)).is_violation());
    }

    #[test]
    fn dekker_minimal_violation_delays_one_store() {
        let p = load_program(DEKKER).unwrap();
        let v = find_minimal_violation(&p, &ExplorationConfig::relaxed(2, 14));
        assert_eq!(v.violation().unwrap().delayed_store_count, 1);
        let s = check_singularity(&p, &ExplorationConfig::relaxed(2, 14)).unwrap();
        assert!(s.holds && !s.vacuous);
    }

    #[test]
    fn singularity_and_locality_on_message_passing() {
        let p = mp();
        let cfg = ExplorationConfig::relaxed(2, 14);
        let s = check_singularity(&p, &cfg).unwrap();
        assert!(s.holds && !s.vacuous);
        let w = s.witness.unwrap();
        // Only the d1 store is delayed.
        let delayed: Vec<_> = crate::traces::delays_per_action(&w.computation)
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0)
            .map(|(i, _)| w.computation.actions[i].kind.clone())
            .collect();
        assert_eq!(delayed, vec![crate::semantics::ActionKind::Store { addr: 0, value: 1 }]);
        assert!(check_locality(&p, &cfg).holds);
        assert!(check_singularity(&load_program(MP_FENCED).unwrap(), &cfg).is_err());
    }

    #[test]
    fn witness_conditions_on_the_examples() {
        let m = Machine::new(&mp());
        let w = is_witness(&tau_prime(&m)).unwrap();
        assert!(w.all());
        assert_eq!(w.decomposition.isu_st, 0);
        assert_eq!(w.decomposition.a, 4);
        let w = is_witness(&tau(&m)).unwrap();
        assert!(!w.all());
        let sc = m.run_sc(&[0, 0, 0]).unwrap().computation;
        assert!(is_witness(&sc).is_err());
    }

    #[test]
    fn shasha_snir_agreement_on_message_passing() {
        let r = shasha_snir_check(&mp(), &ExplorationConfig::relaxed(2, 14));
        assert!(r.mismatches.is_empty());
        assert!(r.cyclic > 0);
    }

    #[test]
    fn enumeration_is_deterministic() {
        let p = mp();
        let cfg = ExplorationConfig::relaxed(2, 12);
        assert_eq!(
            enumerate_computations(&p, &cfg).computations,
            enumerate_computations(&p, &cfg).computations
        );
    }
}
