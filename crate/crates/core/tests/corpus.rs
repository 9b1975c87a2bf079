use std::path::PathBuf;

use robcheck::instrument::{enumerate_attacks, instrument_program, InstrumentMode};
use robcheck::oracle::{find_minimal_violation, is_witness, ExplorationConfig, Search};
use robcheck::screach::{check_robustness, RobustnessConfig, RobustnessMode, Verdict};
use robcheck::syntax::{load_program, pretty_print, Program};

const EXPECTED: &[(&str, Verdict)] = &[
    ("clh_lock", Verdict::NotRobust),
    ("dekker_fenced", Verdict::Robust),
    ("dekker_nofence", Verdict::NotRobust),
    ("lamport_nofence", Verdict::NotRobust),
    ("lockfree_stack", Verdict::NotRobust),
    ("mp", Verdict::NotRobust),
    ("mp_fenced", Verdict::Robust),
    ("seq", Verdict::Robust),
];

fn corpus(name: &str) -> Program {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus", &format!("{name}.prog")]
        .iter()
        .collect();
    load_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn every_file_is_listed() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "prog"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let listed: Vec<_> = EXPECTED.iter().map(|(n, _)| n.to_string()).collect();
    assert_eq!(names, listed);
}

#[test]
fn printing_round_trips() {
    for (name, _) in EXPECTED {
        let p = corpus(name);
        let again = load_program(&pretty_print(&p)).unwrap();
        assert_eq!(pretty_print(&again), pretty_print(&p), "{name}");
    }
}

#[test]
fn verdicts_in_every_mode() {
    for (name, want) in EXPECTED {
        let p = corpus(name);
        let mut modes = vec![RobustnessMode::Auto, RobustnessMode::Locality, RobustnessMode::Oracle];
        if !p.has_fence() {
            modes.push(RobustnessMode::Singularity);
        }
        for mode in modes {
            for por in [false, true] {
                let cfg = RobustnessConfig { mode, por, ..Default::default() };
                let v = check_robustness(&p, &cfg).unwrap();
                assert_eq!(v.verdict, *want, "{name} in {mode:?} (por {por})");
            }
        }
    }
}

#[test]
fn minimal_violations_are_witnesses() {
    for (name, want) in EXPECTED {
        let p = corpus(name);
        match find_minimal_violation(&p, &ExplorationConfig::default()) {
            Search::Violation(v) => {
                assert_eq!(*want, Verdict::NotRobust, "{name}");
                let w = is_witness(&v.computation).unwrap();
                assert!(w.w1 && w.w2 && w.w3 && w.w4 && w.w5, "{name}: {w:?}");
            }
            Search::NotFoundWithinBounds { .. } => assert_eq!(*want, Verdict::Robust, "{name}"),
        }
    }
}

#[test]
fn instrumented_programs_reparse() {
    for (name, _) in EXPECTED {
        let p = corpus(name);
        let mode = if p.has_fence() { InstrumentMode::Locality } else { InstrumentMode::Singularity };
        for a in enumerate_attacks(&p) {
            let ip = instrument_program(&p, &a, mode).unwrap();
            let text = pretty_print(&ip.program);
            let again = load_program(&text).unwrap_or_else(|e| panic!("{name} {}: {e}", a.describe(&p)));
            assert_eq!(pretty_print(&again), text);
        }
    }
}
