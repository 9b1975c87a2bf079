//! One line per acceptance criterion; exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use robcheck::instrument::{enumerate_attacks, instrument_program, InstrumentMode};
use robcheck::oracle::{
    check_locality, check_singularity, find_minimal_violation, find_violation, is_witness, shasha_snir_check,
    ExplorationConfig,
};
use robcheck::screach::{check_robustness, por_reduce, reachable, ReachQuery, RobustnessConfig, Verdict};
use robcheck::semantics::{Machine, Rule};
use robcheck::syntax::{load_program, Program, Value};
use robcheck::traces::{build_trace, cost, traces_equal, CostTriple};

type Outcome = Result<String, String>;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "prog"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let name = f.file_stem().unwrap().to_string_lossy().into_owned();
            let p = load_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
            (name, p)
        })
        .collect()
}

fn cli(args: &[&str]) -> (i32, serde_json::Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_robcheck"))
        .args(args)
        .current_dir(corpus_dir().join(".."))
        .output()
        .expect("run robcheck");
    let json = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code().unwrap_or(-1), json)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn message_passing_not_robust() -> Outcome {
    let started = Instant::now();
    let (code, j) = cli(&[
        "check", "corpus/mp.prog", "--mode", "oracle", "--buffer-bound", "2", "--max-actions", "14", "--json",
    ]);
    ensure(code == 1, || format!("oracle mode exit code {code}"))?;
    let trace = &j["result"]["violation"]["trace"];
    let nodes = trace["nodes"].as_array().map_or(0, Vec::len);
    ensure(nodes == 6, || format!("{nodes} trace nodes"))?;
    let edges: BTreeSet<(u64, u64, String)> = trace["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["from"].as_u64().unwrap(), e["to"].as_u64().unwrap(), e["kind"].as_str().unwrap().to_string()))
        .collect();
    // a b c are the writer's stores, d e f the reader's load, assert, load.
    let expected: BTreeSet<(u64, u64, String)> = [
        (0, 1, "po"),
        (1, 2, "po"),
        (3, 4, "po"),
        (4, 5, "po"),
        (2, 3, "src"),
        (5, 0, "cf"),
    ]
    .into_iter()
    .map(|(a, b, k)| (a, b, k.to_string()))
    .collect();
    ensure(edges == expected, || format!("edges {edges:?}"))?;
    for mode in ["locality", "singularity"] {
        let (code, _) = cli(&["check", "corpus/mp.prog", "--mode", mode, "--json"]);
        ensure(code == 1, || format!("{mode} mode exit code {code}"))?;
    }
    within(Duration::from_secs(5), started)?;
    Ok(format!("NotRobust in oracle, locality and singularity modes; trace has 6 nodes and the 6 expected edges ({:?})", started.elapsed()))
}

fn cost_reproduction() -> Outcome {
    let p = load_program(&std::fs::read_to_string(corpus_dir().join("mp.prog")).unwrap()).unwrap();
    let m = Machine::new(&p);
    type Step = (usize, Rule, Option<Value>);
    let tau: &[Step] = &[
        (0, Rule::IssueStore, None),
        (0, Rule::IssueStore, None),
        (0, Rule::IssueStore, None),
        (0, Rule::AdvanceBuffer, Some(2)),
        (0, Rule::StoreToMemory, None),
        (1, Rule::ReadMemory, None),
        (1, Rule::Assert, None),
        (1, Rule::ReadMemory, None),
        (0, Rule::AdvanceBuffer, Some(1)),
        (0, Rule::StoreToMemory, None),
        (0, Rule::AdvanceBuffer, Some(0)),
        (0, Rule::StoreToMemory, None),
    ];
    let tau_prime: &[Step] = &[
        (0, Rule::IssueStore, None),
        (0, Rule::IssueStore, None),
        (0, Rule::AdvanceBuffer, Some(1)),
        (0, Rule::StoreToMemory, None),
        (0, Rule::IssueStore, None),
        (0, Rule::AdvanceBuffer, Some(2)),
        (0, Rule::StoreToMemory, None),
        (1, Rule::ReadMemory, None),
        (1, Rule::Assert, None),
        (1, Rule::ReadMemory, None),
        (0, Rule::AdvanceBuffer, Some(0)),
        (0, Rule::StoreToMemory, None),
    ];
    let run = |steps: &[Step]| {
        let schedule = m.resolve_steps(steps).ok_or("schedule does not resolve")?;
        m.run(&schedule).map(|r| r.computation).map_err(|e| e.to_string())
    };
    let (t, tp) = (run(tau)?, run(tau_prime)?);
    let (ct, ctp) = (cost(&t), cost(&tp));
    ensure(ct == CostTriple { delays: 6, reorders: 3, length: 9 }, || format!("cost of tau {ct}"))?;
    ensure(ctp == CostTriple { delays: 4, reorders: 2, length: 9 }, || format!("cost of tau' {ctp}"))?;
    let eq = traces_equal(&build_trace(&t), &build_trace(&tp)).map_err(|e| e.to_string())?;
    ensure(eq, || "traces differ".into())?;
    Ok(format!("tau {ct}, tau' {ctp}, equal traces"))
}

fn fenced_message_passing_robust() -> Outcome {
    let started = Instant::now();
    let (code, j) = cli(&["check", "corpus/mp_fenced.prog", "--mode", "locality", "--all-attacks", "--json"]);
    ensure(code == 0, || format!("locality exit code {code}"))?;
    let attacks = j["result"]["attacks"].as_array().cloned().unwrap_or_default();
    ensure(!attacks.is_empty(), || "no attacks reported".into())?;
    ensure(attacks.iter().all(|a| a["reachable"] == false), || "some attack reaches suc".into())?;
    let (code, _) = cli(&[
        "check", "corpus/mp_fenced.prog", "--mode", "oracle", "--buffer-bound", "3", "--max-actions", "20", "--json",
    ]);
    ensure(code == 0, || format!("oracle exit code {code}"))?;
    within(Duration::from_secs(30), started)?;
    Ok(format!("{} attacks infeasible, oracle finds nothing at B=3/20 ({:?})", attacks.len(), started.elapsed()))
}

fn shasha_snir() -> Outcome {
    let cfg = ExplorationConfig::relaxed(2, 14);
    let mut checked = Vec::new();
    let mut total = 0;
    for (name, p) in corpus() {
        if p.threads.len() > 2 || p.instruction_count() > 8 {
            continue;
        }
        let r = shasha_snir_check(&p, &cfg);
        ensure(r.mismatches.is_empty(), || format!("{name}: {} mismatches", r.mismatches.len()))?;
        total += r.checked;
        checked.push(name);
    }
    ensure(!checked.is_empty(), || "no program qualifies".into())?;
    Ok(format!("{total} computations over {} without mismatch", checked.join(", ")))
}

fn reduction_property(fence_free_only: bool) -> Outcome {
    let cfg = ExplorationConfig::default();
    let mut covered = Vec::new();
    for (name, p) in corpus() {
        if fence_free_only && p.has_fence() {
            continue;
        }
        if !find_violation(&p, &cfg).is_violation() {
            continue;
        }
        let v = if fence_free_only {
            check_singularity(&p, &cfg).map_err(|e| e.to_string())?
        } else {
            check_locality(&p, &cfg)
        };
        ensure(v.holds && !v.vacuous, || format!("{name}: no violation of the restricted shape"))?;
        covered.push(name);
    }
    ensure(!covered.is_empty(), || "no non-robust program".into())?;
    Ok(format!("restricted violations found for {}", covered.join(", ")))
}

fn reduction_exactness() -> Outcome {
    let cfg = ExplorationConfig::default();
    let mut rows = Vec::new();
    for (name, p) in corpus() {
        let by_instrumentation = check_robustness(&p, &RobustnessConfig::default()).map_err(|e| e.to_string())?;
        let by_oracle = find_violation(&p, &cfg).is_violation();
        ensure(by_instrumentation.verdict != Verdict::Unknown, || format!("{name}: unknown"))?;
        let instr_violation = by_instrumentation.verdict == Verdict::NotRobust;
        ensure(instr_violation == by_oracle, || {
            format!("{name}: instrumentation says {instr_violation}, oracle says {by_oracle}")
        })?;
        rows.push(format!("{name}={}", if by_oracle { "non-robust" } else { "robust" }));
    }
    Ok(rows.join(", "))
}

fn witness_form() -> Outcome {
    let cfg = ExplorationConfig::default();
    let mut covered = Vec::new();
    for (name, p) in corpus() {
        if p.has_fence() {
            continue;
        }
        let Some(v) = find_minimal_violation(&p, &cfg).violation().cloned() else {
            continue;
        };
        let w = is_witness(&v.computation).map_err(|e| format!("{name}: {e}"))?;
        ensure(w.all(), || format!("{name}: {w:?}"))?;
        covered.push(name);
    }
    ensure(!covered.is_empty(), || "no non-robust fence-free program".into())?;
    Ok(format!("W1..W5 hold for {}", covered.join(", ")))
}

fn linear_size() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, p) in corpus() {
        let s = p.instruction_count();
        for a in enumerate_attacks(&p) {
            let mut modes = vec![InstrumentMode::Locality];
            if !p.has_fence() {
                modes.push(InstrumentMode::Singularity);
            }
            for mode in modes {
                let ip = instrument_program(&p, &a, mode).map_err(|e| e.to_string())?;
                let n = ip.program.instruction_count();
                ensure(n <= 6 * s + 40, || format!("{name} {}: {n} > 6*{s}+40", a.describe(&p)))?;
                if mode == InstrumentMode::Singularity {
                    ensure(ip.manifest.delayed_value_accesses == 0, || {
                        format!("{name} {}: singularity output touches d(.)", a.describe(&p))
                    })?;
                }
                worst = worst.max(ip.manifest.size_ratio);
                count += 1;
            }
        }
    }
    Ok(format!("{count} instrumented programs, largest ratio {worst:.2}"))
}

fn por_soundness() -> Outcome {
    let mut queries = 0;
    let (mut plain_states, mut por_states) = (0, 0);
    for (name, p) in corpus() {
        let mode = if p.has_fence() { InstrumentMode::Locality } else { InstrumentMode::Singularity };
        for a in enumerate_attacks(&p) {
            let ip = instrument_program(&p, &a, mode).map_err(|e| e.to_string())?;
            let q = ReachQuery::new(ip.program.clone(), ip.suc());
            let plain = reachable(&q).map_err(|e| e.to_string())?;
            let por = por_reduce(&q).map_err(|e| e.to_string())?;
            ensure(plain.reachable == por.reachable, || format!("{name} {}: reachable bits differ", a.describe(&p)))?;
            ensure(por.stats.states_visited <= plain.stats.states_visited, || {
                format!(
                    "{name} {}: por visited {} > {}",
                    a.describe(&p),
                    por.stats.states_visited,
                    plain.stats.states_visited
                )
            })?;
            queries += 1;
            plain_states += plain.stats.states_visited;
            por_states += por.stats.states_visited;
        }
    }
    Ok(format!("{queries} queries agree; states {por_states} with reduction vs {plain_states} without"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("message passing is not robust", message_passing_not_robust),
        ("cost reproduction", cost_reproduction),
        ("fenced message passing is robust", fenced_message_passing_robust),
        ("Shasha-Snir equivalence", shasha_snir),
        ("singularity", || reduction_property(true)),
        ("locality", || reduction_property(false)),
        ("reduction exactness", reduction_exactness),
        ("witness form", witness_form),
        ("linear-size instrumentation", linear_size),
        ("partial-order reduction soundness", por_soundness),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{took:.2}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{took:.2}s]: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
