use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use robcheck::instrument::{instrument_program, Attack, InstrumentMode};
use robcheck::oracle::{check_locality, check_singularity, check_overtaking_cycles, find_minimal_violation, find_violation, is_witness, ExplorationConfig, Search};
use robcheck::screach::{check_robustness, RobustnessConfig, RobustnessMode, Verdict};
use robcheck::semantics::Machine;
use robcheck::syntax::{load_program, pretty_print, LoadError, Program};
use robcheck::traces::{build_trace, cost, is_cyclic};

#[derive(Parser)]
#[command(name = "robcheck", version, about = "Robustness checking against relaxed store buffers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether every relaxed computation has an SC trace.
    Check(CheckArgs),
    /// Replay a schedule and show the computation, trace and cost.
    Simulate(SimulateArgs),
    /// Write the instrumented program for one attack.
    Instrument(InstrumentArgs),
    /// Check the locality, singularity and witness properties within bounds.
    Properties(PropertiesArgs),
}

#[derive(Args, Serialize)]
struct Bounds {
    /// Capacity of every buffer queue in the relaxed oracle.
    #[arg(long, default_value_t = 3)]
    buffer_bound: usize,
    /// Longest computation the oracle explores.
    #[arg(long, default_value_t = 24)]
    max_actions: usize,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long, default_value = "auto")]
    mode: RobustnessMode,
    #[command(flatten)]
    bounds: Bounds,
    /// Check every attack instead of stopping at the first feasible one.
    #[arg(long)]
    all_attacks: bool,
    /// Give up on an attack after this many SC states.
    #[arg(long)]
    max_states: Option<usize>,
    /// Use the partial-order reduced search.
    #[arg(long)]
    por: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the violating trace as DOT into this directory.
    #[arg(long)]
    emit_dot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    /// Comma-separated choice indices into the enabled transitions.
    #[arg(long, default_value = "")]
    schedule: String,
    #[arg(long)]
    sc: bool,
    #[arg(long)]
    emit_dot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InstrumentArgs {
    file: PathBuf,
    /// `thread:stinst-label:lastinst-label`; labels may be `#index`.
    #[arg(long)]
    attack: String,
    #[arg(long, default_value = "locality")]
    mode: InstrumentMode,
    /// Output program; the manifest goes next to it with `.manifest.json`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PropertiesArgs {
    file: PathBuf,
    #[command(flatten)]
    bounds: Bounds,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct RunReport {
    tool_version: &'static str,
    input_hash: String,
    subcommand: &'static str,
    config: Json,
    result: Json,
    timing_ms: u128,
}

struct Input {
    program: Program,
    hash: String,
}

fn read_program(path: &Path) -> Result<Input> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    match load_program(&text) {
        Ok(program) => Ok(Input { program, hash }),
        Err(LoadError::Parse(e)) => bail!("{}:{e}", path.display()),
        Err(LoadError::Invalid(diags)) => {
            let lines: Vec<String> = diags
                .iter()
                .map(|d| {
                    let at = match (&d.thread, &d.label) {
                        (Some(t), Some(l)) => format!("{t}@{l}: "),
                        (Some(t), None) => format!("{t}: "),
                        _ => String::new(),
                    };
                    format!("{}: {at}{}", path.display(), d.message)
                })
                .collect();
            bail!("{}", lines.join("\n"))
        }
    }
}

fn report(subcommand: &'static str, hash: &str, config: Json, result: Json, started: Instant) -> String {
    let r = RunReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        input_hash: hash.to_string(),
        subcommand,
        config,
        result,
        timing_ms: started.elapsed().as_millis(),
    };
    serde_json::to_string_pretty(&r).expect("report serializes")
}

fn write_dot(dir: &Path, name: &str, dot: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.dot"));
    fs::write(&path, dot)?;
    Ok(path)
}

fn cmd_check(a: CheckArgs) -> Result<i32> {
    let started = Instant::now();
    let input = read_program(&a.file)?;
    let p = &input.program;
    let cfg = RobustnessConfig {
        mode: a.mode,
        all_attacks: a.all_attacks,
        jobs: a.jobs.max(1),
        max_states: a.max_states,
        por: a.por,
        oracle: ExplorationConfig::relaxed(a.bounds.buffer_bound, a.bounds.max_actions),
    };
    let v = check_robustness(p, &cfg).map_err(|e| anyhow!("{e}"))?;

    // A cyclic trace to show: the oracle's own, or one found by a bounded
    // search when the verdict came from instrumentation.
    let violation = match (&v.violation, v.verdict) {
        (Some(r), _) => Some(r.clone()),
        (None, Verdict::NotRobust) if a.emit_dot.is_some() || a.json => {
            find_violation(p, &cfg.oracle).violation().cloned()
        }
        _ => None,
    };
    let mut dots = Vec::new();
    if let Some(dir) = &a.emit_dot {
        if let Some(r) = &violation {
            dots.push(write_dot(dir, &format!("{}_violation", p.name), &r.trace.to_dot(p))?);
        } else if let (Some(w), Some(att)) = (&v.sc_witness, &v.feasible_attack) {
            let ip = instrument_program(p, att, instrument_mode(v.mode)).map_err(|e| anyhow!("{e}"))?;
            let t = build_trace(&w.computation);
            dots.push(write_dot(dir, &format!("{}_witness", p.name), &t.to_dot(&ip.program))?);
        }
    }

    if a.json {
        let mut result = serde_json::to_value(&v)?;
        result["violation"] = violation.as_ref().map(|r| r.to_json(p)).into();
        result["feasible_attack_labels"] = v.feasible_attack.as_ref().map(|x| x.describe(p)).into();
        let config = json!({
            "mode": a.mode,
            "buffer_bound": a.bounds.buffer_bound,
            "max_actions": a.bounds.max_actions,
            "all_attacks": a.all_attacks,
            "max_states": a.max_states,
            "por": a.por,
        });
        println!("{}", report("check", &input.hash, config, result, started));
    } else {
        let mode = serde_json::to_value(v.mode)?;
        let verdict = match v.verdict {
            Verdict::Robust => "Robust",
            Verdict::NotRobust => "NotRobust",
            Verdict::Unknown => "Unknown",
        };
        println!("{}: {verdict} ({} mode)", p.name, mode.as_str().unwrap_or("?"));
        if v.mode == RobustnessMode::Oracle {
            println!("  bounded: buffer-bound {}, max-actions {}", a.bounds.buffer_bound, a.bounds.max_actions);
            if v.bound_exhausted {
                println!("  some paths were cut by max-actions");
            }
        }
        if let Some(att) = &v.feasible_attack {
            println!("  feasible attack: {}", att.describe(p));
        }
        let unreachable = v.attacks.iter().filter(|r| r.reachable == Some(false)).count();
        if !v.attacks.is_empty() {
            println!("  attacks checked: {} ({unreachable} infeasible)", v.attacks.len());
        }
        if let Some(r) = &violation {
            println!("  violation cost {}", r.cost);
            print!("{}", indent(&r.computation.render(p)));
        }
        for d in &dots {
            println!("  wrote {}", d.display());
        }
    }
    Ok(v.verdict.exit_code())
}

fn instrument_mode(m: RobustnessMode) -> InstrumentMode {
    match m {
        RobustnessMode::Singularity => InstrumentMode::Singularity,
        _ => InstrumentMode::Locality,
    }
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("    {l}\n")).collect()
}

fn parse_schedule(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().with_context(|| format!("bad schedule entry `{x}`")))
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let started = Instant::now();
    let input = read_program(&a.file)?;
    let p = &input.program;
    let schedule = parse_schedule(&a.schedule)?;
    let m = if a.sc { Machine::new(p).sc() } else { Machine::new(p) };
    let config = json!({ "schedule": schedule, "sc": a.sc });
    match m.run(&schedule) {
        Ok(run) => {
            let c = &run.computation;
            let trace = build_trace(c);
            let cyclic = is_cyclic(&trace);
            let cst = cost(c);
            let enabled: Vec<String> = m
                .transitions(&run.state)
                .iter()
                .enumerate()
                .map(|(i, t)| format!("{i}: {} {:?}", p.threads[t.thread].name, t.rule))
                .collect();
            if let Some(dir) = &a.emit_dot {
                write_dot(dir, &format!("{}_simulated", p.name), &trace.to_dot(p))?;
            }
            if a.json {
                let result = json!({
                    "computation": c.to_json(p),
                    "final_state": m.render_state(&run.state),
                    "trace": trace.to_json(p),
                    "cyclic": cyclic,
                    "cost": cst,
                    "enabled": enabled,
                });
                println!("{}", report("simulate", &input.hash, config, result, started));
            } else {
                println!("actions:");
                print!("{}", indent(&c.render(p)));
                println!("state:");
                print!("{}", indent(&m.render_state(&run.state)));
                println!("trace: {} nodes, {} edges, {}", trace.nodes.len(), trace.edges.len(), if cyclic { "cyclic" } else { "acyclic" });
                println!("cost: {cst}");
                println!("enabled:");
                for e in enabled {
                    println!("    {e}");
                }
            }
            Ok(0)
        }
        Err(stuck) => {
            if a.json {
                let result = json!({
                    "stuck_at": stuck.index,
                    "choice": stuck.choice,
                    "enabled": stuck.enabled,
                    "prefix": stuck.prefix.to_json(p),
                    "reasons": stuck.reasons,
                });
                println!("{}", report("simulate", &input.hash, config, result, started));
            } else {
                eprintln!("{stuck}");
                for r in &stuck.reasons {
                    eprintln!("    {r}");
                }
            }
            Ok(2)
        }
    }
}

fn cmd_instrument(a: InstrumentArgs) -> Result<i32> {
    let input = read_program(&a.file)?;
    let p = &input.program;
    let attack = Attack::parse(p, &a.attack).map_err(|e| anyhow!("{e}"))?;
    let ip = instrument_program(p, &attack, a.mode).map_err(|e| anyhow!("{e}"))?;
    let text = pretty_print(&ip.program);
    let manifest = serde_json::to_string_pretty(&ip.manifest)?;
    match &a.output {
        Some(out) => {
            fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
            let mut m = out.clone().into_os_string();
            m.push(".manifest.json");
            fs::write(&m, manifest + "\n")?;
        }
        None => {
            print!("{text}");
            eprintln!("{manifest}");
        }
    }
    Ok(0)
}

fn cmd_properties(a: PropertiesArgs) -> Result<i32> {
    let started = Instant::now();
    let input = read_program(&a.file)?;
    let p = &input.program;
    let cfg = ExplorationConfig::relaxed(a.bounds.buffer_bound, a.bounds.max_actions);
    let locality = check_locality(p, &cfg);
    let singularity = check_singularity(p, &cfg).ok();
    let minimal = find_minimal_violation(p, &cfg);
    let witness = match &minimal {
        Search::Violation(v) => is_witness(&v.computation).ok(),
        Search::NotFoundWithinBounds { .. } => None,
    };
    let cycles = match &minimal {
        Search::Violation(v) => check_overtaking_cycles(&v.computation),
        Search::NotFoundWithinBounds { .. } => Vec::new(),
    };
    let mut ok = locality.holds && singularity.as_ref().is_none_or(|s| s.holds) && cycles.is_empty();
    if !p.has_fence() {
        ok &= witness.as_ref().is_none_or(|w| w.all());
    }
    if a.json {
        let result = json!({
            "locality": locality.to_json(p),
            "singularity": singularity.as_ref().map(|s| s.to_json(p)),
            "minimal_violation": minimal.violation().map(|v| v.to_json(p)),
            "witness": witness,
            "overtaking_cycle_failures": cycles,
        });
        println!("{}", report("properties", &input.hash, serde_json::to_value(&a.bounds)?, result, started));
    } else {
        let show = |name: &str, holds: bool, vacuous: bool| {
            let v = if vacuous { " (vacuous: no violation within bounds)" } else { "" };
            println!("{name}: {}{v}", if holds { "holds" } else { "FAILS" });
        };
        show("locality", locality.holds, locality.vacuous);
        match &singularity {
            Some(s) => show("singularity", s.holds, s.vacuous),
            None => println!("singularity: not applicable (program has fence)"),
        }
        match (&minimal, &witness) {
            (Search::Violation(v), Some(w)) => {
                println!("minimal violation cost {}", v.cost);
                println!(
                    "witness W1..W5: {} {} {} {} {}",
                    w.w1, w.w2, w.w3, w.w4, w.w5
                );
            }
            _ => println!("witness: vacuous"),
        }
        println!("overtaking cycles: {} failures", cycles.len());
    }
    Ok(if ok { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Instrument(a) => cmd_instrument(a),
        Command::Properties(a) => cmd_properties(a),
    };
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
