use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reachable, por_reduce, ReachError, ReachQuery, ReachResult, ReachWitness};
use crate::instrument::{enumerate_attacks, instrument_program, Attack, InstrumentError, InstrumentMode};
use crate::oracle::{find_minimal_violation, ExplorationConfig, Search, ViolationReport};
use crate::syntax::{validate, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RobustnessMode {
    /// Singularity for fence-free programs, locality otherwise.
    #[default]
    Auto,
    Locality,
    Singularity,
    /// Bounded exploration of the relaxed semantics.
    Oracle,
}

impl std::str::FromStr for RobustnessMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(RobustnessMode::Auto),
            "locality" => Ok(RobustnessMode::Locality),
            "singularity" => Ok(RobustnessMode::Singularity),
            "oracle" => Ok(RobustnessMode::Oracle),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessConfig {
    pub mode: RobustnessMode,
    /// Check every attack instead of stopping at the first feasible one.
    pub all_attacks: bool,
    pub jobs: usize,
    pub max_states: Option<usize>,
    pub por: bool,
    /// Bounds for oracle mode.
    pub oracle: ExplorationConfig,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            mode: RobustnessMode::Auto,
            all_attacks: false,
            jobs: 1,
            max_states: None,
            por: false,
            oracle: ExplorationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Robust,
    NotRobust,
    Unknown,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Robust => 0,
            Verdict::NotRobust => 1,
            Verdict::Unknown => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub attack: Attack,
    pub label: String,
    /// `None` when the state budget ran out.
    pub reachable: Option<bool>,
    pub states_visited: usize,
    pub transitions: usize,
    pub witness_schedule: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessVerdict {
    pub verdict: Verdict,
    /// The mode actually used, after resolving `auto`.
    pub mode: RobustnessMode,
    pub feasible_attack: Option<Attack>,
    #[serde(skip)]
    pub sc_witness: Option<ReachWitness>,
    pub attacks: Vec<AttackReport>,
    /// Oracle mode: a violation of least cost, if any.
    #[serde(skip)]
    pub violation: Option<ViolationReport>,
    /// Oracle mode only: the answer holds within the exploration bounds.
    pub bounded: bool,
    pub bound_exhausted: bool,
}

fn resolve(p: &Program, mode: RobustnessMode) -> RobustnessMode {
    match mode {
        RobustnessMode::Auto if p.has_fence() => RobustnessMode::Locality,
        RobustnessMode::Auto => RobustnessMode::Singularity,
        m => m,
    }
}

fn check_attack(p: &Program, a: &Attack, mode: InstrumentMode, cfg: &RobustnessConfig) -> Result<(AttackReport, Option<ReachWitness>), InstrumentError> {
    let ip = instrument_program(p, a, mode)?;
    let mut q = ReachQuery::new(ip.program, ip.manifest.address_map.suc);
    q.max_states = cfg.max_states;
    let r: Result<ReachResult, ReachError> = if cfg.por { por_reduce(&q) } else { reachable(&q) };
    let label = a.describe(p);
    Ok(match r {
        Ok(r) => (
            AttackReport {
                attack: a.clone(),
                label,
                reachable: Some(r.reachable),
                states_visited: r.stats.states_visited,
                transitions: r.stats.transitions,
                witness_schedule: r.witness.as_ref().map(|w| w.schedule.clone()),
            },
            r.witness,
        ),
        Err(ReachError::BudgetExhausted(stats)) => (
            AttackReport {
                attack: a.clone(),
                label,
                reachable: None,
                states_visited: stats.states_visited,
                transitions: stats.transitions,
                witness_schedule: None,
            },
            None,
        ),
        Err(ReachError::InvalidQuery(m)) => unreachable!("instrumented program is well-formed: {m}"),
    })
}

/// Decide robustness: not robust iff the instrumented program of some
/// attack reaches `suc` under SC. Oracle mode explores the relaxed semantics
/// within bounds instead.
pub fn check_robustness(p: &Program, cfg: &RobustnessConfig) -> Result<RobustnessVerdict, InstrumentError> {
    let diags = validate(p);
    if !diags.is_empty() {
        return Err(InstrumentError::PreconditionViolated(format!(
            "program is not well-formed: {}",
            diags[0].message
        )));
    }
    let mode = resolve(p, cfg.mode);
    let imode = match mode {
        RobustnessMode::Locality => InstrumentMode::Locality,
        RobustnessMode::Singularity => InstrumentMode::Singularity,
        RobustnessMode::Oracle => return Ok(oracle_verdict(p, cfg)),
        RobustnessMode::Auto => unreachable!(),
    };
    if imode == InstrumentMode::Singularity && p.has_fence() {
        return Err(InstrumentError::PreconditionViolated(
            "singularity mode requires a program without fence".into(),
        ));
    }

    let attacks = enumerate_attacks(p);
    let mut results = Vec::new();
    if cfg.jobs <= 1 {
        for a in &attacks {
            let r = check_attack(p, a, imode, cfg)?;
            let hit = r.0.reachable == Some(true);
            results.push(r);
            if hit && !cfg.all_attacks {
                break;
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .expect("thread pool");
        results = pool.install(|| {
            attacks
                .par_iter()
                .map(|a| check_attack(p, a, imode, cfg))
                .collect::<Result<Vec<_>, _>>()
        })?;
        if !cfg.all_attacks {
            if let Some(k) = results.iter().position(|r| r.0.reachable == Some(true)) {
                results.truncate(k + 1);
            }
        }
    }

    let first = results.iter().position(|r| r.0.reachable == Some(true));
    let unknown = results.iter().any(|r| r.0.reachable.is_none());
    let verdict = match (first, unknown) {
        (Some(_), _) => Verdict::NotRobust,
        (None, true) => Verdict::Unknown,
        (None, false) => Verdict::Robust,
    };
    let (feasible_attack, sc_witness) = match first {
        Some(k) => (Some(results[k].0.attack.clone()), results[k].1.clone()),
        None => (None, None),
    };
    Ok(RobustnessVerdict {
        verdict,
        mode,
        feasible_attack,
        sc_witness,
        attacks: results.into_iter().map(|r| r.0).collect(),
        violation: None,
        bounded: false,
        bound_exhausted: false,
    })
}

fn oracle_verdict(p: &Program, cfg: &RobustnessConfig) -> RobustnessVerdict {
    let (verdict, violation, exhausted) = match find_minimal_violation(p, &cfg.oracle) {
        Search::Violation(v) => (Verdict::NotRobust, Some(*v), false),
        Search::NotFoundWithinBounds { bound_exhausted } => (Verdict::Robust, None, bound_exhausted),
    };
    RobustnessVerdict {
        verdict,
        mode: RobustnessMode::Oracle,
        feasible_attack: None,
        sc_witness: None,
        attacks: Vec::new(),
        violation,
        bounded: true,
        bound_exhausted: exhausted,
    }
}
