use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use super::explore::{ExplorationConfig, Explorer, Mode, Visit};
use super::witness::is_witness;
use crate::semantics::{Computation, Recorder};
use crate::syntax::Program;
use crate::traces::{build_trace, cost, delayed_store_count, delaying_threads, CostTriple, Trace};

/// A computation whose trace is cyclic.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    #[serde(skip)]
    pub computation: Computation,
    #[serde(skip)]
    pub trace: Trace,
    pub cycle: Vec<usize>,
    pub cost: CostTriple,
    pub delaying_threads: BTreeSet<usize>,
    pub delayed_store_count: usize,
    /// Least cost among the violations the search could see.
    pub bounded_minimal: bool,
}

impl ViolationReport {
    /// Report for `c`, or `None` if its trace is acyclic.
    pub fn of(c: &Computation) -> Option<Self> {
        let trace = build_trace(c);
        let cycle = trace.find_cycle()?;
        Some(ViolationReport {
            computation: c.clone(),
            cycle,
            cost: cost(c),
            delaying_threads: delaying_threads(c),
            delayed_store_count: delayed_store_count(c),
            trace,
            bounded_minimal: false,
        })
    }

    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let threads: Vec<&str> = self
            .delaying_threads
            .iter()
            .map(|t| p.threads[*t].name.as_str())
            .collect();
        serde_json::json!({
            "computation": self.computation.to_json(p),
            "trace": self.trace.to_json(p),
            "cycle": self.cycle,
            "cost": self.cost,
            "delaying_threads": threads,
            "delayed_store_count": self.delayed_store_count,
            "bounded_minimal": self.bounded_minimal,
        })
    }
}

/// Result of a bounded violation search.
#[derive(Debug, Clone)]
pub enum Search {
    Violation(Box<ViolationReport>),
    NotFoundWithinBounds { bound_exhausted: bool },
}

impl Search {
    pub fn violation(&self) -> Option<&ViolationReport> {
        match self {
            Search::Violation(v) => Some(v),
            Search::NotFoundWithinBounds { .. } => None,
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, Search::Violation(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// Computations with no delay have the trace of an SC computation, so the
/// trace is only built once something was delayed.
fn cyclic_report(rec: &Recorder) -> Option<ViolationReport> {
    if rec.delays == 0 || rec.is_empty() {
        return None;
    }
    ViolationReport::of(rec.computation())
}

fn lower_bound(rec: &Recorder) -> CostTriple {
    CostTriple {
        delays: rec.delays,
        reorders: rec.reorders,
        length: rec.len() as u64,
    }
}

/// First violation in enumeration order. Every computation counts, not only
/// maximal ones.
pub fn find_violation(p: &Program, cfg: &ExplorationConfig) -> Search {
    let mut found = None;
    let mut ex = Explorer::by_trace(p, cfg);
    ex.run(&mut |n| {
        if n.state.buffers_empty() {
            if let Some(r) = cyclic_report(n.rec) {
                found = Some(r);
                return Visit::Stop;
            }
        }
        Visit::Continue
    });
    match found {
        Some(r) => Search::Violation(Box::new(r)),
        None => Search::NotFoundWithinBounds {
            bound_exhausted: ex.truncated,
        },
    }
}

/// Branch-and-bound search for a violation of least cost among those
/// accepted by `admit`; `keep` prunes partial paths that can no longer be
/// admitted. Ties go to the first in enumeration order.
///
/// Delays lead the cost order, so the search runs under a growing delay
/// budget and stops at the first budget that admits a violation.
fn minimal_violation_where(
    p: &Program,
    cfg: &ExplorationConfig,
    keep: &dyn Fn(&Recorder) -> bool,
    admit: &dyn Fn(&ViolationReport) -> bool,
) -> Search {
    let mut budget = 0;
    loop {
        let mut best: Option<ViolationReport> = None;
        let mut over_budget = false;
        let mut ex = Explorer::by_trace(p, cfg);
        ex.run(&mut |n| {
            if !keep(n.rec) {
                return Visit::Prune;
            }
            if n.rec.delays > budget {
                over_budget = true;
                return Visit::Prune;
            }
            if let Some(b) = &best {
                if lower_bound(n.rec) >= b.cost {
                    return Visit::Prune;
                }
            }
            if n.state.buffers_empty() {
                if let Some(r) = cyclic_report(n.rec) {
                    if admit(&r) {
                        best = Some(r);
                        // Extensions only cost more.
                        return Visit::Prune;
                    }
                }
            }
            Visit::Continue
        });
        if let Some(mut r) = best {
            r.bounded_minimal = true;
            return Search::Violation(Box::new(r));
        }
        if !over_budget {
            return Search::NotFoundWithinBounds {
                bound_exhausted: ex.truncated,
            };
        }
        budget += 1;
    }
}

/// A violation of lexicographically least (delays, reorders, length)
/// within bounds.
///
/// Among violations of that cost, one in witness form is preferred. Such a
/// violation has the same trace as some other one of the same cost but
/// orders independent actions differently, so this second pass keeps every
/// computation apart.
pub fn find_minimal_violation(p: &Program, cfg: &ExplorationConfig) -> Search {
    let first = minimal_violation_where(p, cfg, &|_| true, &|_| true);
    let Search::Violation(v) = &first else {
        return first;
    };
    if is_witness(&v.computation).is_ok_and(|w| w.all()) {
        return first;
    }
    let bound = v.cost;
    let mut shaped = None;
    let mut ex = Explorer::new(p, cfg);
    ex.run(&mut |n| {
        if lower_bound(n.rec) > bound {
            return Visit::Prune;
        }
        if n.state.buffers_empty() && lower_bound(n.rec) == bound {
            if let Some(r) = cyclic_report(n.rec) {
                if is_witness(&r.computation).is_ok_and(|w| w.all()) {
                    shaped = Some(r);
                    return Visit::Stop;
                }
            }
        }
        Visit::Continue
    });
    match shaped {
        Some(mut r) => {
            r.bounded_minimal = true;
            Search::Violation(Box::new(r))
        }
        None => first,
    }
}

/// Outcome of checking one of the reduction properties within bounds.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub holds: bool,
    /// No violation exists within bounds.
    pub vacuous: bool,
    #[serde(skip)]
    pub witness: Option<ViolationReport>,
    #[serde(skip)]
    pub counterexample: Option<ViolationReport>,
    pub bound_exhausted: bool,
}

impl PropertyVerdict {
    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("verdict serializes");
        v["witness"] = self.witness.as_ref().map(|w| w.to_json(p)).into();
        v["counterexample"] = self.counterexample.as_ref().map(|w| w.to_json(p)).into();
        v
    }
}

fn restricted_check(
    name: &str,
    p: &Program,
    cfg: &ExplorationConfig,
    keep: &dyn Fn(&Recorder) -> bool,
    admit: &dyn Fn(&ViolationReport) -> bool,
) -> PropertyVerdict {
    match minimal_violation_where(p, cfg, keep, admit) {
        Search::Violation(w) => PropertyVerdict {
            property: name.into(),
            holds: true,
            vacuous: false,
            witness: Some(*w),
            counterexample: None,
            bound_exhausted: false,
        },
        Search::NotFoundWithinBounds { bound_exhausted } => match find_violation(p, cfg) {
            Search::Violation(v) => PropertyVerdict {
                property: name.into(),
                holds: false,
                vacuous: false,
                witness: None,
                counterexample: Some(*v),
                bound_exhausted,
            },
            Search::NotFoundWithinBounds { bound_exhausted: b } => PropertyVerdict {
                property: name.into(),
                holds: true,
                vacuous: true,
                witness: None,
                counterexample: None,
                bound_exhausted: bound_exhausted || b,
            },
        },
    }
}

/// Holds iff there is no violation within bounds or some violation delays
/// exactly one store. Requires a program without `fence`.
pub fn check_singularity(p: &Program, cfg: &ExplorationConfig) -> Result<PropertyVerdict, OracleError> {
    if p.has_fence() {
        return Err(OracleError::PreconditionViolated(
            "singularity is only claimed for programs without fence".into(),
        ));
    }
    Ok(restricted_check(
        "singularity",
        p,
        cfg,
        &|rec| rec.delayed_store_count() <= 1,
        &|r| r.delayed_store_count == 1,
    ))
}

/// Holds iff there is no violation within bounds or some violation has
/// exactly one delaying thread.
pub fn check_locality(p: &Program, cfg: &ExplorationConfig) -> PropertyVerdict {
    restricted_check(
        "locality",
        p,
        cfg,
        &|rec| rec.delaying_threads().len() <= 1,
        &|r| r.delaying_threads.len() == 1,
    )
}

/// Deduplicated traces of all SC computations within `max_actions`.
#[derive(Debug, Clone, Default)]
pub struct ScTraceSet {
    pub traces: HashSet<Trace>,
    pub bound_exhausted: bool,
}

pub fn sc_trace_set(p: &Program, cfg: &ExplorationConfig) -> ScTraceSet {
    let sc = ExplorationConfig {
        mode: Mode::Sc,
        buffer_bound: 0,
        ..*cfg
    };
    let mut traces = HashSet::new();
    let mut ex = Explorer::new(p, &sc);
    ex.run(&mut |n| {
        traces.insert(build_trace(n.rec.computation()));
        Visit::Continue
    });
    ScTraceSet {
        traces,
        bound_exhausted: ex.truncated,
    }
}

/// Result of comparing trace cyclicity with membership in the SC trace set.
#[derive(Debug, Clone, Default)]
pub struct ShashaSnirCheck {
    pub checked: usize,
    pub cyclic: usize,
    pub mismatches: Vec<Computation>,
}

/// For every relaxed computation (every prefix with empty buffers) within
/// bounds, compare "trace is cyclic" against "trace is not the trace of an
/// SC computation".
pub fn shasha_snir_check(p: &Program, cfg: &ExplorationConfig) -> ShashaSnirCheck {
    let sc = sc_trace_set(p, cfg);
    let mut out = ShashaSnirCheck::default();
    let mut ex = Explorer::new(p, &ExplorationConfig { mode: Mode::Relaxed, ..*cfg });
    ex.run(&mut |n| {
        if n.state.buffers_empty() {
            let c = n.rec.computation();
            let t = build_trace(c);
            let cyclic = crate::traces::is_cyclic(&t);
            out.checked += 1;
            out.cyclic += cyclic as usize;
            if cyclic == sc.traces.contains(&t) {
                out.mismatches.push(c.clone());
            }
        }
        Visit::Continue
    });
    out
}
