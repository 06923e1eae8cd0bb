//! Soundness, monotonicity, completeness and confluence checks for runs of
//! the distributed-logic application.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;

use super::{oracle_closure, Closure, Theory};
use crate::knowledge::{Kind, Tick};
use crate::network::{NodeId, PolicyKind, World};
use crate::term::{Arg, Term};
use crate::trace::{Event, Source, Trace};

/// Upper bound on the interleavings tried by [`check_confluence`].
pub const MAX_SCHEDULES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
    NotApplicable(String),
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail(why) => write!(f, "FAIL ({why})"),
            Verdict::NotApplicable(why) => write!(f, "NOT-APPLICABLE ({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    pub soundness: Verdict,
    pub monotonicity: Verdict,
    pub completeness: Verdict,
    pub confluence: Verdict,
    pub closure: Closure,
    pub trace: Trace,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        ![
            &self.soundness,
            &self.monotonicity,
            &self.completeness,
            &self.confluence,
        ]
        .iter()
        .any(|v| v.is_fail())
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "soundness: {}", self.soundness)?;
        writeln!(f, "monotonicity: {}", self.monotonicity)?;
        writeln!(f, "completeness: {}", self.completeness)?;
        writeln!(f, "confluence: {}", self.confluence)
    }
}

type Snapshot = BTreeMap<NodeId, BTreeSet<Term>>;

fn snapshot(world: &World) -> Snapshot {
    world
        .nodes
        .iter()
        .map(|(id, n)| (id.clone(), n.kb.facts().cloned().collect()))
        .collect()
}

/// Runs a clone of `initial` for `horizon` ticks and checks all four
/// properties. Facts present before the run are not observations.
pub fn check_properties(initial: &World, horizon: Tick) -> PropertyReport {
    let mut report = check_run(initial, horizon);
    report.confluence = check_confluence(initial, horizon);
    report
}

/// Like [`check_properties`] without the confluence re-runs.
pub fn check_run(initial: &World, horizon: Tick) -> PropertyReport {
    let empty = Theory::default();
    let theory = initial.theory.as_ref().unwrap_or(&empty);
    let mut world = initial.clone();

    let static_topology =
        initial.topology.schedule().is_empty() && initial.script.joins.is_empty() && initial.script.leaves.is_empty();
    let diameter = initial.contact_diameter();
    let track_consistency = static_topology && diameter.is_some();

    let mut snapshots = vec![(None, snapshot(&world))];
    let mut trace = Trace::default();
    let mut divergent: Vec<(Tick, String)> = Vec::new();
    for _ in 0..horizon {
        let now = world.clock;
        trace.extend(world.step());
        snapshots.push((Some(now), snapshot(&world)));
        if track_consistency {
            let c = world.consistency_check();
            if !c.is_consistent() {
                divergent.push((now, c.to_string()));
            }
        }
    }

    let mut observations = BTreeSet::new();
    let mut last_observation: Tick = 0;
    let mut removals = 0usize;
    let mut expired = 0usize;
    for r in trace.iter() {
        match &r.event {
            Event::Store {
                source: Source::Inject | Source::Result,
                item,
                ..
            } if item.kind == Kind::Fact => {
                observations.insert(item.term.clone());
                last_observation = last_observation.max(r.tick);
            }
            Event::Replace { old, .. } if old.kind == Kind::Fact => removals += 1,
            Event::Purge { item, .. } if item.kind == Kind::Fact => {
                removals += 1;
                expired += 1;
            }
            _ => {}
        }
    }
    let closure = oracle_closure(theory, &observations);

    let soundness = soundness(&snapshots, &closure);

    let lowering = initial.order.lowers(Kind::Fact) || expired > 0;
    let monotonicity = if removals > 0 && lowering {
        Verdict::NotApplicable(format!(
            "{removals} facts were replaced or expired under a non-empty order or ttl"
        ))
    } else {
        monotonicity(&snapshots)
    };

    let completeness = if !static_topology {
        Verdict::NotApplicable("topology changes during the run".into())
    } else if diameter.is_none() {
        Verdict::NotApplicable("contact graph is disconnected".into())
    } else if initial.policy.kind != PolicyKind::PushAll {
        Verdict::NotApplicable(format!("policy is {}", initial.policy.kind))
    } else if removals > 0 {
        Verdict::NotApplicable("facts were removed during the run".into())
    } else if !closure.complete {
        Verdict::NotApplicable("oracle closure was cut off".into())
    } else {
        let period = initial.policy.period;
        let required = last_observation + closure.depth as Tick + period * diameter.unwrap_or(0) as Tick + period;
        if horizon < required {
            Verdict::NotApplicable(format!("horizon {horizon} < required {required}"))
        } else {
            completeness(&snapshots, &closure, required, &divergent)
        }
    };

    PropertyReport {
        soundness,
        monotonicity,
        completeness,
        confluence: Verdict::NotApplicable("not checked".into()),
        closure,
        trace,
    }
}

fn soundness(snapshots: &[(Option<Tick>, Snapshot)], closure: &Closure) -> Verdict {
    for (tick, snap) in snapshots {
        for (node, facts) in snap {
            if let Some(bad) = facts.iter().find(|f| !closure.facts.contains(*f)) {
                let when = tick.map_or_else(|| "before the run".to_string(), |t| format!("tick {t}"));
                return if closure.complete {
                    Verdict::Fail(format!("{bad} at {node} ({when}) is not entailed by the observations"))
                } else {
                    Verdict::NotApplicable(format!("oracle closure was cut off before {bad} was decided"))
                };
            }
        }
    }
    Verdict::Pass
}

fn monotonicity(snapshots: &[(Option<Tick>, Snapshot)]) -> Verdict {
    for pair in snapshots.windows(2) {
        let (_, before) = &pair[0];
        let (tick, after) = &pair[1];
        for (node, facts) in before {
            let Some(now) = after.get(node) else { continue };
            if let Some(lost) = facts.difference(now).next() {
                return Verdict::Fail(format!("{node} lost {lost} at tick {}", tick.unwrap_or_default()));
            }
        }
    }
    Verdict::Pass
}

fn completeness(
    snapshots: &[(Option<Tick>, Snapshot)],
    closure: &Closure,
    required: Tick,
    divergent: &[(Tick, String)],
) -> Verdict {
    for (tick, snap) in snapshots {
        if tick.is_some_and(|t| t + 1 >= required) {
            for (node, facts) in snap {
                if let Some(missing) = closure.facts.difference(facts).next() {
                    return Verdict::Fail(format!(
                        "{node} lacks {missing} after tick {}",
                        tick.unwrap_or_default()
                    ));
                }
            }
        }
    }
    match divergent.iter().find(|(t, _)| t + 1 >= required) {
        Some((t, why)) => Verdict::Fail(format!("after tick {t}: {why}")),
        None => Verdict::Pass,
    }
}

/// Each node's facts with primitive outputs made schedule independent:
/// timestamps and fresh symbols are replaced by names derived from the goal
/// that produced them.
pub fn canonical_fact_sets(world: &World, trace: &Trace) -> Snapshot {
    let mut results: BTreeMap<Term, Term> = BTreeMap::new();
    let mut fresh: BTreeMap<String, String> = BTreeMap::new();
    if let Some(theory) = &world.theory {
        for r in trace.iter() {
            let Event::Execute { node, goal } = &r.event else {
                continue;
            };
            let Some(p) = theory.primitive(&goal.pred) else {
                continue;
            };
            let goal = goal.canonical();
            let (term, names) = p.result_term(&goal, node, r.tick);
            for (k, name) in names.into_iter().enumerate() {
                fresh.insert(name, format!("fresh[{goal}]{k}"));
            }
            let mut args = term.args.clone();
            args[0] = Arg::sym(format!("t[{goal}]"));
            results.insert(term.clone(), Term::new(term.pred.clone(), args));
        }
    }
    let rename = |t: &Term| -> Term {
        if let Some(c) = results.get(t) {
            return rename_fresh(c, &fresh);
        }
        rename_fresh(t, &fresh)
    };
    world
        .nodes
        .iter()
        .map(|(id, n)| (id.clone(), n.kb.facts().map(rename).collect()))
        .collect()
}

fn rename_fresh(t: &Term, fresh: &BTreeMap<String, String>) -> Term {
    let args = t
        .args
        .iter()
        .map(|a| match a {
            Arg::Sym(s) => fresh.get(s).map_or_else(|| a.clone(), |c| Arg::sym(c.clone())),
            _ => a.clone(),
        })
        .collect();
    Term::new(t.pred.clone(), args)
}

/// Re-runs `initial` under up to [`MAX_SCHEDULES`] permutations of the
/// per-tick activity order and compares canonical final fact sets.
pub fn check_confluence(initial: &World, horizon: Tick) -> Verdict {
    let k = initial.activities().len();
    let total: usize = (1..=k)
        .try_fold(1usize, |acc, i| acc.checked_mul(i))
        .unwrap_or(usize::MAX);
    let mut reference: Option<(Vec<usize>, Snapshot)> = None;
    for ranks in (0..k).permutations(k).take(MAX_SCHEDULES) {
        let mut world = initial.clone();
        world.set_schedule(Some(ranks.clone()));
        let trace = world.run(horizon);
        let facts = canonical_fact_sets(&world, &trace);
        match &reference {
            None => reference = Some((ranks, facts)),
            Some((ref_ranks, ref_facts)) if *ref_facts != facts => {
                let diff = ref_facts
                    .iter()
                    .find(|(id, f)| facts.get(*id) != Some(f))
                    .map(|(id, _)| id.clone())
                    .unwrap_or_default();
                return Verdict::Fail(format!("schedules {ref_ranks:?} and {ranks:?} disagree at {diff}"));
            }
            Some(_) => {}
        }
    }
    if total <= MAX_SCHEDULES {
        Verdict::Pass
    } else {
        Verdict::NotApplicable(format!("{total} interleavings; first {MAX_SCHEDULES} agree"))
    }
}
