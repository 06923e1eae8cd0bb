//! Seeded random scenarios for property testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HornClause, Theory};
use crate::knowledge::{Kind, Tick};
use crate::network::{ExchangePolicy, Injection, Node, PolicyKind, Topology, World};
use crate::term::{Arg, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyShape {
    Line,
    Ring,
    Clique,
    /// Random rooms, adjacency, policy and moves.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomScenarioConfig {
    pub max_nodes: usize,
    pub max_clauses: usize,
    pub max_constants: usize,
    pub facts: usize,
    /// Injections happen at ticks `0..=inject_window`.
    pub inject_window: Tick,
    pub shape: TopologyShape,
}

impl Default for RandomScenarioConfig {
    fn default() -> Self {
        RandomScenarioConfig {
            max_nodes: 4,
            max_clauses: 10,
            max_constants: 12,
            facts: 6,
            inject_window: 4,
            shape: TopologyShape::Random,
        }
    }
}

const BASE: [(&str, usize); 3] = [("B0", 1), ("B1", 2), ("B2", 2)];
const DERIVED: [(&str, usize); 4] = [("D0", 1), ("D1", 2), ("D2", 1), ("D3", 2)];
const VARS: [&str; 3] = ["X", "Y", "Z"];

fn random_atom(rng: &mut ChaCha8Rng, preds: &[(&str, usize)], consts: &[String]) -> Term {
    let (pred, arity) = *preds.choose(rng).unwrap();
    let args = (0..arity)
        .map(|_| {
            if rng.gen_bool(0.2) {
                Arg::sym(consts.choose(rng).unwrap().clone())
            } else {
                Arg::var(*VARS.choose(rng).unwrap())
            }
        })
        .collect();
    Term::new(pred, args)
}

fn random_theory(rng: &mut ChaCha8Rng, cfg: &RandomScenarioConfig, consts: &[String]) -> Theory {
    let all: Vec<(&str, usize)> = BASE.iter().chain(DERIVED.iter()).copied().collect();
    let n = rng.gen_range(1..=cfg.max_clauses.max(1));
    let clauses = (0..n)
        .map(|_| {
            let body: Vec<Term> = (0..rng.gen_range(1..=2))
                .map(|_| random_atom(rng, &all, consts))
                .collect();
            let bound: Vec<&str> = body.iter().flat_map(Term::vars).collect();
            let (pred, arity) = *DERIVED.choose(rng).unwrap();
            let args = (0..arity)
                .map(|_| match bound.choose(rng) {
                    Some(v) if rng.gen_bool(0.85) => Arg::var(*v),
                    _ => Arg::sym(consts.choose(rng).unwrap().clone()),
                })
                .collect();
            HornClause::new(Term::new(pred, args), body)
        })
        .collect();
    Theory::new(clauses, vec![]).expect("fixed predicate arities")
}

fn topology(rng: &mut ChaCha8Rng, shape: TopologyShape, n: usize) -> (Topology, Vec<String>) {
    let rooms: Vec<String> = (1..=n).map(|i| format!("room{i}")).collect();
    let one_each = rooms.clone();
    match shape {
        TopologyShape::Line => (Topology::line("room", n), one_each),
        TopologyShape::Ring => {
            let mut edges: Vec<(String, String)> = rooms.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
            if n > 2 {
                edges.push((rooms[n - 1].clone(), rooms[0].clone()));
            }
            (Topology::new(rooms.clone(), &edges).unwrap(), one_each)
        }
        TopologyShape::Clique => (
            Topology::new(["room1"], &[] as &[(&str, &str)]).unwrap(),
            vec!["room1".to_string(); n],
        ),
        TopologyShape::Random => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.4) {
                        edges.push((rooms[i].clone(), rooms[j].clone()));
                    }
                }
            }
            let placement = (0..n).map(|_| rooms.choose(rng).unwrap().clone()).collect();
            (Topology::new(rooms.clone(), &edges).unwrap(), placement)
        }
    }
}

/// A random world running a random theory over injected ground facts.
/// The replacement order is empty and items never expire.
pub fn random_scenario(seed: u64, cfg: &RandomScenarioConfig) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_consts = rng.gen_range(1..=cfg.max_constants.max(1));
    let consts: Vec<String> = (0..n_consts).map(|i| format!("c{i}")).collect();
    let theory = random_theory(&mut rng, cfg, &consts);

    let n_nodes = rng.gen_range(1..=cfg.max_nodes.max(1));
    let (topology, placement) = topology(&mut rng, cfg.shape, n_nodes);
    let mut world = World::new(topology);
    world.seed = seed;
    world.theory = Some(theory);
    for (i, room) in placement.iter().enumerate() {
        world.add_node(Node::new(format!("n{}", i + 1), room.clone())).unwrap();
    }
    if cfg.shape == TopologyShape::Random {
        if rng.gen_bool(0.5) {
            let kind = if rng.gen_bool(0.5) {
                PolicyKind::PushAll
            } else {
                PolicyKind::PushDelta
            };
            world.policy = ExchangePolicy::new(kind, rng.gen_range(1..=3)).unwrap();
        }
        let rooms: Vec<String> = world.topology.rooms().iter().cloned().collect();
        for _ in 0..rng.gen_range(0..=3) {
            let tick = rng.gen_range(1..=cfg.inject_window + 4);
            let node = format!("n{}", rng.gen_range(1..=n_nodes));
            let room = rooms.choose(&mut rng).unwrap().clone();
            world.topology.schedule_move(tick, node, room).unwrap();
        }
    }

    for _ in 0..cfg.facts {
        let (pred, arity) = *BASE.choose(&mut rng).unwrap();
        let args = (0..arity)
            .map(|_| Arg::sym(consts.choose(&mut rng).unwrap().clone()))
            .collect();
        let tick = rng.gen_range(0..=cfg.inject_window);
        let node = format!("n{}", rng.gen_range(1..=n_nodes));
        world
            .inject(Injection::new(tick, node, Kind::Fact, Term::new(pred, args)))
            .unwrap();
    }
    world
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlogic::check_run;

    #[test]
    fn same_seed_same_world() {
        let cfg = RandomScenarioConfig::default();
        assert_eq!(random_scenario(7, &cfg), random_scenario(7, &cfg));
        assert_ne!(random_scenario(7, &cfg), random_scenario(8, &cfg));
    }

    #[test]
    fn respects_bounds() {
        let cfg = RandomScenarioConfig::default();
        for seed in 0..50 {
            let w = random_scenario(seed, &cfg);
            let t = w.theory.as_ref().unwrap();
            assert!(w.nodes.len() <= 4);
            assert!(t.clauses().len() <= 10);
            let consts: std::collections::BTreeSet<String> = w
                .script
                .injections
                .iter()
                .flat_map(|i| i.term.args.iter().map(|a| a.to_string()))
                .collect();
            assert!(consts.len() <= 12);
            w.validate().unwrap();
        }
    }

    #[test]
    fn random_runs_are_sound_and_monotone() {
        let cfg = RandomScenarioConfig::default();
        for seed in 0..40 {
            let report = check_run(&random_scenario(seed, &cfg), 16);
            assert!(report.soundness.is_pass(), "seed {seed}: {report}");
            assert!(report.monotonicity.is_pass(), "seed {seed}: {report}");
        }
    }

    #[test]
    fn static_shapes_are_complete() {
        for shape in [TopologyShape::Line, TopologyShape::Ring, TopologyShape::Clique] {
            let cfg = RandomScenarioConfig {
                shape,
                ..RandomScenarioConfig::default()
            };
            for seed in 0..20 {
                let report = check_run(&random_scenario(seed, &cfg), 30);
                assert!(report.completeness.is_pass(), "{shape:?} seed {seed}: {report}");
            }
        }
    }
}
