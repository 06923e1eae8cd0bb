//! Built-in image-delivery scenario for a small team of robots.

use super::Theory;
use crate::knowledge::{Kind, ReplacementOrder};
use crate::network::{ExchangePolicy, Injection, Node, Topology, World};

pub const ROBOT_THEORY: &str = include_str!("../../../../scenarios/robot.theory");

pub fn robot_theory() -> Theory {
    ROBOT_THEORY.parse().expect("built-in theory parses")
}

/// Stale positions (O1) and interest override (O2) over every predicate the
/// theory mentions.
pub fn robot_order(theory: &Theory) -> ReplacementOrder {
    ReplacementOrder::new(vec![
        ReplacementOrder::stale_position(),
        ReplacementOrder::interest_override(theory.predicates().keys()),
    ])
}

/// Four rooms in a line. `r1` in room1 asks for images of areaA, the camera
/// robot `r2` sits in room2, and the motion sensor on `r3` in room3 detects
/// movement at tick 2.
pub fn robot_scenario() -> (World, Theory) {
    let theory = robot_theory();
    let mut world = World::new(Topology::line("room", 4));
    world.order = robot_order(&theory);
    world.policy = ExchangePolicy::push_all();
    world.theory = Some(theory.clone());
    world.seed = 1;
    for node in [
        Node::new("r1", "room1"),
        Node::new("r2", "room2").with_capabilities(["camera"]),
        Node::new("r3", "room3").with_capabilities(["motion"]),
    ] {
        world.add_node(node).expect("distinct ids and known rooms");
    }
    let interest = Injection::new(0, "r1", Kind::Goal, "Interest(9, areaA)".parse().unwrap());
    let detect = Injection::new(2, "r3", Kind::Fact, "Detect(2, areaA)".parse().unwrap());
    for inj in [interest, detect] {
        world.inject(inj).expect("node exists");
    }
    (world, theory)
}

/// Two-robot cut of [`robot_scenario`]: the requester and a robot carrying
/// both camera and motion sensor, in adjacent rooms.
pub fn robot_pair_scenario() -> (World, Theory) {
    let theory = robot_theory();
    let mut world = World::new(Topology::line("room", 2));
    world.order = robot_order(&theory);
    world.theory = Some(theory.clone());
    world.seed = 1;
    world.add_node(Node::new("r1", "room1")).unwrap();
    world
        .add_node(Node::new("r2", "room2").with_capabilities(["camera", "motion"]))
        .unwrap();
    world
        .inject(Injection::new(
            0,
            "r1",
            Kind::Goal,
            "Interest(9, areaA)".parse().unwrap(),
        ))
        .unwrap();
    world
        .inject(Injection::new(2, "r2", Kind::Fact, "Detect(2, areaA)".parse().unwrap()))
        .unwrap();
    (world, theory)
}
