//! Discrete-event world of nodes that exchange knowledge opportunistically
//! when they share a room or sit in adjacent rooms.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::distlogic::{self, InferenceState, Theory};
use crate::knowledge::{
    InsertOutcome, ItemKey, Kind, KnowledgeBase, KnowledgeError, KnowledgeItem, ReplacementOrder, Tick,
};
use crate::term::Term;
use crate::trace::{Event, Source, Trace};

pub type NodeId = String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown room '{0}'")]
    UnknownRoom(String),
    #[error("room '{0}' cannot be adjacent to itself")]
    SelfAdjacent(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("exchange period must be at least 1")]
    ZeroPeriod,
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Per-peer bookkeeping for [`PolicyKind::PushDelta`]: every stored item gets
/// an arrival sequence number, and each peer remembers the number reached at
/// the last contact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct DeltaState {
    seq: u64,
    arrivals: BTreeMap<ItemKey, u64>,
    high_water: BTreeMap<NodeId, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub room: String,
    pub capabilities: BTreeSet<String>,
    pub kb: KnowledgeBase,
    pub logic: InferenceState,
    delta: DeltaState,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, room: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            room: room.into(),
            capabilities: BTreeSet::new(),
            kb: KnowledgeBase::new(),
            logic: InferenceState::default(),
            delta: DeltaState::default(),
        }
    }

    pub fn with_capabilities<I, S>(mut self, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.capabilities.extend(caps.into_iter().map(Into::into));
        self
    }

    pub fn has_capability(&self, cap: &str) -> bool {
        self.capabilities.contains(cap)
    }

    /// Stores `item` and records its arrival for delta exchange.
    pub fn accept(&mut self, item: KnowledgeItem, order: &ReplacementOrder, now: Tick) -> InsertOutcome {
        let key = item.key();
        let outcome = self.kb.insert(item, order, now);
        if let InsertOutcome::Added { replaced } = &outcome {
            self.delta.seq += 1;
            self.delta.arrivals.insert(key, self.delta.seq);
            for old in replaced {
                self.delta.arrivals.remove(&old.key());
            }
        }
        outcome
    }

    /// Like [`Node::accept`], but returns the trace events for a stored item.
    pub(crate) fn accept_traced(
        &mut self,
        item: KnowledgeItem,
        source: Source,
        order: &ReplacementOrder,
        now: Tick,
    ) -> (InsertOutcome, Vec<Event>) {
        let outcome = self.accept(item.clone(), order, now);
        let mut events = Vec::new();
        if let InsertOutcome::Added { replaced } = &outcome {
            let by = item.key();
            events.push(Event::Store {
                node: self.id.clone(),
                source,
                item,
            });
            for old in replaced {
                events.push(Event::Replace {
                    node: self.id.clone(),
                    old: old.clone(),
                    by: by.clone(),
                });
            }
        }
        (outcome, events)
    }

    pub fn purge(&mut self, now: Tick) -> Vec<KnowledgeItem> {
        let removed = self.kb.purge(now);
        for item in &removed {
            self.delta.arrivals.remove(&item.key());
        }
        removed
    }

    fn offer(&self, peer: &str, policy: &ExchangePolicy) -> Vec<KnowledgeItem> {
        match policy.kind {
            PolicyKind::PushAll => self.kb.iter().cloned().collect(),
            PolicyKind::PushDelta => {
                let mark = self.delta.high_water.get(peer).copied().unwrap_or(0);
                self.kb
                    .iter()
                    .filter(|i| self.delta.arrivals.get(&i.key()).is_some_and(|&s| s > mark))
                    .cloned()
                    .collect()
            }
        }
    }

    fn mark_contact(&mut self, peer: &str) {
        self.delta.high_water.insert(peer.to_string(), self.delta.seq);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub tick: Tick,
    pub node: NodeId,
    pub room: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    rooms: BTreeSet<String>,
    adjacency: BTreeSet<(String, String)>,
    schedule: Vec<Move>,
}

impl Topology {
    pub fn new<R, S>(rooms: R, adjacent: &[(S, S)]) -> Result<Self, NetworkError>
    where
        R: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let rooms: BTreeSet<String> = rooms.into_iter().map(|r| r.as_ref().to_string()).collect();
        let mut adjacency = BTreeSet::new();
        for (a, b) in adjacent {
            let (a, b) = (a.as_ref(), b.as_ref());
            for r in [a, b] {
                if !rooms.contains(r) {
                    return Err(NetworkError::UnknownRoom(r.to_string()));
                }
            }
            if a == b {
                return Err(NetworkError::SelfAdjacent(a.to_string()));
            }
            adjacency.insert((a.to_string(), b.to_string()));
            adjacency.insert((b.to_string(), a.to_string()));
        }
        Ok(Topology {
            rooms,
            adjacency,
            schedule: Vec::new(),
        })
    }

    /// Rooms `prefix1 .. prefixN` joined in a line.
    pub fn line(prefix: &str, n: usize) -> Self {
        let rooms: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
        let edges: Vec<(String, String)> = rooms.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Topology::new(rooms, &edges).expect("generated rooms exist")
    }

    pub fn rooms(&self) -> &BTreeSet<String> {
        &self.rooms
    }

    pub fn schedule(&self) -> &[Move] {
        &self.schedule
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.adjacency.contains(&(a.to_string(), b.to_string()))
    }

    /// Unordered adjacency pairs, each listed once.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.adjacency
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn schedule_move(
        &mut self,
        tick: Tick,
        node: impl Into<NodeId>,
        room: impl Into<String>,
    ) -> Result<(), NetworkError> {
        let room = room.into();
        if !self.rooms.contains(&room) {
            return Err(NetworkError::UnknownRoom(room));
        }
        self.schedule.push(Move {
            tick,
            node: node.into(),
            room,
        });
        self.schedule.sort_by(|a, b| (a.tick, &a.node).cmp(&(b.tick, &b.node)));
        Ok(())
    }

    pub fn in_contact(&self, room_a: &str, room_b: &str) -> bool {
        room_a == room_b || self.adjacent(room_a, room_b)
    }

    /// Placement after applying every scheduled move with `tick <= t`.
    pub fn placement_at(&self, initial: &BTreeMap<NodeId, String>, t: Tick) -> BTreeMap<NodeId, String> {
        let mut placement = initial.clone();
        for m in self.schedule.iter().filter(|m| m.tick <= t) {
            if let Some(room) = placement.get_mut(&m.node) {
                *room = m.room.clone();
            }
        }
        placement
    }
}

/// Unordered pairs `(a, b)` with `a < b` of nodes in the same or adjacent
/// rooms.
pub fn contacts_at(
    topology: &Topology,
    placement: &BTreeMap<NodeId, String>,
) -> Result<BTreeSet<(NodeId, NodeId)>, NetworkError> {
    for room in placement.values() {
        if !topology.rooms.contains(room) {
            return Err(NetworkError::UnknownRoom(room.clone()));
        }
    }
    let nodes: Vec<(&NodeId, &String)> = placement.iter().collect();
    let mut pairs = BTreeSet::new();
    for (i, (a, ra)) in nodes.iter().enumerate() {
        for (b, rb) in &nodes[i + 1..] {
            if topology.in_contact(ra, rb) {
                pairs.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Offer the whole knowledge base at every contact.
    PushAll,
    /// Offer only what arrived since the last contact with that peer.
    PushDelta,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::PushAll => "push-all",
            PolicyKind::PushDelta => "push-delta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangePolicy {
    pub kind: PolicyKind,
    pub period: Tick,
}

impl ExchangePolicy {
    pub fn new(kind: PolicyKind, period: Tick) -> Result<Self, NetworkError> {
        if period == 0 {
            return Err(NetworkError::ZeroPeriod);
        }
        Ok(ExchangePolicy { kind, period })
    }

    pub fn push_all() -> Self {
        ExchangePolicy {
            kind: PolicyKind::PushAll,
            period: 1,
        }
    }

    pub fn due(&self, now: Tick) -> bool {
        now.is_multiple_of(self.period)
    }
}

impl Default for ExchangePolicy {
    fn default() -> Self {
        Self::push_all()
    }
}

/// Both nodes offer per `policy` and store what they receive; expired items
/// are purged first so they never travel.
pub fn exchange(
    a: &mut Node,
    b: &mut Node,
    policy: &ExchangePolicy,
    order: &ReplacementOrder,
    now: Tick,
) -> Vec<Event> {
    let mut events = Vec::new();
    for node in [&mut *a, &mut *b] {
        for item in node.purge(now) {
            events.push(Event::Purge {
                node: node.id.clone(),
                item,
            });
        }
    }
    let from_a = a.offer(&b.id, policy);
    let from_b = b.offer(&a.id, policy);
    let mut stored = Vec::new();
    let (mut by_a, mut by_b) = (0, 0);
    for item in from_b {
        let (outcome, ev) = a.accept_traced(item, Source::Receive(b.id.clone()), order, now);
        by_a += usize::from(matches!(outcome, InsertOutcome::Added { .. }));
        stored.extend(ev);
    }
    for item in from_a {
        let (outcome, ev) = b.accept_traced(item, Source::Receive(a.id.clone()), order, now);
        by_b += usize::from(matches!(outcome, InsertOutcome::Added { .. }));
        stored.extend(ev);
    }
    a.mark_contact(&b.id);
    b.mark_contact(&a.id);
    if by_a + by_b > 0 {
        events.push(Event::Exchange {
            a: a.id.clone(),
            b: b.id.clone(),
            accepted_by_a: by_a,
            accepted_by_b: by_b,
        });
        events.extend(stored);
    }
    events
}

/// A scripted observation or externally posted goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub tick: Tick,
    pub node: NodeId,
    pub kind: Kind,
    pub term: Term,
    pub ttl: Option<Tick>,
}

impl Injection {
    pub fn new(tick: Tick, node: impl Into<NodeId>, kind: Kind, term: Term) -> Self {
        Injection {
            tick,
            node: node.into(),
            kind,
            term,
            ttl: None,
        }
    }

    pub fn item(&self) -> Result<KnowledgeItem, KnowledgeError> {
        let item = KnowledgeItem::new(self.kind, self.term.clone(), self.tick, self.node.clone())?;
        match self.ttl {
            Some(ttl) => item.with_ttl(ttl),
            None => Ok(item),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub injections: Vec<Injection>,
    pub joins: Vec<(Tick, Node)>,
    pub leaves: Vec<(Tick, NodeId)>,
}

/// One unit of work inside a tick.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Activity {
    Exchange(NodeId, NodeId),
    App(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub reference: NodeId,
    pub node: NodeId,
    pub only_in_reference: Vec<ItemKey>,
    pub only_in_node: Vec<ItemKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub verdict: Consistency,
    pub divergences: Vec<Divergence>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.verdict == Consistency::Consistent
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.verdict {
            Consistency::Consistent => f.write_str("consistent"),
            Consistency::Divergent => {
                f.write_str("divergent")?;
                for d in &self.divergences {
                    write!(f, "\n  {} vs {}:", d.reference, d.node)?;
                    for (k, t) in &d.only_in_reference {
                        write!(f, " -{k} {t}")?;
                    }
                    for (k, t) in &d.only_in_node {
                        write!(f, " +{k} {t}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub nodes: BTreeMap<NodeId, Node>,
    pub topology: Topology,
    pub order: ReplacementOrder,
    pub policy: ExchangePolicy,
    pub theory: Option<Theory>,
    pub script: Script,
    pub clock: Tick,
    pub seed: u64,
    /// Rank per activity in the canonical activity list; `None` keeps the
    /// canonical order (sorted exchanges, then sorted app steps).
    schedule: Option<Vec<usize>>,
}

impl World {
    pub fn new(topology: Topology) -> Self {
        World {
            nodes: BTreeMap::new(),
            topology,
            order: ReplacementOrder::empty(),
            policy: ExchangePolicy::default(),
            theory: None,
            script: Script::default(),
            clock: 0,
            seed: 0,
            schedule: None,
        }
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), NetworkError> {
        if !self.topology.rooms.contains(&node.room) {
            return Err(NetworkError::UnknownRoom(node.room));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(NetworkError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Stores an item at a node before the run, outside the trace.
    pub fn preload(&mut self, node: &str, item: KnowledgeItem) -> Result<InsertOutcome, NetworkError> {
        let n = self
            .nodes
            .get_mut(node)
            .ok_or_else(|| NetworkError::UnknownNode(node.to_string()))?;
        Ok(n.accept(item, &self.order, self.clock))
    }

    pub fn inject(&mut self, injection: Injection) -> Result<(), NetworkError> {
        injection.item()?;
        self.script.injections.push(injection);
        Ok(())
    }

    /// Checks that every scripted event refers to a known node and room.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut known: BTreeSet<&str> = self.nodes.keys().map(String::as_str).collect();
        for (_, n) in &self.script.joins {
            if !self.topology.rooms.contains(&n.room) {
                return Err(NetworkError::UnknownRoom(n.room.clone()));
            }
            known.insert(&n.id);
        }
        for node in self.nodes.values() {
            if !self.topology.rooms.contains(&node.room) {
                return Err(NetworkError::UnknownRoom(node.room.clone()));
            }
        }
        let referenced = self
            .script
            .injections
            .iter()
            .map(|i| &i.node)
            .chain(self.script.leaves.iter().map(|(_, n)| n))
            .chain(self.topology.schedule.iter().map(|m| &m.node));
        for id in referenced {
            if !known.contains(id.as_str()) {
                return Err(NetworkError::UnknownNode(id.clone()));
            }
        }
        Ok(())
    }

    pub fn placement(&self) -> BTreeMap<NodeId, String> {
        self.nodes.iter().map(|(id, n)| (id.clone(), n.room.clone())).collect()
    }

    pub fn contacts(&self) -> BTreeSet<(NodeId, NodeId)> {
        contacts_at(&self.topology, &self.placement()).expect("node rooms are validated on entry")
    }

    /// Longest shortest path of the current contact graph, `None` when it is
    /// disconnected. A single node has diameter 0.
    pub fn contact_diameter(&self) -> Option<usize> {
        let ids: Vec<&NodeId> = self.nodes.keys().collect();
        let contacts = self.contacts();
        let mut adj: BTreeMap<&str, Vec<&str>> = ids.iter().map(|id| (id.as_str(), Vec::new())).collect();
        for (a, b) in &contacts {
            adj.get_mut(a.as_str()).unwrap().push(b);
            adj.get_mut(b.as_str()).unwrap().push(a);
        }
        let mut diameter = 0;
        for start in &ids {
            let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(start.as_str(), 0)]);
            let mut queue = VecDeque::from([start.as_str()]);
            while let Some(cur) = queue.pop_front() {
                let d = dist[cur];
                for &next in &adj[cur] {
                    if !dist.contains_key(next) {
                        dist.insert(next, d + 1);
                        queue.push_back(next);
                    }
                }
            }
            if dist.len() != ids.len() {
                return None;
            }
            diameter = diameter.max(dist.values().copied().max().unwrap_or(0));
        }
        Some(diameter)
    }

    /// Canonical activity list for the current placement.
    pub fn activities(&self) -> Vec<Activity> {
        self.contacts()
            .into_iter()
            .map(|(a, b)| Activity::Exchange(a, b))
            .chain(self.nodes.keys().cloned().map(Activity::App))
            .collect()
    }

    /// Reorders activities within every tick: `ranks[i]` is the position of
    /// the i-th canonical activity. Ignored on ticks whose activity list has
    /// a different length.
    pub fn set_schedule(&mut self, ranks: Option<Vec<usize>>) {
        self.schedule = ranks;
    }

    /// Processes tick `clock`, then advances the clock by one.
    pub fn step(&mut self) -> Trace {
        let now = self.clock;
        let mut trace = Trace::default();

        self.apply_membership(now, &mut trace);

        for node in self.nodes.values_mut() {
            for item in node.purge(now) {
                trace.push(
                    now,
                    Event::Purge {
                        node: node.id.clone(),
                        item,
                    },
                );
            }
        }

        let exchanges_due = self.policy.due(now);
        let mut activities: Vec<(usize, Activity)> = self.activities().into_iter().enumerate().collect();
        if let Some(ranks) = &self.schedule {
            if ranks.len() == activities.len() {
                activities.sort_by_key(|(i, _)| ranks[*i]);
            }
        }
        for (_, activity) in activities {
            match activity {
                Activity::Exchange(a, b) if exchanges_due => {
                    for ev in self.exchange_pair(&a, &b, now) {
                        trace.push(now, ev);
                    }
                }
                Activity::Exchange(..) => {}
                Activity::App(id) => {
                    for ev in self.app_step(&id, now) {
                        trace.push(now, ev);
                    }
                }
            }
        }

        self.clock += 1;
        trace
    }

    pub fn run(&mut self, horizon: Tick) -> Trace {
        let mut trace = Trace::default();
        for _ in 0..horizon {
            trace.extend(self.step());
        }
        trace
    }

    fn apply_membership(&mut self, now: Tick, trace: &mut Trace) {
        for (_, id) in self.script.leaves.iter().filter(|(t, _)| *t == now) {
            if self.nodes.remove(id).is_some() {
                trace.push(now, Event::Leave { node: id.clone() });
            }
        }
        for (_, node) in self.script.joins.iter().filter(|(t, _)| *t == now) {
            if !self.nodes.contains_key(&node.id) {
                self.nodes.insert(node.id.clone(), node.clone());
                trace.push(
                    now,
                    Event::Join {
                        node: node.id.clone(),
                        room: node.room.clone(),
                    },
                );
            }
        }
        for m in self.topology.schedule.iter().filter(|m| m.tick == now) {
            if let Some(node) = self.nodes.get_mut(&m.node) {
                if node.room != m.room {
                    let from = std::mem::replace(&mut node.room, m.room.clone());
                    trace.push(
                        now,
                        Event::Move {
                            node: m.node.clone(),
                            from,
                            to: m.room.clone(),
                        },
                    );
                }
            }
        }
    }

    fn exchange_pair(&mut self, a: &str, b: &str, now: Tick) -> Vec<Event> {
        let (Some(mut na), Some(mut nb)) = (self.nodes.remove(a), self.nodes.remove(b)) else {
            return Vec::new();
        };
        let events = exchange(&mut na, &mut nb, &self.policy, &self.order, now);
        self.nodes.insert(na.id.clone(), na);
        self.nodes.insert(nb.id.clone(), nb);
        events
    }

    fn app_step(&mut self, id: &str, now: Tick) -> Vec<Event> {
        let World {
            nodes,
            order,
            theory,
            script,
            ..
        } = self;
        let Some(node) = nodes.get_mut(id) else {
            return Vec::new();
        };
        let mut events = Vec::new();
        for inj in script.injections.iter().filter(|i| i.tick == now && i.node == id) {
            match inj.item() {
                Ok(item) => {
                    if item.kind == Kind::Goal {
                        node.logic.requests.insert(item.term.clone());
                    }
                    events.extend(node.accept_traced(item, Source::Inject, order, now).1);
                }
                Err(e) => events.push(Event::AppError {
                    node: id.to_string(),
                    message: e.to_string(),
                }),
            }
        }
        if let Some(theory) = theory {
            events.extend(distlogic::app_step(node, theory, order, now));
        }
        events
    }

    /// Compares every node's normalized knowledge base with the first node's.
    pub fn consistency_check(&self) -> ConsistencyReport {
        let now = self.clock;
        let mut bases = self
            .nodes
            .values()
            .map(|n| (&n.id, n.kb.normalized(&self.order, now).keys()));
        let Some((ref_id, reference)) = bases.next() else {
            return ConsistencyReport {
                verdict: Consistency::Consistent,
                divergences: Vec::new(),
            };
        };
        let divergences: Vec<Divergence> = bases
            .filter(|(_, keys)| *keys != reference)
            .map(|(id, keys)| Divergence {
                reference: ref_id.clone(),
                node: id.clone(),
                only_in_reference: reference.difference(&keys).cloned().collect(),
                only_in_node: keys.difference(&reference).cloned().collect(),
            })
            .collect();
        ConsistencyReport {
            verdict: if divergences.is_empty() {
                Consistency::Consistent
            } else {
                Consistency::Divergent
            },
            divergences,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(s: &str, t: Tick, origin: &str) -> KnowledgeItem {
        KnowledgeItem::fact(s.parse().unwrap(), t, origin).unwrap()
    }

    fn placement(pairs: &[(&str, &str)]) -> BTreeMap<NodeId, String> {
        pairs.iter().map(|(n, r)| (n.to_string(), r.to_string())).collect()
    }

    #[test]
    fn contacts_same_or_adjacent_room() {
        let topo = Topology::line("r", 3);
        let c = contacts_at(&topo, &placement(&[("a", "r1"), ("b", "r1")])).unwrap();
        assert_eq!(c, BTreeSet::from([("a".into(), "b".into())]));
        let c = contacts_at(&topo, &placement(&[("a", "r1"), ("b", "r3")])).unwrap();
        assert!(c.is_empty());
        let c = contacts_at(&topo, &placement(&[("a", "r2"), ("b", "r2"), ("c", "r2")])).unwrap();
        assert_eq!(c.len(), 3);
        let err = contacts_at(&topo, &placement(&[("a", "r9")])).unwrap_err();
        assert_eq!(err, NetworkError::UnknownRoom("r9".into()));
    }

    #[test]
    fn topology_validation() {
        assert_eq!(
            Topology::new(["a"], &[("a", "a")]).unwrap_err(),
            NetworkError::SelfAdjacent("a".into())
        );
        assert_eq!(
            Topology::new(["a"], &[("a", "b")]).unwrap_err(),
            NetworkError::UnknownRoom("b".into())
        );
        let t = Topology::new(["a", "b"], &[("a", "b")]).unwrap();
        assert!(t.adjacent("b", "a"));
        assert_eq!(
            ExchangePolicy::new(PolicyKind::PushAll, 0),
            Err(NetworkError::ZeroPeriod)
        );
    }

    #[test]
    fn push_all_exchange_merges_both_ways() {
        let order = ReplacementOrder::new(vec![ReplacementOrder::stale_position()]);
        let mut a = Node::new("a", "r1");
        let mut b = Node::new("b", "r1");
        a.accept(fact("F(one)", 0, "a"), &order, 0);
        b.accept(fact("F(two)", 0, "b"), &order, 0);
        exchange(&mut a, &mut b, &ExchangePolicy::push_all(), &order, 1);
        assert_eq!(a.kb.keys(), b.kb.keys());
        assert_eq!(a.kb.len(), 2);

        let mut a = Node::new("a", "r1");
        let mut b = Node::new("b", "r1");
        a.accept(fact("Position(3, r1, p)", 3, "a"), &order, 5);
        b.accept(fact("Position(5, r1, q)", 5, "b"), &order, 5);
        let events = exchange(&mut a, &mut b, &ExchangePolicy::push_all(), &order, 5);
        assert_eq!(a.kb.keys(), b.kb.keys());
        assert_eq!(a.kb.facts().next().unwrap().to_string(), "Position(5,r1,q)");
        assert!(events
            .iter()
            .any(|e| matches!(e, Event::Replace { node, .. } if node == "a")));
    }

    #[test]
    fn expired_items_never_travel() {
        let order = ReplacementOrder::empty();
        let mut a = Node::new("a", "r1");
        let mut b = Node::new("b", "r1");
        a.accept(fact("F(x)", 0, "a").with_ttl(3).unwrap(), &order, 0);
        let events = exchange(&mut a, &mut b, &ExchangePolicy::push_all(), &order, 3);
        assert!(b.kb.is_empty());
        assert!(a.kb.is_empty());
        assert!(matches!(events[0], Event::Purge { .. }));
    }

    #[test]
    fn push_delta_offers_only_new_arrivals() {
        let order = ReplacementOrder::empty();
        let policy = ExchangePolicy::new(PolicyKind::PushDelta, 1).unwrap();
        let mut a = Node::new("a", "r1");
        let mut b = Node::new("b", "r1");
        a.accept(fact("F(one)", 0, "a"), &order, 0);
        exchange(&mut a, &mut b, &policy, &order, 0);
        assert_eq!(b.kb.len(), 1);
        assert!(a.offer("b", &policy).is_empty());
        assert!(b.offer("a", &policy).is_empty());
        a.accept(fact("F(two)", 1, "a"), &order, 1);
        assert_eq!(a.offer("b", &policy).len(), 1);
        // a peer never met gets everything
        assert_eq!(a.offer("c", &policy).len(), 2);
    }

    #[test]
    fn idle_world_only_advances_clock() {
        let mut w = World::new(Topology::line("r", 2));
        assert!(w.step().is_empty());
        assert_eq!(w.clock, 1);
        assert!(w.run(0).is_empty());
        assert_eq!(w.clock, 1);
    }

    #[test]
    fn colocated_nodes_converge_in_one_step() {
        let mut w = World::new(Topology::line("r", 1));
        w.add_node(Node::new("a", "r1")).unwrap();
        w.add_node(Node::new("b", "r1")).unwrap();
        w.preload("a", fact("F(x)", 0, "a")).unwrap();
        w.step();
        assert!(w.consistency_check().is_consistent());
    }

    #[test]
    fn line_topology_spreads_within_two_steps() {
        let mut w = World::new(Topology::line("r", 3));
        for (id, room) in [("a", "r1"), ("b", "r2"), ("c", "r3")] {
            w.add_node(Node::new(id, room)).unwrap();
        }
        w.preload("a", fact("F(x)", 0, "a")).unwrap();
        w.run(2);
        assert!(w.nodes["c"].kb.contains(Kind::Fact, &"F(x)".parse().unwrap()));
    }

    #[test]
    fn consistency_reports_symmetric_difference() {
        let mut w = World::new(Topology::line("r", 3));
        w.add_node(Node::new("a", "r1")).unwrap();
        assert!(w.consistency_check().is_consistent());
        w.add_node(Node::new("b", "r3")).unwrap();
        w.preload("a", fact("F(a)", 0, "a")).unwrap();
        w.preload("b", fact("F(b)", 0, "b")).unwrap();
        w.run(3);
        let report = w.consistency_check();
        assert_eq!(report.verdict, Consistency::Divergent);
        let d = &report.divergences[0];
        assert_eq!(d.only_in_reference[0].1.to_string(), "F(a)");
        assert_eq!(d.only_in_node[0].1.to_string(), "F(b)");
    }

    #[test]
    fn moves_and_membership_are_traced() {
        let mut w = World::new(Topology::line("r", 3));
        w.add_node(Node::new("a", "r1")).unwrap();
        w.topology.schedule_move(1, "a", "r3").unwrap();
        w.script.joins.push((1, Node::new("b", "r3")));
        w.script.leaves.push((2, "a".to_string()));
        w.validate().unwrap();
        let trace = w.run(3).to_string();
        assert!(trace.contains("1 | move | a r1 -> r3"));
        assert!(trace.contains("1 | join | b r3"));
        assert!(trace.contains("2 | leave | a"));
        assert_eq!(w.nodes.len(), 1);
        assert!(w.topology.schedule_move(0, "a", "nowhere").is_err());
    }
}
