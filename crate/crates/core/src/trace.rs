//! Line-delimited run traces: `tick | event-kind | payload`.

use std::fmt;

use crate::knowledge::{ItemKey, KnowledgeItem, Tick};
use crate::network::NodeId;
use crate::term::Term;

/// How an item came to be stored at a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// Scripted sensor reading or externally posted goal.
    Inject,
    /// Exchanged from a peer.
    Receive(NodeId),
    /// Local inference.
    Derive,
    /// Result of executing a primitive goal.
    Result,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Move {
        node: NodeId,
        from: String,
        to: String,
    },
    Join {
        node: NodeId,
        room: String,
    },
    Leave {
        node: NodeId,
    },
    Purge {
        node: NodeId,
        item: KnowledgeItem,
    },
    /// An exchange in which at least one side accepted something.
    Exchange {
        a: NodeId,
        b: NodeId,
        accepted_by_a: usize,
        accepted_by_b: usize,
    },
    Store {
        node: NodeId,
        source: Source,
        item: KnowledgeItem,
    },
    Replace {
        node: NodeId,
        old: KnowledgeItem,
        by: ItemKey,
    },
    Execute {
        node: NodeId,
        goal: Term,
    },
    /// A fact answering a goal that was posted at this node.
    Deliver {
        node: NodeId,
        fact: Term,
        request: Term,
    },
    AppError {
        node: NodeId,
        message: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Move { .. } => "move",
            Event::Join { .. } => "join",
            Event::Leave { .. } => "leave",
            Event::Purge { .. } => "purge",
            Event::Exchange { .. } => "exchange",
            Event::Store { source, .. } => match source {
                Source::Inject => "inject",
                Source::Receive(_) => "receive",
                Source::Derive => "derive",
                Source::Result => "result",
            },
            Event::Replace { .. } => "replace",
            Event::Execute { .. } => "execute",
            Event::Deliver { .. } => "deliver",
            Event::AppError { .. } => "error",
        }
    }

    pub fn node(&self) -> &str {
        match self {
            Event::Move { node, .. }
            | Event::Join { node, .. }
            | Event::Leave { node }
            | Event::Purge { node, .. }
            | Event::Store { node, .. }
            | Event::Replace { node, .. }
            | Event::Execute { node, .. }
            | Event::Deliver { node, .. }
            | Event::AppError { node, .. } => node,
            Event::Exchange { a, .. } => a,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Move { node, from, to } => write!(f, "{node} {from} -> {to}"),
            Event::Join { node, room } => write!(f, "{node} {room}"),
            Event::Leave { node } => f.write_str(node),
            Event::Purge { node, item } => write!(f, "{node} {item}"),
            Event::Exchange {
                a,
                b,
                accepted_by_a,
                accepted_by_b,
            } => write!(f, "{a} {b} accepted={accepted_by_a}/{accepted_by_b}"),
            Event::Store { node, source, item } => match source {
                Source::Receive(from) => write!(f, "{node} <- {from} {item}"),
                _ => write!(f, "{node} {item}"),
            },
            Event::Replace { node, old, by } => write!(f, "{node} {old} by {} {}", by.0, by.1),
            Event::Execute { node, goal } => write!(f, "{node} {goal}"),
            Event::Deliver { node, fact, request } => write!(f, "{node} {fact} for {request}"),
            Event::AppError { node, message } => write!(f, "{node} {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub tick: Tick,
    pub event: Event,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} | {}", self.tick, self.event.kind(), self.event)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn push(&mut self, tick: Tick, event: Event) {
        self.records.push(TraceRecord { tick, event });
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    pub fn extend(&mut self, other: Trace) {
        self.records.extend(other.records);
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
