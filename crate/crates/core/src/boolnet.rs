//! Synchronous boolean networks: attractors and signed feedback loops.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::distlogic::strip_comments;
use crate::error::ParseError;
use crate::term::Lexer;

pub const CYTOKINE_NETWORK: &str = include_str!("../../../networks/cytokine.bn");

/// Largest number of free variables [`attractors`] enumerates.
pub const MAX_FREE_VARIABLES: usize = 24;

pub const MAX_VARIABLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoolNetError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("variable {0} is not declared")]
    Undeclared(String),
    #[error("variable {0} declared twice")]
    Duplicate(String),
    #[error("{input} occurs both negated and plain in the update of {var}")]
    MixedPolarity { var: String, input: String },
    #[error("{free} free variables exceed the exhaustive bound of {limit}")]
    RefuseExhaustive { free: usize, limit: usize },
    #[error("{0} is not an input (its update is not itself)")]
    NotAnInput(String),
    #[error("{0} variables given but {1} update functions")]
    Shape(usize, usize),
    #[error("networks are limited to {MAX_VARIABLES} variables")]
    TooLarge,
    #[error("state has {found} bits, network has {expected} variables")]
    StateLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(bool),
    Var(usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, s: &[bool]) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(i) => s[*i],
            Expr::Not(e) => !e.eval(s),
            Expr::And(es) => es.iter().all(|e| e.eval(s)),
            Expr::Or(es) => es.iter().any(|e| e.eval(s)),
        }
    }

    fn eval_bits(&self, s: u64) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(i) => s >> i & 1 == 1,
            Expr::Not(e) => !e.eval_bits(s),
            Expr::And(es) => es.iter().all(|e| e.eval_bits(s)),
            Expr::Or(es) => es.iter().any(|e| e.eval_bits(s)),
        }
    }

    /// Variables with the polarity of each occurrence.
    fn occurrences(&self, positive: bool, out: &mut Vec<(usize, bool)>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => out.push((*i, positive)),
            Expr::Not(e) => e.occurrences(!positive, out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.occurrences(positive, out)),
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[String], prec: u8) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, es: &[Expr], op: &str, own: u8| -> fmt::Result {
            if prec > own {
                f.write_str("(")?;
            }
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    f.write_str(op)?;
                }
                e.write(f, names, own + 1)?;
            }
            if prec > own {
                f.write_str(")")?;
            }
            Ok(())
        };
        match self {
            Expr::Const(b) => f.write_str(if *b { "1" } else { "0" }),
            Expr::Var(i) => f.write_str(&names[*i]),
            Expr::Not(e) => {
                f.write_str("!")?;
                e.write(f, names, 3)
            }
            Expr::And(es) => join(f, es, " & ", 1),
            Expr::Or(es) => join(f, es, " | ", 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Influence {
    pub from: String,
    pub to: String,
    pub sign: Sign,
}

impl fmt::Display for Influence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.sign {
            Sign::Positive => "->",
            Sign::Negative => "-|",
        };
        write!(f, "{} {arrow} {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackLoop {
    /// Cycle starting at its earliest declared variable; the edge back to
    /// the start is implied.
    pub nodes: Vec<String>,
    pub sign: Sign,
}

impl FeedbackLoop {
    /// Whether this is the cycle `path` (first node repeated or not), up to
    /// rotation.
    pub fn is(&self, path: &[&str]) -> bool {
        let path = match path {
            [first, .., last] if first == last => &path[..path.len() - 1],
            _ => path,
        };
        let n = self.nodes.len();
        n == path.len() && (0..n).any(|r| (0..n).all(|i| self.nodes[(i + r) % n] == path[i]))
    }
}

impl fmt::Display for FeedbackLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            write!(f, "{n} -> ")?;
        }
        write!(f, "{} ({})", self.nodes[0], self.sign)
    }
}

pub type NetState = Vec<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    FixedPoint,
    Cycle(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attractor {
    pub kind: AttractorKind,
    /// In update order, starting from the smallest state.
    pub states: Vec<NetState>,
    pub basin: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanNetwork {
    names: Vec<String>,
    updates: Vec<Expr>,
}

impl BooleanNetwork {
    pub fn new(names: Vec<String>, updates: Vec<Expr>) -> Result<Self, BoolNetError> {
        if names.len() != updates.len() {
            return Err(BoolNetError::Shape(names.len(), updates.len()));
        }
        if names.len() > MAX_VARIABLES {
            return Err(BoolNetError::TooLarge);
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(BoolNetError::Duplicate(n.clone()));
            }
        }
        let net = BooleanNetwork { names, updates };
        for (i, u) in net.updates.iter().enumerate() {
            let mut occ = Vec::new();
            u.occurrences(true, &mut occ);
            let mut polarity: BTreeMap<usize, bool> = BTreeMap::new();
            for (v, p) in occ {
                if v >= net.names.len() {
                    return Err(BoolNetError::Undeclared(format!("#{v}")));
                }
                if *polarity.entry(v).or_insert(p) != p {
                    return Err(BoolNetError::MixedPolarity {
                        var: net.names[i].clone(),
                        input: net.names[v].clone(),
                    });
                }
            }
        }
        Ok(net)
    }

    pub fn variables(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn update(&self, var: usize) -> &Expr {
        &self.updates[var]
    }

    /// Variables whose update is the variable itself.
    pub fn is_input(&self, var: usize) -> bool {
        self.updates[var] == Expr::Var(var)
    }

    pub fn update_sync(&self, s: &[bool]) -> Result<NetState, BoolNetError> {
        if s.len() != self.names.len() {
            return Err(BoolNetError::StateLength {
                expected: self.names.len(),
                found: s.len(),
            });
        }
        Ok(self.updates.iter().map(|u| u.eval(s)).collect())
    }

    fn step_bits(&self, s: u64) -> u64 {
        self.updates
            .iter()
            .enumerate()
            .fold(0, |acc, (i, u)| acc | (u64::from(u.eval_bits(s)) << i))
    }

    /// Builds a state from `name=bit` pairs; unnamed variables are 0.
    pub fn state(&self, bits: &BTreeMap<String, bool>) -> Result<NetState, BoolNetError> {
        let mut s = vec![false; self.names.len()];
        for (name, b) in bits {
            s[self.index(name).ok_or_else(|| BoolNetError::Undeclared(name.clone()))?] = *b;
        }
        Ok(s)
    }

    /// Signed edges, one per (input, target) pair, in declaration order of
    /// the target.
    pub fn influences(&self) -> Vec<Influence> {
        let mut out = Vec::new();
        for (to, u) in self.updates.iter().enumerate() {
            let mut occ = Vec::new();
            u.occurrences(true, &mut occ);
            let mut by_var: BTreeMap<usize, bool> = BTreeMap::new();
            for (v, p) in occ {
                by_var.insert(v, p);
            }
            for (from, positive) in by_var {
                out.push(Influence {
                    from: self.names[from].clone(),
                    to: self.names[to].clone(),
                    sign: if positive { Sign::Positive } else { Sign::Negative },
                });
            }
        }
        out
    }

    pub fn influence(&self, from: &str, to: &str) -> Option<Sign> {
        self.influences()
            .into_iter()
            .find(|i| i.from == from && i.to == to)
            .map(|i| i.sign)
    }
}

impl fmt::Display for BooleanNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, u) in self.names.iter().zip(&self.updates) {
            write!(f, "var {name} = ")?;
            u.write(f, &self.names, 0)?;
            writeln!(f, ";")?;
        }
        Ok(())
    }
}

impl FromStr for BooleanNetwork {
    type Err = BoolNetError;

    /// `var Name = expr;` per variable, with `& | ! ( ) 0 1`.
    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let cleaned = strip_comments(src);
        let mut lx = Lexer::new(&cleaned);
        let mut decls = Vec::new();
        loop {
            lx.skip_ws();
            if lx.at_end() {
                break;
            }
            lx.expect("var")?;
            let name = lx.ident()?;
            lx.expect("=")?;
            let mark = lx.clone();
            let mut names = Vec::new();
            parse_or(&mut lx, &mut |n| {
                names.push(n.to_string());
                0
            })?;
            lx.expect(";")?;
            decls.push((name, mark, names));
        }
        let names: Vec<String> = decls.iter().map(|(n, _, _)| n.clone()).collect();
        for (_, _, used) in &decls {
            if let Some(u) = used.iter().find(|u| !names.contains(u)) {
                return Err(BoolNetError::Undeclared(u.clone()));
            }
        }
        let mut updates = Vec::new();
        for (_, mark, _) in decls {
            let mut lx = mark;
            updates.push(parse_or(&mut lx, &mut |n| names.iter().position(|x| x == n).unwrap())?);
        }
        BooleanNetwork::new(names, updates)
    }
}

fn parse_or(lx: &mut Lexer<'_>, var: &mut dyn FnMut(&str) -> usize) -> Result<Expr, ParseError> {
    let mut terms = vec![parse_and(lx, var)?];
    while lx.eat("|") {
        terms.push(parse_and(lx, var)?);
    }
    Ok(if terms.len() == 1 {
        terms.remove(0)
    } else {
        Expr::Or(terms)
    })
}

fn parse_and(lx: &mut Lexer<'_>, var: &mut dyn FnMut(&str) -> usize) -> Result<Expr, ParseError> {
    let mut terms = vec![parse_unary(lx, var)?];
    while lx.eat("&") {
        terms.push(parse_unary(lx, var)?);
    }
    Ok(if terms.len() == 1 {
        terms.remove(0)
    } else {
        Expr::And(terms)
    })
}

fn parse_unary(lx: &mut Lexer<'_>, var: &mut dyn FnMut(&str) -> usize) -> Result<Expr, ParseError> {
    if lx.eat("!") {
        return Ok(Expr::Not(Box::new(parse_unary(lx, var)?)));
    }
    if lx.eat("(") {
        let e = parse_or(lx, var)?;
        lx.expect(")")?;
        return Ok(e);
    }
    let name = lx.ident()?;
    Ok(match name.as_str() {
        "0" => Expr::Const(false),
        "1" => Expr::Const(true),
        _ => Expr::Var(var(&name)),
    })
}

pub fn cytokine_network() -> BooleanNetwork {
    CYTOKINE_NETWORK.parse().expect("built-in network parses")
}

/// Every attractor reachable with the given inputs pinned, found by
/// following each of the `2^free` states to its cycle.
pub fn attractors(net: &BooleanNetwork, pinned: &BTreeMap<String, bool>) -> Result<Vec<Attractor>, BoolNetError> {
    let mut fixed = 0u64;
    let mut pinned_mask = 0u64;
    for (name, &b) in pinned {
        let i = net.index(name).ok_or_else(|| BoolNetError::Undeclared(name.clone()))?;
        if !net.is_input(i) {
            return Err(BoolNetError::NotAnInput(name.clone()));
        }
        pinned_mask |= 1 << i;
        fixed |= u64::from(b) << i;
    }
    let free: Vec<usize> = (0..net.names.len()).filter(|i| pinned_mask >> i & 1 == 0).collect();
    if free.len() > MAX_FREE_VARIABLES {
        return Err(BoolNetError::RefuseExhaustive {
            free: free.len(),
            limit: MAX_FREE_VARIABLES,
        });
    }
    let expand = |k: u64| -> u64 {
        free.iter()
            .enumerate()
            .fold(fixed, |acc, (bit, &var)| acc | ((k >> bit & 1) << var))
    };
    let compress = |s: u64| -> u64 {
        free.iter()
            .enumerate()
            .fold(0, |acc, (bit, &var)| acc | ((s >> var & 1) << bit))
    };

    let total = 1usize << free.len();
    let next: Vec<u64> = (0..total as u64).map(|k| compress(net.step_bits(expand(k)))).collect();
    const NONE: u32 = u32::MAX;
    let mut owner = vec![NONE; total];
    let mut stamp = vec![0u32; total];
    let mut cycles: Vec<Vec<u64>> = Vec::new();
    let mut path = Vec::new();
    for start in 0..total {
        if owner[start] != NONE {
            continue;
        }
        path.clear();
        let mut cur = start;
        let run = start as u32 + 1;
        while owner[cur] == NONE && stamp[cur] != run {
            stamp[cur] = run;
            path.push(cur);
            cur = next[cur] as usize;
        }
        let id = if owner[cur] == NONE {
            let at = path.iter().position(|&p| p == cur).expect("cycle closes on the path");
            cycles.push(path[at..].iter().map(|&p| p as u64).collect());
            (cycles.len() - 1) as u32
        } else {
            owner[cur]
        };
        for &p in &path {
            owner[p] = id;
        }
    }
    let mut basins = vec![0u64; cycles.len()];
    for &o in &owner {
        basins[o as usize] += 1;
    }

    let to_state = |k: u64| -> NetState {
        let s = expand(k);
        (0..net.names.len()).map(|i| s >> i & 1 == 1).collect()
    };
    let mut out: Vec<Attractor> = cycles
        .into_iter()
        .zip(basins)
        .map(|(cycle, basin)| {
            let min_at = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
            let states: Vec<NetState> = (0..cycle.len())
                .map(|i| to_state(cycle[(min_at + i) % cycle.len()]))
                .collect();
            Attractor {
                kind: if states.len() == 1 {
                    AttractorKind::FixedPoint
                } else {
                    AttractorKind::Cycle(states.len())
                },
                states,
                basin,
            }
        })
        .collect();
    out.sort_by(|a, b| a.states[0].iter().rev().cmp(b.states[0].iter().rev()));
    Ok(out)
}

/// Simple cycles of the influence graph with at most `max_len` edges.
pub fn feedback_loops(net: &BooleanNetwork, max_len: usize) -> Vec<FeedbackLoop> {
    let n = net.names.len();
    let mut adj: Vec<Vec<(usize, Sign)>> = vec![Vec::new(); n];
    for inf in net.influences() {
        let (f, t) = (net.index(&inf.from).unwrap(), net.index(&inf.to).unwrap());
        adj[f].push((t, inf.sign));
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut path = vec![start];
        dfs(&adj, start, start, Sign::Positive, max_len, &mut path, &mut out);
    }
    out.into_iter()
        .map(|(nodes, sign)| FeedbackLoop {
            nodes: nodes.into_iter().map(|i| net.names[i].clone()).collect(),
            sign,
        })
        .collect()
}

fn dfs(
    adj: &[Vec<(usize, Sign)>],
    start: usize,
    cur: usize,
    sign: Sign,
    max_len: usize,
    path: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, Sign)>,
) {
    for &(next, s) in &adj[cur] {
        let sign = sign.times(s);
        if next == start {
            out.push((path.clone(), sign));
        } else if next > start && !path.contains(&next) && path.len() < max_len {
            path.push(next);
            dfs(adj, start, next, sign, max_len, path, out);
            path.pop();
        }
    }
}

/// Attractor summary with basin shares.
pub fn report(net: &BooleanNetwork, pinned: &BTreeMap<String, bool>, found: &[Attractor]) -> String {
    use std::fmt::Write;
    let total: u64 = found.iter().map(|a| a.basin).sum();
    let mut s = String::new();
    let pins: Vec<String> = pinned.iter().map(|(k, v)| format!("{k}={}", u8::from(*v))).collect();
    let _ = writeln!(
        s,
        "attractors: {} over {} states{}",
        found.len(),
        total,
        if pins.is_empty() {
            String::new()
        } else {
            format!(" ({})", pins.join(" "))
        }
    );
    for (i, a) in found.iter().enumerate() {
        let kind = match a.kind {
            AttractorKind::FixedPoint => "fixed point".to_string(),
            AttractorKind::Cycle(k) => format!("cycle of length {k}"),
        };
        let _ = writeln!(
            s,
            "#{} {kind}, basin {} ({:.2}%)",
            i + 1,
            a.basin,
            100.0 * a.basin as f64 / total.max(1) as f64
        );
        for st in &a.states {
            let on: Vec<&str> = net
                .names
                .iter()
                .zip(st)
                .filter(|(_, b)| **b)
                .map(|(n, _)| n.as_str())
                .collect();
            let _ = writeln!(
                s,
                "  on: {}",
                if on.is_empty() { "-".to_string() } else { on.join(" ") }
            );
        }
    }
    s
}
