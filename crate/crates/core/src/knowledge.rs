//! Knowledge items, the replacement partial order and local knowledge bases.
//!
//! A knowledge base only ever holds maximal elements of the active
//! [`ReplacementOrder`]: inserting an item evicts everything strictly below
//! it, and an item strictly below something already present is refused.
//! Items carry an optional time to live and are purged once
//! `created + ttl <= now`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::term::{Arg, Lexer, Subst, Term};

/// Simulation time in integer ticks.
pub type Tick = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Fact,
    Goal,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Fact => "fact",
            Kind::Goal => "goal",
        })
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fact" => Ok(Kind::Fact),
            "goal" => Ok(Kind::Goal),
            other => Err(format!("unknown item kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("fact {0} is not ground")]
    NonGroundFact(Term),
    #[error("time to live must be positive")]
    ZeroTtl,
    #[error("replacement guard must be a strict '<' comparison, found '{0}'")]
    NonStrictGuard(String),
    #[error("invalid replacement rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Identity of an item inside a knowledge base. Origin and creation time are
/// metadata and do not distinguish items.
pub type ItemKey = (Kind, Term);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KnowledgeItem {
    pub kind: Kind,
    pub term: Term,
    pub created: Tick,
    pub ttl: Option<Tick>,
    pub origin: String,
}

impl KnowledgeItem {
    /// Facts must be ground. Goals may contain variables, which are read
    /// existentially and canonicalized so renamings deduplicate.
    pub fn new(kind: Kind, term: Term, created: Tick, origin: impl Into<String>) -> Result<Self, KnowledgeError> {
        let term = match kind {
            Kind::Fact if !term.is_ground() => return Err(KnowledgeError::NonGroundFact(term)),
            Kind::Fact => term,
            Kind::Goal => term.canonical(),
        };
        Ok(KnowledgeItem {
            kind,
            term,
            created,
            ttl: None,
            origin: origin.into(),
        })
    }

    pub fn fact(term: Term, created: Tick, origin: impl Into<String>) -> Result<Self, KnowledgeError> {
        Self::new(Kind::Fact, term, created, origin)
    }

    pub fn goal(term: Term, created: Tick, origin: impl Into<String>) -> Result<Self, KnowledgeError> {
        Self::new(Kind::Goal, term, created, origin)
    }

    pub fn with_ttl(mut self, ttl: Tick) -> Result<Self, KnowledgeError> {
        if ttl == 0 {
            return Err(KnowledgeError::ZeroTtl);
        }
        self.ttl = Some(ttl);
        Ok(self)
    }

    pub fn key(&self) -> ItemKey {
        (self.kind, self.term.clone())
    }

    /// First tick at which the item is gone, if it has a time to live.
    pub fn expires_at(&self) -> Option<Tick> {
        self.ttl.map(|ttl| self.created.saturating_add(ttl))
    }

    pub fn is_expired(&self, now: Tick) -> bool {
        self.expires_at().is_some_and(|t| t <= now)
    }

    /// Total preference among copies of the same item: later expiry wins,
    /// then earlier creation, then the smaller origin.
    fn metadata_rank(&self) -> (Tick, std::cmp::Reverse<Tick>, std::cmp::Reverse<&str>) {
        (
            self.expires_at().unwrap_or(Tick::MAX),
            std::cmp::Reverse(self.created),
            std::cmp::Reverse(self.origin.as_str()),
        )
    }
}

impl fmt::Display for KnowledgeItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} @{}", self.kind, self.term, self.created)?;
        if let Some(ttl) = self.ttl {
            write!(f, " ttl={ttl}")?;
        }
        write!(f, " from {}", self.origin)
    }
}

/// Parses the `fact Term` / `goal Term` shorthand used in scenario files.
pub fn parse_item_term(s: &str) -> Result<(Kind, Term), ParseError> {
    let s = s.trim();
    let (kind, rest) = match s.split_once(char::is_whitespace) {
        Some((k, rest)) if k == "fact" || k == "goal" => (k.parse().unwrap(), rest),
        _ => (Kind::Fact, s),
    };
    Ok((kind, rest.parse()?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredicateFilter {
    Named(String),
    AnyOf(BTreeSet<String>),
}

impl PredicateFilter {
    fn accepts(&self, pred: &str) -> bool {
        match self {
            PredicateFilter::Named(n) => n == pred,
            PredicateFilter::AnyOf(set) => set.contains(pred),
        }
    }
}

/// One side of a replacement rule, e.g. `Position(T, R, ..)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPattern {
    pub kind: Kind,
    pub predicate: PredicateFilter,
    pub args: Vec<Arg>,
    /// Trailing `..`: any further arguments are accepted.
    pub open: bool,
}

impl ItemPattern {
    fn matches(&self, item: &KnowledgeItem, subst: &mut Subst) -> bool {
        if item.kind != self.kind || !self.predicate.accepts(&item.term.pred) {
            return false;
        }
        let arity_ok = if self.open {
            item.term.arity() >= self.args.len()
        } else {
            item.term.arity() == self.args.len()
        };
        if !arity_ok {
            return false;
        }
        for (p, a) in self.args.iter().zip(&item.term.args) {
            match p {
                Arg::Var(v) if v == "_" => {}
                Arg::Var(v) => match subst.get(v) {
                    Some(bound) if bound != a => return false,
                    Some(_) => {}
                    None => {
                        subst.insert(v.clone(), a.clone());
                    }
                },
                constant if constant != a => return false,
                _ => {}
            }
        }
        true
    }

    fn position_of(&self, var: &str) -> Vec<usize> {
        self.args
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, Arg::Var(v) if v == var))
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Display for ItemPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.kind)?;
        match &self.predicate {
            PredicateFilter::Named(n) => f.write_str(n)?,
            PredicateFilter::AnyOf(_) => f.write_str("X")?,
        }
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        if self.open {
            f.write_str(if self.args.is_empty() { ".." } else { ", .." })?;
        }
        f.write_str(")")
    }
}

/// `lower ≺ upper if Lo < Hi`, where `Lo` and `Hi` sit at the same argument
/// position of their patterns. Equal values at that position never satisfy
/// the guard, which makes every single rule irreflexive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementRule {
    pub lower: ItemPattern,
    pub upper: ItemPattern,
    pub guard_lower: String,
    pub guard_upper: String,
}

impl ReplacementRule {
    pub fn new(
        lower: ItemPattern,
        upper: ItemPattern,
        guard_lower: impl Into<String>,
        guard_upper: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        let rule = ReplacementRule {
            lower,
            upper,
            guard_lower: guard_lower.into(),
            guard_upper: guard_upper.into(),
        };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<(), KnowledgeError> {
        let (lo, hi) = (&self.guard_lower, &self.guard_upper);
        if lo == hi {
            return Err(KnowledgeError::InvalidRule(format!("guard compares {lo} with itself")));
        }
        let lo_pos = self.lower.position_of(lo);
        let hi_pos = self.upper.position_of(hi);
        if lo_pos.len() != 1 || hi_pos.len() != 1 {
            return Err(KnowledgeError::InvalidRule(format!(
                "guard variables must occur exactly once, {lo} in the lower and {hi} in the upper pattern"
            )));
        }
        if lo_pos != hi_pos {
            return Err(KnowledgeError::InvalidRule(format!(
                "guard variables {lo} and {hi} must sit at the same argument position"
            )));
        }
        if !self.upper.position_of(lo).is_empty() || !self.lower.position_of(hi).is_empty() {
            return Err(KnowledgeError::InvalidRule(
                "guard variables may not be shared between the patterns".into(),
            ));
        }
        Ok(())
    }

    /// True iff `a` is strictly below `b` under this rule.
    pub fn applies(&self, a: &KnowledgeItem, b: &KnowledgeItem) -> bool {
        let mut subst = Subst::new();
        if !self.lower.matches(a, &mut subst) || !self.upper.matches(b, &mut subst) {
            return false;
        }
        match (
            subst.get(&self.guard_lower).and_then(Arg::as_int),
            subst.get(&self.guard_upper).and_then(Arg::as_int),
        ) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        }
    }
}

impl fmt::Display for ReplacementRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} < {} if {} < {}",
            self.lower, self.upper, self.guard_lower, self.guard_upper
        )?;
        if let PredicateFilter::AnyOf(set) = &self.lower.predicate {
            let names: Vec<_> = set.iter().map(String::as_str).collect();
            write!(f, " where X in {{{}}}", names.join(", "))?;
        }
        Ok(())
    }
}

impl FromStr for ReplacementRule {
    type Err = KnowledgeError;

    /// `[fact|goal] Pat(..) < [fact|goal] Pat(..) if A < B [where X in {P, Q}]`
    /// with `≺` accepted for the first `<`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.replace('≺', "<");
        let mut lx = Lexer::new(&normalized);
        let (lower_kind, lower_pred, lower_args, lower_open) = parse_side(&mut lx)?;
        lx.expect("<")?;
        let (upper_kind, upper_pred, upper_args, upper_open) = parse_side(&mut lx)?;
        lx.expect("if")?;
        let guard_lower = lx.ident()?;
        lx.skip_ws();
        let op: String = lx
            .rest()
            .chars()
            .take_while(|c| matches!(c, '<' | '=' | '>' | '!'))
            .collect();
        if op != "<" {
            return Err(KnowledgeError::NonStrictGuard(op));
        }
        lx.expect("<")?;
        let guard_upper = lx.ident()?;

        let mut allowed = None;
        if lx.eat("where") {
            let var = lx.ident()?;
            if var != lower_pred {
                return Err(lx.error(format!("'where' names {var}, expected {lower_pred}")).into());
            }
            lx.expect("in")?;
            lx.expect("{")?;
            let mut set = BTreeSet::new();
            loop {
                set.insert(lx.ident()?);
                if lx.eat("}") {
                    break;
                }
                lx.expect(",")?;
            }
            allowed = Some(set);
        }
        lx.skip_ws();
        if !lx.at_end() {
            return Err(lx.error("trailing input after replacement rule").into());
        }

        let (lower_kind, upper_kind) = match (lower_kind, upper_kind) {
            (Some(l), Some(u)) => (l, u),
            (Some(k), None) | (None, Some(k)) => (k, k),
            (None, None) => (Kind::Fact, Kind::Fact),
        };
        // Predicates are capitalized like variables, so only a `where`
        // clause turns the lower predicate into a wildcard.
        let lower_predicate = match allowed {
            Some(set) => PredicateFilter::AnyOf(set),
            None => PredicateFilter::Named(lower_pred),
        };
        ReplacementRule::new(
            ItemPattern {
                kind: lower_kind,
                predicate: lower_predicate,
                args: lower_args,
                open: lower_open,
            },
            ItemPattern {
                kind: upper_kind,
                predicate: PredicateFilter::Named(upper_pred),
                args: upper_args,
                open: upper_open,
            },
            guard_lower,
            guard_upper,
        )
    }
}

type Side = (Option<Kind>, String, Vec<Arg>, bool);

fn parse_side(lx: &mut Lexer<'_>) -> Result<Side, KnowledgeError> {
    let mut name = lx.ident()?;
    let mut kind = None;
    if name == "fact" || name == "goal" {
        kind = Some(name.parse().unwrap());
        name = lx.ident()?;
    }
    let mut args = Vec::new();
    let mut open = false;
    lx.expect("(")?;
    if !lx.eat(")") {
        loop {
            if lx.eat("..") {
                open = true;
                lx.expect(")")?;
                break;
            }
            args.push(lx.arg()?);
            if lx.eat(")") {
                break;
            }
            lx.expect(",")?;
        }
    }
    Ok((kind, name, args, open))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Greater,
    Incomparable,
}

/// The strict partial order induced by a set of replacement rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplacementOrder {
    rules: Vec<ReplacementRule>,
}

impl ReplacementOrder {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(rules: Vec<ReplacementRule>) -> Self {
        ReplacementOrder { rules }
    }

    /// Newer position facts about the same robot replace older ones.
    pub fn stale_position() -> ReplacementRule {
        "fact Position(T, R, ..) < fact Position(T', R, ..) if T < T'"
            .parse()
            .expect("built-in rule")
    }

    /// A newer `Interest` goal replaces goals of the listed predicates that
    /// belong to an earlier session (their first argument).
    pub fn interest_override<I, S>(session_predicates: I) -> ReplacementRule
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let preds: BTreeSet<String> = session_predicates.into_iter().map(Into::into).collect();
        ReplacementRule::new(
            ItemPattern {
                kind: Kind::Goal,
                predicate: PredicateFilter::AnyOf(preds),
                args: vec![Arg::var("T")],
                open: true,
            },
            ItemPattern {
                kind: Kind::Goal,
                predicate: PredicateFilter::Named("Interest".into()),
                args: vec![Arg::var("T'")],
                open: true,
            },
            "T",
            "T'",
        )
        .expect("built-in rule")
    }

    pub fn rules(&self) -> &[ReplacementRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: ReplacementRule) {
        self.rules.push(rule);
    }

    /// Some rule can lower items of this kind.
    pub fn lowers(&self, kind: Kind) -> bool {
        self.rules.iter().any(|r| r.lower.kind == kind)
    }

    /// `a ≺ b`: some rule instance places `a` strictly below `b`.
    pub fn precedes(&self, a: &KnowledgeItem, b: &KnowledgeItem) -> bool {
        self.rules.iter().any(|r| r.applies(a, b))
    }

    /// Rule sets whose rules relate the same pair in both directions are
    /// inconsistent; such pairs are reported as incomparable.
    pub fn compare(&self, a: &KnowledgeItem, b: &KnowledgeItem) -> Comparison {
        match (self.precedes(a, b), self.precedes(b, a)) {
            (true, false) => Comparison::Less,
            (false, true) => Comparison::Greater,
            _ => Comparison::Incomparable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored; the listed items were strictly below it and got evicted.
    Added { replaced: Vec<KnowledgeItem> },
    /// Same (kind, term) already present; metadata merged.
    Duplicate,
    /// Strictly below an item already present.
    Dominated,
    /// Already past its time to live.
    Expired,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    items: BTreeMap<ItemKey, KnowledgeItem>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items in (kind, term) order.
    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeItem> {
        self.items.values()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Term> {
        self.iter().filter(|i| i.kind == Kind::Fact).map(|i| &i.term)
    }

    pub fn goals(&self) -> impl Iterator<Item = &Term> {
        self.iter().filter(|i| i.kind == Kind::Goal).map(|i| &i.term)
    }

    pub fn keys(&self) -> BTreeSet<ItemKey> {
        self.items.keys().cloned().collect()
    }

    pub fn get(&self, kind: Kind, term: &Term) -> Option<&KnowledgeItem> {
        self.items.get(&(kind, term.clone()))
    }

    pub fn contains(&self, kind: Kind, term: &Term) -> bool {
        self.get(kind, term).is_some()
    }

    /// Inserts at `now`. Items already expired at `now` are dropped first, so
    /// they can neither dominate nor absorb the new item.
    pub fn insert(&mut self, item: KnowledgeItem, order: &ReplacementOrder, now: Tick) -> InsertOutcome {
        if item.is_expired(now) {
            return InsertOutcome::Expired;
        }
        self.purge(now);
        let key = item.key();
        if let Some(existing) = self.items.get_mut(&key) {
            if item.metadata_rank() > existing.metadata_rank() {
                *existing = item;
            }
            return InsertOutcome::Duplicate;
        }
        if self.items.values().any(|e| order.precedes(&item, e)) {
            return InsertOutcome::Dominated;
        }
        let below: Vec<ItemKey> = self
            .items
            .iter()
            .filter(|(_, e)| order.precedes(e, &item))
            .map(|(k, _)| k.clone())
            .collect();
        let replaced = below.iter().filter_map(|k| self.items.remove(k)).collect();
        self.items.insert(key, item);
        InsertOutcome::Added { replaced }
    }

    /// Removes and returns every item whose time to live has run out.
    pub fn purge(&mut self, now: Tick) -> Vec<KnowledgeItem> {
        let expired: Vec<ItemKey> = self
            .items
            .iter()
            .filter(|(_, i)| i.is_expired(now))
            .map(|(k, _)| k.clone())
            .collect();
        expired.iter().filter_map(|k| self.items.remove(k)).collect()
    }

    pub fn remove(&mut self, kind: Kind, term: &Term) -> Option<KnowledgeItem> {
        self.items.remove(&(kind, term.clone()))
    }

    /// Both bases purged at `now`, then every item of `other` inserted into
    /// `self`.
    pub fn merge(&self, other: &KnowledgeBase, order: &ReplacementOrder, now: Tick) -> KnowledgeBase {
        let mut out = self.clone();
        out.purge(now);
        for item in other.iter().filter(|i| !i.is_expired(now)) {
            out.insert(item.clone(), order, now);
        }
        out
    }

    /// Unexpired maximal elements, rebuilt from scratch. Equals `self` for any
    /// base maintained through `insert` and `purge`.
    pub fn normalized(&self, order: &ReplacementOrder, now: Tick) -> KnowledgeBase {
        let live: Vec<&KnowledgeItem> = self.iter().filter(|i| !i.is_expired(now)).collect();
        let items = live
            .iter()
            .filter(|i| !live.iter().any(|j| order.precedes(i, j)))
            .map(|i| (i.key(), (*i).clone()))
            .collect();
        KnowledgeBase { items }
    }
}

impl FromIterator<KnowledgeItem> for KnowledgeBase {
    /// Collects without any order; duplicates keep the preferred metadata.
    fn from_iter<T: IntoIterator<Item = KnowledgeItem>>(iter: T) -> Self {
        let mut kb = KnowledgeBase::new();
        let none = ReplacementOrder::empty();
        for item in iter {
            kb.insert(item, &none, 0);
        }
        kb
    }
}
