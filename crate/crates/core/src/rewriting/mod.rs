//! Multiset rewriting over located cell objects.
//!
//! A state maps locations to multisets of objects: bare symbols (`Path`),
//! cells (`[Mac - resting sTnf]`) and bound pairs of cells (`(a : b)`).
//! Rules rewrite a sub-multiset of one or more locations; rest variables
//! carry the unmatched modifiers of a cell and the unmatched content of a
//! location through unchanged.

mod engine;
mod immune;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::distlogic::strip_comments;
use crate::error::ParseError;
use crate::term::Lexer;

pub use engine::{
    apply_rule, match_rule, replay, rewrite_random, search_reachable, successors, Bindings, Match, Predicate,
    SearchLimits, SearchOutcome, WitnessStep,
};
pub use immune::{immune_initial_state, immune_ruleset, IMMUNE_RULES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("rule {label}: {message}")]
    InvalidRule { label: String, message: String },
    #[error("duplicate rule label {0}")]
    DuplicateLabel(String),
    #[error("no rule labelled {0}")]
    UnknownRule(String),
    #[error("match is stale for rule {0}")]
    StaleMatch(String),
    #[error("ill-formed state: {0}")]
    IllFormed(String),
    #[error("replay diverged at step {step} ({label})")]
    ReplayMismatch { step: usize, label: String },
}

/// A cell with a multiset of modifiers, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub kind: String,
    mods: Vec<String>,
}

impl Cell {
    pub fn new<I, S>(kind: impl Into<String>, mods: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut mods: Vec<String> = mods.into_iter().map(Into::into).collect();
        mods.sort();
        Cell {
            kind: kind.into(),
            mods,
        }
    }

    pub fn mods(&self) -> &[String] {
        &self.mods
    }

    pub fn has(&self, m: &str) -> bool {
        self.mods.iter().any(|x| x == m)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.kind)?;
        if !self.mods.is_empty() {
            write!(f, " - {}", self.mods.join(" "))?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Atom(String),
    Cell(Cell),
    Pair(Cell, Cell),
}

impl Object {
    /// Whether this object is, or contains, a cell or atom named `symbol`.
    pub fn mentions(&self, symbol: &str) -> bool {
        match self {
            Object::Atom(a) => a == symbol,
            Object::Cell(c) => c.kind == symbol,
            Object::Pair(a, b) => a.kind == symbol || b.kind == symbol,
        }
    }

    fn cells(&self) -> impl Iterator<Item = &Cell> {
        let (a, b) = match self {
            Object::Atom(_) => (None, None),
            Object::Cell(c) => (Some(c), None),
            Object::Pair(a, b) => (Some(a), Some(b)),
        };
        a.into_iter().chain(b)
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Atom(a) => f.write_str(a),
            Object::Cell(c) => write!(f, "{c}"),
            Object::Pair(a, b) => write!(f, "({a} : {b})"),
        }
    }
}

/// Location → sorted multiset of objects. Empty locations are not stored,
/// so states that are equal as multisets compare and print equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SystemState {
    compartments: BTreeMap<String, Vec<Object>>,
}

impl SystemState {
    pub fn new() -> Self {
        SystemState::default()
    }

    pub fn from_compartments<I, L>(compartments: I) -> Self
    where
        I: IntoIterator<Item = (L, Vec<Object>)>,
        L: Into<String>,
    {
        let mut s = SystemState::new();
        for (loc, objects) in compartments {
            s.set(loc, objects);
        }
        s
    }

    pub fn get(&self, loc: &str) -> &[Object] {
        self.compartments.get(loc).map_or(&[], Vec::as_slice)
    }

    pub fn set(&mut self, loc: impl Into<String>, mut objects: Vec<Object>) {
        let loc = loc.into();
        if objects.is_empty() {
            self.compartments.remove(&loc);
        } else {
            objects.sort();
            self.compartments.insert(loc, objects);
        }
    }

    pub fn add(&mut self, loc: &str, object: Object) {
        let mut objects = self.get(loc).to_vec();
        objects.push(object);
        self.set(loc, objects);
    }

    pub fn locations(&self) -> impl Iterator<Item = &str> {
        self.compartments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.compartments.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.compartments.is_empty()
    }

    /// Location named `loc`, ignoring case.
    pub fn find_location(&self, loc: &str) -> Option<&str> {
        self.locations().find(|l| l.eq_ignore_ascii_case(loc))
    }

    /// `Sig` holds only bare symbols, and no cell expresses both IL2
    /// receptor levels.
    pub fn check_well_formed(&self) -> Result<(), RewriteError> {
        for (loc, objects) in &self.compartments {
            for o in objects {
                if loc == "Sig" && !matches!(o, Object::Atom(_)) {
                    return Err(RewriteError::IllFormed(format!("{o} in Sig")));
                }
                for c in o.cells() {
                    if c.has("xIL2Ra.lo") && c.has("xIL2Ra.hi") {
                        return Err(RewriteError::IllFormed(format!("{c} has both xIL2Ra levels")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (loc, objects)) in self.compartments.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{{{loc} |")?;
            for o in objects {
                write!(f, " {o}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

impl FromStr for SystemState {
    type Err = RewriteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cleaned = strip_comments(s);
        let mut lx = Lexer::new(&cleaned);
        let mut state = SystemState::new();
        loop {
            lx.skip_ws();
            if lx.at_end() {
                break;
            }
            let pat = compartment(&mut lx, false)?;
            let objects = pat
                .objects
                .into_iter()
                .map(ObjectPattern::into_object)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| lx.error(m))?;
            let mut all = state.get(&pat.loc).to_vec();
            all.extend(objects);
            state.set(pat.loc, all);
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPattern {
    pub kind: String,
    /// Required modifiers, sorted.
    pub mods: Vec<String>,
    pub rest: Option<String>,
}

impl fmt::Display for CellPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.kind)?;
        if self.rest.is_some() || !self.mods.is_empty() {
            f.write_str(" -")?;
        }
        if let Some(r) = &self.rest {
            write!(f, " ${r}")?;
        }
        for m in &self.mods {
            write!(f, " {m}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectPattern {
    Atom(String),
    Cell(CellPattern),
    Pair(CellPattern, CellPattern),
}

impl ObjectPattern {
    fn into_object(self) -> Result<Object, String> {
        let cell = |p: CellPattern| match p.rest {
            Some(r) => Err(format!("variable {r} in a state")),
            None => Ok(Cell::new(p.kind, p.mods)),
        };
        Ok(match self {
            ObjectPattern::Atom(a) => Object::Atom(a),
            ObjectPattern::Cell(c) => Object::Cell(cell(c)?),
            ObjectPattern::Pair(a, b) => Object::Pair(cell(a)?, cell(b)?),
        })
    }

    fn cells(&self) -> Vec<&CellPattern> {
        match self {
            ObjectPattern::Atom(_) => vec![],
            ObjectPattern::Cell(c) => vec![c],
            ObjectPattern::Pair(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for ObjectPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectPattern::Atom(a) => f.write_str(a),
            ObjectPattern::Cell(c) => write!(f, "{c}"),
            ObjectPattern::Pair(a, b) => write!(f, "({a} : {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentPattern {
    pub loc: String,
    pub rest: Option<String>,
    pub objects: Vec<ObjectPattern>,
}

impl fmt::Display for CompartmentPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{} |", self.loc)?;
        if let Some(r) = &self.rest {
            write!(f, " ${r}")?;
        }
        for o in &self.objects {
            write!(f, " {o}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub label: String,
    /// Written for this rule base rather than taken from the source model.
    pub authored: bool,
    pub lhs: Vec<CompartmentPattern>,
    pub rhs: Vec<CompartmentPattern>,
}

impl RewriteRule {
    /// Checks that both sides name the same locations once each, that no
    /// variable repeats on the left, and that the right uses only left
    /// variables of the same sort.
    pub fn validate(&self) -> Result<(), RewriteError> {
        let invalid = |message: String| RewriteError::InvalidRule {
            label: self.label.clone(),
            message,
        };
        let locs = |side: &[CompartmentPattern]| -> Result<BTreeSet<String>, RewriteError> {
            let mut seen = BTreeSet::new();
            for c in side {
                if !seen.insert(c.loc.clone()) {
                    return Err(invalid(format!("location {} appears twice", c.loc)));
                }
            }
            Ok(seen)
        };
        if locs(&self.lhs)? != locs(&self.rhs)? {
            return Err(invalid("both sides must name the same locations".into()));
        }
        let (lhs_locs, lhs_mods) = variables(&self.lhs);
        let mut seen = BTreeSet::new();
        for v in lhs_locs.iter().chain(&lhs_mods) {
            if !seen.insert(v) {
                return Err(invalid(format!("variable {v} repeats on the left")));
            }
        }
        let (rhs_locs, rhs_mods) = variables(&self.rhs);
        for v in &rhs_locs {
            if !lhs_locs.contains(v) {
                return Err(invalid(format!("location variable {v} is unbound")));
            }
        }
        for v in &rhs_mods {
            if !lhs_mods.contains(v) {
                return Err(invalid(format!("modifier variable {v} is unbound")));
            }
        }
        Ok(())
    }
}

fn variables(side: &[CompartmentPattern]) -> (Vec<String>, Vec<String>) {
    let locs = side.iter().filter_map(|c| c.rest.clone()).collect();
    let mods = side
        .iter()
        .flat_map(|c| &c.objects)
        .flat_map(ObjectPattern::cells)
        .filter_map(|p| p.rest.clone())
        .collect();
    (locs, mods)
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.authored {
            f.write_str("@authored ")?;
        }
        write!(f, "rl[{}]:", self.label)?;
        for c in &self.lhs {
            write!(f, " {c}")?;
        }
        f.write_str(" =>")?;
        for c in &self.rhs {
            write!(f, " {c}")?;
        }
        f.write_str(" .")
    }
}

impl FromStr for RewriteRule {
    type Err = RewriteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rules = parse_rules(s)?;
        if rules.len() != 1 {
            return Err(ParseError::new(1, 1, format!("expected one rule, found {}", rules.len())).into());
        }
        Ok(rules.remove(0))
    }
}

/// Parses a rule file: rules end with ` .`; `%` and `#` start comments.
pub fn parse_rules(src: &str) -> Result<Vec<RewriteRule>, RewriteError> {
    let cleaned = strip_comments(src);
    let mut lx = Lexer::new(&cleaned);
    let mut rules = Vec::new();
    let mut labels = BTreeSet::new();
    loop {
        lx.skip_ws();
        if lx.at_end() {
            break;
        }
        let authored = lx.eat("@authored");
        lx.expect("rl")?;
        lx.expect("[")?;
        let label = lx.ident()?;
        lx.expect("]")?;
        lx.expect(":")?;
        let mut lhs = Vec::new();
        while !lx.eat("=>") {
            lhs.push(compartment(&mut lx, true)?);
        }
        let mut rhs = Vec::new();
        while !lx.eat(".") {
            rhs.push(compartment(&mut lx, true)?);
        }
        if !labels.insert(label.clone()) {
            return Err(RewriteError::DuplicateLabel(label));
        }
        let rule = RewriteRule {
            label,
            authored,
            lhs,
            rhs,
        };
        rule.validate()?;
        rules.push(rule);
    }
    Ok(rules)
}

/// A lowercase name written where a rest variable may stand. `$x` always
/// works; bare names are accepted where they follow the usual conventions
/// (the location name in lowercase, or a name ending in `mods`).
fn rest_variable(lx: &mut Lexer<'_>, bare_ok: impl Fn(&str) -> bool) -> Result<Option<String>, ParseError> {
    if lx.eat("$") {
        return lx.ident().map(Some);
    }
    let mark = lx.clone();
    match lx.ident() {
        Ok(name) if bare_ok(&name) => Ok(Some(name)),
        _ => {
            *lx = mark;
            Ok(None)
        }
    }
}

fn compartment(lx: &mut Lexer<'_>, patterns: bool) -> Result<CompartmentPattern, ParseError> {
    lx.expect("{")?;
    let loc = lx.ident()?;
    lx.expect("|")?;
    let mut rest = None;
    let mut objects = Vec::new();
    let lower = loc.to_lowercase();
    loop {
        if lx.eat("}") {
            break;
        }
        if patterns {
            if let Some(v) = rest_variable(lx, |n| n == lower)? {
                if rest.replace(v).is_some() {
                    return Err(lx.error(format!("second rest variable in {loc}")));
                }
                continue;
            }
        }
        objects.push(object(lx, patterns)?);
    }
    Ok(CompartmentPattern { loc, rest, objects })
}

fn object(lx: &mut Lexer<'_>, patterns: bool) -> Result<ObjectPattern, ParseError> {
    if lx.eat("(") {
        let a = cell(lx, patterns)?;
        lx.expect(":")?;
        let b = cell(lx, patterns)?;
        lx.expect(")")?;
        return Ok(ObjectPattern::Pair(a, b));
    }
    lx.skip_ws();
    if lx.peek() == Some('[') {
        return Ok(ObjectPattern::Cell(cell(lx, patterns)?));
    }
    let name = lx.ident()?;
    if name.chars().next().is_some_and(|c| c.is_lowercase()) {
        return Err(lx.error(format!("'{name}' is neither an object nor a rest variable")));
    }
    Ok(ObjectPattern::Atom(name))
}

fn cell(lx: &mut Lexer<'_>, patterns: bool) -> Result<CellPattern, ParseError> {
    lx.expect("[")?;
    let kind = lx.ident()?;
    let mut mods = Vec::new();
    let mut rest = None;
    if lx.eat("-") {
        loop {
            if lx.eat("]") {
                break;
            }
            if patterns {
                if let Some(v) = rest_variable(lx, |n| n.ends_with("mods"))? {
                    if rest.replace(v).is_some() {
                        return Err(lx.error(format!("second rest variable in [{kind}]")));
                    }
                    continue;
                }
            }
            mods.push(lx.ident()?);
        }
    } else {
        lx.expect("]")?;
    }
    mods.sort();
    Ok(CellPattern { kind, mods, rest })
}
