use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, CellPattern, CompartmentPattern, Object, ObjectPattern, RewriteError, RewriteRule, SystemState};
use crate::error::ParseError;

/// Values of the rest variables of one match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    pub mods: BTreeMap<String, Vec<String>>,
    pub rests: BTreeMap<String, Vec<Object>>,
}

impl Bindings {
    fn merge(mut self, other: &Bindings) -> Bindings {
        self.mods.extend(other.mods.clone());
        self.rests.extend(other.rests.clone());
        self
    }
}

/// One way a rule's left side embeds in a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub rule: String,
    pub bindings: Bindings,
    /// Indices of the matched objects in each location's sorted multiset.
    pub positions: BTreeMap<String, Vec<usize>>,
    pub result: SystemState,
}

fn match_cell(p: &CellPattern, c: &Cell, b: &mut Bindings) -> bool {
    if p.kind != c.kind {
        return false;
    }
    let mut left = c.mods().to_vec();
    for m in &p.mods {
        match left.iter().position(|x| x == m) {
            Some(i) => {
                left.remove(i);
            }
            None => return false,
        }
    }
    match &p.rest {
        Some(v) => {
            b.mods.insert(v.clone(), left);
            true
        }
        None => left.is_empty(),
    }
}

fn match_object(p: &ObjectPattern, o: &Object, b: &mut Bindings) -> bool {
    match (p, o) {
        (ObjectPattern::Atom(x), Object::Atom(y)) => x == y,
        (ObjectPattern::Cell(p), Object::Cell(c)) => match_cell(p, c, b),
        (ObjectPattern::Pair(pa, pb), Object::Pair(a, c)) => match_cell(pa, a, b) && match_cell(pb, c, b),
        _ => false,
    }
}

/// Embeddings of one location pattern: matched positions plus bindings.
fn match_compartment(p: &CompartmentPattern, objects: &[Object]) -> Vec<(Vec<usize>, Bindings)> {
    fn go(
        p: &CompartmentPattern,
        objects: &[Object],
        used: &mut Vec<usize>,
        b: Bindings,
        out: &mut Vec<(Vec<usize>, Bindings)>,
    ) {
        let k = used.len();
        if k == p.objects.len() {
            let rest: Vec<Object> = objects
                .iter()
                .enumerate()
                .filter(|(i, _)| !used.contains(i))
                .map(|(_, o)| o.clone())
                .collect();
            match &p.rest {
                Some(v) => {
                    let mut b = b;
                    b.rests.insert(v.clone(), rest);
                    out.push((used.clone(), b));
                }
                None if rest.is_empty() => out.push((used.clone(), b)),
                None => {}
            }
            return;
        }
        for (i, o) in objects.iter().enumerate() {
            if used.contains(&i) {
                continue;
            }
            let mut nb = b.clone();
            if match_object(&p.objects[k], o, &mut nb) {
                used.push(i);
                go(p, objects, used, nb, out);
                used.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(p, objects, &mut Vec::new(), Bindings::default(), &mut out);
    out
}

fn instantiate_cell(p: &CellPattern, b: &Bindings) -> Cell {
    let extra = p.rest.as_ref().map(|v| b.mods[v].clone()).unwrap_or_default();
    Cell::new(p.kind.clone(), p.mods.iter().cloned().chain(extra))
}

fn instantiate(rule: &RewriteRule, state: &SystemState, b: &Bindings) -> SystemState {
    let mut next = state.clone();
    for c in &rule.rhs {
        let mut objects = c.rest.as_ref().map(|v| b.rests[v].clone()).unwrap_or_default();
        objects.extend(c.objects.iter().map(|o| match o {
            ObjectPattern::Atom(a) => Object::Atom(a.clone()),
            ObjectPattern::Cell(p) => Object::Cell(instantiate_cell(p, b)),
            ObjectPattern::Pair(x, y) => Object::Pair(instantiate_cell(x, b), instantiate_cell(y, b)),
        }));
        next.set(c.loc.clone(), objects);
    }
    next
}

/// All ways `rule` applies to `state`, one per distinct successor state,
/// ordered by successor.
pub fn match_rule(rule: &RewriteRule, state: &SystemState) -> Vec<Match> {
    let mut partial: Vec<(BTreeMap<String, Vec<usize>>, Bindings)> = vec![Default::default()];
    for c in &rule.lhs {
        let options = match_compartment(c, state.get(&c.loc));
        partial = partial
            .into_iter()
            .flat_map(|(pos, b)| {
                options.iter().map(move |(p, ob)| {
                    let mut pos = pos.clone();
                    pos.insert(c.loc.clone(), p.clone());
                    (pos, b.clone().merge(ob))
                })
            })
            .collect();
        if partial.is_empty() {
            return Vec::new();
        }
    }
    let mut matches: Vec<Match> = partial
        .into_iter()
        .map(|(positions, bindings)| Match {
            rule: rule.label.clone(),
            result: instantiate(rule, state, &bindings),
            bindings,
            positions,
        })
        .collect();
    matches.sort_by(|a, b| a.result.cmp(&b.result));
    matches.dedup_by(|a, b| a.result == b.result);
    matches
}

/// Applies a match produced by [`match_rule`] on this same state.
pub fn apply_rule(rule: &RewriteRule, state: &SystemState, m: &Match) -> Result<SystemState, RewriteError> {
    if m.rule != rule.label || !match_rule(rule, state).contains(m) {
        return Err(RewriteError::StaleMatch(rule.label.clone()));
    }
    m.result.check_well_formed()?;
    Ok(m.result.clone())
}

/// Successor states in rule order, with the index of the match used.
pub fn successors<'a>(
    state: &'a SystemState,
    rules: &'a [RewriteRule],
) -> impl Iterator<Item = (&'a RewriteRule, usize, Match)> + 'a {
    rules.iter().flat_map(move |r| {
        match_rule(r, state)
            .into_iter()
            .enumerate()
            .map(move |(i, m)| (r, i, m))
    })
}

/// Seeded random execution: each step picks uniformly among all applicable
/// (rule, match) pairs. Stops early in normal form.
pub fn rewrite_random(
    state: &SystemState,
    rules: &[RewriteRule],
    steps: usize,
    seed: u64,
) -> Vec<(String, SystemState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = state.clone();
    let mut trace = Vec::new();
    for _ in 0..steps {
        let mut options: Vec<Match> = successors(&current, rules).map(|(_, _, m)| m).collect();
        if options.is_empty() {
            break;
        }
        let m = options.swap_remove(rng.gen_range(0..options.len()));
        current = m.result;
        trace.push((m.rule, current.clone()));
    }
    trace
}

/// Reachability targets: `loc:symbol` holds when the location contains a
/// bare symbol, cell or pair member with that name. Locations match
/// ignoring case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Contains { loc: String, symbol: String },
}

impl Predicate {
    pub fn holds(&self, state: &SystemState) -> bool {
        match self {
            Predicate::Contains { loc, symbol } => state
                .find_location(loc)
                .is_some_and(|l| state.get(l).iter().any(|o| o.mentions(symbol))),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Contains { loc, symbol } => write!(f, "{loc}:{symbol}"),
        }
    }
}

impl FromStr for Predicate {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((loc, symbol)) if !loc.trim().is_empty() && !symbol.trim().is_empty() => Ok(Predicate::Contains {
                loc: loc.trim().to_string(),
                symbol: symbol.trim().to_string(),
            }),
            _ => Err(ParseError::new(1, 1, format!("expected loc:symbol, found '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_depth: usize,
    /// Distinct states the search may visit before giving up.
    pub max_states: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_depth: 50,
            max_states: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub label: String,
    /// Index into `match_rule(rule, previous state)`.
    pub choice: usize,
    pub state: SystemState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found {
        path: Vec<WitnessStep>,
        states: usize,
    },
    /// `exhausted` is true when every reachable state was visited.
    NotFound {
        exhausted: bool,
        states: usize,
    },
    BudgetExceeded {
        frontier: usize,
        states: usize,
    },
}

/// Breadth-first search over canonical states. Rules are tried in label
/// order, so the witness is the lexicographically least shortest path.
pub fn search_reachable(
    root: &SystemState,
    rules: &[RewriteRule],
    target: &Predicate,
    limits: SearchLimits,
) -> SearchOutcome {
    let mut rules: Vec<&RewriteRule> = rules.iter().collect();
    rules.sort_by(|a, b| a.label.cmp(&b.label));
    let rules: Vec<RewriteRule> = rules.into_iter().cloned().collect();

    // (state, parent index, label, choice, depth)
    let mut nodes: Vec<(SystemState, Option<usize>, String, usize, usize)> =
        vec![(root.clone(), None, String::new(), 0, 0)];
    let mut index: HashMap<SystemState, usize> = HashMap::from([(root.clone(), 0)]);
    if target.holds(root) {
        return SearchOutcome::Found {
            path: Vec::new(),
            states: 1,
        };
    }
    let mut queue = VecDeque::from([0usize]);
    let mut cut_off = false;
    while let Some(cur) = queue.pop_front() {
        let depth = nodes[cur].4;
        let state = nodes[cur].0.clone();
        if depth >= limits.max_depth {
            if successors(&state, &rules).next().is_some() {
                cut_off = true;
            }
            continue;
        }
        for (rule, choice, m) in successors(&state, &rules) {
            if index.contains_key(&m.result) {
                continue;
            }
            if nodes.len() >= limits.max_states {
                return SearchOutcome::BudgetExceeded {
                    frontier: queue.len() + 1,
                    states: nodes.len(),
                };
            }
            let id = nodes.len();
            index.insert(m.result.clone(), id);
            nodes.push((m.result, Some(cur), rule.label.clone(), choice, depth + 1));
            if target.holds(&nodes[id].0) {
                let mut path = Vec::new();
                let mut at = id;
                while let (state, Some(parent), label, choice, _) = &nodes[at] {
                    path.push(WitnessStep {
                        label: label.clone(),
                        choice: *choice,
                        state: state.clone(),
                    });
                    at = *parent;
                }
                path.reverse();
                return SearchOutcome::Found {
                    path,
                    states: nodes.len(),
                };
            }
            queue.push_back(id);
        }
    }
    SearchOutcome::NotFound {
        exhausted: !cut_off,
        states: nodes.len(),
    }
}

/// Re-applies a witness from `root`, checking every intermediate state.
pub fn replay(root: &SystemState, rules: &[RewriteRule], path: &[WitnessStep]) -> Result<SystemState, RewriteError> {
    let mut current = root.clone();
    for (i, step) in path.iter().enumerate() {
        let rule = rules
            .iter()
            .find(|r| r.label == step.label)
            .ok_or_else(|| RewriteError::UnknownRule(step.label.clone()))?;
        let mismatch = || RewriteError::ReplayMismatch {
            step: i,
            label: step.label.clone(),
        };
        let matches = match_rule(rule, &current);
        let m = matches.get(step.choice).ok_or_else(mismatch)?;
        let next = apply_rule(rule, &current, m)?;
        if next != step.state {
            return Err(mismatch());
        }
        current = next;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::super::parse_rules;
    use super::*;

    fn rule(src: &str) -> RewriteRule {
        src.parse().unwrap()
    }

    fn state(src: &str) -> SystemState {
        src.parse().unwrap()
    }

    const R014: &str = "rl[014.Mac.exposed.to.Path]:
      {PTS | pts Path [Mac - macmods resting]} =>
      {PTS | pts Path [Mac - macmods presenting sTnf xMhcI* xMhcII* xB7]} .";

    #[test]
    fn single_match_with_empty_rest() {
        let ms = match_rule(&rule(R014), &state("{PTS | Path [Mac - resting]}"));
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].bindings.mods["macmods"], Vec::<String>::new());
        assert_eq!(ms[0].bindings.rests["pts"], Vec::<Object>::new());
        assert_eq!(
            ms[0].result,
            state("{PTS | Path [Mac - presenting sTnf xMhcI* xMhcII* xB7]}")
        );
    }

    #[test]
    fn no_path_no_match() {
        assert!(match_rule(&rule(R014), &state("{PTS | [Mac - resting]}")).is_empty());
    }

    #[test]
    fn identical_macs_collapse() {
        let s = state("{PTS | Path [Mac - resting] [Mac - resting]}");
        let ms = match_rule(&rule(R014), &s);
        assert_eq!(ms.len(), 1);
        let s = state("{PTS | Path [Mac - resting] [Mac - resting xFas]}");
        assert_eq!(match_rule(&rule(R014), &s).len(), 2);
    }

    #[test]
    fn stale_match_rejected() {
        let r = rule(R014);
        let s = state("{PTS | Path [Mac - resting]}");
        let m = match_rule(&r, &s).remove(0);
        let next = apply_rule(&r, &s, &m).unwrap();
        assert_eq!(
            apply_rule(&r, &next, &m),
            Err(RewriteError::StaleMatch(r.label.clone()))
        );
    }

    #[test]
    fn exact_compartment_without_rest() {
        let r = rule("rl[a]: {Sig | } => {Sig | Alarm} .");
        assert_eq!(match_rule(&r, &SystemState::new()).len(), 1);
        assert!(match_rule(&r, &state("{Sig | Alarm}")).is_empty());
    }

    #[test]
    fn random_runs_are_seeded() {
        let rules = parse_rules(
            "rl[a]: {X | x [C - cmods]} => {X | x [C - cmods m]} .
             rl[b]: {X | x [C - cmods m]} => {X | x [C - cmods] [C]} .",
        )
        .unwrap();
        let s = state("{X | [C]}");
        let a = rewrite_random(&s, &rules, 20, 5);
        assert_eq!(a, rewrite_random(&s, &rules, 20, 5));
        assert_eq!(a.len(), 20);
        assert!(rewrite_random(&state("{Y | Z}"), &rules, 20, 5).is_empty());
    }

    #[test]
    fn search_root_and_budget() {
        let rules = parse_rules("rl[grow]: {X | x} => {X | x A} .").unwrap();
        let p: Predicate = "x:B".parse().unwrap();
        let found = search_reachable(&state("{X | B}"), &rules, &p, SearchLimits::default());
        assert_eq!(
            found,
            SearchOutcome::Found {
                path: vec![],
                states: 1
            }
        );
        let limits = SearchLimits {
            max_depth: 1000,
            max_states: 50,
        };
        assert!(matches!(
            search_reachable(&state("{X | A}"), &rules, &p, limits),
            SearchOutcome::BudgetExceeded { .. }
        ));
        let shallow = SearchLimits {
            max_depth: 3,
            max_states: 50,
        };
        assert_eq!(
            search_reachable(&state("{X | A}"), &rules, &p, shallow),
            SearchOutcome::NotFound {
                exhausted: false,
                states: 4
            }
        );
    }

    #[test]
    fn witness_is_lex_least_shortest_and_replays() {
        let rules = parse_rules(
            "rl[b]: {X | x S} => {X | x T} .
             rl[a]: {X | x S} => {X | x U} .
             rl[c]: {X | x T} => {X | x G} .
             rl[d]: {X | x U} => {X | x G} .",
        )
        .unwrap();
        let root = state("{X | S}");
        let p: Predicate = "X:G".parse().unwrap();
        let SearchOutcome::Found { path, .. } = search_reachable(&root, &rules, &p, SearchLimits::default()) else {
            panic!()
        };
        let labels: Vec<&str> = path.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["a", "d"]);
        let end = replay(&root, &rules, &path).unwrap();
        assert!(p.holds(&end));
        let mut forged = path.clone();
        forged[1].state = state("{X | H}");
        assert!(replay(&root, &rules, &forged).is_err());
    }

    #[test]
    fn predicate_parsing() {
        let p: Predicate = "sig:INTERNAL-PATH-DEAD".parse().unwrap();
        assert!(p.holds(&state("{Sig | INTERNAL-PATH-DEAD}")));
        assert!(!p.holds(&state("{PTS | INTERNAL-PATH-DEAD}")));
        assert!("nocolon".parse::<Predicate>().is_err());
        assert!(":x".parse::<Predicate>().is_err());
    }
}
