//! Goal-driven Horn-clause inference running on every node.
//!
//! Each tick a node expands the goals it holds into subgoals, forward-chains
//! the facts it holds, and executes primitive goals it has the capability
//! for. Everything it produces goes back through its knowledge base, so it
//! travels to other nodes like any other knowledge.

mod oracle;
mod properties;
mod random;
mod robot;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::knowledge::{KnowledgeError, KnowledgeItem, ReplacementOrder, Tick};
use crate::network::Node;
use crate::term::{unify, Arg, Lexer, Subst, Term};
use crate::trace::{Event, Source};

pub use oracle::{oracle_closure, oracle_closure_bounded, Closure};
pub use properties::{
    canonical_fact_sets, check_confluence, check_properties, check_run, PropertyReport, Verdict, MAX_SCHEDULES,
};
pub use random::{random_scenario, RandomScenarioConfig, TopologyShape};
pub use robot::{robot_order, robot_pair_scenario, robot_scenario, robot_theory, ROBOT_THEORY};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("predicate {pred} used with arity {found}, declared {expected}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("primitive {0} appears in a clause head")]
    PrimitiveInHead(String),
    #[error("invalid primitive declaration: {0}")]
    InvalidPrimitive(String),
    #[error("clause `{clause}` derived non-ground fact {head}")]
    NonGroundHead { clause: String, head: Term },
    #[error("node {node} lacks capability '{capability}'")]
    NotCapable { node: String, capability: String },
    #[error("primitive goal {0} already executed")]
    AlreadyExecuted(Term),
    #[error("{0} is not a primitive")]
    NotPrimitive(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// `head :- body1, ..., bodyN.`; an empty body makes an axiom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HornClause {
    pub head: Term,
    pub body: Vec<Term>,
}

impl HornClause {
    pub fn new(head: Term, body: Vec<Term>) -> Self {
        HornClause { head, body }
    }

    /// Head variables that no body atom binds. Such positions are only
    /// fillable by primitives; forward chaining through them is an error.
    pub fn unbound_head_vars(&self) -> BTreeSet<&str> {
        let body: BTreeSet<&str> = self.body.iter().flat_map(Term::vars).collect();
        self.head.vars().filter(|v| !body.contains(v)).collect()
    }

    fn renamed(&self, tag: usize) -> HornClause {
        let suffix = format!("#{tag}");
        HornClause {
            head: self.head.rename_vars(&suffix),
            body: self.body.iter().map(|b| b.rename_vars(&suffix)).collect(),
        }
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(".")
    }
}

/// A goal predicate executed as a device command.
///
/// Executing `Name(session, a2, .., aN)` at tick `t` yields the fact
/// `Yields(t, a2', .., aN')`, where unbound positions get fresh symbols
/// `<prefix>_<node>_<t>` (suffixed `_1`, `_2`, .. beyond the first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Primitive {
    pub name: String,
    pub arity: usize,
    pub capability: String,
    pub yields: String,
    pub fresh_prefix: String,
}

impl Primitive {
    /// The fact produced by executing `goal` at `node` at tick `now`,
    /// together with the fresh symbols it introduced.
    pub fn result_term(&self, goal: &Term, node: &str, now: Tick) -> (Term, Vec<String>) {
        let mut fresh: BTreeMap<&str, String> = BTreeMap::new();
        let mut order = Vec::new();
        let now_arg = Arg::Int(i64::try_from(now).unwrap_or(i64::MAX));
        let mut args = vec![now_arg];
        for a in goal.args.iter().skip(1) {
            args.push(match a {
                Arg::Var(v) => {
                    let next = fresh.len();
                    let sym = fresh.entry(v.as_str()).or_insert_with(|| {
                        let s = if next == 0 {
                            format!("{}_{}_{}", self.fresh_prefix, node, now)
                        } else {
                            format!("{}_{}_{}_{}", self.fresh_prefix, node, now, next)
                        };
                        order.push(s.clone());
                        s
                    });
                    Arg::Sym(sym.clone())
                }
                other => other.clone(),
            });
        }
        (Term::new(self.yields.clone(), args), order)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "primitive {}/{} requires {} yields {}/{} fresh {}.",
            self.name, self.arity, self.capability, self.yields, self.arity, self.fresh_prefix
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Theory {
    predicates: BTreeMap<String, usize>,
    clauses: Vec<HornClause>,
    primitives: BTreeMap<String, Primitive>,
    pub default_ttl: Option<Tick>,
}

impl Theory {
    pub fn new(clauses: Vec<HornClause>, primitives: Vec<Primitive>) -> Result<Self, LogicError> {
        let mut theory = Theory::default();
        for p in primitives {
            theory.add_primitive(p)?;
        }
        for c in clauses {
            theory.add_clause(c)?;
        }
        Ok(theory)
    }

    fn declare(&mut self, pred: &str, arity: usize) -> Result<(), LogicError> {
        match self.predicates.get(pred) {
            Some(&expected) if expected != arity => Err(LogicError::ArityMismatch {
                pred: pred.to_string(),
                expected,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.predicates.insert(pred.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn add_clause(&mut self, clause: HornClause) -> Result<(), LogicError> {
        if self.primitives.contains_key(&clause.head.pred) {
            return Err(LogicError::PrimitiveInHead(clause.head.pred.clone()));
        }
        for t in std::iter::once(&clause.head).chain(&clause.body) {
            self.declare(&t.pred, t.arity())?;
        }
        self.clauses.push(clause);
        Ok(())
    }

    pub fn add_primitive(&mut self, p: Primitive) -> Result<(), LogicError> {
        if p.arity == 0 {
            return Err(LogicError::InvalidPrimitive(format!(
                "{} needs a session argument",
                p.name
            )));
        }
        if self.clauses.iter().any(|c| c.head.pred == p.name) {
            return Err(LogicError::PrimitiveInHead(p.name));
        }
        self.declare(&p.name, p.arity)?;
        self.declare(&p.yields, p.arity)?;
        self.primitives.insert(p.name.clone(), p);
        Ok(())
    }

    pub fn clauses(&self) -> &[HornClause] {
        &self.clauses
    }

    pub fn primitives(&self) -> impl Iterator<Item = &Primitive> {
        self.primitives.values()
    }

    pub fn primitive(&self, pred: &str) -> Option<&Primitive> {
        self.primitives.get(pred)
    }

    pub fn predicates(&self) -> &BTreeMap<String, usize> {
        &self.predicates
    }

    /// Renamed-apart clauses whose head unifies with `goal`, with the unifier.
    fn resolvents<'a>(&'a self, goal: &'a Term) -> impl Iterator<Item = (HornClause, Subst)> + 'a {
        self.clauses.iter().enumerate().filter_map(move |(i, c)| {
            let c = c.renamed(i);
            let mut s = Subst::new();
            unify(&c.head, goal, &mut s).then_some((c, s))
        })
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        for p in self.primitives.values() {
            writeln!(f, "{p}")?;
        }
        if let Some(ttl) = self.default_ttl {
            writeln!(f, "ttl {ttl}.")?;
        }
        Ok(())
    }
}

impl FromStr for Theory {
    type Err = LogicError;

    /// Statements end with `.`; `%` and `#` start comments.
    ///
    /// ```text
    /// Image(A, I) :- Detect(T, A), Snapshot(T2, A, I).
    /// primitive TakeSnapshot/3 requires camera yields Snapshot/3 fresh img.
    /// ttl 40.
    /// ```
    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let cleaned = strip_comments(src);
        let mut lx = Lexer::new(&cleaned);
        let mut clauses = Vec::new();
        let mut primitives = Vec::new();
        let mut ttl = None;
        loop {
            lx.skip_ws();
            if lx.at_end() {
                break;
            }
            let mark = lx.clone();
            let word = lx.ident()?;
            match word.as_str() {
                "primitive" => primitives.push(parse_primitive(&mut lx)?),
                "ttl" => {
                    let n = lx.int()?;
                    if n <= 0 {
                        return Err(lx.error("ttl must be positive").into());
                    }
                    ttl = Some(n as Tick);
                }
                _ => {
                    lx = mark;
                    let head = lx.term()?;
                    let mut body = Vec::new();
                    if lx.eat(":-") {
                        loop {
                            body.push(lx.term()?);
                            if !lx.eat(",") {
                                break;
                            }
                        }
                    }
                    clauses.push(HornClause::new(head, body));
                }
            }
            lx.expect(".")?;
        }
        let mut theory = Theory::new(clauses, primitives)?;
        theory.default_ttl = ttl;
        Ok(theory)
    }
}

pub(crate) fn strip_comments(src: &str) -> String {
    src.lines()
        .map(|line| match line.find(['%', '#']) {
            Some(i) => format!("{}{}", &line[..i], " ".repeat(line.len() - i)),
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_primitive(lx: &mut Lexer<'_>) -> Result<Primitive, LogicError> {
    let name = lx.ident()?;
    lx.expect("/")?;
    let arity = usize::try_from(lx.int()?).map_err(|_| lx.error("negative arity"))?;
    lx.expect("requires")?;
    let capability = lx.ident()?;
    lx.expect("yields")?;
    let yields = lx.ident()?;
    lx.expect("/")?;
    let yields_arity = usize::try_from(lx.int()?).map_err(|_| lx.error("negative arity"))?;
    if yields_arity != arity {
        return Err(LogicError::InvalidPrimitive(format!(
            "{name}/{arity} must yield a fact of the same arity, not {yields}/{yields_arity}"
        )));
    }
    let fresh_prefix = if lx.eat("fresh") {
        lx.ident()?
    } else {
        yields.to_lowercase()
    };
    Ok(Primitive {
        name,
        arity,
        capability,
        yields,
        fresh_prefix,
    })
}

/// Per-node application state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InferenceState {
    /// Goals already expanded into subgoals (canonical form).
    pub expanded: BTreeSet<Term>,
    /// Primitive goals already executed here.
    pub executed: BTreeSet<Term>,
    /// Goals posted at this node from outside; answers are reported.
    pub requests: BTreeSet<Term>,
    pub delivered: BTreeSet<(Term, Term)>,
    reported: BTreeSet<String>,
}

/// Everything one inference step proposes for a node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Inference {
    pub goals: Vec<Term>,
    pub facts: Vec<Term>,
    /// Primitive goals this node can and should execute now.
    pub primitives: Vec<Term>,
    pub expanded: Vec<Term>,
    pub errors: Vec<LogicError>,
}

impl Inference {
    /// New items stamped `created = now` with the theory's default TTL.
    pub fn items(&self, node: &str, theory: &Theory, now: Tick) -> Vec<KnowledgeItem> {
        let stamp = |item: Result<KnowledgeItem, KnowledgeError>| {
            let item = item.expect("inference emits ground facts");
            match theory.default_ttl {
                Some(ttl) => item.with_ttl(ttl).expect("ttl validated at parse"),
                None => item,
            }
        };
        self.facts
            .iter()
            .map(|f| stamp(KnowledgeItem::fact(f.clone(), now, node)))
            .chain(
                self.goals
                    .iter()
                    .map(|g| stamp(KnowledgeItem::goal(g.clone(), now, node))),
            )
            .collect()
    }
}

/// Facts grouped by predicate, in term order.
pub(crate) type FactIndex<'a> = BTreeMap<&'a str, Vec<&'a Term>>;

pub(crate) fn index_facts<'a>(facts: impl IntoIterator<Item = &'a Term>) -> FactIndex<'a> {
    let mut idx: FactIndex<'a> = BTreeMap::new();
    for f in facts {
        idx.entry(f.pred.as_str()).or_default().push(f);
    }
    idx
}

/// Every substitution under which all of `body` matches facts in `idx`.
pub(crate) fn body_solutions(body: &[Term], idx: &FactIndex<'_>, subst: Subst, out: &mut Vec<Subst>) {
    let Some((first, rest)) = body.split_first() else {
        out.push(subst);
        return;
    };
    let atom = first.apply(&subst);
    for fact in idx.get(atom.pred.as_str()).into_iter().flatten() {
        let mut s = subst.clone();
        if atom.match_onto(fact, &mut s) {
            body_solutions(rest, idx, s, out);
        }
    }
}

/// One forward-chaining round: heads of every clause instance whose body
/// holds in `known`, minus what is already known.
pub(crate) fn derive_round(theory: &Theory, known: &BTreeSet<Term>, errors: &mut Vec<LogicError>) -> BTreeSet<Term> {
    let idx = index_facts(known);
    let mut new = BTreeSet::new();
    for clause in &theory.clauses {
        let mut sols = Vec::new();
        body_solutions(&clause.body, &idx, Subst::new(), &mut sols);
        for s in sols {
            let head = clause.head.apply(&s);
            if !head.is_ground() {
                errors.push(LogicError::NonGroundHead {
                    clause: clause.to_string(),
                    head,
                });
            } else if !known.contains(&head) {
                new.insert(head);
            }
        }
    }
    new
}

/// Goal expansion, forward chaining and primitive selection for one node.
/// Pure: the caller stores the results and updates the memo tables.
pub fn infer_step(node: &Node, theory: &Theory, _now: Tick) -> Inference {
    let mut out = Inference::default();

    // Goal expansion, saturated within the step.
    let mut known_goals: BTreeSet<Term> = node.kb.goals().cloned().collect();
    let mut worklist: Vec<Term> = known_goals
        .iter()
        .filter(|g| !node.logic.expanded.contains(*g))
        .cloned()
        .collect();
    worklist.reverse();
    let mut expanded_now = BTreeSet::new();
    while let Some(goal) = worklist.pop() {
        if !expanded_now.insert(goal.clone()) {
            continue;
        }
        out.expanded.push(goal.clone());
        if theory.primitive(&goal.pred).is_some() {
            continue;
        }
        for (clause, subst) in theory.resolvents(&goal) {
            for atom in &clause.body {
                let sub = atom.apply(&subst).canonical();
                if known_goals.insert(sub.clone()) {
                    out.goals.push(sub.clone());
                    if !node.logic.expanded.contains(&sub) {
                        worklist.insert(0, sub);
                    }
                }
            }
        }
    }

    // Forward chaining to a local fixpoint.
    let mut known_facts: BTreeSet<Term> = node.kb.facts().cloned().collect();
    loop {
        let new = derive_round(theory, &known_facts, &mut out.errors);
        if new.is_empty() {
            break;
        }
        out.facts.extend(new.iter().cloned());
        known_facts.extend(new);
    }

    for goal in &known_goals {
        if let Some(p) = theory.primitive(&goal.pred) {
            if node.has_capability(&p.capability) && !node.logic.executed.contains(goal) {
                out.primitives.push(goal.clone());
            }
        }
    }
    out
}

/// Runs a primitive goal on `node`, logging it so it never fires twice.
pub fn execute_primitive(
    node: &mut Node,
    theory: &Theory,
    goal: &Term,
    now: Tick,
) -> Result<KnowledgeItem, LogicError> {
    let prim = theory
        .primitive(&goal.pred)
        .ok_or_else(|| LogicError::NotPrimitive(goal.pred.clone()))?;
    if !node.has_capability(&prim.capability) {
        return Err(LogicError::NotCapable {
            node: node.id.clone(),
            capability: prim.capability.clone(),
        });
    }
    let goal = goal.canonical();
    if node.logic.executed.contains(&goal) {
        return Err(LogicError::AlreadyExecuted(goal));
    }
    let (term, _) = prim.result_term(&goal, &node.id, now);
    let mut item = KnowledgeItem::fact(term, now, node.id.clone())?;
    if let Some(ttl) = theory.default_ttl {
        item = item.with_ttl(ttl)?;
    }
    node.logic.executed.insert(goal);
    Ok(item)
}

/// The distributed-logic application: one inference step, primitive
/// execution, then answers to goals posted at this node.
pub fn app_step(node: &mut Node, theory: &Theory, order: &ReplacementOrder, now: Tick) -> Vec<Event> {
    let inference = infer_step(node, theory, now);
    let mut events = Vec::new();
    node.logic.expanded.extend(inference.expanded.iter().cloned());
    for item in inference.items(&node.id, theory, now) {
        events.extend(node.accept_traced(item, Source::Derive, order, now).1);
    }
    for err in &inference.errors {
        if node.logic.reported.insert(err.to_string()) {
            events.push(Event::AppError {
                node: node.id.clone(),
                message: err.to_string(),
            });
        }
    }
    for goal in &inference.primitives {
        if let Ok(item) = execute_primitive(node, theory, goal, now) {
            events.push(Event::Execute {
                node: node.id.clone(),
                goal: goal.clone(),
            });
            events.extend(node.accept_traced(item, Source::Result, order, now).1);
        }
    }
    events.extend(deliveries(node, theory));
    events
}

/// Facts answering a goal posted at this node: either matching the goal
/// itself, or matching a non-primitive body atom of a clause that expands it.
fn deliveries(node: &mut Node, theory: &Theory) -> Vec<Event> {
    let facts: Vec<Term> = node.kb.facts().cloned().collect();
    let mut events = Vec::new();
    let requests: Vec<Term> = node
        .logic
        .requests
        .iter()
        .filter(|r| node.kb.goals().any(|g| g == *r))
        .cloned()
        .collect();
    for request in requests {
        let mut wanted = vec![request.clone()];
        for (clause, subst) in theory.resolvents(&request) {
            wanted.extend(
                clause
                    .body
                    .iter()
                    .filter(|b| theory.primitive(&b.pred).is_none())
                    .map(|b| b.apply(&subst)),
            );
        }
        for fact in &facts {
            let answers = wanted.iter().any(|w| w.match_onto(fact, &mut Subst::new()));
            if answers && node.logic.delivered.insert((fact.clone(), request.clone())) {
                events.push(Event::Deliver {
                    node: node.id.clone(),
                    fact: fact.clone(),
                    request: request.clone(),
                });
            }
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Kind;

    fn image_theory() -> Theory {
        "Interest(S, A) :- Image(A, I), TakeSnapshot(S, A, I).
         Image(A, I) :- Detect(T, A), Snapshot(T2, A, I).
         primitive TakeSnapshot/3 requires camera yields Snapshot/3 fresh img."
            .parse()
            .unwrap()
    }

    fn node_with(items: &[(Kind, &str)]) -> Node {
        let mut n = Node::new("r2", "room1").with_capabilities(["camera"]);
        for (k, t) in items {
            let item = KnowledgeItem::new(*k, t.parse().unwrap(), 0, "r1").unwrap();
            n.accept(item, &ReplacementOrder::empty(), 0);
        }
        n
    }

    fn strings(ts: &[Term]) -> Vec<String> {
        ts.iter().map(Term::to_string).collect()
    }

    #[test]
    fn theory_parsing_and_validation() {
        let t = image_theory();
        assert_eq!(t.clauses().len(), 2);
        assert_eq!(t.predicates()["Snapshot"], 3);
        let p = t.primitive("TakeSnapshot").unwrap();
        assert_eq!(p.capability, "camera");
        assert_eq!(p.fresh_prefix, "img");
        let round: Theory = t.to_string().parse().unwrap();
        assert_eq!(round, t);

        let err = "P(a). P(a, b).".parse::<Theory>().unwrap_err();
        assert!(matches!(err, LogicError::ArityMismatch { .. }));
        let err = "primitive Go/1 requires legs yields Went/1. Go(X) :- P(X)."
            .parse::<Theory>()
            .unwrap_err();
        assert_eq!(err, LogicError::PrimitiveInHead("Go".into()));
        let err = "primitive Go/2 requires legs yields Went/1."
            .parse::<Theory>()
            .unwrap_err();
        assert!(matches!(err, LogicError::InvalidPrimitive(_)));
        let err = "P(X) :- Q(X)".parse::<Theory>().unwrap_err();
        assert!(matches!(err, LogicError::Parse(_)));
    }

    #[test]
    fn goal_expansion_reaches_detect_and_snapshot() {
        let n = node_with(&[(Kind::Goal, "Interest(9, areaA)")]);
        let inf = infer_step(&n, &image_theory(), 1);
        let goals = strings(&inf.goals);
        assert!(goals.contains(&"Detect(_0,areaA)".to_string()), "{goals:?}");
        assert!(goals.contains(&"Snapshot(_0,areaA,_1)".to_string()));
        assert!(goals.contains(&"TakeSnapshot(9,areaA,_0)".to_string()));
        assert!(inf.facts.is_empty());
        // the camera node queues the primitive subgoal in the same step
        assert_eq!(strings(&inf.primitives), vec!["TakeSnapshot(9,areaA,_0)"]);
    }

    #[test]
    fn fully_matched_body_derives_head() {
        let n = node_with(&[
            (Kind::Fact, "Detect(4, areaA)"),
            (Kind::Fact, "Snapshot(6, areaA, img1)"),
        ]);
        let inf = infer_step(&n, &image_theory(), 7);
        assert_eq!(strings(&inf.facts), vec!["Image(areaA,img1)"]);
        assert!(inf.goals.is_empty());
    }

    #[test]
    fn nothing_to_do_emits_nothing() {
        let n = node_with(&[(Kind::Fact, "Detect(4, areaA)")]);
        assert_eq!(infer_step(&n, &image_theory(), 7), Inference::default());
    }

    #[test]
    fn non_ground_head_is_reported_not_emitted() {
        let theory: Theory = "Out(X, Y) :- In(X).".parse().unwrap();
        let n = node_with(&[(Kind::Fact, "In(a)")]);
        let inf = infer_step(&n, &theory, 0);
        assert!(inf.facts.is_empty());
        assert!(matches!(inf.errors[..], [LogicError::NonGroundHead { .. }]));
    }

    #[test]
    fn execute_primitive_once_per_goal() {
        let theory = image_theory();
        let goal: Term = "TakeSnapshot(9, areaA, X)".parse().unwrap();
        let mut cam = Node::new("r2", "room1").with_capabilities(["camera"]);
        let item = execute_primitive(&mut cam, &theory, &goal, 12).unwrap();
        assert_eq!(item.kind, Kind::Fact);
        assert_eq!(item.term.to_string(), "Snapshot(12,areaA,img_r2_12)");
        assert_eq!(item.created, 12);
        assert!(matches!(
            execute_primitive(&mut cam, &theory, &goal, 13),
            Err(LogicError::AlreadyExecuted(_))
        ));

        let mut blind = Node::new("r1", "room1");
        let err = execute_primitive(&mut blind, &theory, &goal, 12).unwrap_err();
        assert!(matches!(err, LogicError::NotCapable { .. }));
        assert!(blind.kb.is_empty());
        assert!(blind.logic.executed.is_empty());
    }

    #[test]
    fn fresh_names_for_several_outputs() {
        let p = Primitive {
            name: "Scan".into(),
            arity: 4,
            capability: "lidar".into(),
            yields: "Cloud".into(),
            fresh_prefix: "pc".into(),
        };
        let (t, fresh) = p.result_term(&"Scan(1, X, room, Y)".parse().unwrap(), "n1", 5);
        assert_eq!(t.to_string(), "Cloud(5,pc_n1_5,room,pc_n1_5_1)");
        assert_eq!(fresh, vec!["pc_n1_5", "pc_n1_5_1"]);
    }

    #[test]
    fn app_step_memoizes_expansion_and_delivers() {
        let theory = image_theory();
        let order = ReplacementOrder::empty();
        let mut n = Node::new("r1", "room1");
        let req = KnowledgeItem::goal("Interest(9, areaA)".parse().unwrap(), 0, "r1").unwrap();
        n.logic.requests.insert(req.term.clone());
        n.accept(req, &order, 0);
        let first = app_step(&mut n, &theory, &order, 0);
        assert!(first.iter().any(|e| e.kind() == "derive"));
        assert!(app_step(&mut n, &theory, &order, 1).is_empty());

        let image = KnowledgeItem::fact("Image(areaA, img_r2_1)".parse().unwrap(), 2, "r2").unwrap();
        n.accept(image, &order, 2);
        let events = app_step(&mut n, &theory, &order, 2);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].to_string(), "r1 Image(areaA,img_r2_1) for Interest(9,areaA)");
        assert!(app_step(&mut n, &theory, &order, 3).is_empty());
    }
}
