//! Centralized forward chaining, used as the reference for property checks.

use std::collections::BTreeSet;

use super::{derive_round, Theory};
use crate::term::Term;

/// Default round limit for [`oracle_closure`].
pub const MAX_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Closure {
    pub facts: BTreeSet<Term>,
    /// Rounds needed to reach the fixpoint (0 when nothing is derivable).
    pub depth: usize,
    /// False when the round limit cut derivation short.
    pub complete: bool,
}

/// Least fixpoint of all clauses over `facts`. Primitive results are
/// expected among the inputs.
pub fn oracle_closure<'a>(theory: &Theory, facts: impl IntoIterator<Item = &'a Term>) -> Closure {
    oracle_closure_bounded(theory, facts, MAX_ROUNDS)
}

pub fn oracle_closure_bounded<'a>(
    theory: &Theory,
    facts: impl IntoIterator<Item = &'a Term>,
    max_rounds: usize,
) -> Closure {
    let mut known: BTreeSet<Term> = facts.into_iter().cloned().collect();
    let mut errors = Vec::new();
    for depth in 0..max_rounds {
        let new = derive_round(theory, &known, &mut errors);
        if new.is_empty() {
            return Closure {
                facts: known,
                depth,
                complete: true,
            };
        }
        known.extend(new);
    }
    let complete = derive_round(theory, &known, &mut errors).is_empty();
    Closure {
        facts: known,
        depth: max_rounds,
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Arg;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn terms(src: &[&str]) -> BTreeSet<Term> {
        src.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn empty_theory_keeps_facts() {
        let facts = terms(&["P(a)", "Q(1, b)"]);
        let c = oracle_closure(&Theory::default(), &facts);
        assert_eq!(c.facts, facts);
        assert_eq!(c.depth, 0);
        assert!(c.complete);
    }

    #[test]
    fn image_clause() {
        let theory: Theory = "Image(A, I) :- Detect(T, A), Snapshot(T2, A, I).".parse().unwrap();
        let c = oracle_closure(&theory, &terms(&["Detect(4, a)", "Snapshot(6, a, i)"]));
        assert!(c.facts.contains(&"Image(a, i)".parse().unwrap()));
        assert_eq!(c.depth, 1);
    }

    #[test]
    fn round_limit_flags_incomplete() {
        let theory: Theory = "Path(X, Z) :- Edge(X, Y), Path(Y, Z). Path(X, Y) :- Edge(X, Y)."
            .parse()
            .unwrap();
        let facts = terms(&["Edge(a, b)", "Edge(b, c)", "Edge(c, d)", "Edge(d, e)"]);
        let full = oracle_closure(&theory, &facts);
        assert!(full.complete);
        assert_eq!(full.depth, 4);
        let cut = oracle_closure_bounded(&theory, &facts, 2);
        assert!(!cut.complete);
        assert!(cut.facts.is_subset(&full.facts));
    }

    /// Grounds every clause over the Herbrand universe of the facts and the
    /// theory and applies the ground instances until nothing changes.
    fn herbrand_fixpoint(theory: &Theory, facts: &BTreeSet<Term>) -> BTreeSet<Term> {
        let atoms = theory
            .clauses()
            .iter()
            .flat_map(|c| std::iter::once(&c.head).chain(&c.body));
        let universe: BTreeSet<Arg> = facts
            .iter()
            .chain(atoms)
            .flat_map(|t| t.args.iter().filter(|a| matches!(a, Arg::Sym(_))).cloned())
            .collect();
        let universe: Vec<Arg> = universe.into_iter().collect();
        let mut ground = Vec::new();
        for clause in theory.clauses() {
            let vars: Vec<String> = clause
                .body
                .iter()
                .flat_map(Term::vars)
                .chain(clause.head.vars())
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut idx = vec![0usize; vars.len()];
            if !vars.is_empty() && universe.is_empty() {
                continue;
            }
            loop {
                let s: BTreeMap<String, Arg> = vars
                    .iter()
                    .zip(&idx)
                    .map(|(v, &i)| (v.clone(), universe[i].clone()))
                    .collect();
                ground.push((
                    clause.head.apply(&s),
                    clause.body.iter().map(|b| b.apply(&s)).collect::<Vec<_>>(),
                ));
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < universe.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
        let mut known = facts.clone();
        loop {
            let before = known.len();
            for (head, body) in &ground {
                if body.iter().all(|b| known.contains(b)) {
                    known.insert(head.clone());
                }
            }
            if known.len() == before {
                return known;
            }
        }
    }

    fn arb_atom(vars: bool) -> impl Strategy<Value = Term> {
        let arg = if vars {
            prop_oneof![
                2 => prop::sample::select(vec!["X", "Y", "Z"]).prop_map(Arg::var),
                1 => prop::sample::select(vec!["a", "b", "c"]).prop_map(Arg::sym),
            ]
            .boxed()
        } else {
            prop::sample::select(vec!["a", "b", "c"]).prop_map(Arg::sym).boxed()
        };
        (0usize..3, prop::collection::vec(arg, 2)).prop_map(|(p, args)| {
            let pred = ["P", "Q", "R"][p];
            let arity = p % 2 + 1;
            Term::new(pred, args.into_iter().take(arity).collect())
        })
    }

    fn arb_clause() -> impl Strategy<Value = super::super::HornClause> {
        (arb_atom(true), prop::collection::vec(arb_atom(true), 1..3)).prop_map(|(head, body)| {
            let bound: BTreeSet<String> = body.iter().flat_map(Term::vars).map(str::to_string).collect();
            // range-restrict the head so the fixpoint is ground
            let head_args = head
                .args
                .into_iter()
                .map(|a| match a {
                    Arg::Var(v) if !bound.contains(&v) => Arg::sym("a"),
                    other => other,
                })
                .collect();
            super::super::HornClause::new(Term::new(head.pred, head_args), body)
        })
    }

    proptest! {
        #[test]
        fn matches_ground_instance_fixpoint(
            clauses in prop::collection::vec(arb_clause(), 5),
            facts in prop::collection::btree_set(arb_atom(false), 6),
        ) {
            let theory = Theory::new(clauses, vec![]).unwrap();
            let c = oracle_closure(&theory, &facts);
            prop_assert!(c.complete);
            prop_assert_eq!(c.facts, herbrand_fixpoint(&theory, &facts));
        }
    }
}
