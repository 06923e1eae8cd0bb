use proptest::prelude::*;

use fcps::knowledge::{Kind, KnowledgeBase, KnowledgeItem, ReplacementOrder, Tick};
use fcps::rewriting::{immune_ruleset, match_rule, Cell, Object, SystemState};
use fcps::term::{Arg, Term};

fn order() -> ReplacementOrder {
    ReplacementOrder::new(vec![
        ReplacementOrder::stale_position(),
        ReplacementOrder::interest_override(["Interest", "Image"]),
    ])
}

fn arb_item() -> impl Strategy<Value = KnowledgeItem> {
    let position = (0..4u64, 0..2usize, 0..2usize).prop_map(|(t, r, p)| {
        (
            Kind::Fact,
            Term::new(
                "Position",
                vec![
                    Arg::sym(t.to_string()),
                    Arg::sym(format!("r{r}")),
                    Arg::sym(format!("p{p}")),
                ],
            ),
            t,
        )
    });
    let goal = (0..4u64, prop::bool::ANY, prop::bool::ANY).prop_map(|(t, interest, open)| {
        let area = if open { Arg::var("X") } else { Arg::sym("areaA") };
        let pred = if interest { "Interest" } else { "Image" };
        (Kind::Goal, Term::new(pred, vec![Arg::sym(t.to_string()), area]), t)
    });
    let detect = (0..3usize).prop_map(|a| (Kind::Fact, Term::new("Detect", vec![Arg::sym(format!("a{a}"))]), 0));
    (
        prop_oneof![position, goal, detect],
        prop::option::of(1..6u64),
        0..3usize,
    )
        .prop_map(|((kind, term, created), ttl, origin)| {
            let item = KnowledgeItem::new(kind, term, created, format!("n{origin}")).unwrap();
            match ttl {
                Some(ttl) => item.with_ttl(ttl).unwrap(),
                None => item,
            }
        })
}

fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
    prop::collection::vec(arb_item(), 0..8).prop_map(|items| {
        let mut kb = KnowledgeBase::new();
        for i in items {
            kb.insert(i, &order(), 0);
        }
        kb
    })
}

proptest! {
    #[test]
    fn merge_is_commutative(a in arb_kb(), b in arb_kb(), now in 0..8 as Tick) {
        let o = order();
        prop_assert_eq!(a.merge(&b, &o, now), b.merge(&a, &o, now));
    }

    #[test]
    fn merge_is_idempotent(a in arb_kb(), now in 0..8 as Tick) {
        let o = order();
        prop_assert_eq!(a.merge(&a, &o, now), a.normalized(&o, now));
    }

    #[test]
    fn merge_is_associative(a in arb_kb(), b in arb_kb(), c in arb_kb(), now in 0..8 as Tick) {
        let o = order();
        prop_assert_eq!(
            a.merge(&b, &o, now).merge(&c, &o, now),
            a.merge(&b.merge(&c, &o, now), &o, now)
        );
    }

    #[test]
    fn insert_keeps_maximal_elements(a in arb_kb(), item in arb_item(), now in 0..8 as Tick) {
        let o = order();
        let mut kb = a.clone();
        kb.insert(item, &o, now);
        kb.purge(now);
        prop_assert_eq!(kb.normalized(&o, now), kb.clone());
        for x in kb.iter() {
            prop_assert!(!kb.iter().any(|y| o.precedes(x, y)));
        }
    }

    #[test]
    fn purge_commutes_with_insert(a in arb_kb(), item in arb_item(), now in 0..8 as Tick) {
        let o = order();
        let mut first = a.clone();
        first.insert(item.clone(), &o, now);
        first.purge(now);
        let mut second = a.clone();
        second.purge(now);
        second.insert(item, &o, now);
        prop_assert_eq!(first, second);
    }

    #[test]
    fn purge_is_idempotent(a in arb_kb(), now in 0..8 as Tick) {
        let mut once = a.clone();
        let removed = once.purge(now);
        let mut twice = once.clone();
        prop_assert!(twice.purge(now).is_empty());
        prop_assert_eq!(once.clone(), twice);
        for i in &removed {
            prop_assert!(i.ttl.is_some_and(|t| i.created + t <= now));
        }
        for i in once.iter() {
            prop_assert!(i.ttl.is_none_or(|t| i.created + t > now));
        }
    }
}

const KINDS: [&str; 5] = ["Mac", "DC", "TC4", "TH1", "B"];
const MODS: [&str; 14] = [
    "resting",
    "presenting",
    "active",
    "immature",
    "mature",
    "naive",
    "primed",
    "effective",
    "xB7",
    "xMhcII*",
    "xIL2Ra.lo",
    "sIfng",
    "xCd40L",
    "sTnf",
];

fn arb_cell() -> impl Strategy<Value = Cell> {
    (
        prop::sample::select(&KINDS[..]),
        prop::collection::vec(prop::sample::select(&MODS[..]), 0..5),
    )
        .prop_map(|(k, mods)| Cell::new(k, mods))
}

fn arb_object() -> impl Strategy<Value = Object> {
    prop_oneof![
        2 => arb_cell().prop_map(Object::Cell),
        1 => (arb_cell(), arb_cell()).prop_map(|(a, b)| Object::Pair(a, b)),
        1 => prop::sample::select(&["Path", "INTERNAL-PATH-DEAD"][..]).prop_map(|s| Object::Atom(s.into())),
    ]
}

fn arb_state() -> impl Strategy<Value = Vec<(String, Vec<Object>)>> {
    (
        prop::collection::vec(arb_object(), 0..6),
        prop::collection::vec(arb_object(), 0..6),
        prop::collection::vec(arb_object(), 0..2),
    )
        .prop_map(|(pts, ln, sig)| vec![("PTS".into(), pts), ("LN".into(), ln), ("Sig".into(), sig)])
}

fn is_submultiset<T: Ord + Clone>(small: &[T], big: &[T]) -> bool {
    let mut big = big.to_vec();
    small.iter().all(|x| match big.iter().position(|y| y == x) {
        Some(i) => {
            big.remove(i);
            true
        }
        None => false,
    })
}

proptest! {
    #[test]
    fn state_is_canonical_under_shuffles(parts in arb_state(), seed in any::<u64>()) {
        let state = SystemState::from_compartments(parts.clone());
        let mut shuffled = parts;
        shuffled.reverse();
        for (i, (_, objs)) in shuffled.iter_mut().enumerate() {
            let len = objs.len().max(1);
            objs.rotate_left((seed as usize + i) % len);
            objs.reverse();
        }
        let other = SystemState::from_compartments(shuffled);
        prop_assert_eq!(&state, &other);
        prop_assert_eq!(state.to_string(), other.to_string());
        prop_assert_eq!(state.to_string().parse::<SystemState>().unwrap(), state);
    }

    #[test]
    fn rewriting_conserves_rest_content(parts in arb_state()) {
        let state = SystemState::from_compartments(parts);
        for rule in immune_ruleset() {
            for m in match_rule(&rule, &state) {
                for side in &rule.rhs {
                    if let Some(var) = &side.rest {
                        let kept = &m.bindings.rests[var];
                        prop_assert!(
                            is_submultiset(kept, m.result.get(&side.loc)),
                            "{} dropped rest content of {}", rule.label, side.loc
                        );
                    }
                }
                let cells: Vec<&Cell> = m.result.locations()
                    .flat_map(|l| m.result.get(l))
                    .flat_map(|o| match o {
                        Object::Cell(c) => vec![c],
                        Object::Pair(a, b) => vec![a, b],
                        Object::Atom(_) => vec![],
                    })
                    .collect();
                for (var, mods) in &m.bindings.mods {
                    prop_assert!(
                        cells.iter().any(|c| is_submultiset(mods, c.mods())),
                        "{} lost the modifiers bound to {}", rule.label, var
                    );
                }
            }
        }
    }

    #[test]
    fn terms_round_trip(
        pred in "[A-Z][a-z]{0,4}",
        args in prop::collection::vec(("[a-z][a-z0-9]{0,3}", prop::bool::ANY), 0..4),
    ) {
        let args = args.into_iter()
            .map(|(s, var)| if var { Arg::var(s.to_uppercase()) } else { Arg::sym(s) })
            .collect();
        let t = Term::new(pred, args);
        prop_assert_eq!(t.to_string().parse::<Term>().unwrap(), t);
    }
}
