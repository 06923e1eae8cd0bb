//! Built-in immune response rule base.

use super::{parse_rules, RewriteRule, SystemState};

pub const IMMUNE_RULES: &str = include_str!("../../../../scenarios/immune.rules");

const INITIAL: &str = "{PTS | Path [Mac - resting] [DC - immature]} {LN | [TC4 - naive xIL2Ra.lo]} {Sig | }";

pub fn immune_ruleset() -> Vec<RewriteRule> {
    parse_rules(IMMUNE_RULES).expect("built-in rules parse")
}

/// Pathogen, resting macrophage and immature dendritic cell in the tissue,
/// a naive T cell in the lymph node, no signals.
pub fn immune_initial_state() -> SystemState {
    INITIAL.parse().expect("built-in state parses")
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn rule(label: &str) -> RewriteRule {
        immune_ruleset().into_iter().find(|r| r.label == label).unwrap()
    }

    fn state(src: &str) -> SystemState {
        src.parse().unwrap()
    }

    fn only(rule: &RewriteRule, s: &SystemState) -> SystemState {
        let ms = match_rule(rule, s);
        assert_eq!(ms.len(), 1, "{} on {s}", rule.label);
        apply_rule(rule, s, &ms[0]).unwrap()
    }

    #[test]
    fn rule_base_shape() {
        let rules = immune_ruleset();
        let printed: Vec<&str> = rules.iter().filter(|r| !r.authored).map(|r| r.label.as_str()).collect();
        assert_eq!(
            printed,
            [
                "014.Mac.exposed.to.Path",
                "008.TC4.becomes.TH1",
                "018.TH1.Mac.effects",
                "019.Mac.act.by.TH1"
            ]
        );
        assert_eq!(rules.len(), 10);
        for r in &rules {
            assert_eq!(&r.to_string().parse::<RewriteRule>().unwrap(), r);
        }
    }

    #[test]
    fn rule_014() {
        let out = only(&rule("014.Mac.exposed.to.Path"), &state("{PTS | Path [Mac - resting]}"));
        assert_eq!(out, state("{PTS | Path [Mac - presenting sTnf xMhcI* xMhcII* xB7]}"));
    }

    #[test]
    fn rule_008() {
        let s = state("{LN | ([TC4 - naive xIL2Ra.lo] : [DC - mature xMhcII* xB7])}");
        let out = only(&rule("008.TC4.becomes.TH1"), &s);
        assert_eq!(
            out,
            state("{LN | ([TH1 - primed sIL2 sIfng xIL2Ra.hi xVLA4 xFas xFasL] : [DC - mature xMhcII* xB7 sIL12])}")
        );
    }

    #[test]
    fn rule_018_needs_both_signals() {
        let r = rule("018.TH1.Mac.effects");
        let s = state("{PTS | ([TH1 - effective xFas] : [Mac - presenting xMhcII* xB7])}");
        assert_eq!(
            only(&r, &s),
            state("{PTS | ([TH1 - effective xFas xCd40L sIfng] : [Mac - active xMhcII* xCd40 xTnfRs xB7])}")
        );
        assert!(match_rule(&r, &state("{PTS | ([TH1 - primed] : [Mac - presenting xMhcII*])}")).is_empty());
        assert!(match_rule(&r, &state("{PTS | ([TH1 - effective] : [Mac - resting xMhcII*])}")).is_empty());
    }

    #[test]
    fn rule_019() {
        let s =
            state("{PTS | Path ([TH1 - effective xCd40L sIfng] : [Mac - active sTnf xMhcI* xMhcII* xCd40 xTnfRs])}");
        let out = only(&rule("019.Mac.act.by.TH1"), &s);
        assert_eq!(
            out,
            state("{PTS | Path [TH1 - effective] [Mac - resting]} {Sig | INTERNAL-PATH-DEAD}")
        );
    }

    #[test]
    fn printed_chain_needs_no_extra_enrichment() {
        // 014 leaves sTnf and xMhcI* in the macrophage's rest modifiers, which
        // 018 carries through, so 019 matches directly after 018.
        let s = state("{PTS | Path [Mac - resting] [TH1 - effective]}");
        let s = only(&rule("014.Mac.exposed.to.Path"), &s);
        let s = only(&rule("018pre.TH1.Mac.bind"), &s);
        let s = only(&rule("018.TH1.Mac.effects"), &s);
        let s = only(&rule("019.Mac.act.by.TH1"), &s);
        assert!(s.get("Sig").contains(&Object::Atom("INTERNAL-PATH-DEAD".into())));
    }

    #[test]
    fn clearance_is_reachable() {
        let rules = immune_ruleset();
        let root = immune_initial_state();
        let target: Predicate = "sig:INTERNAL-PATH-DEAD".parse().unwrap();
        let SearchOutcome::Found { path, .. } = search_reachable(&root, &rules, &target, SearchLimits::default())
        else {
            panic!("not found")
        };
        let labels: Vec<&str> = path.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "014.Mac.exposed.to.Path",
                "015.DC.engulf.and.travel",
                "007.TC4.DC.bind",
                "008.TC4.becomes.TH1",
                "009.unbind",
                "016.TH1.matures",
                "017.TH1.travels.to.site",
                "018pre.TH1.Mac.bind",
                "018.TH1.Mac.effects",
                "019.Mac.act.by.TH1",
            ]
        );
        assert!(target.holds(&replay(&root, &rules, &path).unwrap()));
    }

    #[test]
    fn no_dendritic_cell_no_clearance() {
        let rules = immune_ruleset();
        let root = state("{PTS | Path [Mac - resting]} {LN | [TC4 - naive xIL2Ra.lo]}");
        let target: Predicate = "sig:INTERNAL-PATH-DEAD".parse().unwrap();
        let out = search_reachable(&root, &rules, &target, SearchLimits::default());
        assert_eq!(
            out,
            SearchOutcome::NotFound {
                exhausted: true,
                states: 2
            }
        );
    }

    #[test]
    fn some_random_run_clears() {
        let rules = immune_ruleset();
        let root = immune_initial_state();
        let cleared = (0..50).any(|seed| {
            rewrite_random(&root, &rules, 40, seed)
                .iter()
                .any(|(_, s)| s.get("Sig").iter().any(|o| o.mentions("INTERNAL-PATH-DEAD")))
        });
        assert!(cleared);
        assert_eq!(
            rewrite_random(&root, &rules, 40, 1),
            rewrite_random(&root, &rules, 40, 1)
        );
    }

    #[test]
    fn random_runs_stay_well_formed() {
        let rules = immune_ruleset();
        for seed in 0..30 {
            for (_, s) in rewrite_random(&immune_initial_state(), &rules, 60, seed) {
                s.check_well_formed().unwrap();
            }
        }
    }

    #[test]
    fn clonal_selection() {
        // two naive clones; only the one whose receptor matches the presented
        // pathogen binds, and only primed IL2 secreting helpers replicate
        let mut rules = immune_ruleset();
        rules.retain(|r| r.label != "007.TC4.DC.bind");
        rules.extend(
            parse_rules(
                "rl[007.TC4.DC.bind]:
                   {LN | ln [TC4 - tc4mods naive xIL2Ra.lo xTcr.path] [DC - dcmods mature xMhcII* xB7]}
                   => {LN | ln ([TC4 - tc4mods naive xIL2Ra.lo xTcr.path] : [DC - dcmods mature xMhcII* xB7])} .
                 rl[020.TH1.replicates]:
                   {LN | ln [TH1 - th1mods primed sIL2]}
                   => {LN | ln [TH1 - th1mods primed sIL2] [TH1 - th1mods primed sIL2]} .",
            )
            .unwrap(),
        );
        let root = state(
            "{PTS | Path [Mac - resting] [DC - immature]}
             {LN | [TC4 - naive xIL2Ra.lo xTcr.path] [TC4 - naive xIL2Ra.lo xTcr.other]}",
        );
        let count = |s: &SystemState, tcr: &str| {
            s.locations()
                .flat_map(|l| s.get(l))
                .flat_map(|o| o.cells())
                .filter(|c| c.kind == "TH1" && c.has(tcr))
                .count()
        };
        let mut grew = false;
        for seed in 0..20 {
            for (_, s) in rewrite_random(&root, &rules, 60, seed) {
                assert_eq!(count(&s, "xTcr.other"), 0);
                grew |= count(&s, "xTcr.path") > 1;
            }
        }
        assert!(grew);
    }
}
