//! TOML scenario files. Paths inside a scenario are relative to the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use fcps::boolnet::BooleanNetwork;
use fcps::distlogic::Theory;
use fcps::knowledge::{parse_item_term, KnowledgeItem, ReplacementOrder, ReplacementRule, Tick};
use fcps::network::{ExchangePolicy, Injection, Node, PolicyKind, Topology, World};
use fcps::rewriting::{parse_rules, Predicate, RewriteRule, SearchLimits, SystemState};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NcpsFile {
    #[allow(dead_code)]
    engine: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_horizon")]
    horizon: Tick,
    theory: Option<String>,
    #[serde(default)]
    order: Vec<String>,
    topology: TopologySection,
    #[serde(default)]
    policy: PolicySection,
    #[serde(default)]
    nodes: Vec<NodeSection>,
    #[serde(default)]
    inject: Vec<InjectSection>,
    #[serde(default, rename = "move")]
    moves: Vec<MoveSection>,
    #[serde(default)]
    join: Vec<JoinSection>,
    #[serde(default)]
    leave: Vec<LeaveSection>,
}

fn default_horizon() -> Tick {
    30
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    rooms: Vec<String>,
    #[serde(default)]
    adjacent: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    #[serde(default = "default_policy")]
    kind: String,
    #[serde(default = "default_period")]
    period: Tick,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: default_policy(),
            period: default_period(),
        }
    }
}

fn default_policy() -> String {
    "push-all".into()
}

fn default_period() -> Tick {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSection {
    id: String,
    room: String,
    #[serde(default)]
    capabilities: Vec<String>,
    #[serde(default)]
    preload: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectSection {
    tick: Tick,
    node: String,
    item: String,
    ttl: Option<Tick>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveSection {
    tick: Tick,
    node: String,
    room: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinSection {
    tick: Tick,
    id: String,
    room: String,
    #[serde(default)]
    capabilities: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaveSection {
    tick: Tick,
    node: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewriteFile {
    #[allow(dead_code)]
    engine: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_steps")]
    steps: usize,
    rules: String,
    initial: String,
    find: Option<String>,
    depth: Option<usize>,
    max_states: Option<usize>,
}

fn default_steps() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoolnetFile {
    #[allow(dead_code)]
    engine: String,
    network: String,
    #[serde(default)]
    set: BTreeMap<String, u8>,
    #[serde(default)]
    initial: BTreeMap<String, u8>,
    #[serde(default = "default_boolnet_steps")]
    steps: usize,
}

fn default_boolnet_steps() -> usize {
    20
}

pub struct NcpsScenario {
    pub world: World,
    pub horizon: Tick,
}

pub struct RewriteScenario {
    pub rules: Vec<RewriteRule>,
    pub initial: SystemState,
    pub seed: u64,
    pub steps: usize,
    pub find: Option<Predicate>,
    pub limits: SearchLimits,
}

pub struct BoolnetScenario {
    pub network: BooleanNetwork,
    pub pinned: BTreeMap<String, bool>,
    pub initial: BTreeMap<String, bool>,
    pub steps: usize,
}

pub enum Scenario {
    Ncps(Box<NcpsScenario>),
    Rewrite(RewriteScenario),
    Boolnet(BoolnetScenario),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn sibling(base: &Path, rel: &str) -> PathBuf {
    base.parent().unwrap_or(Path::new(".")).join(rel)
}

fn bits(map: BTreeMap<String, u8>, what: &str) -> Result<BTreeMap<String, bool>> {
    map.into_iter()
        .map(|(k, v)| match v {
            0 | 1 => Ok((k, v == 1)),
            _ => bail!("{what} {k} must be 0 or 1, not {v}"),
        })
        .collect()
}

/// Loads a scenario. A `.bn` file is taken as a bare boolean network.
pub fn load(path: &Path) -> Result<Scenario> {
    let text = read(path)?;
    let ctx = || path.display().to_string();
    if path.extension().is_some_and(|e| e == "bn") {
        let network = text.parse().with_context(ctx)?;
        return Ok(Scenario::Boolnet(BoolnetScenario {
            network,
            pinned: BTreeMap::new(),
            initial: BTreeMap::new(),
            steps: default_boolnet_steps(),
        }));
    }
    let header: toml::Table = toml::from_str(&text).with_context(ctx)?;
    let engine = header
        .get("engine")
        .and_then(toml::Value::as_str)
        .ok_or_else(|| anyhow!("{}: missing string field 'engine'", ctx()))?;
    match engine {
        "ncps" => load_ncps(path, toml::from_str(&text).with_context(ctx)?).with_context(ctx),
        "rewrite" => load_rewrite(path, toml::from_str(&text).with_context(ctx)?).with_context(ctx),
        "boolnet" => load_boolnet(path, toml::from_str(&text).with_context(ctx)?).with_context(ctx),
        other => bail!(
            "{}: unknown engine '{other}' (expected ncps, rewrite or boolnet)",
            ctx()
        ),
    }
}

fn load_ncps(path: &Path, f: NcpsFile) -> Result<Scenario> {
    let theory: Option<Theory> = match &f.theory {
        Some(rel) => {
            let p = sibling(path, rel);
            Some(read(&p)?.parse().with_context(|| p.display().to_string())?)
        }
        None => None,
    };
    let mut order = ReplacementOrder::empty();
    for entry in &f.order {
        match entry.as_str() {
            "stale-position" => order.push(ReplacementOrder::stale_position()),
            "interest-override" => {
                let t = theory
                    .as_ref()
                    .ok_or_else(|| anyhow!("interest-override needs a theory"))?;
                order.push(ReplacementOrder::interest_override(t.predicates().keys()));
            }
            rule => order.push(
                rule.parse::<ReplacementRule>()
                    .with_context(|| format!("order rule '{rule}'"))?,
            ),
        }
    }

    let mut topology = Topology::new(f.topology.rooms.clone(), &f.topology.adjacent)?;
    for m in &f.moves {
        topology.schedule_move(m.tick, m.node.clone(), m.room.clone())?;
    }
    let mut world = World::new(topology);
    world.seed = f.seed;
    world.order = order;
    world.theory = theory;
    let kind = match f.policy.kind.as_str() {
        "push-all" => PolicyKind::PushAll,
        "push-delta" => PolicyKind::PushDelta,
        other => bail!("unknown policy '{other}' (expected push-all or push-delta)"),
    };
    world.policy = ExchangePolicy::new(kind, f.policy.period)?;

    for n in &f.nodes {
        world.add_node(Node::new(n.id.clone(), n.room.clone()).with_capabilities(n.capabilities.clone()))?;
        for src in &n.preload {
            let (kind, term) = parse_item_term(src).with_context(|| format!("preload '{src}'"))?;
            world.preload(&n.id, KnowledgeItem::new(kind, term, 0, n.id.clone())?)?;
        }
    }
    for j in &f.join {
        world.script.joins.push((
            j.tick,
            Node::new(j.id.clone(), j.room.clone()).with_capabilities(j.capabilities.clone()),
        ));
    }
    for l in &f.leave {
        world.script.leaves.push((l.tick, l.node.clone()));
    }
    for i in &f.inject {
        let (kind, term) = parse_item_term(&i.item).with_context(|| format!("injection '{}'", i.item))?;
        let mut inj = Injection::new(i.tick, i.node.clone(), kind, term);
        inj.ttl = i.ttl;
        world.inject(inj)?;
    }
    world.validate()?;
    Ok(Scenario::Ncps(Box::new(NcpsScenario {
        world,
        horizon: f.horizon,
    })))
}

fn load_rewrite(path: &Path, f: RewriteFile) -> Result<Scenario> {
    let rules_path = sibling(path, &f.rules);
    let rules = parse_rules(&read(&rules_path)?).with_context(|| rules_path.display().to_string())?;
    let initial = f.initial.parse().context("initial state")?;
    let find = f
        .find
        .as_deref()
        .map(str::parse)
        .transpose()
        .context("find predicate")?;
    let defaults = SearchLimits::default();
    Ok(Scenario::Rewrite(RewriteScenario {
        rules,
        initial,
        seed: f.seed,
        steps: f.steps,
        find,
        limits: SearchLimits {
            max_depth: f.depth.unwrap_or(defaults.max_depth),
            max_states: f.max_states.unwrap_or(defaults.max_states),
        },
    }))
}

fn load_boolnet(path: &Path, f: BoolnetFile) -> Result<Scenario> {
    let net_path = sibling(path, &f.network);
    let network = read(&net_path)?
        .parse()
        .with_context(|| net_path.display().to_string())?;
    Ok(Scenario::Boolnet(BoolnetScenario {
        network,
        pinned: bits(f.set, "input")?,
        initial: bits(f.initial, "variable")?,
        steps: f.steps,
    }))
}

/// `Lps=1,Mph=1` → name → bit.
pub fn parse_assignment(src: &str) -> Result<BTreeMap<String, bool>> {
    src.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("expected var=bit, found '{pair}'"))?;
            let bit = match v.trim() {
                "0" => false,
                "1" => true,
                other => bail!("bit for {} must be 0 or 1, not '{other}'", k.trim()),
            };
            Ok((k.trim().to_string(), bit))
        })
        .collect()
}
