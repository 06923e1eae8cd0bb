mod scenario;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fcps::boolnet::{attractors, feedback_loops, report, BoolNetError};
use fcps::distlogic::check_properties;
use fcps::rewriting::{replay, rewrite_random, search_reachable, SearchOutcome};

use scenario::{load, parse_assignment, Scenario};

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok = 0,
    Failed = 1,
    Config = 2,
    Limit = 3,
}

#[derive(Parser)]
#[command(
    name = "fcps",
    version,
    about = "Run and analyse knowledge-sharing, rewriting and boolean-network scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace.
    Run(Common),
    /// Breadth-first search for a state satisfying --find.
    Search(Common),
    /// Enumerate attractors of a boolean network.
    Attractors(Common),
    /// Check soundness, monotonicity, completeness and confluence.
    Check(Common),
}

#[derive(Args)]
struct Common {
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Target as loc:symbol, e.g. sig:INTERNAL-PATH-DEAD.
    #[arg(long)]
    find: Option<String>,
    /// Pinned inputs, e.g. Lps=1,Mph=1,NK=1.
    #[arg(long)]
    set: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Search(c) => search(c),
        Command::Attractors(c) => attractors_cmd(c),
        Command::Check(c) => check(c),
    };
    match result {
        Ok((status, text)) => {
            let written = match command_out(&cli.command) {
                Some(path) => write_file(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::from(status as u8),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(Status::Config as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Config as u8)
        }
    }
}

fn command_out(c: &Command) -> Option<&Path> {
    let (Command::Run(c) | Command::Search(c) | Command::Attractors(c) | Command::Check(c)) = c;
    c.out.as_deref()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run(c: &Common) -> Result<(Status, String)> {
    let text = match load(&c.scenario)? {
        Scenario::Ncps(mut s) => {
            if let Some(seed) = c.seed {
                s.world.seed = seed;
            }
            s.world.run(c.steps.unwrap_or(s.horizon)).to_string()
        }
        Scenario::Rewrite(s) => {
            let steps = c.steps.map_or(s.steps, |n| n as usize);
            let mut out = String::new();
            for (i, (label, state)) in rewrite_random(&s.initial, &s.rules, steps, c.seed.unwrap_or(s.seed))
                .iter()
                .enumerate()
            {
                writeln!(out, "{} | {label} | {state}", i + 1)?;
            }
            out
        }
        Scenario::Boolnet(s) => {
            let mut bits = s.initial.clone();
            bits.extend(s.pinned.clone());
            if let Some(set) = &c.set {
                bits.extend(parse_assignment(set)?);
            }
            let mut state = s.network.state(&bits)?;
            let mut out = String::new();
            for t in 1..=c.steps.map_or(s.steps, |n| n as usize) {
                state = s.network.update_sync(&state)?;
                let on: Vec<&str> = s
                    .network
                    .variables()
                    .iter()
                    .zip(&state)
                    .filter(|(_, b)| **b)
                    .map(|(n, _)| n.as_str())
                    .collect();
                writeln!(out, "{t} | state | {}", on.join(" "))?;
            }
            out
        }
    };
    Ok((Status::Ok, text))
}

fn search(c: &Common) -> Result<(Status, String)> {
    let Scenario::Rewrite(s) = load(&c.scenario)? else {
        bail!("{}: search needs a rewrite scenario", c.scenario.display());
    };
    let target = match (&c.find, &s.find) {
        (Some(f), _) => f.parse().context("--find")?,
        (None, Some(p)) => p.clone(),
        (None, None) => bail!("no target: pass --find loc:symbol"),
    };
    let mut limits = s.limits;
    if let Some(d) = c.depth {
        limits.max_depth = d;
    }
    let mut out = String::new();
    let status = match search_reachable(&s.initial, &s.rules, &target, limits) {
        SearchOutcome::Found { path, states } => {
            replay(&s.initial, &s.rules, &path).context("witness failed to replay")?;
            writeln!(out, "FOUND {target} in {} steps ({states} states)", path.len())?;
            for (i, step) in path.iter().enumerate() {
                writeln!(out, "{} | {} | {}", i + 1, step.label, step.state)?;
            }
            Status::Ok
        }
        SearchOutcome::NotFound { exhausted, states } => {
            let why = if exhausted {
                "state space exhausted".to_string()
            } else {
                format!("depth limit {}", limits.max_depth)
            };
            writeln!(out, "NONE ({why}, {states} states)")?;
            Status::Failed
        }
        SearchOutcome::BudgetExceeded { frontier, states } => {
            writeln!(out, "BUDGET EXCEEDED ({states} states, frontier {frontier})")?;
            Status::Limit
        }
    };
    Ok((status, out))
}

fn attractors_cmd(c: &Common) -> Result<(Status, String)> {
    let Scenario::Boolnet(s) = load(&c.scenario)? else {
        bail!("{}: attractors needs a boolean network", c.scenario.display());
    };
    let mut pinned: BTreeMap<String, bool> = s.pinned.clone();
    if let Some(set) = &c.set {
        pinned.extend(parse_assignment(set)?);
    }
    let found = match attractors(&s.network, &pinned) {
        Ok(found) => found,
        Err(e @ BoolNetError::RefuseExhaustive { .. }) => return Ok((Status::Limit, format!("REFUSED: {e}\n"))),
        Err(e) => return Err(e.into()),
    };
    let mut out = report(&s.network, &pinned, &found);
    writeln!(out, "influences:")?;
    for i in s.network.influences() {
        writeln!(out, "  {i}")?;
    }
    writeln!(out, "feedback loops:")?;
    for l in feedback_loops(&s.network, 6) {
        writeln!(out, "  {l}")?;
    }
    Ok((Status::Ok, out))
}

fn check(c: &Common) -> Result<(Status, String)> {
    let Scenario::Ncps(mut s) = load(&c.scenario)? else {
        bail!("{}: check needs an ncps scenario", c.scenario.display());
    };
    if let Some(seed) = c.seed {
        s.world.seed = seed;
    }
    let horizon = c.steps.unwrap_or(s.horizon);
    let r = check_properties(&s.world, horizon);
    let mut out = r.to_string();
    if r.passed() {
        return Ok((Status::Ok, out));
    }
    writeln!(out, "trace:")?;
    write!(out, "{}", r.trace)?;
    Ok((Status::Failed, out))
}
