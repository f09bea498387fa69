//! `oblivio`: check, run and test OblivIO programs.
//!
//! Exit codes: 0 on success, 1 when a program is rejected or a check finds a
//! problem, 2 on usage and I/O errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oblivio_core::frontend::{parse_lattice, parse_program_with, parse_strategy, ChannelRef, Program, StrategyScript};
use oblivio_core::harness::{
    check_script_extension, ni_differential_test, overhead_check, random_extension, trace_diff, NiConfig,
    OverheadError,
};
use oblivio_core::netsim::{
    log_to_jsonl, run_simulation, Direction, NodeSpec, Outcome, Scheduler, Semantics, SimConfig, SimError, TraceEvent,
};
use oblivio_core::typing::{check_system, handler_potentials, ChannelEnv, SystemError};
use oblivio_core::{BaseValue, Lattice, Level, SizedValue};
use serde_json::Value as Json;

#[derive(Parser)]
#[command(name = "oblivio", version, about = "Type checker, interpreter and simulator for OblivIO")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check a system and print least handler potentials.
    Check(SystemArgs),
    /// Run a single program against its script.
    Run(RunArgs),
    /// Simulate a system and write the network log as JSON lines.
    Simulate(RunArgs),
    /// Differential noninterference trials.
    NiTest(NiArgs),
    /// Compare suppressed and safe runs against the overhead bound.
    Overhead(OverheadArgs),
    /// Compare two simulation logs as seen by an attacker.
    TraceDiff(DiffArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Program source, once per node.
    #[arg(long = "program", required = true)]
    programs: Vec<PathBuf>,
    /// Lattice file overriding the programs' lattice headers.
    #[arg(long)]
    lattice: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Strategy script as NODE=PATH; a bare PATH works with one program.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Maximum number of system steps.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// Skip the type checker.
    #[arg(long)]
    unchecked: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    RoundRobin,
    GenuinePaced,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Suppress dummy traffic.
    #[arg(long = "unsafe")]
    suppress: bool,
    /// Check pc-stack and bit-stack well-formedness at every step.
    #[arg(long)]
    monitor: bool,
    #[arg(long, value_enum, default_value = "round-robin")]
    scheduler: SchedulerArg,
    /// Write the log here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Attacker level; defaults to the lattice bottom.
    #[arg(long)]
    adv: Option<String>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverheadArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Extended scripts as NODE=PATH; replaces random dummy injection.
    #[arg(long = "extended")]
    extended: Vec<String>,
    /// Number of random dummy injection schedules.
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Most dummies injected into one node's script.
    #[arg(long, default_value_t = 6)]
    max_dummies: usize,
    /// Write the JSON reports here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    adv: Option<String>,
    /// Only compare this node's trace.
    #[arg(long)]
    node: Option<String>,
}

/// A failure with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

fn usage(msg: impl Display) -> Fail {
    Fail {
        code: 2,
        msg: msg.to_string(),
    }
}

fn finding(msg: impl Display) -> Fail {
    Fail {
        code: 1,
        msg: msg.to_string(),
    }
}

type Res<T> = Result<T, Fail>;

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_programs(args: &SystemArgs) -> Res<Vec<Program>> {
    let lattice: Option<Lattice> = match &args.lattice {
        Some(p) => Some(parse_lattice(&read(p)?).map_err(|e| finding(format!("{}: {e}", p.display())))?),
        None => None,
    };
    args.programs
        .iter()
        .map(|p| {
            let src = read(p)?;
            parse_program_with(&src, lattice.as_ref()).map_err(|e| finding(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn load_scripts(programs: &[Program], args: &[String]) -> Res<BTreeMap<String, StrategyScript>> {
    let mut out = BTreeMap::new();
    for a in args {
        let (node, path) = match a.split_once('=') {
            Some((n, p)) => (n.to_string(), p),
            None if programs.len() == 1 => (programs[0].node.clone(), a.as_str()),
            None => return Err(usage(format!("--strategy {a}: use NODE=PATH with several programs"))),
        };
        if !programs.iter().any(|p| p.node == node) {
            return Err(usage(format!("--strategy {a}: no program for node {node}")));
        }
        let script = parse_strategy(&read(Path::new(path))?).map_err(|e| usage(format!("{path}: {e}")))?;
        if out.insert(node.clone(), script).is_some() {
            return Err(usage(format!("two strategies for node {node}")));
        }
    }
    Ok(out)
}

fn specs(programs: &[Program], scripts: &BTreeMap<String, StrategyScript>) -> Vec<NodeSpec> {
    programs
        .iter()
        .map(|p| NodeSpec::new(p.clone(), scripts.get(&p.node).cloned().unwrap_or_default()))
        .collect()
}

fn load_system(input: &InputArgs) -> Res<Vec<NodeSpec>> {
    let programs = load_programs(&input.system)?;
    let scripts = load_scripts(&programs, &input.strategies)?;
    Ok(specs(&programs, &scripts))
}

fn sim_error(e: SimError) -> Fail {
    match e {
        SimError::Setup { .. } => usage(e),
        SimError::Types(SystemError::Type(errs)) => {
            finding(errs.iter().map(|(n, e)| format!("{n}: {e}")).collect::<Vec<_>>().join("\n"))
        }
        e => finding(e),
    }
}

fn resolve_adv(programs: &[Program], adv: Option<&str>) -> Res<Level> {
    let lat = &programs.first().ok_or_else(|| usage("no programs"))?.lattice;
    match adv {
        None => Ok(lat.bottom()),
        Some(name) => lat.level(name).ok_or_else(|| usage(format!("unknown level {name}"))),
    }
}

fn cmd_check(args: &SystemArgs) -> Res<()> {
    let programs = load_programs(args)?;
    let lambda = ChannelEnv::build(&programs).map_err(finding)?;
    for p in &programs {
        for h in handler_potentials(p, &lambda) {
            let min = h.inferred.map_or("none".to_string(), |q| q.to_string());
            println!("{}/{}  annotated={}  min={}", p.node, h.name, h.annotated, min);
        }
    }
    match check_system(&programs) {
        Ok(_) => {
            println!("ok: {} program(s) well-typed", programs.len());
            Ok(())
        }
        Err(SystemError::Type(errs)) => {
            Err(finding(errs.iter().map(|(n, e)| format!("{n}: {e}")).collect::<Vec<_>>().join("\n")))
        }
        Err(e) => Err(finding(e)),
    }
}

fn sim_config(args: &RunArgs) -> SimConfig {
    SimConfig {
        semantics: if args.suppress { Semantics::Unsafe } else { Semantics::Safe },
        scheduler: match args.scheduler {
            SchedulerArg::RoundRobin => Scheduler::RoundRobin,
            SchedulerArg::GenuinePaced => Scheduler::GenuinePaced,
        },
        budget: args.input.budget,
        monitor: args.monitor,
        check_types: !args.input.unchecked,
        ..SimConfig::default()
    }
}

fn cmd_simulate(args: &RunArgs, single: bool) -> Res<()> {
    let specs = load_system(&args.input)?;
    if single && specs.len() != 1 {
        return Err(usage("run takes exactly one program; use simulate for systems"));
    }
    let r = run_simulation(&specs, &sim_config(args)).map_err(sim_error)?;
    let body = if single {
        let n = &r.nodes[0];
        let mut s = String::new();
        for e in &n.trace {
            s.push_str(&format!("{e}\n"));
        }
        for o in &n.outputs {
            s.push_str(&format!("output {}@{} {}\n", o.ch, o.t, o.value));
        }
        s
    } else {
        log_to_jsonl(&r.log)
    };
    match &args.out {
        Some(p) => write(p, &body)?,
        None => print!("{body}"),
    }
    let outcome = match r.outcome {
        Outcome::Quiescent => "quiescent",
        Outcome::Blocked => "blocked",
        Outcome::BudgetExhausted => "budget exhausted",
    };
    eprintln!("outcome: {outcome} after {} steps", r.steps);
    for n in &r.nodes {
        eprintln!(
            "  {}: {} trace events, {} handlers, history time {}{}",
            n.node,
            n.trace.len(),
            n.handlers_run,
            n.history_time,
            if n.blocked { ", blocked on a dummy message" } else { "" }
        );
    }
    let mut problems: Vec<String> = Vec::new();
    problems.extend(r.monitor_violations.iter().map(|v| format!("monitor: {v}")));
    problems.extend(r.wf_violations.iter().map(|v| format!("strategy: {v}")));
    if r.clock_violations() > 0 {
        problems.push(format!("{} clock violations", r.clock_violations()));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(finding(problems.join("\n")))
    }
}

fn cmd_ni(args: &NiArgs) -> Res<()> {
    let specs = load_system(&args.input)?;
    let programs: Vec<Program> = specs.iter().map(|s| s.program.clone()).collect();
    let adv = resolve_adv(&programs, args.adv.as_deref())?;
    let mut cfg = NiConfig::new(adv, args.trials, args.seed);
    cfg.sim.budget = args.input.budget;
    cfg.sim.check_types = !args.input.unchecked;
    let rep = ni_differential_test(&specs, &cfg).map_err(sim_error)?;
    print!("{rep}");
    if let Some(p) = &args.out {
        write(p, &format!("{:#}\n", rep.to_json()))?;
    }
    match &rep.counterexample {
        None => Ok(()),
        Some(c) => Err(finding(format!("counterexample at trial {} (seed {:#018x})", c.trial, c.seed))),
    }
}

fn overhead_error(e: OverheadError) -> Fail {
    match e {
        OverheadError::Sim(e) => sim_error(e),
        e => usage(e),
    }
}

fn cmd_overhead(args: &OverheadArgs) -> Res<()> {
    use rand::SeedableRng;

    let base = load_system(&args.input)?;
    if args.input.unchecked {
        return Err(usage("overhead needs well-typed programs"));
    }
    let programs: Vec<Program> = base.iter().map(|s| s.program.clone()).collect();
    check_system(&programs).map_err(|e| sim_error(e.into()))?;
    let mut reports = Vec::new();
    if !args.extended.is_empty() {
        let mut scripts = load_scripts(&programs, &args.extended)?;
        let ext: Vec<NodeSpec> = base
            .iter()
            .map(|s| {
                let mut s = s.clone();
                if let Some(w) = scripts.remove(&s.program.node) {
                    s.script = w;
                }
                s
            })
            .collect();
        for (a, b) in base.iter().zip(&ext) {
            check_script_extension(&a.script, &b.script).map_err(|d| usage(format!("{}: {d}", a.program.node)))?;
        }
        reports.push(overhead_check(&base, &ext, args.input.budget).map_err(overhead_error)?);
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
        for _ in 0..args.trials {
            let ext = random_extension(&base, args.max_dummies, args.input.budget, &mut rng).map_err(sim_error)?;
            reports.push(overhead_check(&base, &ext, args.input.budget).map_err(overhead_error)?);
        }
    }
    for (i, r) in reports.iter().enumerate() {
        println!("schedule {i}:");
        print!("{r}");
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.max_ratio()).collect();
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if let (Some(q), false) = (reports.first().map(|r| r.q_max), ratios.is_empty()) {
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        println!(
            "summary: {} schedule(s), bound {}, max ratio {max:.3}, mean ratio {mean:.3}, {failed} failed",
            reports.len(),
            1 + q
        );
    }
    if let Some(p) = &args.out {
        let json = Json::Array(reports.iter().map(|r| r.to_json()).collect());
        write(p, &format!("{json:#}\n"))?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(finding(format!("{failed} schedule(s) broke the overhead bound")))
    }
}

/// Per-node traces read back from a JSON lines log.
fn read_log(path: &Path) -> Res<BTreeMap<String, Vec<TraceEvent>>> {
    let text = read(path)?;
    let mut out: BTreeMap<String, Vec<TraceEvent>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |what: &str| usage(format!("{}:{}: {what}", path.display(), i + 1));
        let j: Json = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let dir = match j["dir"].as_str() {
            Some("out") => Direction::Sent,
            Some("in") => Direction::Received,
            Some("obs") => Direction::Observed,
            Some("local") => continue,
            _ => return Err(bad("bad dir")),
        };
        let node = j["node"].as_str().ok_or_else(|| bad("missing node"))?.to_string();
        let ch = j["ch"].as_str().and_then(ChannelRef::parse).ok_or_else(|| bad("bad ch"))?;
        let t = j["t"].as_u64().ok_or_else(|| bad("bad t"))?;
        let bit = j["bit"].as_u64().ok_or_else(|| bad("bad bit"))? != 0;
        let size = j["size"].as_u64().ok_or_else(|| bad("bad size"))? as usize;
        let base = BaseValue::from_json(&j["val"]).ok_or_else(|| bad("bad val"))?;
        let value = SizedValue::new(&base, size).map_err(|e| bad(&e.to_string()))?;
        out.entry(node).or_default().push(TraceEvent { dir, ch, t, bit, value });
    }
    Ok(out)
}

fn cmd_trace_diff(args: &DiffArgs) -> Res<()> {
    let programs = load_programs(&args.system)?;
    let lambda = ChannelEnv::build(&programs).map_err(finding)?;
    let adv = resolve_adv(&programs, args.adv.as_deref())?;
    let left = read_log(&args.left)?;
    let right = read_log(&args.right)?;
    let mut nodes: Vec<&String> = left.keys().chain(right.keys()).collect();
    nodes.sort();
    nodes.dedup();
    if let Some(n) = &args.node {
        nodes.retain(|m| *m == n);
    }
    let empty = Vec::new();
    let mut diffs = 0;
    for n in nodes {
        let (a, b) = (left.get(n).unwrap_or(&empty), right.get(n).unwrap_or(&empty));
        match trace_diff(adv, &lambda, a, b) {
            None => println!("{n}: equivalent ({} events)", a.len()),
            Some(d) => {
                diffs += 1;
                println!("{n}: {d}");
            }
        }
    }
    if diffs == 0 {
        Ok(())
    } else {
        Err(finding(format!("{diffs} trace(s) differ at {}", lambda.lattice.name(adv))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Cmd::Check(a) => cmd_check(a),
        Cmd::Run(a) => cmd_simulate(a, true),
        Cmd::Simulate(a) => cmd_simulate(a, false),
        Cmd::NiTest(a) => cmd_ni(a),
        Cmd::Overhead(a) => cmd_overhead(a),
        Cmd::TraceDiff(a) => cmd_trace_diff(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
