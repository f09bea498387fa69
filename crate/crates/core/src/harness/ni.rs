//! Differential noninterference testing.
//!
//! A trial resamples every secret the attacker cannot see (store values,
//! scripted message values and mode bits, local input streams), keeping
//! sizes, channels and order fixed, reruns the system and compares every
//! node's trace with the base run.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use super::equiv::trace_diff;
use crate::lattice::Level;
use crate::netsim::{run_simulation, NodeSpec, SimConfig, SimError, SimResult};
use crate::typing::ChannelEnv;
use crate::value::{BaseType, SizedValue};

#[derive(Clone, Debug)]
pub struct NiConfig {
    pub adv: Level,
    pub trials: u64,
    pub seed: u64,
    pub sim: SimConfig,
    /// Secret strings in the base store are padded to at least this size so
    /// that mutations have room to vary their length.
    pub pad_strings: usize,
}

impl NiConfig {
    pub fn new(adv: Level, trials: u64, seed: u64) -> NiConfig {
        NiConfig {
            adv,
            trials,
            seed,
            sim: SimConfig::default(),
            pad_strings: 8,
        }
    }
}

/// One resampled secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mutation {
    Store { node: usize, var: String, value: SizedValue },
    NetValue { node: usize, index: usize, value: SizedValue },
    NetBit { node: usize, index: usize, bit: bool },
    Local { node: usize, ch: String, index: usize, value: SizedValue },
}

impl Mutation {
    fn describe(&self, specs: &[NodeSpec]) -> String {
        let name = |n: usize| specs[n].program.node.as_str();
        match self {
            Mutation::Store { node, var, value } => format!("{}: store {var} := {value}", name(*node)),
            Mutation::NetValue { node, index, value } => {
                format!("{}: script[{index}] on {} carries {value}", name(*node), specs[*node].script.net[*index].ch)
            }
            Mutation::NetBit { node, index, bit } => {
                format!("{}: script[{index}] on {} has bit {}", name(*node), specs[*node].script.net[*index].ch, *bit as u8)
            }
            Mutation::Local { node, ch, index, value } => format!("{}: local {ch}[{index}] reads {value}", name(*node)),
        }
    }
}

fn apply(specs: &[NodeSpec], muts: &[Mutation]) -> Vec<NodeSpec> {
    let mut out = specs.to_vec();
    for m in muts {
        match m {
            Mutation::Store { node, var, value } => {
                out[*node].store.get_or_insert_with(Default::default).insert(var.clone(), value.clone());
            }
            Mutation::NetValue { node, index, value } => out[*node].script.net[*index].value = value.clone(),
            Mutation::NetBit { node, index, bit } => out[*node].script.net[*index].bit = *bit,
            Mutation::Local { node, ch, index, value } => {
                out[*node].script.local.get_mut(ch).expect("mutated stream exists")[*index] = Some(value.clone())
            }
        }
    }
    out
}

/// A fresh value of the same sort and size as `v`.
fn resample(rng: &mut impl Rng, v: &SizedValue) -> SizedValue {
    match v.base_type() {
        BaseType::Int => {
            let n = if rng.gen_bool(0.5) {
                rng.gen_range(-4..=16)
            } else {
                rng.gen_range(-1000..=1000)
            };
            SizedValue::int(n)
        }
        BaseType::Str => {
            let len = rng.gen_range(0..=v.size().min(16));
            let s: String = (0..len).map(|_| *b"abcxyz01".choose(rng).expect("nonempty") as char).collect();
            SizedValue::string(&s).pad(v.size()).expect("length within size")
        }
    }
}

/// Base specs with explicit stores and secret strings padded.
fn prepare(specs: &[NodeSpec], lambda: &ChannelEnv, cfg: &NiConfig) -> Vec<NodeSpec> {
    let lat = &lambda.lattice;
    specs
        .iter()
        .map(|s| {
            let mut s = s.clone();
            let mut store = s.store.take().unwrap_or_else(|| crate::netsim::initial_store(&s.program));
            for g in &s.program.globals {
                if let Some(v) = store.get_mut(&g.name) {
                    if g.ty == BaseType::Str && !lat.leq(g.level, cfg.adv) && v.size() < cfg.pad_strings {
                        *v = v.pad(cfg.pad_strings).expect("growing");
                    }
                }
            }
            s.store = Some(store);
            s
        })
        .collect()
}

/// Draws one full set of secret mutations.
fn draw(specs: &[NodeSpec], lambda: &ChannelEnv, adv: Level, rng: &mut impl Rng) -> Vec<Mutation> {
    let lat = &lambda.lattice;
    let mut muts = Vec::new();
    for (node, s) in specs.iter().enumerate() {
        let store = s.store.as_ref().expect("prepared");
        for g in &s.program.globals {
            if !lat.leq(g.level, adv) {
                let value = resample(rng, &store[&g.name]);
                muts.push(Mutation::Store {
                    node,
                    var: g.name.clone(),
                    value,
                });
            }
        }
        for (index, m) in s.script.net.iter().enumerate() {
            let Some(t) = lambda.get(&m.ch) else { continue };
            if !lat.leq(t.val, adv) {
                muts.push(Mutation::NetValue {
                    node,
                    index,
                    value: resample(rng, &m.value),
                });
            }
            if !lat.leq(t.mode, adv) && rng.gen_bool(0.5) {
                muts.push(Mutation::NetBit {
                    node,
                    index,
                    bit: !m.bit,
                });
            }
        }
        for (ch, stream) in &s.script.local {
            let Some(decl) = s.program.local(ch) else { continue };
            if lat.leq(decl.level, adv) {
                continue;
            }
            for (index, v) in stream.iter().enumerate() {
                if let Some(v) = v {
                    muts.push(Mutation::Local {
                        node,
                        ch: ch.clone(),
                        index,
                        value: resample(rng, v),
                    });
                }
            }
        }
    }
    muts
}

/// How a mutated run differed from the base run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divergence {
    Trace { node: String, diff: String },
    LocalOutput { node: String, detail: String },
    Outcome { base: String, mutated: String },
    /// The mutated run failed where the base run did not.
    Error(String),
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Trace { node, diff } => write!(f, "trace of {node}: {diff}"),
            Divergence::LocalOutput { node, detail } => write!(f, "local output of {node}: {detail}"),
            Divergence::Outcome { base, mutated } => write!(f, "outcome {base} vs {mutated}"),
            Divergence::Error(e) => write!(f, "mutated run failed: {e}"),
        }
    }
}

enum Run {
    Ok(Box<SimResult>),
    /// The mutated scripts are not a well-formed strategy.
    Rejected,
    Failed(String),
}

fn run(specs: &[NodeSpec], sim: &SimConfig) -> Run {
    match run_simulation(specs, sim) {
        Ok(r) => Run::Ok(Box::new(r)),
        Err(SimError::Ingestion { .. }) => Run::Rejected,
        Err(e) => Run::Failed(e.to_string()),
    }
}

fn compare(adv: Level, base: &SimResult, other: &SimResult) -> Option<Divergence> {
    let lambda = &base.lambda;
    if base.outcome != other.outcome {
        return Some(Divergence::Outcome {
            base: format!("{:?}", base.outcome),
            mutated: format!("{:?}", other.outcome),
        });
    }
    for (a, b) in base.nodes.iter().zip(&other.nodes) {
        if let Some(d) = trace_diff(adv, lambda, &a.trace, &b.trace) {
            return Some(Divergence::Trace {
                node: a.node.clone(),
                diff: d.to_string(),
            });
        }
    }
    None
}

/// Extra check on local outputs the attacker can read.
fn compare_outputs(adv: Level, specs: &[NodeSpec], base: &SimResult, other: &SimResult) -> Option<Divergence> {
    let lat = &base.lambda.lattice;
    for ((s, a), b) in specs.iter().zip(&base.nodes).zip(&other.nodes) {
        let visible = |ch: &str| s.program.local(ch).is_none_or(|d| lat.leq(d.level, adv));
        let va: Vec<_> = a.outputs.iter().filter(|o| visible(&o.ch)).collect();
        let vb: Vec<_> = b.outputs.iter().filter(|o| visible(&o.ch)).collect();
        if va.len() != vb.len() {
            return Some(Divergence::LocalOutput {
                node: a.node.clone(),
                detail: format!("{} vs {} visible outputs", va.len(), vb.len()),
            });
        }
        for (x, y) in va.iter().zip(&vb) {
            if x.ch != y.ch || x.t != y.t || x.value != y.value {
                return Some(Divergence::LocalOutput {
                    node: a.node.clone(),
                    detail: format!("{}@{} {} vs {}@{} {}", x.ch, x.t, x.value, y.ch, y.t, y.value),
                });
            }
        }
    }
    None
}

fn diverges(adv: Level, specs: &[NodeSpec], base: &SimResult, muts: &[Mutation], sim: &SimConfig) -> Option<Option<Divergence>> {
    let mutated = apply(specs, muts);
    match run(&mutated, sim) {
        Run::Rejected => None,
        Run::Failed(e) => Some(Some(Divergence::Error(e))),
        Run::Ok(r) => Some(compare(adv, base, &r).or_else(|| compare_outputs(adv, specs, base, &r))),
    }
}

/// Shrinks a failing mutation set: bisect while one half still fails, then
/// drop single mutations greedily.
fn minimize(adv: Level, specs: &[NodeSpec], base: &SimResult, muts: Vec<Mutation>, sim: &SimConfig) -> Vec<Mutation> {
    let fails = |m: &[Mutation]| matches!(diverges(adv, specs, base, m, sim), Some(Some(_)));
    let mut cur = muts;
    while cur.len() > 1 {
        let (a, b) = cur.split_at(cur.len() / 2);
        if fails(a) {
            cur = a.to_vec();
        } else if fails(b) {
            cur = b.to_vec();
        } else {
            break;
        }
    }
    let mut i = 0;
    while i < cur.len() && cur.len() > 1 {
        let mut without = cur.clone();
        without.remove(i);
        if fails(&without) {
            cur = without;
        } else {
            i += 1;
        }
    }
    cur
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub mutations: usize,
    /// Draws thrown away because they made the strategy ill-formed.
    pub rejected: u32,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub trial: u64,
    pub seed: u64,
    pub mutations: Vec<String>,
    pub minimized: Vec<String>,
    pub divergence: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NiReport {
    pub adv: String,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub counterexample: Option<Counterexample>,
}

impl NiReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn to_json(&self) -> Json {
        json!({
            "adv": self.adv,
            "seed": self.seed,
            "passed": self.passed(),
            "trials": self.trials.iter().map(|t| json!({
                "trial": t.trial,
                "seed": t.seed,
                "mutations": t.mutations,
                "rejected": t.rejected,
                "passed": t.passed,
            })).collect::<Vec<_>>(),
            "counterexample": self.counterexample.as_ref().map(|c| json!({
                "trial": c.trial,
                "seed": c.seed,
                "mutations": c.mutations,
                "minimized": c.minimized,
                "divergence": c.divergence,
            })),
        })
    }
}

impl fmt::Display for NiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "noninterference at {} (seed {})", self.adv, self.seed)?;
        for t in &self.trials {
            writeln!(
                f,
                "  trial {:>3} seed {:#018x}: {} ({} mutations, {} rejected draws)",
                t.trial,
                t.seed,
                if t.passed { "pass" } else { "FAIL" },
                t.mutations,
                t.rejected
            )?;
        }
        match &self.counterexample {
            None => writeln!(f, "result: pass ({} trials)", self.trials.len()),
            Some(c) => {
                writeln!(f, "result: FAIL at trial {} (seed {:#018x})", c.trial, c.seed)?;
                writeln!(f, "  divergence: {}", c.divergence)?;
                writeln!(f, "  minimized secrets:")?;
                for m in &c.minimized {
                    writeln!(f, "    {m}")?;
                }
                Ok(())
            }
        }
    }
}

/// Seed of trial `i` under master seed `seed`.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng.gen()
}

const MAX_REJECTIONS: u32 = 64;

/// Runs `cfg.trials` secret-mutation trials against the base system. Stops
/// at the first divergence. Errors come only from the base run.
pub fn ni_differential_test(specs: &[NodeSpec], cfg: &NiConfig) -> Result<NiReport, SimError> {
    let programs: Vec<_> = specs.iter().map(|s| s.program.clone()).collect();
    let lambda = ChannelEnv::build(&programs).map_err(crate::typing::SystemError::from)?;
    let base_specs = prepare(specs, &lambda, cfg);
    let base = run_simulation(&base_specs, &cfg.sim)?;
    let mut report = NiReport {
        adv: lambda.lattice.name(cfg.adv).to_string(),
        seed: cfg.seed,
        trials: Vec::new(),
        counterexample: None,
    };
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rejected = 0;
        let outcome = loop {
            let muts = draw(&base_specs, &lambda, cfg.adv, &mut rng);
            match diverges(cfg.adv, &base_specs, &base, &muts, &cfg.sim) {
                Some(d) => break Some((muts, d)),
                None if rejected < MAX_REJECTIONS => rejected += 1,
                None => break None,
            }
        };
        let (muts, divergence) = outcome.unwrap_or_default();
        report.trials.push(TrialRecord {
            trial,
            seed,
            mutations: muts.len(),
            rejected,
            passed: divergence.is_none(),
        });
        if let Some(d) = divergence {
            let minimized = minimize(cfg.adv, &base_specs, &base, muts.clone(), &cfg.sim);
            let divergence = diverges(cfg.adv, &base_specs, &base, &minimized, &cfg.sim)
                .flatten()
                .unwrap_or(d);
            report.counterexample = Some(Counterexample {
                trial,
                seed,
                mutations: muts.iter().map(|m| m.describe(&base_specs)).collect(),
                minimized: minimized.iter().map(|m| m.describe(&base_specs)).collect(),
                divergence: divergence.to_string(),
            });
            break;
        }
    }
    Ok(report)
}
