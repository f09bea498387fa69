//! Dummy traffic overhead.
//!
//! A genuine-only strategy runs under the suppressing semantics, an
//! extension of it with injected dummies under the safe semantics. The safe
//! trace of every node must be a phantom extension of the suppressed one and
//! at most `1 + q_max` times longer.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde_json::{json, Value as Json};
use thiserror::Error;

use super::equiv::{length_bound_holds, phantom_extension_check};
use crate::frontend::{ChannelRef, NetMessage, StrategyScript};
use crate::netsim::{run_simulation, Direction, NodeSpec, Scheduler, Semantics, SimConfig, SimError, TraceEvent};
use crate::typing::ChannelEnv;
use crate::value::{BaseType, BaseValue, SizedValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverheadError {
    #[error("node lists differ: {0}")]
    NodeMismatch(String),
    #[error("{node}: {detail}")]
    NotAnExtension { node: String, detail: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Checks that `w2` extends the genuine-only `w1`: same local inputs, and
/// its genuine messages are those of `w1` in order, values possibly padded.
pub fn check_script_extension(w1: &StrategyScript, w2: &StrategyScript) -> Result<(), String> {
    if !w1.is_genuine_only() {
        return Err("base script contains dummy messages".into());
    }
    if w1.local != w2.local {
        return Err("local input streams differ".into());
    }
    let genuine: Vec<&NetMessage> = w2.net.iter().filter(|m| m.bit).collect();
    if genuine.len() != w1.net.len() {
        return Err(format!("{} genuine messages vs {}", genuine.len(), w1.net.len()));
    }
    for (i, (a, b)) in w1.net.iter().zip(genuine).enumerate() {
        if a.ch != b.ch || a.immediate != b.immediate || !a.value.extended_by(&b.value) {
            return Err(format!("genuine message {i} does not extend {}", a.ch));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeOverhead {
    pub node: String,
    pub unsafe_len: usize,
    pub safe_len: usize,
    pub extension: bool,
    pub bound: bool,
    pub genuine_match: bool,
}

impl NodeOverhead {
    pub fn ratio(&self) -> f64 {
        if self.unsafe_len == 0 {
            if self.safe_len == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.safe_len as f64 / self.unsafe_len as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.extension && self.bound && self.genuine_match
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    pub q_max: u64,
    pub nodes: Vec<NodeOverhead>,
    /// Dummy messages in the extended scripts.
    pub injected: usize,
}

impl OverheadReport {
    pub fn passed(&self) -> bool {
        self.nodes.iter().all(NodeOverhead::passed)
    }

    pub fn max_ratio(&self) -> f64 {
        self.nodes.iter().map(NodeOverhead::ratio).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Json {
        json!({
            "q_max": self.q_max,
            "bound": 1 + self.q_max,
            "injected": self.injected,
            "passed": self.passed(),
            "max_ratio": self.max_ratio(),
            "nodes": self.nodes.iter().map(|n| json!({
                "node": n.node,
                "unsafe_len": n.unsafe_len,
                "safe_len": n.safe_len,
                "ratio": n.ratio(),
                "extension": n.extension,
                "bound": n.bound,
                "genuine_match": n.genuine_match,
            })).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "overhead bound 1 + q_max = {} ({} injected dummies)", 1 + self.q_max, self.injected)?;
        for n in &self.nodes {
            writeln!(
                f,
                "  {:<16} unsafe {:>5}  safe {:>5}  ratio {:>6.3}  extension {}  bound {}  genuine {}",
                n.node,
                n.unsafe_len,
                n.safe_len,
                n.ratio(),
                ok(n.extension),
                ok(n.bound),
                ok(n.genuine_match)
            )?;
        }
        writeln!(
            f,
            "result: {} (max ratio {:.3})",
            if self.passed() { "pass" } else { "FAIL" },
            self.max_ratio()
        )
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

type GenuineKey = (Direction, String, String);

fn genuine_multiset(t: &[TraceEvent]) -> BTreeMap<GenuineKey, usize> {
    let mut m = BTreeMap::new();
    for e in t.iter().filter(|e| e.bit) {
        *m.entry((e.dir, e.ch.to_string(), e.value.base().to_string())).or_default() += 1;
    }
    m
}

/// Compares per-node traces of the two runs.
pub fn compare_runs(q_max: u64, names: &[String], t1: &[Vec<TraceEvent>], t2: &[Vec<TraceEvent>]) -> Vec<NodeOverhead> {
    names
        .iter()
        .zip(t1.iter().zip(t2))
        .map(|(node, (a, b))| NodeOverhead {
            node: node.clone(),
            unsafe_len: a.len(),
            safe_len: b.len(),
            extension: phantom_extension_check(a, b),
            bound: length_bound_holds(a.len(), b.len(), q_max),
            genuine_match: genuine_multiset(a) == genuine_multiset(b),
        })
        .collect()
}

fn paced(semantics: Semantics, budget: u64) -> SimConfig {
    SimConfig {
        semantics,
        scheduler: Scheduler::GenuinePaced,
        budget,
        ..SimConfig::default()
    }
}

/// Runs `specs1` (genuine-only scripts) suppressed and `specs2` (their
/// extensions) safely, and checks both halves of the overhead bound.
pub fn overhead_check(specs1: &[NodeSpec], specs2: &[NodeSpec], budget: u64) -> Result<OverheadReport, OverheadError> {
    if specs1.len() != specs2.len() || specs1.iter().zip(specs2).any(|(a, b)| a.program != b.program) {
        return Err(OverheadError::NodeMismatch("both runs need the same programs in the same order".into()));
    }
    for (a, b) in specs1.iter().zip(specs2) {
        check_script_extension(&a.script, &b.script).map_err(|detail| OverheadError::NotAnExtension {
            node: a.program.node.clone(),
            detail,
        })?;
        if a.store != b.store {
            return Err(OverheadError::NotAnExtension {
                node: a.program.node.clone(),
                detail: "initial stores differ".into(),
            });
        }
    }
    let r1 = run_simulation(specs1, &paced(Semantics::Unsafe, budget))?;
    let r2 = run_simulation(specs2, &paced(Semantics::Safe, budget))?;
    let q_max = r2.lambda.max_potential();
    let names: Vec<String> = r1.nodes.iter().map(|n| n.node.clone()).collect();
    let t1: Vec<_> = r1.nodes.into_iter().map(|n| n.trace).collect();
    let t2: Vec<_> = r2.nodes.into_iter().map(|n| n.trace).collect();
    Ok(OverheadReport {
        q_max,
        nodes: compare_runs(q_max, &names, &t1, &t2),
        injected: specs2.iter().map(|s| s.script.net.iter().filter(|m| !m.bit).count()).sum(),
    })
}

/// Inserts up to `max_per_node` dummies at random points of each script, on
/// the node's channels with a secret mode. A dummy repeats the size of a
/// genuine message on the same channel when the script has one.
pub fn inject_dummies(specs: &[NodeSpec], lambda: &ChannelEnv, max_per_node: usize, rng: &mut impl Rng) -> Vec<NodeSpec> {
    specs
        .iter()
        .map(|s| {
            let channels: Vec<(ChannelRef, SizedValue)> = s
                .program
                .handlers
                .iter()
                .filter_map(|h| {
                    let ch = s.program.channel(h);
                    let t = lambda.get(&ch)?;
                    if lambda.lattice.is_bottom(t.mode) {
                        return None;
                    }
                    let filler = match s.script.net.iter().find(|m| m.ch == ch) {
                        Some(m) => match m.value.base() {
                            BaseValue::Int(_) => SizedValue::int(0),
                            BaseValue::Str(_) => SizedValue::string("").pad(m.value.size()).expect("empty fits"),
                        },
                        None => match t.ty {
                            BaseType::Int => SizedValue::int(0),
                            BaseType::Str => SizedValue::string(""),
                        },
                    };
                    Some((ch, filler))
                })
                .collect();
            let mut out = s.clone();
            if channels.is_empty() || max_per_node == 0 {
                return out;
            }
            for _ in 0..rng.gen_range(0..=max_per_node) {
                let (ch, v) = &channels[rng.gen_range(0..channels.len())];
                let at = rng.gen_range(0..=out.script.net.len());
                let immediate = rng.gen_bool(0.5);
                out.script.net.insert(
                    at,
                    NetMessage {
                        immediate,
                        ..NetMessage::dummy(ch.clone(), v.clone())
                    },
                );
            }
            out
        })
        .collect()
}

/// An extension of `specs` with injected dummies that the safe run accepts.
/// A draw that breaks strategy well-formedness is rejected and redrawn with
/// fewer dummies; once that reaches zero the scripts come back unchanged,
/// which is the trivial extension.
pub fn random_extension(specs: &[NodeSpec], max_per_node: usize, budget: u64, rng: &mut impl Rng) -> Result<Vec<NodeSpec>, SimError> {
    let programs: Vec<_> = specs.iter().map(|s| s.program.clone()).collect();
    let lambda = ChannelEnv::build(&programs).map_err(crate::typing::SystemError::from)?;
    let mut max = max_per_node;
    let mut tries = 0;
    while max > 0 {
        let cand = inject_dummies(specs, &lambda, max, rng);
        match run_simulation(&cand, &paced(Semantics::Safe, budget)) {
            Ok(_) => return Ok(cand),
            Err(SimError::Ingestion { .. }) => {
                tries += 1;
                if tries % 8 == 0 {
                    max -= 1;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(specs.to_vec())
}
