//! Example programs and their scripted inputs, bundled into the crate.
//!
//! The same files live under `corpus/` for use with the command line tool.

use crate::frontend::{parse_program, parse_strategy, Program, StrategyScript};
use crate::netsim::NodeSpec;

/// A bundled source file, by its path relative to `corpus/`.
#[derive(Copy, Clone, Debug)]
pub struct CorpusFile {
    pub path: &'static str,
    pub text: &'static str,
}

macro_rules! corpus_files {
    ($($path:literal),* $(,)?) => {
        &[$(CorpusFile { path: $path, text: include_str!(concat!("../corpus/", $path)) }),*]
    };
}

pub const FILES: &[CorpusFile] = corpus_files![
    "auction/alice.oblivio",
    "auction/bob.oblivio",
    "auction/timer.oblivio",
    "auction/house.oblivio",
    "auction/house.json",
    "pingpong/ping.oblivio",
    "pingpong/pong.oblivio",
    "chat/alice.oblivio",
    "chat/bob.oblivio",
    "chat/alice.json",
    "chat/bob.json",
    "ring/alice.oblivio",
    "ring/bob.oblivio",
    "ring/carol.oblivio",
    "ring/alice.json",
    "ring/carol.json",
    "relay/gate.oblivio",
    "relay/relay.oblivio",
    "relay/sink.oblivio",
    "relay/gate.json",
    "bank/bank.oblivio",
    "bank/client.oblivio",
    "bank/bank.json",
];

/// Text of a bundled file. Panics on an unknown path.
pub fn file(path: &str) -> &'static str {
    FILES
        .iter()
        .find(|f| f.path == path)
        .unwrap_or_else(|| panic!("no corpus file {path}"))
        .text
}

pub fn program(path: &str) -> Program {
    parse_program(file(path)).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn script(path: Option<&str>) -> StrategyScript {
    path.map(|p| parse_strategy(file(p)).unwrap_or_else(|e| panic!("{p}: {e}")))
        .unwrap_or_default()
}

/// A closed system ready to simulate.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub nodes: Vec<NodeSpec>,
    /// Whether the programs are meant to pass the type checker.
    pub well_typed: bool,
    /// Step budget; systems that never go quiet stop here.
    pub budget: u64,
}

impl Scenario {
    fn build(name: &'static str, well_typed: bool, budget: u64, nodes: &[(&str, Option<&str>)]) -> Scenario {
        Scenario {
            name,
            nodes: nodes.iter().map(|(p, s)| NodeSpec::new(program(p), script(*s))).collect(),
            well_typed,
            budget,
        }
    }

    pub fn programs(&self) -> Vec<Program> {
        self.nodes.iter().map(|n| n.program.clone()).collect()
    }
}

/// Two bidders, the auction house and its round timer. The house script
/// holds the tick that opens the first round.
pub fn auction() -> Scenario {
    Scenario::build(
        "auction",
        true,
        1_000_000,
        &[
            ("auction/alice.oblivio", None),
            ("auction/bob.oblivio", None),
            ("auction/timer.oblivio", None),
            ("auction/house.oblivio", Some("auction/house.json")),
        ],
    )
}

/// Two users passing a chat message back and forth forever.
pub fn chat() -> Scenario {
    Scenario::build(
        "chat",
        true,
        4_000,
        &[
            ("chat/alice.oblivio", Some("chat/alice.json")),
            ("chat/bob.oblivio", Some("chat/bob.json")),
        ],
    )
}

/// Three users forwarding one message slot around a ring.
pub fn ring() -> Scenario {
    Scenario::build(
        "ring",
        true,
        6_000,
        &[
            ("ring/alice.oblivio", Some("ring/alice.json")),
            ("ring/bob.oblivio", None),
            ("ring/carol.oblivio", Some("ring/carol.json")),
        ],
    )
}

/// A gate, a relay and a sink whose potentials chain: 2, 1, 0.
pub fn relay() -> Scenario {
    Scenario::build(
        "relay",
        true,
        1_000_000,
        &[
            ("relay/gate.oblivio", Some("relay/gate.json")),
            ("relay/relay.oblivio", None),
            ("relay/sink.oblivio", None),
        ],
    )
}

/// A transfer handler that branches on the balance in the open. Ill-typed.
pub fn leaky_bank() -> Scenario {
    Scenario::build(
        "bank",
        false,
        1_000_000,
        &[("bank/bank.oblivio", Some("bank/bank.json")), ("bank/client.oblivio", None)],
    )
}

/// Every well-typed scenario.
pub fn scenarios() -> Vec<Scenario> {
    vec![auction(), chat(), ring(), relay()]
}

/// The PING/PONG pair with the given potential annotations.
pub fn ping_pong(ping: u64, pong: u64) -> Vec<Program> {
    let ping_src = file("pingpong/ping.oblivio").replace("$0", &format!("${ping}"));
    let pong_src = file("pingpong/pong.oblivio").replace("$0", &format!("${pong}"));
    vec![
        parse_program(&ping_src).expect("ping parses"),
        parse_program(&pong_src).expect("pong parses"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typing::check_system;

    #[test]
    fn every_file_parses() {
        for f in FILES {
            if f.path.ends_with(".json") {
                parse_strategy(f.text).unwrap_or_else(|e| panic!("{}: {e}", f.path));
            } else {
                parse_program(f.text).unwrap_or_else(|e| panic!("{}: {e}", f.path));
            }
        }
    }

    #[test]
    fn well_typed_scenarios_check() {
        for s in scenarios() {
            if let Err(e) = check_system(&s.programs()) {
                panic!("{}: {e:?}", s.name);
            }
        }
        assert!(check_system(&leaky_bank().programs()).is_err());
    }
}
