use super::node::{NodeState, Pick, Semantics, Source, SysStep};
use super::trace::{Direction, LogRecord, TraceEvent};
use super::SimError;
use crate::frontend::{Program, StrategyScript};
use crate::interp::{LocalOutput, OutEvent, Store};
use crate::typing::{check_system, ChannelEnv};
use crate::value::SizedValue;

/// How nodes take turns.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Scheduler {
    /// Nodes in declaration order, one message each per round; a handler
    /// runs to completion within its node's turn.
    #[default]
    RoundRobin,
    /// Genuine messages anywhere in the system are handled before any
    /// dummy. The genuine schedule then does not depend on which dummies
    /// exist, which makes safe and suppressing runs line up. It reads mode
    /// bits, so it is only for overhead measurements, never for
    /// noninterference runs.
    GenuinePaced,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub semantics: Semantics,
    pub scheduler: Scheduler,
    /// Maximum number of system steps; checked between handler runs.
    pub budget: u64,
    pub monitor: bool,
    /// Maximum command steps per handler run.
    pub watchdog: u64,
    pub check_types: bool,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            semantics: Semantics::Safe,
            scheduler: Scheduler::RoundRobin,
            budget: 1_000_000,
            monitor: false,
            watchdog: 1_000_000,
            check_types: true,
        }
    }
}

/// One node's program, script and optional initial store.
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub program: Program,
    pub script: StrategyScript,
    pub store: Option<Store>,
}

impl NodeSpec {
    pub fn new(program: Program, script: StrategyScript) -> NodeSpec {
        NodeSpec {
            program,
            script,
            store: None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Nothing left to consume anywhere.
    Quiescent,
    /// At least one node is stuck on a dummy it may not consume.
    Blocked,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct NodeReport {
    pub node: String,
    pub trace: Vec<TraceEvent>,
    pub store: Store,
    pub outputs: Vec<LocalOutput>,
    pub history_time: u64,
    pub history_len: usize,
    pub handlers_run: u64,
    pub clock_violations: u64,
    pub blocked: bool,
    /// Scripted network messages never consumed.
    pub unconsumed: usize,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub nodes: Vec<NodeReport>,
    pub log: Vec<LogRecord>,
    pub outcome: Outcome,
    pub steps: u64,
    pub monitor_violations: Vec<String>,
    /// Inter-node deliveries that broke strategy well-formedness.
    pub wf_violations: Vec<String>,
    pub lambda: ChannelEnv,
}

impl SimResult {
    pub fn node(&self, name: &str) -> Option<&NodeReport> {
        self.nodes.iter().find(|n| n.node == name)
    }

    pub fn clock_violations(&self) -> u64 {
        self.nodes.iter().map(|n| n.clock_violations).sum()
    }
}

fn record(log: &mut Vec<LogRecord>, node: &str, dir: Direction, ev: &TraceEvent) {
    log.push(LogRecord {
        node: node.to_string(),
        dir: dir.log_name(),
        ch: ev.ch.to_string(),
        t: ev.t,
        bit: ev.bit,
        value: ev.value.clone(),
    });
}

struct World {
    nodes: Vec<NodeState>,
    log: Vec<LogRecord>,
    steps: u64,
    config: SimConfig,
}

impl World {
    /// Sends are queued at the recipient and observed by every third node.
    fn route(&mut self, from: usize, ev: &OutEvent) {
        let target = self.nodes.iter().position(|n| n.node() == ev.ch.node);
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if Some(i) == target {
                n.inbox.push_back(super::node::Delivery {
                    ch: ev.ch.clone(),
                    t: ev.t,
                    bit: ev.bit,
                    value: ev.value.clone(),
                });
            } else if i != from {
                n.observe(&ev.ch, ev.t, ev.bit, &ev.value);
                let obs = n.trace.last().expect("just observed").clone();
                let name = n.node().to_string();
                record(&mut self.log, &name, Direction::Observed, &obs);
            }
        }
    }

    /// A message arriving from outside the system is visible to everyone.
    fn broadcast_external(&mut self, at: usize, ch: &crate::frontend::ChannelRef, t: u64, bit: bool, value: &SizedValue) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if i != at {
                n.observe(ch, t, bit, value);
                let obs = n.trace.last().expect("just observed").clone();
                let name = n.node().to_string();
                record(&mut self.log, &name, Direction::Observed, &obs);
            }
        }
    }

    /// Consumes one message at node `i` and runs any handler to completion.
    fn turn(&mut self, i: usize, pick: Pick) -> Result<SysStep, SimError> {
        let semantics = self.config.semantics;
        let (monitor, watchdog) = (self.config.monitor, self.config.watchdog);
        let outputs_before = self.nodes[i].outputs.len();
        let first = self.nodes[i].step(semantics, pick, monitor, watchdog)?;
        match &first {
            SysStep::Idle | SysStep::Blocked => return Ok(first),
            SysStep::Observed => {
                self.steps += 1;
                let ev = self.nodes[i].trace.last().expect("observed").clone();
                let name = self.nodes[i].node().to_string();
                record(&mut self.log, &name, Direction::Observed, &ev);
                return Ok(first);
            }
            SysStep::Entered {
                source,
                ch,
                t,
                bit,
                value,
            } => {
                self.steps += 1;
                let ev = self.nodes[i].trace.last().expect("received").clone();
                let name = self.nodes[i].node().to_string();
                record(&mut self.log, &name, Direction::Received, &ev);
                if *source == Source::Script {
                    self.broadcast_external(i, ch, *t, *bit, value);
                }
            }
            _ => unreachable!("consumer step"),
        }
        loop {
            let s = self.nodes[i].step(semantics, pick, monitor, watchdog)?;
            self.steps += 1;
            match s {
                SysStep::Produced(Some(ev)) => {
                    let te = self.nodes[i].trace.last().expect("sent").clone();
                    let name = self.nodes[i].node().to_string();
                    record(&mut self.log, &name, Direction::Sent, &te);
                    self.route(i, &ev);
                }
                SysStep::Produced(None) => {}
                SysStep::Returned => break,
                other => unreachable!("producer step returned {other:?}"),
            }
        }
        let name = self.nodes[i].node().to_string();
        for o in &self.nodes[i].outputs[outputs_before..] {
            self.log.push(LogRecord {
                node: name.clone(),
                dir: "local",
                ch: o.ch.clone(),
                t: o.t,
                bit: true,
                value: o.value.clone(),
            });
        }
        Ok(first)
    }

    fn run(&mut self) -> Result<Outcome, SimError> {
        let n = self.nodes.len();
        match self.config.scheduler {
            Scheduler::RoundRobin => loop {
                let mut progressed = false;
                let mut blocked = false;
                for i in 0..n {
                    if self.steps >= self.config.budget {
                        return Ok(Outcome::BudgetExhausted);
                    }
                    match self.turn(i, Pick::InOrder)? {
                        SysStep::Idle => {}
                        SysStep::Blocked => blocked = true,
                        _ => progressed = true,
                    }
                }
                if !progressed {
                    return Ok(if blocked { Outcome::Blocked } else { Outcome::Quiescent });
                }
            },
            Scheduler::GenuinePaced => {
                let mut next = 0;
                loop {
                    if self.steps >= self.config.budget {
                        return Ok(Outcome::BudgetExhausted);
                    }
                    let genuine = (0..n).map(|k| (next + k) % n.max(1)).find(|&i| self.nodes[i].has_work(Pick::GenuineOnly));
                    if let Some(i) = genuine {
                        self.turn(i, Pick::GenuineOnly)?;
                        next = (i + 1) % n;
                        continue;
                    }
                    let mut progressed = false;
                    let mut blocked = false;
                    for i in 0..n {
                        match self.turn(i, Pick::InOrder)? {
                            SysStep::Idle => {}
                            SysStep::Blocked => blocked = true,
                            _ => {
                                progressed = true;
                                break;
                            }
                        }
                    }
                    if !progressed {
                        return Ok(if blocked { Outcome::Blocked } else { Outcome::Quiescent });
                    }
                }
            }
        }
    }
}

/// Runs a closed system of nodes until nothing is left to consume or the
/// step budget is spent. The result is a pure function of the inputs.
pub fn run_simulation(specs: &[NodeSpec], config: &SimConfig) -> Result<SimResult, SimError> {
    let programs: Vec<Program> = specs.iter().map(|s| s.program.clone()).collect();
    let lambda = if config.check_types {
        check_system(&programs)?
    } else {
        ChannelEnv::build(&programs).map_err(crate::typing::SystemError::from)?
    };
    let mut nodes = Vec::with_capacity(specs.len());
    for s in specs {
        nodes.push(NodeState::new(s.program.clone(), &s.script, s.store.clone(), &lambda)?);
    }
    let mut world = World {
        nodes,
        log: Vec::new(),
        steps: 0,
        config: config.clone(),
    };
    let outcome = world.run()?;
    let mut monitor_violations = Vec::new();
    let mut wf_violations = Vec::new();
    let reports = world
        .nodes
        .into_iter()
        .map(|n| {
            monitor_violations.extend(n.monitor_violations.iter().cloned());
            wf_violations.extend(n.wf_violations.iter().map(|v| format!("{}: {v}", n.node())));
            let blocked = config.semantics == Semantics::Unsafe && n.pending_script().next().is_some_and(|m| !m.bit);
            NodeReport {
                node: n.node().to_string(),
                unconsumed: n.pending_script().count(),
                clock_violations: n.clock_violations(),
                history_time: n.history.time(),
                history_len: n.history.len(),
                trace: n.trace,
                store: n.store,
                outputs: n.outputs,
                handlers_run: n.handlers_run,
                blocked,
            }
        })
        .collect();
    Ok(SimResult {
        nodes: reports,
        log: world.log,
        outcome,
        steps: world.steps,
        monitor_violations,
        wf_violations,
        lambda,
    })
}
