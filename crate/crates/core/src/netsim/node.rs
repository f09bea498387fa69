use std::collections::VecDeque;

use super::trace::{Direction, TraceEvent};
use super::SimError;
use crate::frontend::{ChannelRef, Handler, NetMessage, Program, StrategyScript};
use crate::harness::wf_strategy_online;
use crate::interp::{step_command, CmdConfig, History, LocalEnv, LocalOutput, Monitor, OutEvent, Store, Trigger};
use crate::typing::{ChannelEnv, TypeEnvs, VarType};
use crate::value::SizedValue;

/// First handler of `p` bound to `ch`.
pub fn handler_lookup<'p>(p: &'p Program, ch: &ChannelRef) -> Option<&'p Handler> {
    if ch.node != p.node {
        return None;
    }
    p.handlers.iter().find(|h| h.name == ch.name)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Semantics {
    Safe,
    /// Suppresses dummy traffic: only genuine messages are consumed and
    /// phantom-mode sends are dropped.
    Unsafe,
}

/// Where a consumed message came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Script,
    Delivered,
}

/// A message waiting in a node's inbox, sent by another node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub ch: ChannelRef,
    pub t: u64,
    pub bit: bool,
    pub value: SizedValue,
}

/// Which pending messages a consumer step may take.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Pick {
    /// Script head if immediate, else inbox head, else script head.
    InOrder,
    /// As `InOrder`, but looking only at genuine messages.
    GenuineOnly,
}

/// What one system step did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SysStep {
    /// No message available (the strategy is exhausted for now).
    Idle,
    /// The next message is a dummy, which the suppressing semantics cannot
    /// consume.
    Blocked,
    /// A message with no handler here was recorded as observed.
    Observed,
    /// A handler was entered; `source` says where the message came from.
    Entered { source: Source, ch: ChannelRef, t: u64, bit: bool, value: SizedValue },
    /// One command step; carries the emission that must be routed, if any.
    Produced(Option<OutEvent>),
    /// The handler finished.
    Returned,
}

#[derive(Clone, Debug)]
enum Phase {
    Consumer,
    Producer {
        cfg: Box<CmdConfig>,
        monitor: Option<Monitor>,
        steps: u64,
    },
}

/// One node: its program, persistent state, pending input and trace.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub program: Program,
    pub store: Store,
    pub local: LocalEnv,
    pub history: History,
    pub trace: Vec<TraceEvent>,
    pub outputs: Vec<LocalOutput>,
    pub inbox: VecDeque<Delivery>,
    script: VecDeque<NetMessage>,
    phase: Phase,
    envs: TypeEnvs,
    pub handlers_run: u64,
    pub monitor_violations: Vec<String>,
    pub wf_violations: Vec<String>,
}

impl NodeState {
    /// Builds a consumer state. `store` defaults to the declared initial
    /// values at their natural sizes; local streams must name declared local
    /// channels and carry values of the declared sort.
    pub fn new(program: Program, script: &StrategyScript, store: Option<Store>, lambda: &ChannelEnv) -> Result<NodeState, SimError> {
        let store = store.unwrap_or_else(|| initial_store(&program));
        for (x, v) in &store {
            match program.global(x) {
                Some(g) if g.ty == v.base_type() => {}
                _ => {
                    return Err(SimError::Setup {
                        node: program.node.clone(),
                        detail: format!("store entry `{x}` does not match a declared variable"),
                    })
                }
            }
        }
        let mut local = LocalEnv::new();
        for l in &program.locals {
            local.insert(l.name.clone(), VecDeque::new());
        }
        for (name, stream) in &script.local {
            let decl = program.local(name).ok_or_else(|| SimError::Setup {
                node: program.node.clone(),
                detail: format!("script feeds undeclared local channel `{name}`"),
            })?;
            if stream.iter().flatten().any(|v| v.base_type() != decl.ty) {
                return Err(SimError::Setup {
                    node: program.node.clone(),
                    detail: format!("local channel `{name}` carries {} values", decl.ty),
                });
            }
            local.insert(name.clone(), stream.iter().cloned().collect());
        }
        let envs = TypeEnvs::for_program(&program, lambda);
        Ok(NodeState {
            program,
            store,
            local,
            history: History::default(),
            trace: Vec::new(),
            outputs: Vec::new(),
            inbox: VecDeque::new(),
            script: script.net.iter().cloned().collect(),
            phase: Phase::Consumer,
            envs,
            handlers_run: 0,
            monitor_violations: Vec::new(),
            wf_violations: Vec::new(),
        })
    }

    pub fn node(&self) -> &str {
        &self.program.node
    }

    pub fn is_consumer(&self) -> bool {
        matches!(self.phase, Phase::Consumer)
    }

    /// Remaining scripted network messages.
    pub fn pending_script(&self) -> impl Iterator<Item = &NetMessage> {
        self.script.iter()
    }

    /// Records a message between two other nodes.
    pub fn observe(&mut self, ch: &ChannelRef, t: u64, bit: bool, value: &SizedValue) {
        self.trace.push(TraceEvent {
            dir: Direction::Observed,
            ch: ch.clone(),
            t,
            bit,
            value: value.clone(),
        });
    }

    fn candidate(&self, pick: Pick) -> Option<(Source, usize)> {
        let ok = |bit: bool| pick == Pick::InOrder || bit;
        let s = self.script.iter().position(|m| ok(m.bit));
        let d = self.inbox.iter().position(|m| ok(m.bit));
        match (s, d) {
            (Some(i), _) if self.script[i].immediate => Some((Source::Script, i)),
            (_, Some(j)) => Some((Source::Delivered, j)),
            (Some(i), None) => Some((Source::Script, i)),
            (None, None) => None,
        }
    }

    /// True when a step with `pick` would consume something.
    pub fn has_work(&self, pick: Pick) -> bool {
        !self.is_consumer() || self.candidate(pick).is_some()
    }

    /// One transition of the consumer/producer machine.
    pub fn step(&mut self, semantics: Semantics, pick: Pick, monitor: bool, watchdog: u64) -> Result<SysStep, SimError> {
        if let Phase::Producer { .. } = self.phase {
            return self.produce(semantics, watchdog);
        }
        let Some((source, idx)) = self.candidate(pick) else {
            return Ok(SysStep::Idle);
        };
        let (ch, t, bit, value) = match source {
            Source::Script => {
                let m = &self.script[idx];
                (m.ch.clone(), self.history.time(), m.bit, m.value.clone())
            }
            Source::Delivered => {
                let d = &self.inbox[idx];
                (d.ch.clone(), d.t, d.bit, d.value.clone())
            }
        };
        if semantics == Semantics::Unsafe && !bit {
            return Ok(SysStep::Blocked);
        }
        if let Err(v) = wf_strategy_online(&self.envs.lambda, &self.trace, &ch, bit, &value) {
            let detail = format!("message on {ch}: {v}");
            if source == Source::Script {
                return Err(SimError::Ingestion {
                    node: self.node().to_string(),
                    detail,
                });
            }
            self.wf_violations.push(detail);
        }
        match source {
            Source::Script => {
                self.script.remove(idx);
            }
            Source::Delivered => {
                self.inbox.remove(idx);
            }
        }
        let Some(h) = handler_lookup(&self.program, &ch) else {
            self.observe(&ch, t, bit, &value);
            return Ok(SysStep::Observed);
        };
        let (body, param, mode) = (h.body.clone(), h.param.clone(), h.mode);
        let param_ty = VarType {
            ty: h.param_ty,
            level: h.param_level,
        };
        self.trace.push(TraceEvent {
            dir: Direction::Received,
            ch: ch.clone(),
            t,
            bit,
            value: value.clone(),
        });
        let trigger = Trigger {
            ch: ch.clone(),
            t,
            bit,
            value: value.clone(),
        };
        let cfg = CmdConfig::enter(
            &trigger,
            &body,
            &param,
            std::mem::take(&mut self.store),
            std::mem::take(&mut self.local),
            std::mem::take(&mut self.history),
        );
        let monitor = monitor.then(|| Monitor::new(self.envs.with_param(&param, param_ty), mode));
        self.phase = Phase::Producer {
            cfg: Box::new(cfg),
            monitor,
            steps: 0,
        };
        self.handlers_run += 1;
        Ok(SysStep::Entered {
            source,
            ch,
            t,
            bit,
            value,
        })
    }

    fn produce(&mut self, semantics: Semantics, watchdog: u64) -> Result<SysStep, SimError> {
        let Phase::Producer { cfg, monitor, steps } = &mut self.phase else {
            unreachable!("produce called in consumer phase")
        };
        if matches!(cfg.cmd, crate::frontend::Command::Stop) {
            let Phase::Producer { cfg, monitor, .. } = std::mem::replace(&mut self.phase, Phase::Consumer) else {
                unreachable!()
            };
            let (store, local, history, outputs, _) = cfg.exit();
            self.store = store;
            self.local = local;
            self.history = history;
            self.outputs.extend(outputs);
            if let Some(m) = monitor {
                let node = self.program.node.clone();
                self.monitor_violations
                    .extend(m.into_violations().into_iter().map(|v| format!("{node}: step {}: {}", v.step, v.detail)));
            }
            return Ok(SysStep::Returned);
        }
        if *steps >= watchdog {
            return Err(SimError::Interp {
                node: self.program.node.clone(),
                error: crate::interp::InterpError::Watchdog(watchdog),
            });
        }
        *steps += 1;
        let out = step_command(cfg, monitor.as_mut()).map_err(|error| SimError::Interp {
            node: self.program.node.clone(),
            error,
        })?;
        let out = match out {
            Some(ev) if semantics == Semantics::Unsafe && !ev.bit => None,
            Some(ev) => {
                self.trace.push(TraceEvent {
                    dir: Direction::Sent,
                    ch: ev.ch.clone(),
                    t: ev.t,
                    bit: ev.bit,
                    value: ev.value.clone(),
                });
                Some(ev)
            }
            None => None,
        };
        Ok(SysStep::Produced(out))
    }

    /// Clock regressions seen by this node's history.
    pub fn clock_violations(&self) -> u64 {
        match &self.phase {
            Phase::Consumer => self.history.clock_violations(),
            Phase::Producer { cfg, .. } => cfg.history.clock_violations(),
        }
    }
}

/// Declared initial values at their natural sizes.
pub fn initial_store(p: &Program) -> Store {
    p.globals
        .iter()
        .map(|g| (g.name.clone(), SizedValue::from_base(&g.initial())))
        .collect()
}
