use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use super::history::{HistEvent, History};
use super::monitor::Monitor;
use crate::ct::CtCounters;
use crate::frontend::{ChannelRef, Command, Expr, Span};
use crate::value::{apply_binop, safe_select, SizedValue, ValueError};

pub type Store = BTreeMap<String, SizedValue>;

/// Per local channel, the remaining stream of optional values (`None` is
/// the "nothing available" marker).
pub type LocalEnv = BTreeMap<String, VecDeque<Option<SizedValue>>>;

/// Largest size an `input` may request; guards against runaway padding.
pub const MAX_INPUT_SIZE: i64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("{span}: stuck: {what} in phantom mode (after {history_len} history events)")]
    Stuck {
        what: &'static str,
        span: Span,
        history_len: usize,
    },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown local channel `{0}`")]
    UnknownLocal(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("input size {0} exceeds the limit")]
    InputTooLarge(i64),
    #[error("execution-mode stack underflow")]
    EmptyBitStack,
    #[error("handler exceeded {0} steps")]
    Watchdog(u64),
    #[error("cannot step a finished command")]
    Finished,
}

/// A network emission `ch→(t, b, ⟨v|z⟩)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutEvent {
    pub ch: ChannelRef,
    pub t: u64,
    pub bit: bool,
    pub value: SizedValue,
}

/// A value written to a local output channel in real mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalOutput {
    pub ch: String,
    pub t: u64,
    pub value: SizedValue,
}

/// A running handler: execution-mode bits (top is last), the remaining
/// command, the read-only parameter binding, and the node's mutable parts.
#[derive(Clone, Debug)]
pub struct CmdConfig {
    pub bits: Vec<bool>,
    pub cmd: Command,
    pub mem: (String, SizedValue),
    pub store: Store,
    pub local: LocalEnv,
    pub history: History,
    pub outputs: Vec<LocalOutput>,
    pub counters: CtCounters,
}

pub fn eval(e: &Expr, mem: &(String, SizedValue), store: &Store, counters: &mut CtCounters) -> Result<SizedValue, InterpError> {
    match e {
        Expr::Int(n) => Ok(SizedValue::int(*n)),
        Expr::Str(s) => Ok(SizedValue::string(s)),
        Expr::Var(x) if *x == mem.0 => Ok(mem.1.clone()),
        Expr::Var(x) => store.get(x).cloned().ok_or_else(|| InterpError::Unbound(x.clone())),
        Expr::Bin(op, l, r) => {
            let a = eval(l, mem, store, counters)?;
            let b = eval(r, mem, store, counters)?;
            Ok(apply_binop(*op, &a, &b, counters)?)
        }
    }
}

/// Performs one small step. Returns the emission, if the step was a send.
pub fn step_command(cfg: &mut CmdConfig, mut monitor: Option<&mut Monitor>) -> Result<Option<OutEvent>, InterpError> {
    if matches!(cfg.cmd, Command::Stop) {
        return Err(InterpError::Finished);
    }
    let cmd = std::mem::replace(&mut cfg.cmd, Command::Stop);
    let (next, out) = step(cmd, cfg, monitor.as_deref_mut())?;
    cfg.cmd = next;
    if let Some(m) = monitor {
        if let Some(o) = &out {
            m.on_send(&o.ch, o.bit);
        }
        m.check(&cfg.bits);
    }
    Ok(out)
}

fn top(bits: &[bool]) -> Result<bool, InterpError> {
    bits.last().copied().ok_or(InterpError::EmptyBitStack)
}

fn stuck(what: &'static str, span: Span, cfg: &CmdConfig, monitor: Option<&mut Monitor>) -> InterpError {
    if let Some(m) = monitor {
        m.on_phantom_low(what);
    }
    InterpError::Stuck {
        what,
        span,
        history_len: cfg.history.len(),
    }
}

fn step(cmd: Command, cfg: &mut CmdConfig, monitor: Option<&mut Monitor>) -> Result<(Command, Option<OutEvent>), InterpError> {
    match cmd {
        Command::Skip(_) => {
            cfg.history.push(HistEvent::Skp);
            Ok((Command::Stop, None))
        }
        Command::Seq(c1, c2) => {
            let (c1, out) = step(*c1, cfg, monitor)?;
            let next = match c1 {
                Command::Stop => *c2,
                c1 => Command::Seq(Box::new(c1), c2),
            };
            Ok((next, out))
        }
        Command::Assign { var, expr, span } => {
            if !top(&cfg.bits)? {
                return Err(stuck("assignment", span, cfg, monitor));
            }
            let v = eval(&expr, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            let size = v.size();
            cfg.store.insert(var.clone(), v);
            cfg.history.push(HistEvent::Asn { var, size });
            Ok((Command::Stop, None))
        }
        Command::OblivAssign { var, expr, .. } => {
            let b = top(&cfg.bits)?;
            let old = cfg.store.get(&var).cloned().ok_or_else(|| InterpError::Unbound(var.clone()))?;
            let new = eval(&expr, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            let v = safe_select(b, &old, &new, &mut cfg.counters)?;
            let size = v.size();
            cfg.store.insert(var.clone(), v);
            cfg.history.push(HistEvent::Casn { var, size });
            Ok((Command::Stop, None))
        }
        Command::Input { var, ch, expr, .. } => {
            let b = top(&cfg.bits)?;
            let old = cfg.store.get(&var).cloned().ok_or_else(|| InterpError::Unbound(var.clone()))?;
            let n = eval(&expr, &cfg.mem, &cfg.store, &mut cfg.counters)?
                .as_int()
                .ok_or(InterpError::Value(ValueError::SortMismatch {
                    op: "input",
                    left: crate::value::BaseType::Int,
                    right: crate::value::BaseType::Str,
                }))?;
            if n > MAX_INPUT_SIZE {
                return Err(InterpError::InputTooLarge(n));
            }
            let n = n.max(0) as usize;
            let size = old.size().max(n);
            let stream = cfg.local.get_mut(&ch).ok_or_else(|| InterpError::UnknownLocal(ch.clone()))?;
            let chosen = match stream.front() {
                Some(Some(v)) if b && v.size() <= n => {
                    let v = v.clone();
                    stream.pop_front();
                    v
                }
                Some(None) if b => {
                    stream.pop_front();
                    old
                }
                _ => old,
            };
            cfg.store.insert(var.clone(), chosen.pad(size)?);
            cfg.history.push(HistEvent::In { var, ch, size });
            Ok((Command::Stop, None))
        }
        Command::Send { ch, expr, .. } => {
            let b = top(&cfg.bits)?;
            let v = eval(&expr, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            cfg.history.push(HistEvent::Out {
                ch: ch.clone(),
                size: v.size(),
            });
            let t = cfg.history.time();
            Ok((
                Command::Stop,
                Some(OutEvent {
                    ch,
                    t,
                    bit: b,
                    value: v,
                }),
            ))
        }
        Command::Output { ch, expr, .. } => {
            let b = top(&cfg.bits)?;
            if !cfg.local.contains_key(&ch) {
                return Err(InterpError::UnknownLocal(ch));
            }
            let v = eval(&expr, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            cfg.history.push(HistEvent::LocalOut {
                ch: ch.clone(),
                size: v.size(),
            });
            if b {
                let t = cfg.history.time();
                cfg.outputs.push(LocalOutput { ch, t, value: v });
            }
            Ok((Command::Stop, None))
        }
        Command::If { guard, then, els, .. } => {
            let v = eval(&guard, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            let (branch, next) = if v.is_truthy() { (1, *then) } else { (2, *els) };
            cfg.history.push(HistEvent::Br { size: v.size(), branch });
            Ok((next, None))
        }
        Command::While { guard, body, span } => {
            if !top(&cfg.bits)? {
                return Err(stuck("while loop", span, cfg, monitor));
            }
            let again = Command::While {
                guard: guard.clone(),
                body: body.clone(),
                span,
            };
            let unrolled = Command::If {
                guard,
                then: Box::new(Command::Seq(body, Box::new(again))),
                els: Box::new(Command::Skip(span)),
                span,
            };
            cfg.history.push(HistEvent::Whl);
            Ok((unrolled, None))
        }
        Command::Oblif { guard, then, els, .. } => {
            let b = top(&cfg.bits)?;
            let v = eval(&guard, &cfg.mem, &cfg.store, &mut cfg.counters)?;
            let taken = v.is_truthy();
            let (b1, b2) = (b && taken, b && !taken);
            cfg.bits.push(b2);
            cfg.bits.push(b1);
            if let Some(m) = monitor {
                m.on_oblif(&guard);
            }
            cfg.history.push(HistEvent::Obr { size: v.size() });
            let rest = Command::Seq(Box::new(Command::Pop), Box::new(Command::Seq(els, Box::new(Command::Pop))));
            Ok((Command::Seq(then, Box::new(rest)), None))
        }
        Command::Pop => {
            cfg.bits.pop().ok_or(InterpError::EmptyBitStack)?;
            if let Some(m) = monitor {
                m.on_pop();
            }
            cfg.history.push(HistEvent::Pop);
            Ok((Command::Stop, None))
        }
        Command::Stop => Err(InterpError::Finished),
    }
}

/// The message that triggers a handler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trigger {
    pub ch: ChannelRef,
    pub t: u64,
    pub bit: bool,
    pub value: SizedValue,
}

/// Everything a finished handler run hands back to its node.
#[derive(Clone, Debug)]
pub struct HandlerRun {
    pub store: Store,
    pub local: LocalEnv,
    pub history: History,
    pub emitted: Vec<OutEvent>,
    pub outputs: Vec<LocalOutput>,
    pub steps: u64,
    pub counters: CtCounters,
}

impl CmdConfig {
    /// Entry configuration for a handler: bits `[b]`, memory `[x ↦ v]`, and
    /// the history extended with `hl`.
    pub fn enter(trigger: &Trigger, body: &Command, param: &str, store: Store, local: LocalEnv, mut history: History) -> CmdConfig {
        history.push(HistEvent::Hl {
            ch: trigger.ch.clone(),
            t: trigger.t,
            size: trigger.value.size(),
        });
        CmdConfig {
            bits: vec![trigger.bit],
            cmd: body.clone(),
            mem: (param.to_string(), trigger.value.clone()),
            store,
            local,
            history,
            outputs: Vec::new(),
            counters: CtCounters::default(),
        }
    }

    /// Leaves a finished configuration, recording `ret`.
    pub fn exit(mut self) -> (Store, LocalEnv, History, Vec<LocalOutput>, CtCounters) {
        self.history.push(HistEvent::Ret);
        (self.store, self.local, self.history, self.outputs, self.counters)
    }
}

/// Runs a handler body to completion.
#[allow(clippy::too_many_arguments)]
pub fn run_handler(
    trigger: &Trigger,
    body: &Command,
    param: &str,
    store: Store,
    local: LocalEnv,
    history: History,
    mut monitor: Option<&mut Monitor>,
    watchdog: u64,
) -> Result<HandlerRun, InterpError> {
    let mut cfg = CmdConfig::enter(trigger, body, param, store, local, history);
    let mut emitted = Vec::new();
    let mut steps = 0;
    while !matches!(cfg.cmd, Command::Stop) {
        if steps >= watchdog {
            return Err(InterpError::Watchdog(watchdog));
        }
        if let Some(ev) = step_command(&mut cfg, monitor.as_deref_mut())? {
            emitted.push(ev);
        }
        steps += 1;
    }
    let (store, local, history, outputs, counters) = cfg.exit();
    Ok(HandlerRun {
        store,
        local,
        history,
        emitted,
        outputs,
        steps,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn body(src: &str) -> Command {
        let p = parse_program(&format!("N\nvar x: int@H;\nlocal channel IN: string@H;\nH@H (y: int@H) {{ {src} }}")).unwrap();
        p.handlers[0].body.clone()
    }

    fn cfg(bits: Vec<bool>, cmd: Command, x: SizedValue) -> CmdConfig {
        CmdConfig {
            bits,
            cmd,
            mem: ("y".into(), SizedValue::int(0)),
            store: Store::from([("x".to_string(), x)]),
            local: LocalEnv::new(),
            history: History::default(),
            outputs: Vec::new(),
            counters: CtCounters::default(),
        }
    }

    #[test]
    fn oblivious_assign_by_mode() {
        let mut c = cfg(vec![true], body("x ?= 5;"), SizedValue::int(9));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.store["x"], SizedValue::int(5));
        assert_eq!(c.history.events(), &[HistEvent::Casn { var: "x".into(), size: 8 }]);

        let mut c = cfg(vec![false], body("x ?= 5;"), SizedValue::int(9));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.store["x"], SizedValue::int(9));
    }

    #[test]
    fn oblivious_assign_pads_in_phantom_mode() {
        let p = parse_program("N\nvar s: string@H;\nH@H (y: int@H) { s ?= \"hello\"; }").unwrap();
        let mut c = cfg(vec![false], p.handlers[0].body.clone(), SizedValue::int(0));
        c.store.insert("s".into(), SizedValue::string("ab"));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.store["s"].base(), crate::value::BaseValue::Str("ab".into()));
        assert_eq!(c.store["s"].size(), 5);
    }

    #[test]
    fn oblif_pushes_two_bits() {
        let mut c = cfg(vec![true], body("oblif 0 then skip; else skip;"), SizedValue::int(0));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.bits, vec![true, true, false]);
        let mut depth = vec![c.bits.len()];
        while !matches!(c.cmd, Command::Stop) {
            step_command(&mut c, None).unwrap();
            depth.push(c.bits.len());
        }
        // skip, pop, skip, pop
        assert_eq!(depth, vec![3, 3, 2, 2, 1]);
        assert_eq!(c.bits, vec![true]);

        let mut c = cfg(vec![true], body("oblif 1 then skip; else skip;"), SizedValue::int(0));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.bits, vec![true, false, true]);
        let mut c = cfg(vec![false], body("oblif 1 then skip; else skip;"), SizedValue::int(0));
        step_command(&mut c, None).unwrap();
        assert_eq!(c.bits, vec![false, false, false]);
    }

    #[test]
    fn phantom_assign_is_stuck() {
        let mut c = cfg(vec![false], body("x = 1;"), SizedValue::int(0));
        assert!(matches!(step_command(&mut c, None), Err(InterpError::Stuck { .. })));
        let mut c = cfg(vec![false], body("while 0 do skip;"), SizedValue::int(0));
        assert!(matches!(step_command(&mut c, None), Err(InterpError::Stuck { .. })));
    }

    #[test]
    fn local_input_cases() {
        let p = parse_program("N\nvar s: string@H;\nlocal channel IN: string@H;\nH@H (y: int@H) { s ?= input(IN, 4); }").unwrap();
        let run = |bit: bool, stream: Vec<Option<SizedValue>>| {
            let mut c = cfg(vec![bit], p.handlers[0].body.clone(), SizedValue::int(0));
            c.store.insert("s".into(), SizedValue::string("q"));
            c.local.insert("IN".into(), stream.into());
            step_command(&mut c, None).unwrap();
            (c.store["s"].clone(), c.local["IN"].len(), c.history.events().to_vec())
        };
        let (v, left, h) = run(true, vec![Some(SizedValue::string("hi")), None]);
        assert_eq!(v, SizedValue::string("hi").pad(4).unwrap());
        assert_eq!(left, 1);
        assert_eq!(h, vec![HistEvent::In { var: "s".into(), ch: "IN".into(), size: 4 }]);
        let (v, left, _) = run(true, vec![None]);
        assert_eq!(v, SizedValue::string("q").pad(4).unwrap());
        assert_eq!(left, 0);
        // Oversized head stays put.
        let (v, left, _) = run(true, vec![Some(SizedValue::string("toolong"))]);
        assert_eq!(v, SizedValue::string("q").pad(4).unwrap());
        assert_eq!(left, 1);
        let (v, left, _) = run(false, vec![Some(SizedValue::string("hi"))]);
        assert_eq!(v, SizedValue::string("q").pad(4).unwrap());
        assert_eq!(left, 1);
        let (_, left, _) = run(true, vec![]);
        assert_eq!(left, 0);
    }

    #[test]
    fn send_timestamp_includes_out_event() {
        let p = parse_program("N\nH@L (y: int@L) { skip; send(M/C, y); }").unwrap();
        let trig = Trigger {
            ch: ChannelRef::new("N", "H"),
            t: 0,
            bit: true,
            value: SizedValue::int(3),
        };
        let r = run_handler(&trig, &p.handlers[0].body, "y", Store::new(), LocalEnv::new(), History::default(), None, 100).unwrap();
        // hl(9) + skp(1) + out(9)
        assert_eq!(r.emitted[0].t, 19);
        assert_eq!(r.emitted[0].value, SizedValue::int(3));
        assert_eq!(r.history.events().last(), Some(&HistEvent::Ret));
        assert_eq!(r.history.time(), 20);
    }

    #[test]
    fn skip_handler_history() {
        let trig = Trigger {
            ch: ChannelRef::new("N", "H"),
            t: 5,
            bit: false,
            value: SizedValue::int(3),
        };
        let r = run_handler(&trig, &body("skip;"), "y", Store::new(), LocalEnv::new(), History::default(), None, 10).unwrap();
        assert!(r.emitted.is_empty());
        assert_eq!(r.history.len(), 3);
        assert!(matches!(r.history.events()[1], HistEvent::Skp));
    }

    #[test]
    fn watchdog_fires() {
        let p = parse_program("N\nvar i: int@L;\nH@L (y: int@L) { i = 1; while i do skip; }").unwrap();
        let trig = Trigger {
            ch: ChannelRef::new("N", "H"),
            t: 0,
            bit: true,
            value: SizedValue::int(0),
        };
        let store = Store::from([("i".to_string(), SizedValue::int(0))]);
        let err = run_handler(&trig, &p.handlers[0].body, "y", store, LocalEnv::new(), History::default(), None, 50).unwrap_err();
        assert_eq!(err, InterpError::Watchdog(50));
    }

    #[test]
    fn output_only_in_real_mode() {
        let p = parse_program("N\nlocal channel OUT: int@H;\nH@H (y: int@H) { output(OUT, y); }").unwrap();
        for bit in [true, false] {
            let trig = Trigger {
                ch: ChannelRef::new("N", "H"),
                t: 0,
                bit,
                value: SizedValue::int(4),
            };
            let local = LocalEnv::from([("OUT".to_string(), VecDeque::new())]);
            let r = run_handler(&trig, &p.handlers[0].body, "y", Store::new(), local, History::default(), None, 10).unwrap();
            assert_eq!(r.outputs.len(), bit as usize);
            assert_eq!(r.history.time(), 9 + 9 + 1);
        }
    }
}
