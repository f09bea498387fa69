//! What an attacker at level `adv` can tell apart.
//!
//! Sizes, channels, directions and timestamps are always visible. A mode bit
//! is visible when the channel's mode label flows to `adv`, a value when its
//! value label does. Untyped channels count as fully public.

use std::collections::BTreeMap;
use std::fmt;

use crate::frontend::NetMessage;
use crate::interp::{LocalEnv, Store};
use crate::lattice::Level;
use crate::netsim::{NodeState, TraceEvent};
use crate::typing::{ChannelEnv, TypeEnvs, VarType};

fn labels(lambda: &ChannelEnv, ch: &crate::frontend::ChannelRef) -> (Level, Level) {
    let bot = lambda.lattice.bottom();
    lambda.get(ch).map_or((bot, bot), |t| (t.mode, t.val))
}

/// Why two events differ for the attacker.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EventMismatch {
    Direction,
    Channel,
    Time,
    Size,
    Bit,
    Value,
}

impl fmt::Display for EventMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventMismatch::Direction => "direction",
            EventMismatch::Channel => "channel",
            EventMismatch::Time => "timestamp",
            EventMismatch::Size => "size",
            EventMismatch::Bit => "mode bit",
            EventMismatch::Value => "value",
        })
    }
}

pub fn event_mismatch(adv: Level, lambda: &ChannelEnv, a: &TraceEvent, b: &TraceEvent) -> Option<EventMismatch> {
    let lat = &lambda.lattice;
    if a.dir != b.dir {
        return Some(EventMismatch::Direction);
    }
    if a.ch != b.ch {
        return Some(EventMismatch::Channel);
    }
    if a.t != b.t {
        return Some(EventMismatch::Time);
    }
    if a.value.size() != b.value.size() {
        return Some(EventMismatch::Size);
    }
    let (mode, val) = labels(lambda, &a.ch);
    if lat.leq(mode, adv) && a.bit != b.bit {
        return Some(EventMismatch::Bit);
    }
    if lat.leq(val, adv) && !a.value.same_base(&b.value) {
        return Some(EventMismatch::Value);
    }
    None
}

pub fn equiv_event(adv: Level, lambda: &ChannelEnv, a: &TraceEvent, b: &TraceEvent) -> bool {
    event_mismatch(adv, lambda, a, b).is_none()
}

/// First point where two traces differ for the attacker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceDiff {
    pub index: usize,
    pub left: Option<TraceEvent>,
    pub right: Option<TraceEvent>,
    /// `None` when one trace ended early.
    pub mismatch: Option<EventMismatch>,
}

impl fmt::Display for TraceDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &Option<TraceEvent>| e.as_ref().map_or("(end of trace)".to_string(), |e| e.to_string());
        match self.mismatch {
            Some(m) => write!(f, "event {}: {} differs: {} vs {}", self.index, m, show(&self.left), show(&self.right)),
            None => write!(f, "event {}: {} vs {}", self.index, show(&self.left), show(&self.right)),
        }
    }
}

pub fn trace_diff(adv: Level, lambda: &ChannelEnv, t1: &[TraceEvent], t2: &[TraceEvent]) -> Option<TraceDiff> {
    for (index, (a, b)) in t1.iter().zip(t2).enumerate() {
        if let Some(m) = event_mismatch(adv, lambda, a, b) {
            return Some(TraceDiff {
                index,
                left: Some(a.clone()),
                right: Some(b.clone()),
                mismatch: Some(m),
            });
        }
    }
    if t1.len() != t2.len() {
        let index = t1.len().min(t2.len());
        return Some(TraceDiff {
            index,
            left: t1.get(index).cloned(),
            right: t2.get(index).cloned(),
            mismatch: None,
        });
    }
    None
}

/// Pointwise event equivalence; lengths must agree.
pub fn equiv_trace(adv: Level, lambda: &ChannelEnv, t1: &[TraceEvent], t2: &[TraceEvent]) -> bool {
    trace_diff(adv, lambda, t1, t2).is_none()
}

/// Same variables with equal sizes; values agree where the variable is
/// visible.
pub fn equiv_store(adv: Level, envs: &TypeEnvs, gamma: &BTreeMap<String, VarType>, s1: &Store, s2: &Store) -> bool {
    s1.len() == s2.len()
        && s1.iter().all(|(x, v1)| {
            let Some(v2) = s2.get(x) else { return false };
            let visible = gamma.get(x).is_none_or(|t| envs.lattice.leq(t.level, adv));
            v1.size() == v2.size() && (!visible || v1.same_base(v2))
        })
}

/// Visible local streams are identical; hidden ones may differ freely.
pub fn equiv_local(adv: Level, envs: &TypeEnvs, l1: &LocalEnv, l2: &LocalEnv) -> bool {
    let keys1: Vec<&String> = l1.keys().collect();
    let keys2: Vec<&String> = l2.keys().collect();
    keys1 == keys2
        && l1.iter().all(|(ch, s1)| {
            let visible = envs.pi.get(ch).is_none_or(|t| envs.lattice.leq(t.level, adv));
            !visible || s1 == &l2[ch]
        })
}

/// Remaining scripted messages agree on channel, size and order, and on bits
/// and values where those are visible.
pub fn equiv_script<'a>(
    adv: Level,
    lambda: &ChannelEnv,
    s1: impl Iterator<Item = &'a NetMessage>,
    s2: impl Iterator<Item = &'a NetMessage>,
) -> bool {
    let (v1, v2): (Vec<_>, Vec<_>) = (s1.collect(), s2.collect());
    let lat = &lambda.lattice;
    v1.len() == v2.len()
        && v1.iter().zip(&v2).all(|(a, b)| {
            let (mode, val) = labels(lambda, &a.ch);
            a.ch == b.ch
                && a.immediate == b.immediate
                && a.value.size() == b.value.size()
                && (!lat.leq(mode, adv) || a.bit == b.bit)
                && (!lat.leq(val, adv) || a.value.same_base(&b.value))
        })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateCompareError {
    #[error("both states must be consumers")]
    PhaseMismatch,
    #[error("states run different programs")]
    ProgramMismatch,
}

/// Consumer states that agree on everything visible at `adv`.
pub fn equiv_state(adv: Level, lambda: &ChannelEnv, s1: &NodeState, s2: &NodeState) -> Result<bool, StateCompareError> {
    if !s1.is_consumer() || !s2.is_consumer() {
        return Err(StateCompareError::PhaseMismatch);
    }
    if s1.program != s2.program {
        return Err(StateCompareError::ProgramMismatch);
    }
    let envs = TypeEnvs::for_program(&s1.program, lambda);
    Ok(equiv_store(adv, &envs, &envs.gamma, &s1.store, &s2.store)
        && equiv_local(adv, &envs, &s1.local, &s2.local)
        && equiv_script(adv, lambda, s1.pending_script(), s2.pending_script())
        && s1.history == s2.history
        && equiv_trace(adv, lambda, &s1.trace, &s2.trace))
}

/// True when `t2` is `t1` with dummy events inserted and genuine values
/// possibly padded further. Timestamps are not compared.
pub fn phantom_extension_check(t1: &[TraceEvent], t2: &[TraceEvent]) -> bool {
    let mut i = 0;
    for e in t2 {
        if !e.bit {
            continue;
        }
        let Some(a) = t1.get(i) else { return false };
        if !(a.bit && a.dir == e.dir && a.ch == e.ch && a.value.extended_by(&e.value)) {
            return false;
        }
        i += 1;
    }
    i == t1.len()
}

/// `|t2| <= |t1| * (1 + q_max)`.
pub fn length_bound_holds(t1_len: usize, t2_len: usize, q_max: u64) -> bool {
    (t2_len as u128) <= (t1_len as u128) * (1 + q_max as u128)
}
