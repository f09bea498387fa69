use thiserror::Error;

use crate::frontend::ChannelRef;
use crate::netsim::TraceEvent;
use crate::typing::ChannelEnv;
use crate::value::{BaseType, SizedValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PotentialError {
    #[error("event {index}: channel {ch} has no type")]
    UnknownChannel { index: usize, ch: ChannelRef },
    #[error("event {index}: dummy message with no potential left")]
    Exhausted { index: usize },
}

/// Running potential of a trace with the change contributed by each event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PotentialLedger {
    pub q: u64,
    pub deltas: Vec<i64>,
}

fn fold(lambda: &ChannelEnv, trace: &[TraceEvent], strict: bool) -> Result<PotentialLedger, PotentialError> {
    let mut ledger = PotentialLedger::default();
    for (index, ev) in trace.iter().enumerate() {
        let r = match lambda.get(&ev.ch) {
            Some(t) => t.potential,
            None if strict => {
                return Err(PotentialError::UnknownChannel {
                    index,
                    ch: ev.ch.clone(),
                })
            }
            None => 0,
        };
        if ev.bit {
            ledger.q += r;
            ledger.deltas.push(r as i64);
        } else {
            ledger.q = ledger.q.checked_sub(1).ok_or(PotentialError::Exhausted { index })?;
            ledger.deltas.push(-1);
        }
    }
    Ok(ledger)
}

/// Potential of `trace`: genuine messages add the channel's potential, dummy
/// messages spend one.
pub fn trace_potential(lambda: &ChannelEnv, trace: &[TraceEvent]) -> Result<u64, PotentialError> {
    potential_ledger(lambda, trace).map(|l| l.q)
}

pub fn potential_ledger(lambda: &ChannelEnv, trace: &[TraceEvent]) -> Result<PotentialLedger, PotentialError> {
    fold(lambda, trace, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WfViolation {
    #[error("expected a {expected} value, found {found}")]
    Sort { expected: BaseType, found: BaseType },
    #[error("dummy message on a channel with public mode")]
    PublicModeDummy,
    #[error("dummy message needs trace potential {need}, trace has {have}")]
    Potential { have: u64, need: u64 },
    #[error("trace so far is ill-formed: {0}")]
    Trace(PotentialError),
}

/// Checks that a network strategy may deliver `ch(b, v)` after `trace`.
/// Channels without a type are accepted (the message is only observed);
/// they count for no potential.
pub fn wf_strategy_online(
    lambda: &ChannelEnv,
    trace: &[TraceEvent],
    ch: &ChannelRef,
    bit: bool,
    value: &SizedValue,
) -> Result<(), WfViolation> {
    let Some(t) = lambda.get(ch) else {
        return Ok(());
    };
    if value.base_type() != t.ty {
        return Err(WfViolation::Sort {
            expected: t.ty,
            found: value.base_type(),
        });
    }
    if !bit {
        if lambda.lattice.is_bottom(t.mode) {
            return Err(WfViolation::PublicModeDummy);
        }
        let have = fold(lambda, trace, false).map_err(WfViolation::Trace)?.q;
        let need = 1 + t.potential;
        if have < need {
            return Err(WfViolation::Potential { have, need });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::netsim::Direction;

    fn lambda() -> ChannelEnv {
        let p = parse_program("N\nG@H $2 (x: int@H) { skip; }\nP@L (x: int@L) { skip; }").unwrap();
        ChannelEnv::build(&[p]).unwrap()
    }

    fn ev(name: &str, bit: bool) -> TraceEvent {
        TraceEvent {
            dir: Direction::Received,
            ch: ChannelRef::new("N", name),
            t: 0,
            bit,
            value: SizedValue::int(0),
        }
    }

    #[test]
    fn potential_rules() {
        let l = lambda();
        assert_eq!(trace_potential(&l, &[]), Ok(0));
        assert_eq!(trace_potential(&l, &[ev("G", true)]), Ok(2));
        assert_eq!(trace_potential(&l, &[ev("G", false)]), Err(PotentialError::Exhausted { index: 0 }));
        assert_eq!(trace_potential(&l, &[ev("G", true), ev("G", false), ev("P", false)]), Ok(0));
        let led = potential_ledger(&l, &[ev("G", true), ev("G", false)]).unwrap();
        assert_eq!(led.deltas, vec![2, -1]);
        assert!(matches!(
            trace_potential(&l, &[ev("Q", true)]),
            Err(PotentialError::UnknownChannel { .. })
        ));
    }

    #[test]
    fn online_wellformedness() {
        let l = lambda();
        let g = ChannelRef::new("N", "G");
        let p = ChannelRef::new("N", "P");
        let zero = SizedValue::int(0);
        assert_eq!(wf_strategy_online(&l, &[], &p, true, &zero), Ok(()));
        assert_eq!(wf_strategy_online(&l, &[], &p, false, &zero), Err(WfViolation::PublicModeDummy));
        assert_eq!(
            wf_strategy_online(&l, &[ev("G", true)], &g, false, &zero),
            Err(WfViolation::Potential { have: 2, need: 3 })
        );
        assert_eq!(
            wf_strategy_online(&l, &[ev("G", true), ev("G", true)], &g, false, &zero),
            Ok(())
        );
        assert!(matches!(
            wf_strategy_online(&l, &[], &g, true, &SizedValue::string("s")),
            Err(WfViolation::Sort { .. })
        ));
    }
}
