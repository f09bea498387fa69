use std::fmt;

use crate::frontend::ChannelRef;

/// One entry of an execution history. Size-bearing events record the public
/// size `z` of the value they touched; that size is all the clock looks at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HistEvent {
    Skp,
    Asn { var: String, size: usize },
    Casn { var: String, size: usize },
    In { var: String, ch: String, size: usize },
    Out { ch: ChannelRef, size: usize },
    LocalOut { ch: String, size: usize },
    Br { size: usize, branch: u8 },
    Obr { size: usize },
    Whl,
    Pop,
    Hl { ch: ChannelRef, t: u64, size: usize },
    Ret,
}

impl HistEvent {
    /// Clock cost: one tick plus one per byte of the value involved.
    pub fn cost(&self) -> u64 {
        let z = match self {
            HistEvent::Skp | HistEvent::Whl | HistEvent::Pop | HistEvent::Ret => 0,
            HistEvent::Asn { size, .. }
            | HistEvent::Casn { size, .. }
            | HistEvent::In { size, .. }
            | HistEvent::Out { size, .. }
            | HistEvent::LocalOut { size, .. }
            | HistEvent::Br { size, .. }
            | HistEvent::Obr { size }
            | HistEvent::Hl { size, .. } => *size,
        };
        1 + z as u64
    }
}

impl fmt::Display for HistEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistEvent::Skp => write!(f, "skp"),
            HistEvent::Asn { var, size } => write!(f, "asn({var},{size})"),
            HistEvent::Casn { var, size } => write!(f, "casn({var},{size})"),
            HistEvent::In { var, ch, size } => write!(f, "in({var},{ch},{size})"),
            HistEvent::Out { ch, size } => write!(f, "out({ch},{size})"),
            HistEvent::LocalOut { ch, size } => write!(f, "lout({ch},{size})"),
            HistEvent::Br { size, branch } => write!(f, "br({size},{branch})"),
            HistEvent::Obr { size } => write!(f, "obr({size})"),
            HistEvent::Whl => write!(f, "whl"),
            HistEvent::Pop => write!(f, "pop"),
            HistEvent::Hl { ch, t, size } => write!(f, "hl({ch},{t},{size})"),
            HistEvent::Ret => write!(f, "ret"),
        }
    }
}

/// Sum of event costs.
pub fn time_of(events: &[HistEvent]) -> u64 {
    events.iter().map(HistEvent::cost).sum()
}

/// Append-only history with its running time cached.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    events: Vec<HistEvent>,
    time: u64,
    clock_violations: u64,
}

impl History {
    pub fn push(&mut self, ev: HistEvent) {
        let next = self.time.saturating_add(ev.cost());
        if next <= self.time {
            self.clock_violations += 1;
        }
        self.time = next;
        self.events.push(ev);
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn events(&self) -> &[HistEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Appends that failed to advance the clock. Always zero unless the
    /// clock saturates.
    pub fn clock_violations(&self) -> u64 {
        self.clock_violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_and_unit() {
        assert_eq!(time_of(&[]), 0);
        assert_eq!(time_of(&[HistEvent::Skp]), 1);
        assert_eq!(HistEvent::Obr { size: 8 }.cost(), 9);
    }

    fn event() -> impl Strategy<Value = HistEvent> {
        prop_oneof![
            Just(HistEvent::Skp),
            Just(HistEvent::Ret),
            (0usize..64).prop_map(|size| HistEvent::Casn { var: "x".into(), size }),
            (0usize..64).prop_map(|size| HistEvent::Out {
                ch: ChannelRef::new("A", "B"),
                size
            }),
            (0usize..64, 1u8..3).prop_map(|(size, branch)| HistEvent::Br { size, branch }),
        ]
    }

    proptest! {
        #[test]
        fn strictly_increasing(evs in proptest::collection::vec(event(), 0..40)) {
            let mut h = History::default();
            let mut prev = 0;
            for ev in evs {
                h.push(ev);
                prop_assert!(h.time() > prev);
                prop_assert_eq!(h.time(), time_of(h.events()));
                prev = h.time();
            }
            prop_assert_eq!(h.clock_violations(), 0);
        }
    }
}
