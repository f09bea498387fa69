use std::fmt;

use serde_json::{json, Value as Json};

use crate::frontend::ChannelRef;
use crate::value::SizedValue;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Sent,
    Received,
    Observed,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Sent => "→",
            Direction::Received => "←",
            Direction::Observed => "~",
        }
    }

    pub fn log_name(self) -> &'static str {
        match self {
            Direction::Sent => "out",
            Direction::Received => "in",
            Direction::Observed => "obs",
        }
    }
}

/// A network message as one node saw it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub dir: Direction,
    pub ch: ChannelRef,
    pub t: u64,
    pub bit: bool,
    pub value: SizedValue,
}

impl TraceEvent {
    pub fn is_genuine(&self) -> bool {
        self.bit
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}({},{},{})",
            self.ch,
            self.dir.arrow(),
            self.t,
            self.bit as u8,
            self.value
        )
    }
}

/// One line of the global simulation log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub node: String,
    pub dir: &'static str,
    pub ch: String,
    pub t: u64,
    pub bit: bool,
    pub value: SizedValue,
}

impl LogRecord {
    pub fn to_json(&self) -> Json {
        json!({
            "node": self.node,
            "dir": self.dir,
            "ch": self.ch,
            "t": self.t,
            "bit": self.bit as u8,
            "val": self.value.base().to_json(),
            "size": self.value.size(),
        })
    }
}

/// Renders a log as JSON lines.
pub fn log_to_jsonl(log: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out.push_str(&r.to_json().to_string());
        out.push('\n');
    }
    out
}
