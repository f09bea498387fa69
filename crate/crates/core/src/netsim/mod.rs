//! Nodes exchanging messages.
//!
//! Each node alternates between consuming one incoming message and running
//! the matching handler to completion. Incoming messages come from a
//! per-node script (traffic from outside the system) and from the other
//! nodes. Every node keeps a trace of the network events it can see: what
//! it received, what it sent, and traffic between other nodes.

mod node;
mod sim;
mod trace;

use thiserror::Error;

use crate::interp::InterpError;
use crate::typing::SystemError;

pub use node::{handler_lookup, initial_store, Delivery, NodeState, Pick, Semantics, Source, SysStep};
pub use sim::{run_simulation, NodeReport, NodeSpec, Outcome, Scheduler, SimConfig, SimResult};
pub use trace::{log_to_jsonl, Direction, LogRecord, TraceEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Types(#[from] SystemError),
    #[error("{node}: {detail}")]
    Setup { node: String, detail: String },
    #[error("{node}: ill-formed strategy: {detail}")]
    Ingestion { node: String, detail: String },
    #[error("{node}: {error}")]
    Interp { node: String, error: InterpError },
}
