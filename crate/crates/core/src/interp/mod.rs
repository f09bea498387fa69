//! Small-step execution of handler bodies.
//!
//! Secret conditionals run both branches under a stack of execution-mode
//! bits; in phantom mode (bit 0) oblivious assignments keep their old value
//! but still pad, and sends emit dummy messages. Every step appends to the
//! node's history, whose cost sum is the logical clock.

mod history;
mod machine;
mod monitor;

pub use history::{time_of, HistEvent, History};
pub use machine::{
    eval, run_handler, step_command, CmdConfig, HandlerRun, InterpError, LocalEnv, LocalOutput, OutEvent, Store,
    Trigger, MAX_INPUT_SIZE,
};
pub use monitor::{Monitor, MonitorViolation};
