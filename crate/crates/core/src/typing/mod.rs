//! Security labels and potentials.
//!
//! A handler body is checked under a program-counter label `pc` and a
//! potential `q` that bounds the dummy messages its execution may cause,
//! directly or further down the network.

mod check;
mod envs;

pub use check::{
    check_command, check_program, check_system, handler_potentials, infer_min_potential, type_expr, HandlerPotential,
    SystemError, TypeError, TypeErrorKind,
};
pub use envs::{ChannelEnv, ChannelType, EnvError, TypeEnvs, VarType};
