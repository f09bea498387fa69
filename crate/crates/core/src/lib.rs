//! OblivIO: a reactive language for data-oblivious network programs.
//!
//! The crate covers the whole toolchain: parsing ([`frontend`]), the
//! security-and-potential type system ([`typing`]), the oblivious
//! interpreter ([`interp`]), a deterministic multi-node simulator
//! ([`netsim`]), and differential checks of noninterference and dummy
//! traffic overhead ([`harness`]).

pub mod corpus;
pub mod ct;
pub mod frontend;
pub mod harness;
pub mod interp;
pub mod lattice;
pub mod netsim;
pub mod typing;
pub mod value;

pub use frontend::{parse_program, parse_strategy, ChannelRef, Command, Expr, Program, StrategyScript};
pub use lattice::{Lattice, Level};
pub use value::{BaseType, BaseValue, SizedValue};
