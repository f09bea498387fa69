//! Source programs and strategy scripts.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
pub mod strategy;

use thiserror::Error;

pub use ast::*;
pub use parser::{parse_lattice, parse_program, parse_program_with};
pub use pretty::{expr_to_string, pretty_print};
pub use strategy::{parse_strategy, NetMessage, StrategyError, StrategyScript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            span,
            message: message.into(),
        }
    }
}
