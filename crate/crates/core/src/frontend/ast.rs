use std::fmt;

use crate::lattice::{Lattice, Level};
use crate::value::{BaseType, BaseValue, BinOp};

/// Source position of a construct. Spans never take part in equality, so
/// trees that differ only in layout compare equal.
#[derive(Copy, Clone, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A network channel `NODE/NAME`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelRef {
    pub node: String,
    pub name: String,
}

impl ChannelRef {
    pub fn new(node: impl Into<String>, name: impl Into<String>) -> ChannelRef {
        ChannelRef {
            node: node.into(),
            name: name.into(),
        }
    }

    pub fn parse(text: &str) -> Option<ChannelRef> {
        let (node, name) = text.split_once('/')?;
        let ok = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        (ok(node) && ok(name)).then(|| ChannelRef::new(node, name))
    }
}

impl fmt::Display for ChannelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.node, self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Skip(Span),
    Seq(Box<Command>, Box<Command>),
    Assign { var: String, expr: Expr, span: Span },
    OblivAssign { var: String, expr: Expr, span: Span },
    Input { var: String, ch: String, expr: Expr, span: Span },
    Send { ch: ChannelRef, expr: Expr, span: Span },
    Output { ch: String, expr: Expr, span: Span },
    If { guard: Expr, then: Box<Command>, els: Box<Command>, span: Span },
    While { guard: Expr, body: Box<Command>, span: Span },
    Oblif { guard: Expr, then: Box<Command>, els: Box<Command>, span: Span },
    /// Runtime only: drops the top execution-mode bit.
    Pop,
    /// Runtime only: a finished command.
    Stop,
}

impl Command {
    pub fn seq(a: Command, b: Command) -> Command {
        Command::Seq(Box::new(a), Box::new(b))
    }

    pub fn span(&self) -> Span {
        match self {
            Command::Skip(span)
            | Command::Assign { span, .. }
            | Command::OblivAssign { span, .. }
            | Command::Input { span, .. }
            | Command::Send { span, .. }
            | Command::Output { span, .. }
            | Command::If { span, .. }
            | Command::While { span, .. }
            | Command::Oblif { span, .. } => *span,
            Command::Seq(a, _) => a.span(),
            Command::Pop | Command::Stop => Span::default(),
        }
    }

    /// True when the tree contains a runtime-only node.
    pub fn has_runtime_forms(&self) -> bool {
        match self {
            Command::Pop | Command::Stop => true,
            Command::Seq(a, b) => a.has_runtime_forms() || b.has_runtime_forms(),
            Command::If { then, els, .. } | Command::Oblif { then, els, .. } => {
                then.has_runtime_forms() || els.has_runtime_forms()
            }
            Command::While { body, .. } => body.has_runtime_forms(),
            _ => false,
        }
    }

    /// Visits every command node, pre-order.
    pub fn walk(&self, f: &mut impl FnMut(&Command)) {
        f(self);
        match self {
            Command::Seq(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Command::If { then, els, .. } | Command::Oblif { then, els, .. } => {
                then.walk(f);
                els.walk(f);
            }
            Command::While { body, .. } => body.walk(f),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalDecl {
    pub name: String,
    pub ty: BaseType,
    pub level: Level,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: BaseType,
    pub level: Level,
    pub init: Option<BaseValue>,
    pub span: Span,
}

impl VarDecl {
    /// Initial base value: the initializer, or `0` / `""`.
    pub fn initial(&self) -> BaseValue {
        match (&self.init, self.ty) {
            (Some(v), _) => v.clone(),
            (None, BaseType::Int) => BaseValue::Int(0),
            (None, BaseType::Str) => BaseValue::Str(String::new()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    pub name: String,
    pub mode: Level,
    pub potential: u64,
    pub param: String,
    pub param_ty: BaseType,
    pub param_level: Level,
    pub body: Command,
    pub span: Span,
}

/// Lattice header as written in the source.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LatticeDecl {
    pub names: Vec<String>,
    pub pairs: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub node: String,
    pub lattice_decl: Option<LatticeDecl>,
    pub lattice: Lattice,
    pub locals: Vec<LocalDecl>,
    pub globals: Vec<VarDecl>,
    pub handlers: Vec<Handler>,
}

impl Program {
    pub fn handler(&self, name: &str) -> Option<&Handler> {
        self.handlers.iter().find(|h| h.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&VarDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn local(&self, name: &str) -> Option<&LocalDecl> {
        self.locals.iter().find(|l| l.name == name)
    }

    pub fn channel(&self, handler: &Handler) -> ChannelRef {
        ChannelRef::new(&self.node, &handler.name)
    }
}
