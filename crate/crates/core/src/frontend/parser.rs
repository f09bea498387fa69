use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::ParseError;
use crate::lattice::{Lattice, Level};
use crate::value::{BaseType, BaseValue, BinOp};

const KEYWORDS: &[&str] = &[
    "var", "local", "channel", "lattice", "if", "then", "else", "while", "do", "oblif", "skip", "send",
    "output", "input", "int", "string", "pop", "stop",
];

/// Parses a program against its own lattice header, or the two-point
/// lattice when it has none.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    parse_program_with(src, None)
}

/// Like [`parse_program`], but uses `lattice` when the source declares none.
/// A source header that disagrees with `lattice` is an error.
pub fn parse_program_with(src: &str, lattice: Option<&Lattice>) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        lattice: Lattice::default(),
    };
    p.program(lattice)
}

/// Parses a standalone lattice file (`lattice L < H;`).
pub fn parse_lattice(src: &str) -> Result<Lattice, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        lattice: Lattice::default(),
    };
    let span = p.span();
    if !p.at_kw("lattice") {
        return Err(ParseError::new(span, "expected `lattice`"));
    }
    let decl = p.lattice_decl()?;
    p.expect(&Tok::Eof)?;
    build_lattice(&decl, span)
}

fn build_lattice(decl: &LatticeDecl, span: Span) -> Result<Lattice, ParseError> {
    Lattice::from_pairs(&decl.names, &decl.pairs).map_err(|e| ParseError::new(span, e.to_string()))
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    lattice: Lattice,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::new(self.span(), msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.unexpected(&t.describe())
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            Tok::Ident(s) => self.err(format!("`{s}` is a reserved word and cannot name {what}")),
            _ => self.unexpected(what),
        }
    }

    fn level(&mut self) -> Result<Level, ParseError> {
        let span = self.span();
        let name = self.ident("a security level")?;
        self.lattice
            .level(&name)
            .ok_or_else(|| ParseError::new(span, format!("unknown label `{name}`")))
    }

    fn base_type(&mut self) -> Result<BaseType, ParseError> {
        if self.at_kw("int") {
            self.advance();
            Ok(BaseType::Int)
        } else if self.at_kw("string") {
            self.advance();
            Ok(BaseType::Str)
        } else {
            self.unexpected("`int` or `string`")
        }
    }

    fn lattice_decl(&mut self) -> Result<LatticeDecl, ParseError> {
        self.expect_kw("lattice")?;
        let mut decl = LatticeDecl::default();
        loop {
            let a = self.ident("a security level")?;
            if self.eat(&Tok::Lt) {
                let b = self.ident("a security level")?;
                decl.pairs.push((a, b));
            } else {
                decl.names.push(a);
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::Semi)?;
        Ok(decl)
    }

    fn program(&mut self, override_lattice: Option<&Lattice>) -> Result<Program, ParseError> {
        let node = self.ident("a node identifier")?;
        let mut lattice_decl = None;
        if self.at_kw("lattice") {
            let span = self.span();
            let decl = self.lattice_decl()?;
            let declared = build_lattice(&decl, span)?;
            if let Some(o) = override_lattice {
                if !o.same_order(&declared) {
                    return Err(ParseError::new(span, "lattice header disagrees with the supplied lattice"));
                }
            }
            self.lattice = override_lattice.cloned().unwrap_or(declared);
            lattice_decl = Some(decl);
        } else if let Some(o) = override_lattice {
            self.lattice = o.clone();
        }

        let mut locals: Vec<LocalDecl> = Vec::new();
        let mut globals: Vec<VarDecl> = Vec::new();
        let mut handlers: Vec<Handler> = Vec::new();
        let mut var_names = HashSet::new();
        let mut local_names = HashSet::new();
        let mut handler_names = HashSet::new();

        while self.peek() != &Tok::Eof {
            let span = self.span();
            if self.at_kw("local") {
                self.advance();
                self.expect_kw("channel")?;
                let name = self.ident("a local channel name")?;
                self.expect(&Tok::Colon)?;
                let ty = self.base_type()?;
                self.expect(&Tok::At)?;
                let level = self.level()?;
                self.expect(&Tok::Semi)?;
                if !local_names.insert(name.clone()) {
                    return Err(ParseError::new(span, format!("duplicate local channel `{name}`")));
                }
                locals.push(LocalDecl { name, ty, level, span });
            } else if self.at_kw("var") {
                self.advance();
                let name = self.ident("a variable name")?;
                self.expect(&Tok::Colon)?;
                let ty = self.base_type()?;
                self.expect(&Tok::At)?;
                let level = self.level()?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.literal()?)
                } else {
                    None
                };
                self.expect(&Tok::Semi)?;
                if !var_names.insert(name.clone()) {
                    return Err(ParseError::new(span, format!("duplicate variable `{name}`")));
                }
                globals.push(VarDecl {
                    name,
                    ty,
                    level,
                    init,
                    span,
                });
            } else if self.at_kw("lattice") {
                return self.err("the lattice header must come directly after the node identifier");
            } else {
                let h = self.handler()?;
                if !handler_names.insert(h.name.clone()) {
                    return Err(ParseError::new(span, format!("duplicate handler `{}`", h.name)));
                }
                handlers.push(h);
            }
        }
        Ok(Program {
            node,
            lattice_decl,
            lattice: self.lattice.clone(),
            locals,
            globals,
            handlers,
        })
    }

    fn literal(&mut self) -> Result<BaseValue, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match self.advance() {
            Tok::Int(n) => Ok(BaseValue::Int(self.int_value(n, neg)?)),
            Tok::Str(s) if !neg => Ok(BaseValue::Str(s)),
            _ => {
                self.pos -= 1;
                self.unexpected("a literal")
            }
        }
    }

    fn int_value(&self, n: u64, neg: bool) -> Result<i64, ParseError> {
        if neg {
            if n <= i64::MAX as u64 + 1 {
                Ok((n as i64).wrapping_neg())
            } else {
                self.err("integer literal out of range")
            }
        } else if n <= i64::MAX as u64 {
            Ok(n as i64)
        } else {
            self.err("integer literal out of range")
        }
    }

    fn handler(&mut self) -> Result<Handler, ParseError> {
        let span = self.span();
        let name = self.ident("a handler name or declaration")?;
        self.expect(&Tok::At)?;
        let mode = self.level()?;
        let potential = if self.eat(&Tok::Dollar) {
            match self.advance() {
                Tok::Int(n) => n,
                _ => {
                    self.pos -= 1;
                    return self.unexpected("a potential");
                }
            }
        } else {
            0
        };
        self.expect(&Tok::LParen)?;
        let param = self.ident("a parameter name")?;
        self.expect(&Tok::Colon)?;
        let param_ty = self.base_type()?;
        self.expect(&Tok::At)?;
        let param_level = self.level()?;
        self.expect(&Tok::RParen)?;
        if self.peek() != &Tok::LBrace {
            return self.unexpected("`{`");
        }
        let body = self.statement()?;
        Ok(Handler {
            name,
            mode,
            potential,
            param,
            param_ty,
            param_level,
            body,
            span,
        })
    }

    fn block(&mut self) -> Result<Command, ParseError> {
        let span = self.span();
        self.expect(&Tok::LBrace)?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                return self.unexpected("`}`");
            }
            stmts.push(self.statement()?);
        }
        self.advance();
        Ok(fold_seq(stmts, span))
    }

    fn statement(&mut self) -> Result<Command, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LBrace => self.block(),
            Tok::Ident(kw) => match kw.as_str() {
                "skip" => {
                    self.advance();
                    self.expect(&Tok::Semi)?;
                    Ok(Command::Skip(span))
                }
                "if" => {
                    self.advance();
                    let guard = self.expr()?;
                    self.expect_kw("then")?;
                    let then = self.statement()?;
                    let els = if self.at_kw("else") {
                        self.advance();
                        self.statement()?
                    } else {
                        Command::Skip(span)
                    };
                    Ok(Command::If {
                        guard,
                        then: Box::new(then),
                        els: Box::new(els),
                        span,
                    })
                }
                "oblif" => {
                    self.advance();
                    let guard = self.expr()?;
                    self.expect_kw("then")?;
                    let then = self.statement()?;
                    self.expect_kw("else")?;
                    let els = self.statement()?;
                    Ok(Command::Oblif {
                        guard,
                        then: Box::new(then),
                        els: Box::new(els),
                        span,
                    })
                }
                "while" => {
                    self.advance();
                    let guard = self.expr()?;
                    self.expect_kw("do")?;
                    let body = self.statement()?;
                    Ok(Command::While {
                        guard,
                        body: Box::new(body),
                        span,
                    })
                }
                "send" => {
                    self.advance();
                    self.expect(&Tok::LParen)?;
                    let node = self.ident("a node identifier")?;
                    self.expect(&Tok::Slash)?;
                    let name = self.ident("a channel name")?;
                    self.expect(&Tok::Comma)?;
                    let expr = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    self.expect(&Tok::Semi)?;
                    Ok(Command::Send {
                        ch: ChannelRef::new(node, name),
                        expr,
                        span,
                    })
                }
                "output" => {
                    self.advance();
                    self.expect(&Tok::LParen)?;
                    let ch = self.ident("a local channel name")?;
                    self.expect(&Tok::Comma)?;
                    let expr = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    self.expect(&Tok::Semi)?;
                    Ok(Command::Output { ch, expr, span })
                }
                _ => self.assignment(span),
            },
            _ => self.unexpected("a statement"),
        }
    }

    fn assignment(&mut self, span: Span) -> Result<Command, ParseError> {
        let var = self.ident("a statement")?;
        match self.advance() {
            Tok::Assign => {
                let expr = self.expr()?;
                self.expect(&Tok::Semi)?;
                Ok(Command::Assign { var, expr, span })
            }
            Tok::OblivAssign => {
                if self.at_kw("input") && self.peek_at(1) == &Tok::LParen {
                    self.advance();
                    self.advance();
                    let ch = self.ident("a local channel name")?;
                    self.expect(&Tok::Comma)?;
                    let expr = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    self.expect(&Tok::Semi)?;
                    Ok(Command::Input { var, ch, expr, span })
                } else {
                    let expr = self.expr()?;
                    self.expect(&Tok::Semi)?;
                    Ok(Command::OblivAssign { var, expr, span })
                }
            }
            _ => {
                self.pos -= 1;
                self.unexpected("`=` or `?=`")
            }
        }
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq | Tok::Assign => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Caret => BinOp::Concat,
            Tok::Star => BinOp::Mul,
            _ => return None,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.expr_prec(1)
    }

    // Precedence climbing; every operator is left associative.
    fn expr_prec(&mut self, min: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.primary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min {
                break;
            }
            self.advance();
            let rhs = self.expr_prec(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(self.int_value(n, false)?))
            }
            Tok::Minus => {
                self.advance();
                match self.advance() {
                    Tok::Int(n) => Ok(Expr::Int(self.int_value(n, true)?)),
                    _ => {
                        self.pos -= 1;
                        self.unexpected("an integer literal after `-`")
                    }
                }
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(Expr::Var(self.ident("an expression")?)),
            _ => self.unexpected("an expression"),
        }
    }
}

fn fold_seq(mut stmts: Vec<Command>, span: Span) -> Command {
    let Some(mut acc) = stmts.pop() else {
        return Command::Skip(span);
    };
    while let Some(prev) = stmts.pop() {
        acc = Command::seq(prev, acc);
    }
    acc
}
