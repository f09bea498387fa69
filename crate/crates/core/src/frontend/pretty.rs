//! Source printer. Output reparses to an equal tree.

use std::fmt::Write;

use super::ast::*;
use crate::lattice::Lattice;
use crate::value::BaseValue;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    let lat = &p.lattice;
    let _ = writeln!(out, "{}", p.node);
    if let Some(decl) = &p.lattice_decl {
        let mut parts: Vec<String> = decl.names.clone();
        parts.extend(decl.pairs.iter().map(|(a, b)| format!("{a} < {b}")));
        let _ = writeln!(out, "lattice {};", parts.join(", "));
    }
    if !p.locals.is_empty() {
        out.push('\n');
    }
    for l in &p.locals {
        let _ = writeln!(out, "local channel {} : {}@{};", l.name, l.ty, lat.name(l.level));
    }
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for g in &p.globals {
        let _ = write!(out, "var {} : {}@{}", g.name, g.ty, lat.name(g.level));
        if let Some(init) = &g.init {
            let _ = write!(out, " = {}", literal(init));
        }
        out.push_str(";\n");
    }
    for h in &p.handlers {
        out.push('\n');
        let _ = write!(out, "{}@{}", h.name, lat.name(h.mode));
        if h.potential != 0 {
            let _ = write!(out, " ${}", h.potential);
        }
        let _ = write!(out, " ({} : {}@{}) ", h.param, h.param_ty, lat.name(h.param_level));
        block(&mut out, &h.body, 0, lat);
        out.push('\n');
    }
    out
}

fn literal(v: &BaseValue) -> String {
    match v {
        BaseValue::Int(n) => n.to_string(),
        BaseValue::Str(s) => quote(s),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn expr_to_string(e: &Expr) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Str(s) => quote(s),
        Expr::Var(x) => x.clone(),
        Expr::Bin(op, l, r) => {
            let prec = op.precedence();
            let side = |child: &Expr, strict: bool| {
                let text = expr_to_string(child);
                match child {
                    Expr::Bin(cop, _, _) if cop.precedence() < prec || (strict && cop.precedence() == prec) => {
                        format!("({text})")
                    }
                    _ => text,
                }
            };
            format!("{} {} {}", side(l, false), op.symbol(), side(r, true))
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, c: &Command, depth: usize, lat: &Lattice) {
    out.push_str("{\n");
    seq_items(out, c, depth + 1, lat);
    indent(out, depth);
    out.push('}');
}

// A sequence prints flat; a left-nested sequence gets its own braces so the
// tree shape survives a reparse.
fn seq_items(out: &mut String, c: &Command, depth: usize, lat: &Lattice) {
    match c {
        Command::Seq(a, b) => {
            if matches!(a.as_ref(), Command::Seq(..)) {
                indent(out, depth);
                block(out, a, depth, lat);
                out.push('\n');
            } else {
                seq_items(out, a, depth, lat);
            }
            seq_items(out, b, depth, lat);
        }
        other => {
            indent(out, depth);
            stmt(out, other, depth, lat);
            out.push('\n');
        }
    }
}

fn branch(out: &mut String, c: &Command, depth: usize, lat: &Lattice) {
    if matches!(c, Command::Seq(..)) {
        block(out, c, depth, lat);
    } else {
        stmt(out, c, depth, lat);
    }
}

fn stmt(out: &mut String, c: &Command, depth: usize, lat: &Lattice) {
    match c {
        Command::Skip(_) => out.push_str("skip;"),
        Command::Seq(..) => block(out, c, depth, lat),
        Command::Assign { var, expr, .. } => {
            let _ = write!(out, "{var} = {};", expr_to_string(expr));
        }
        Command::OblivAssign { var, expr, .. } => {
            let _ = write!(out, "{var} ?= {};", expr_to_string(expr));
        }
        Command::Input { var, ch, expr, .. } => {
            let _ = write!(out, "{var} ?= input({ch}, {});", expr_to_string(expr));
        }
        Command::Send { ch, expr, .. } => {
            let _ = write!(out, "send({ch}, {});", expr_to_string(expr));
        }
        Command::Output { ch, expr, .. } => {
            let _ = write!(out, "output({ch}, {});", expr_to_string(expr));
        }
        Command::If { guard, then, els, .. } => {
            let _ = write!(out, "if {} then ", expr_to_string(guard));
            branch(out, then, depth, lat);
            out.push_str(" else ");
            branch(out, els, depth, lat);
        }
        Command::Oblif { guard, then, els, .. } => {
            let _ = write!(out, "oblif {} then ", expr_to_string(guard));
            branch(out, then, depth, lat);
            out.push_str(" else ");
            branch(out, els, depth, lat);
        }
        Command::While { guard, body, .. } => {
            let _ = write!(out, "while {} do ", expr_to_string(guard));
            branch(out, body, depth, lat);
        }
        // Runtime forms have no surface syntax and do not reparse.
        Command::Pop => out.push_str("pop;"),
        Command::Stop => out.push_str("stop;"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::value::BinOp;
    use proptest::prelude::*;

    const SRC: &str = r#"AUCTIONHOUSE
lattice L < H;
local channel LOG : string@H;
var winner : string@H;
var bid : int@H = -3;
var name : string@L = "a\"b";

TICK@L $4 (dmy : int@L) {
    if round > 0 then {
        oblif winner != "Alice" then send(ALICE/TO_LEAD, bid + 1); else skip;
        round = round - 1;
        { a = 1; b = 2; }
        c = 3;
    } else output(LOG, winner ^ "x");
    while (c > 0) do c = c - 1;
    w ?= input(LOG, 32);
}
"#;

    #[test]
    fn round_trip() {
        let p = parse_program(SRC).unwrap();
        let printed = pretty_print(&p);
        let q = parse_program(&printed).unwrap();
        assert_eq!(p, q);
        assert_eq!(printed, pretty_print(&q));
    }

    #[test]
    fn expression_parens() {
        let e = Expr::bin(
            BinOp::Sub,
            Expr::Var("a".into()),
            Expr::bin(BinOp::Sub, Expr::Var("b".into()), Expr::Int(-1)),
        );
        assert_eq!(expr_to_string(&e), "a - (b - -1)");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            any::<i64>().prop_map(Expr::Int),
            "[a-z ]{0,3}".prop_map(Expr::Str),
            "[a-c]".prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 16, 2, |inner| {
            (0usize..12, inner.clone(), inner).prop_map(|(i, l, r)| {
                let ops = [
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Mul,
                    BinOp::Eq,
                    BinOp::Ne,
                    BinOp::Lt,
                    BinOp::Le,
                    BinOp::Gt,
                    BinOp::Ge,
                    BinOp::And,
                    BinOp::Or,
                    BinOp::Concat,
                ];
                Expr::bin(ops[i], l, r)
            })
        })
    }

    proptest! {
        #[test]
        fn expressions_round_trip(e in arb_expr()) {
            let src = format!("N\nA@L (x : int@L) {{ y ?= {}; }}", expr_to_string(&e));
            let p = parse_program(&src).unwrap();
            let Command::OblivAssign { expr, .. } = &p.handlers[0].body else { panic!() };
            prop_assert_eq!(expr, &e);
        }

        #[test]
        fn parsing_is_total(src in "\\PC{0,80}") {
            let _ = parse_program(&src);
        }
    }
}
