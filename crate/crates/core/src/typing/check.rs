use std::fmt;

use thiserror::Error;

use super::envs::{ChannelEnv, EnvError, TypeEnvs, VarType};
use crate::frontend::{Command, Expr, Handler, Program, Span};
use crate::lattice::Level;
use crate::value::BaseType;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    FlowViolation,
    PublicGuardViolation,
    PotentialDeficit,
    NonObliviousAssign,
    WhileUnderSecretPc,
    SortMismatch,
    UnknownIdentifier,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::FlowViolation => "flow violation",
            TypeErrorKind::PublicGuardViolation => "guard label violation",
            TypeErrorKind::PotentialDeficit => "potential deficit",
            TypeErrorKind::NonObliviousAssign => "non-oblivious assignment under secret pc",
            TypeErrorKind::WhileUnderSecretPc => "while under secret pc",
            TypeErrorKind::SortMismatch => "sort mismatch",
            TypeErrorKind::UnknownIdentifier => "unknown identifier",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {detail}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: Span,
    pub detail: String,
}

impl TypeError {
    fn new(kind: TypeErrorKind, span: Span, detail: impl Into<String>) -> TypeError {
        TypeError {
            kind,
            span,
            detail: detail.into(),
        }
    }
}

/// Failure to type a whole system of nodes.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{}", render_node_errors(.0))]
    Type(Vec<(String, TypeError)>),
}

fn render_node_errors(errs: &[(String, TypeError)]) -> String {
    errs.iter()
        .map(|(node, e)| format!("{node}:{e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Principal type of `e`. Literals sit at ⊥.
pub fn type_expr(envs: &TypeEnvs, e: &Expr) -> Result<(BaseType, Level), TypeError> {
    type_expr_at(envs, e, Span::default())
}

fn type_expr_at(envs: &TypeEnvs, e: &Expr, span: Span) -> Result<(BaseType, Level), TypeError> {
    let bot = envs.lattice.bottom();
    match e {
        Expr::Int(_) => Ok((BaseType::Int, bot)),
        Expr::Str(_) => Ok((BaseType::Str, bot)),
        Expr::Var(x) => envs
            .var(x)
            .map(|t| (t.ty, t.level))
            .ok_or_else(|| TypeError::new(TypeErrorKind::UnknownIdentifier, span, format!("unbound variable `{x}`"))),
        Expr::Bin(op, l, r) => {
            let (t1, l1) = type_expr_at(envs, l, span)?;
            let (t2, l2) = type_expr_at(envs, r, span)?;
            let ty = op.signature(t1, t2).ok_or_else(|| {
                TypeError::new(
                    TypeErrorKind::SortMismatch,
                    span,
                    format!("operator `{}` is not defined on {t1} and {t2}", op.symbol()),
                )
            })?;
            Ok((ty, envs.lattice.lub(l1, l2)))
        }
    }
}

/// Least `q` with `pc ⊢^q c`, or `None` when `c` does not type at any `q`.
pub fn infer_min_potential(envs: &TypeEnvs, pc: Level, c: &Command) -> Option<u64> {
    infer(envs, pc, c).ok()
}

/// Checks `pc ⊢^q c`. Annotations may exceed the minimum.
pub fn check_command(envs: &TypeEnvs, pc: Level, q: u64, c: &Command) -> Result<(), TypeError> {
    let min = infer(envs, pc, c)?;
    if min > q {
        return Err(TypeError::new(
            TypeErrorKind::PotentialDeficit,
            c.span(),
            format!("needs potential {min}, annotated {q}"),
        ));
    }
    Ok(())
}

fn name(envs: &TypeEnvs, l: Level) -> &str {
    envs.lattice.name(l)
}

fn flows(envs: &TypeEnvs, from: Level, to: Level, span: Span, what: &str) -> Result<(), TypeError> {
    if envs.lattice.leq(from, to) {
        Ok(())
    } else {
        Err(TypeError::new(
            TypeErrorKind::FlowViolation,
            span,
            format!("{what}: {} does not flow to {}", name(envs, from), name(envs, to)),
        ))
    }
}

fn same_sort(expected: BaseType, found: BaseType, span: Span, what: &str) -> Result<(), TypeError> {
    if expected == found {
        Ok(())
    } else {
        Err(TypeError::new(
            TypeErrorKind::SortMismatch,
            span,
            format!("{what}: expected {expected}, found {found}"),
        ))
    }
}

fn assignable(envs: &TypeEnvs, x: &str, span: Span) -> Result<VarType, TypeError> {
    if envs.is_param(x) {
        return Err(TypeError::new(
            TypeErrorKind::UnknownIdentifier,
            span,
            format!("`{x}` is the handler parameter and cannot be assigned"),
        ));
    }
    envs.gamma
        .get(x)
        .copied()
        .ok_or_else(|| TypeError::new(TypeErrorKind::UnknownIdentifier, span, format!("unbound variable `{x}`")))
}

fn int_guard(envs: &TypeEnvs, guard: &Expr, span: Span) -> Result<Level, TypeError> {
    let (ty, l) = type_expr_at(envs, guard, span)?;
    same_sort(BaseType::Int, ty, span, "guard")?;
    Ok(l)
}

fn infer(envs: &TypeEnvs, pc: Level, c: &Command) -> Result<u64, TypeError> {
    let lat = &envs.lattice;
    match c {
        Command::Skip(_) | Command::Pop | Command::Stop => Ok(0),
        Command::Seq(a, b) => Ok(infer(envs, pc, a)? + infer(envs, pc, b)?),
        Command::Assign { var, expr, span } => {
            if !lat.is_bottom(pc) {
                return Err(TypeError::new(
                    TypeErrorKind::NonObliviousAssign,
                    *span,
                    format!("`{var} = ...` under pc {}; use `?=`", name(envs, pc)),
                ));
            }
            let xt = assignable(envs, var, *span)?;
            let (ty, le) = type_expr_at(envs, expr, *span)?;
            same_sort(xt.ty, ty, *span, &format!("assignment to `{var}`"))?;
            flows(envs, le, xt.level, *span, &format!("assignment to `{var}`"))?;
            Ok(0)
        }
        Command::OblivAssign { var, expr, span } => {
            let xt = assignable(envs, var, *span)?;
            let (ty, le) = type_expr_at(envs, expr, *span)?;
            same_sort(xt.ty, ty, *span, &format!("assignment to `{var}`"))?;
            flows(envs, lat.lub(le, pc), xt.level, *span, &format!("assignment to `{var}`"))?;
            Ok(0)
        }
        Command::Input { var, ch, expr, span } => {
            let xt = assignable(envs, var, *span)?;
            let cht = envs.pi.get(ch).copied().ok_or_else(|| {
                TypeError::new(TypeErrorKind::UnknownIdentifier, *span, format!("unknown local channel `{ch}`"))
            })?;
            let (ty, le) = type_expr_at(envs, expr, *span)?;
            same_sort(BaseType::Int, ty, *span, "input size")?;
            same_sort(xt.ty, cht.ty, *span, &format!("input from `{ch}` into `{var}`"))?;
            flows(envs, lat.lub(le, pc), cht.level, *span, &format!("input from `{ch}`"))?;
            flows(envs, cht.level, xt.level, *span, &format!("input into `{var}`"))?;
            Ok(0)
        }
        Command::Output { ch, expr, span } => {
            let cht = envs.pi.get(ch).copied().ok_or_else(|| {
                TypeError::new(TypeErrorKind::UnknownIdentifier, *span, format!("unknown local channel `{ch}`"))
            })?;
            let (ty, le) = type_expr_at(envs, expr, *span)?;
            same_sort(cht.ty, ty, *span, &format!("output to `{ch}`"))?;
            flows(envs, lat.lub(le, pc), cht.level, *span, &format!("output to `{ch}`"))?;
            Ok(0)
        }
        Command::Send { ch, expr, span } => {
            let t = envs.lambda.get(ch).copied().ok_or_else(|| {
                TypeError::new(TypeErrorKind::UnknownIdentifier, *span, format!("no handler for channel `{ch}`"))
            })?;
            let (ty, le) = type_expr_at(envs, expr, *span)?;
            same_sort(t.ty, ty, *span, &format!("send on `{ch}`"))?;
            flows(envs, pc, t.mode, *span, &format!("pc for send on `{ch}`"))?;
            flows(envs, le, t.val, *span, &format!("value sent on `{ch}`"))?;
            Ok(if lat.is_bottom(pc) { 0 } else { 1 + t.potential })
        }
        Command::If { guard, then, els, span } => {
            let l = int_guard(envs, guard, *span)?;
            if !lat.is_bottom(l) {
                return Err(TypeError::new(
                    TypeErrorKind::PublicGuardViolation,
                    *span,
                    format!("`if` guard is {}; branch on secrets with `oblif`", name(envs, l)),
                ));
            }
            Ok(infer(envs, pc, then)?.max(infer(envs, pc, els)?))
        }
        Command::While { guard, body, span } => {
            if !lat.is_bottom(pc) {
                return Err(TypeError::new(
                    TypeErrorKind::WhileUnderSecretPc,
                    *span,
                    format!("`while` under pc {}", name(envs, pc)),
                ));
            }
            let l = int_guard(envs, guard, *span)?;
            if !lat.is_bottom(l) {
                return Err(TypeError::new(
                    TypeErrorKind::PublicGuardViolation,
                    *span,
                    format!("`while` guard is {}", name(envs, l)),
                ));
            }
            let inner = infer(envs, pc, body)?;
            if inner > 0 {
                return Err(TypeError::new(
                    TypeErrorKind::PotentialDeficit,
                    *span,
                    format!("loop body needs potential {inner}, loops allow none"),
                ));
            }
            Ok(0)
        }
        Command::Oblif { guard, then, els, span } => {
            let l = int_guard(envs, guard, *span)?;
            if lat.is_bottom(l) {
                return Err(TypeError::new(
                    TypeErrorKind::PublicGuardViolation,
                    *span,
                    "`oblif` guard is public; use `if`",
                ));
            }
            let inner = lat.lub(pc, l);
            Ok(infer(envs, inner, then)? + infer(envs, inner, els)?)
        }
    }
}

/// Annotated and least potential of one handler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerPotential {
    pub name: String,
    pub annotated: u64,
    pub inferred: Option<u64>,
}

fn handler_envs(base: &TypeEnvs, h: &Handler) -> TypeEnvs {
    base.with_param(
        &h.param,
        VarType {
            ty: h.param_ty,
            level: h.param_level,
        },
    )
}

pub fn handler_potentials(p: &Program, lambda: &ChannelEnv) -> Vec<HandlerPotential> {
    let base = TypeEnvs::for_program(p, lambda);
    p.handlers
        .iter()
        .map(|h| HandlerPotential {
            name: h.name.clone(),
            annotated: h.potential,
            inferred: infer_min_potential(&handler_envs(&base, h), h.mode, &h.body),
        })
        .collect()
}

/// Checks every handler of `p` against Λ, plus the sorts of variable
/// initializers.
pub fn check_program(p: &Program, lambda: &ChannelEnv) -> Result<(), Vec<TypeError>> {
    let mut errs = Vec::new();
    for g in &p.globals {
        if let Some(init) = &g.init {
            if init.base_type() != g.ty {
                errs.push(TypeError::new(
                    TypeErrorKind::SortMismatch,
                    g.span,
                    format!("`{}` is {} but initialized with {}", g.name, g.ty, init.base_type()),
                ));
            }
        }
    }
    let base = TypeEnvs::for_program(p, lambda);
    for h in &p.handlers {
        let q = lambda.get(&p.channel(h)).map_or(h.potential, |t| t.potential);
        if let Err(e) = check_command(&handler_envs(&base, h), h.mode, q, &h.body) {
            errs.push(TypeError {
                detail: format!("handler {}: {}", h.name, e.detail),
                ..e
            });
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Builds Λ from all nodes and checks each of them against it.
pub fn check_system(programs: &[Program]) -> Result<ChannelEnv, SystemError> {
    let lambda = ChannelEnv::build(programs)?;
    let errs: Vec<(String, TypeError)> = programs
        .iter()
        .filter_map(|p| check_program(p, &lambda).err().map(|es| (p, es)))
        .flat_map(|(p, es)| es.into_iter().map(move |e| (p.node.clone(), e)))
        .collect();
    if errs.is_empty() {
        Ok(lambda)
    } else {
        Err(SystemError::Type(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use proptest::prelude::*;

    fn system(srcs: &[&str]) -> Vec<Program> {
        srcs.iter().map(|s| parse_program(s).unwrap()).collect()
    }

    fn envs_for(p: &Program, lambda: &ChannelEnv, handler: &str) -> TypeEnvs {
        let h = p.handler(handler).unwrap();
        handler_envs(&TypeEnvs::for_program(p, lambda), h)
    }

    fn kind_of(p: &Program, lambda: &ChannelEnv) -> TypeErrorKind {
        check_program(p, lambda).unwrap_err()[0].kind
    }

    const SINK: &str = "B\nCH@H (y: int@H) { skip; }\nLOW@L (y: int@L) { skip; }";

    fn l(p: &Program, n: &str) -> Level {
        p.lattice.level(n).unwrap()
    }

    #[test]
    fn expression_levels_join() {
        let ps = system(&["A\nvar x: int@H;\nvar y: int@L;\nvar s: string@L;\nH@L (p: int@L) { skip; }"]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        let e = TypeEnvs::for_program(&ps[0], &lambda);
        let parse = |src: &str| {
            let p = parse_program(&format!("A\nH@L (p: int@L) {{ s ?= {src}; }}")).unwrap();
            match &p.handlers[0].body {
                Command::OblivAssign { expr, .. } => expr.clone(),
                _ => unreachable!(),
            }
        };
        assert_eq!(type_expr(&e, &parse("x + 1")).unwrap(), (BaseType::Int, l(&ps[0], "H")));
        assert_eq!(type_expr(&e, &parse("y < x")).unwrap(), (BaseType::Int, l(&ps[0], "H")));
        assert_eq!(type_expr(&e, &parse("s ^ s")).unwrap(), (BaseType::Str, l(&ps[0], "L")));
        assert_eq!(type_expr(&e, &parse("s == \"a\"")).unwrap(), (BaseType::Int, l(&ps[0], "L")));
        let err = type_expr(&e, &parse("s < s")).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::SortMismatch);
        let err = type_expr(&e, &parse("zz + 1")).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::UnknownIdentifier);
    }

    #[test]
    fn send_potential() {
        let ps = system(&[
            "A\nvar s: int@H;\nP@L (x: int@L) { send(B/CH, 1); }\nQ@L $1 (x: int@L) { oblif s then send(B/CH, 1); else skip; }",
            SINK,
        ]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        let bot = ps[0].lattice.bottom();
        let e = envs_for(&ps[0], &lambda, "P");
        assert_eq!(infer_min_potential(&e, bot, &ps[0].handler("P").unwrap().body), Some(0));
        let e = envs_for(&ps[0], &lambda, "Q");
        let body = &ps[0].handler("Q").unwrap().body;
        assert_eq!(infer_min_potential(&e, bot, body), Some(1));
        assert!(check_command(&e, bot, 1, body).is_ok());
        assert_eq!(check_command(&e, bot, 0, body).unwrap_err().kind, TypeErrorKind::PotentialDeficit);
        assert!(check_program(&ps[0], &lambda).is_ok());
    }

    #[test]
    fn rule_violations() {
        let ps = system(&[
            "A\nvar h: int@H;\nvar lo: int@L;\n\
             P1@H (x: int@H) { lo = 1; }\n\
             P2@L (x: int@L) { while h do skip; }\n\
             P3@H (x: int@H) { while 1 do skip; }\n\
             P4@L (x: int@L) { if h then skip; }\n\
             P5@L (x: int@L) { oblif lo then skip; else skip; }\n\
             P6@L (x: int@L) { lo ?= h; }\n\
             P7@L (x: int@L) { x = 1; }\n\
             P8@L (x: int@L) { send(B/LOW, h); }\n\
             P9@H (x: int@H) { send(B/LOW, 1); }\n\
             P10@L (x: int@L) { send(B/NOPE, 1); }\n\
             P11@L (x: int@L) { lo ?= \"s\"; }\n\
             P12@L (x: int@L) { while lo do { oblif h then send(B/CH, 1); else skip; } }",
            SINK,
        ]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        let errs = check_program(&ps[0], &lambda).unwrap_err();
        let kinds: Vec<TypeErrorKind> = errs.iter().map(|e| e.kind).collect();
        use TypeErrorKind::*;
        assert_eq!(
            kinds,
            vec![
                NonObliviousAssign,
                PublicGuardViolation,
                WhileUnderSecretPc,
                PublicGuardViolation,
                PublicGuardViolation,
                FlowViolation,
                UnknownIdentifier,
                FlowViolation,
                FlowViolation,
                UnknownIdentifier,
                SortMismatch,
                PotentialDeficit,
            ]
        );
        assert!(errs.iter().all(|e| e.span.line > 0));
    }

    #[test]
    fn local_channels() {
        let ps = system(&[
            "A\nlocal channel IN: string@H;\nlocal channel OUT: string@L;\nvar m: string@H;\nvar pub: string@L;\n\
             P@L (x: int@L) { m ?= input(IN, 8); }\n\
             Q@L (x: int@L) { pub ?= input(IN, 8); }\n\
             R@L (x: string@H) { output(OUT, x); }\n\
             S@L (x: string@L) { oblif m == \"\" then output(OUT, x); else skip; }",
        ]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        let errs = check_program(&ps[0], &lambda).unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(errs.iter().all(|e| e.kind == TypeErrorKind::FlowViolation));
        assert!(errs[0].detail.contains("handler Q"));
        assert!(errs[2].detail.contains("handler S"));
    }

    #[test]
    fn initializer_sorts() {
        let ps = system(&["A\nvar x: int@L = \"no\";"]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        assert_eq!(kind_of(&ps[0], &lambda), TypeErrorKind::SortMismatch);
    }

    #[test]
    fn empty_program() {
        let ps = system(&["A"]);
        assert!(check_system(&ps).is_ok());
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let ps = system(&["A", "A"]);
        assert!(matches!(check_system(&ps), Err(SystemError::Env(EnvError::DuplicateNode(_)))));
    }

    #[test]
    fn if_takes_max_of_branches() {
        let ps = system(&[
            "A\nvar h: int@H;\n\
             P@L $2 (x: int@L) { if x then { oblif h then send(B/CH, 1); else skip; } \
             else { oblif h then send(B/CH, 1); else send(B/CH, 2); } }",
            SINK,
        ]);
        let lambda = ChannelEnv::build(&ps).unwrap();
        let e = envs_for(&ps[0], &lambda, "P");
        assert_eq!(infer_min_potential(&e, ps[0].lattice.bottom(), &ps[0].handlers[0].body), Some(2));
    }

    fn ping_pong(a: u64, b: u64) -> Vec<Program> {
        system(&[
            &format!("A\nPING@H ${a} (x: int@H) {{ oblif x then send(B/PONG, 1); else send(B/PONG, 0); }}"),
            &format!("B\nPONG@H ${b} (x: int@H) {{ oblif x then send(A/PING, 1); else send(A/PING, 0); }}"),
        ])
    }

    #[test]
    fn ping_pong_unsat_everywhere() {
        for a in 0..=10 {
            for b in 0..=10 {
                match check_system(&ping_pong(a, b)) {
                    Err(SystemError::Type(errs)) => {
                        assert!(errs.iter().any(|(_, e)| e.kind == TypeErrorKind::PotentialDeficit))
                    }
                    other => panic!("({a},{b}) accepted: {other:?}"),
                }
            }
        }
    }

    // The demands q_PING >= 2(1 + q_PONG) and q_PONG >= 2(1 + q_PING) have no
    // solution; inference agrees with that closed form.
    #[test]
    fn ping_pong_demand_formula() {
        for a in 0..=5 {
            for b in 0..=5 {
                let ps = ping_pong(a, b);
                let lambda = ChannelEnv::build(&ps).unwrap();
                let pa = handler_potentials(&ps[0], &lambda);
                let pb = handler_potentials(&ps[1], &lambda);
                assert_eq!(pa[0].inferred, Some(2 * (1 + b)));
                assert_eq!(pb[0].inferred, Some(2 * (1 + a)));
            }
        }
    }

    fn secret_cmd() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("skip;".to_string()),
            Just("send(B/CH, h);".to_string()),
            Just("send(B/LOW, 1);".to_string()),
            Just("g ?= h;".to_string()),
            Just("lo = 1;".to_string()),
            Just("while lo do lo = lo - 1;".to_string()),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{{ {a} {b} }}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("oblif h then {a} else {b}")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("if lo then {a} else {b}")),
            ]
        })
    }

    proptest! {
        #[test]
        fn potential_monotone_and_tight(body in secret_cmd(), extra in 0u64..4) {
            let src = format!("A\nvar h: int@H;\nvar g: int@H;\nvar lo: int@L;\nP@L (x: int@L) {{ {body} }}");
            let ps = system(&[&src, SINK]);
            let lambda = ChannelEnv::build(&ps).unwrap();
            let e = envs_for(&ps[0], &lambda, "P");
            let bot = ps[0].lattice.bottom();
            let c = &ps[0].handlers[0].body;
            if let Some(min) = infer_min_potential(&e, bot, c) {
                prop_assert!(check_command(&e, bot, min, c).is_ok());
                prop_assert!(check_command(&e, bot, min + extra, c).is_ok());
                if min > 0 {
                    prop_assert_eq!(check_command(&e, bot, min - 1, c).unwrap_err().kind, TypeErrorKind::PotentialDeficit);
                }
            } else {
                prop_assert!(check_command(&e, bot, 1000, c).is_err());
            }
        }

        // Plain assignment and loops only type where pc is ⊥, i.e. outside
        // every oblif.
        #[test]
        fn low_forms_only_outside_oblif(body in secret_cmd()) {
            let src = format!("A\nvar h: int@H;\nvar g: int@H;\nvar lo: int@L;\nP@L $1000 (x: int@L) {{ {body} }}");
            let ps = system(&[&src, SINK]);
            let lambda = ChannelEnv::build(&ps).unwrap();
            let ok = check_program(&ps[0], &lambda).is_ok();
            fn low_under_oblif(c: &Command, secret: bool) -> bool {
                match c {
                    Command::Assign { .. } | Command::While { .. } if secret => true,
                    Command::Seq(a, b) => low_under_oblif(a, secret) || low_under_oblif(b, secret),
                    Command::If { then, els, .. } => low_under_oblif(then, secret) || low_under_oblif(els, secret),
                    Command::Oblif { then, els, .. } => low_under_oblif(then, true) || low_under_oblif(els, true),
                    Command::While { body, .. } => low_under_oblif(body, secret),
                    _ => false,
                }
            }
            if low_under_oblif(&ps[0].handlers[0].body, false) {
                prop_assert!(!ok);
            }
        }
    }
}
