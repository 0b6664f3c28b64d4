//! Static semantics: name resolution and kind checking.
//!
//! Identifiers inside a scoring function resolve, in order, to `seq_time`
//! (conditions only), a constant, a trace field, or one of the function's
//! timers. A function's timers are the names bound by notifications that
//! target it. The summary sees constants and scoring-function scores.

use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::format::format_expr;
use crate::trace::{TraceSchema, Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Distance,
    Abs,
    Min,
    Max,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "distance" => Some(Builtin::Distance),
            "abs" => Some(Builtin::Abs),
            "min" => Some(Builtin::Min),
            "max" => Some(Builtin::Max),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Distance => "distance",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSource {
    Field,
    Constant,
    Timer,
    Score,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Literal(Value),
    Var { source: VarSource, slot: usize, name: String },
    SeqTime,
    Unary(UnaryOp, Box<TypedExpr>),
    Binary(BinaryOp, Box<TypedExpr>, Box<TypedExpr>),
    Call(Builtin, Vec<TypedExpr>),
}

/// A resolved expression annotated with its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedExpr {
    pub node: Node,
    pub ty: ValueKind,
}

impl TypedExpr {
    /// Rebuilds surface syntax, for diagnostics.
    pub fn to_expr(&self) -> Expr {
        match &self.node {
            Node::Literal(v) => Expr::Literal(*v),
            Node::Var { name, .. } => Expr::Ident(name.clone()),
            Node::SeqTime => Expr::ident("seq_time"),
            Node::Unary(op, e) => Expr::unary(*op, e.to_expr()),
            Node::Binary(op, l, r) => Expr::binary(*op, l.to_expr(), r.to_expr()),
            Node::Call(b, args) => Expr::Call(b.name().to_string(), args.iter().map(TypedExpr::to_expr).collect()),
        }
    }
}

impl fmt::Display for TypedExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_expr(&self.to_expr()))
    }
}

/// Names visible to one expression.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub schema: Option<&'a TraceSchema>,
    pub constants: &'a [(String, Value)],
    /// `Some` inside a scoring function; unresolved names are then reported
    /// as timers nobody notifies.
    pub timers: Option<&'a [String]>,
    pub scores: &'a [String],
    pub seq_time: bool,
}

impl<'a> Scope<'a> {
    pub fn new(schema: &'a TraceSchema, constants: &'a [(String, Value)]) -> Self {
        Scope {
            schema: Some(schema),
            constants,
            timers: None,
            scores: &[],
            seq_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckErrorKind {
    #[error("the oracle definition declares no scoring functions")]
    EmptyOd,
    #[error("unresolved identifier `{0}`")]
    Unresolved(String),
    #[error("timer `{timer}` in `{function}` has no notifier (no notification targets `{function}` with `{timer}`)")]
    TimerWithoutNotifier { function: String, timer: String },
    #[error("`seq_time` is only available inside a condition")]
    SeqTimeOutsideCondition,
    #[error("scoring function `{0}` can only be referenced from the summary")]
    ScoreOutsideSummary(String),
    #[error("notification target `{0}` is not a scoring function")]
    UnknownTarget(String),
    #[error("summary references unknown name `{0}`")]
    UnknownSummaryName(String),
    #[error("unknown function `{0}` (built-ins are distance, abs, min, max)")]
    UnknownFunction(String),
    #[error("`{name}` expects {expected} argument(s), got {found}")]
    Arity { name: String, expected: String, found: usize },
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("`{0}` is declared both as {1} and as a trace field or timer")]
    NameClash(String, &'static str),
    #[error("reserved word `{0}` cannot be used as a timer name")]
    ReservedTimer(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {kind}")]
pub struct CheckError {
    pub location: String,
    pub kind: CheckErrorKind,
}

fn type_error(message: String) -> CheckErrorKind {
    CheckErrorKind::Type(message)
}

pub fn check_expr(expr: &Expr, scope: &Scope<'_>) -> Result<TypedExpr, CheckErrorKind> {
    use ValueKind::*;
    let typed = |node, ty| Ok(TypedExpr { node, ty });
    match expr {
        Expr::Literal(v) => typed(Node::Literal(*v), v.kind()),
        Expr::Ident(name) => resolve(name, scope),
        Expr::Unary(op, operand) => {
            let inner = check_expr(operand, scope)?;
            let want = match op {
                UnaryOp::Neg => Number,
                UnaryOp::Not => Boolean,
            };
            if inner.ty != want {
                let op_name = if *op == UnaryOp::Neg { "-" } else { "not" };
                return Err(type_error(format!(
                    "`{op_name}` expects {want}, found {} in `{}`",
                    inner.ty,
                    format_expr(expr)
                )));
            }
            typed(Node::Unary(*op, Box::new(inner)), want)
        }
        Expr::Binary(op, l, r) => {
            let left = check_expr(l, scope)?;
            let right = check_expr(r, scope)?;
            let mismatch = |what: &str| {
                type_error(format!(
                    "`{}` {what}, found {} and {} in `{}`",
                    op.symbol(),
                    left.ty,
                    right.ty,
                    format_expr(expr)
                ))
            };
            let ty = match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    if left.ty != Number || right.ty != Number {
                        return Err(mismatch("expects number operands"));
                    }
                    Number
                }
                BinaryOp::And | BinaryOp::Or => {
                    if left.ty != Boolean || right.ty != Boolean {
                        return Err(mismatch("expects boolean operands"));
                    }
                    Boolean
                }
                BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                    if left.ty != Number || right.ty != Number {
                        return Err(mismatch("ordering is only defined on numbers"));
                    }
                    Boolean
                }
                BinaryOp::Eq | BinaryOp::Ne => {
                    if left.ty != right.ty || left.ty == Point2 {
                        return Err(mismatch("compares two numbers or two booleans"));
                    }
                    Boolean
                }
            };
            typed(Node::Binary(*op, Box::new(left), Box::new(right)), ty)
        }
        Expr::Call(name, args) => {
            if args.is_empty() {
                if let Some(slot) = scope.scores.iter().position(|s| s == name) {
                    return typed(
                        Node::Var {
                            source: VarSource::Score,
                            slot,
                            name: name.clone(),
                        },
                        Number,
                    );
                }
            }
            let builtin = Builtin::from_name(name).ok_or_else(|| CheckErrorKind::UnknownFunction(name.clone()))?;
            let checked = args
                .iter()
                .map(|a| check_expr(a, scope))
                .collect::<Result<Vec<_>, _>>()?;
            let (want, arity_ok, expected) = match builtin {
                Builtin::Distance => (Point2, checked.len() == 2, "2"),
                Builtin::Abs => (Number, checked.len() == 1, "1"),
                Builtin::Min | Builtin::Max => (Number, checked.len() >= 2, "at least 2"),
            };
            if !arity_ok {
                return Err(CheckErrorKind::Arity {
                    name: name.clone(),
                    expected: expected.to_string(),
                    found: checked.len(),
                });
            }
            if let Some(bad) = checked.iter().find(|a| a.ty != want) {
                return Err(type_error(format!(
                    "`{name}` expects {want} arguments, found {} `{bad}`",
                    bad.ty
                )));
            }
            typed(Node::Call(builtin, checked), Number)
        }
    }
}

fn resolve(name: &str, scope: &Scope<'_>) -> Result<TypedExpr, CheckErrorKind> {
    let var = |source, slot, ty| {
        Ok(TypedExpr {
            node: Node::Var {
                source,
                slot,
                name: name.to_string(),
            },
            ty,
        })
    };
    if name == "seq_time" {
        return if scope.seq_time {
            Ok(TypedExpr {
                node: Node::SeqTime,
                ty: ValueKind::Number,
            })
        } else {
            Err(CheckErrorKind::SeqTimeOutsideCondition)
        };
    }
    if let Some(slot) = scope.constants.iter().position(|(n, _)| n == name) {
        return var(VarSource::Constant, slot, scope.constants[slot].1.kind());
    }
    if let Some(slot) = scope.schema.and_then(|s| s.index_of(name)) {
        let kind = scope.schema.and_then(|s| s.kind_of(name)).expect("field exists");
        return var(VarSource::Field, slot, kind);
    }
    if let Some(slot) = scope.scores.iter().position(|s| s == name) {
        return var(VarSource::Score, slot, ValueKind::Number);
    }
    match scope.timers {
        Some(timers) => match timers.iter().position(|t| t == name) {
            Some(slot) => var(VarSource::Timer, slot, ValueKind::Number),
            None => Err(CheckErrorKind::Unresolved(name.to_string())),
        },
        None => Err(CheckErrorKind::Unresolved(name.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedNotification {
    pub target: usize,
    /// (timer slot in the target, timer name, value)
    pub bindings: Vec<(usize, String, TypedExpr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedFunction {
    pub name: String,
    pub event: TypedExpr,
    pub condition: Option<TypedExpr>,
    pub action: Option<TypedExpr>,
    pub frequency: FrequencyMode,
    pub initial: f64,
    pub timers: Vec<String>,
    pub notifications: Vec<CheckedNotification>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckedSummary {
    Sum,
    Expr(TypedExpr),
}

/// An oracle definition resolved against a trace schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedOd {
    pub source: OracleDefinition,
    pub schema: TraceSchema,
    pub constants: Vec<Value>,
    pub functions: Vec<CheckedFunction>,
    pub summary: CheckedSummary,
}

impl CheckedOd {
    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.name.as_str())
    }
}

/// Timer names per function, in order of first appearance in notifications.
fn collect_timers(od: &OracleDefinition) -> Vec<Vec<String>> {
    let mut timers = vec![Vec::<String>::new(); od.functions.len()];
    for f in &od.functions {
        for n in &f.notifications {
            if let Some(target) = od.functions.iter().position(|g| g.name == n.target) {
                for (timer, _) in &n.bindings {
                    if !timers[target].contains(timer) {
                        timers[target].push(timer.clone());
                    }
                }
            }
        }
    }
    timers
}

/// Checks that need no trace schema: non-empty, notification targets and
/// summary references exist.
pub fn check_structure(od: &OracleDefinition) -> Result<(), CheckError> {
    if od.functions.is_empty() {
        return Err(CheckError {
            location: "oracle definition".into(),
            kind: CheckErrorKind::EmptyOd,
        });
    }
    for f in &od.functions {
        for n in &f.notifications {
            if od.function(&n.target).is_none() {
                return Err(CheckError {
                    location: format!("function `{}`, notifications", f.name),
                    kind: CheckErrorKind::UnknownTarget(n.target.clone()),
                });
            }
            for (timer, _) in &n.bindings {
                if super::parser::is_reserved(timer) {
                    return Err(CheckError {
                        location: format!("function `{}`, notifications", f.name),
                        kind: CheckErrorKind::ReservedTimer(timer.clone()),
                    });
                }
            }
        }
    }
    if let Summary::Expr(e) = &od.summary {
        let names = known_summary_names(od);
        for ident in e.identifiers() {
            if !names.contains(&ident) {
                return Err(CheckError {
                    location: "summary".into(),
                    kind: CheckErrorKind::UnknownSummaryName(ident.to_string()),
                });
            }
        }
    }
    Ok(())
}

fn known_summary_names(od: &OracleDefinition) -> Vec<&str> {
    od.constants
        .iter()
        .map(|(n, _)| n.as_str())
        .chain(od.function_names())
        .collect()
}

fn fail_at(function: &str, param: &str, kind: CheckErrorKind, function_names: &[String]) -> CheckError {
    CheckError {
        location: format!("function `{function}`, {param}"),
        kind: explain_unresolved(kind, function, function_names),
    }
}

pub fn check_od(od: &OracleDefinition, schema: &TraceSchema) -> Result<CheckedOd, CheckError> {
    check_structure(od)?;

    for (name, _) in &od.constants {
        if schema.index_of(name).is_some() {
            return Err(CheckError {
                location: format!("constant `{name}`"),
                kind: CheckErrorKind::NameClash(name.clone(), "a constant"),
            });
        }
    }
    for f in &od.functions {
        if schema.index_of(&f.name).is_some() {
            return Err(CheckError {
                location: format!("function `{}`", f.name),
                kind: CheckErrorKind::NameClash(f.name.clone(), "a scoring function"),
            });
        }
    }

    let timers = collect_timers(od);
    for (f, names) in od.functions.iter().zip(&timers) {
        for timer in names {
            let clash = schema.index_of(timer).is_some()
                || od.constants.iter().any(|(c, _)| c == timer)
                || od.function(timer).is_some();
            if clash {
                return Err(CheckError {
                    location: format!("timer `{timer}` of function `{}`", f.name),
                    kind: CheckErrorKind::NameClash(timer.clone(), "a timer"),
                });
            }
        }
    }

    let function_names: Vec<String> = od.function_names().map(str::to_string).collect();
    let mut functions = Vec::with_capacity(od.functions.len());
    for (f, own_timers) in od.functions.iter().zip(&timers) {
        let scope = Scope {
            schema: Some(schema),
            constants: &od.constants,
            timers: Some(own_timers),
            scores: &[],
            seq_time: false,
        };
        let names = &function_names;
        let at = |param: &'static str| move |kind: CheckErrorKind| fail_at(&f.name, param, kind, names);
        let expect = |e: TypedExpr, want: ValueKind, param: &'static str| {
            if e.ty == want {
                Ok(e)
            } else {
                Err(fail_at(&f.name, param, type_error(format!("{param} must be {want}, found {} `{e}`", e.ty)), names))
            }
        };

        let event = check_expr(&f.event, &scope).map_err(at("event"))?;
        let event = expect(event, ValueKind::Boolean, "event")?;
        let condition = match &f.condition {
            Some(c) => {
                let cscope = Scope { seq_time: true, ..scope };
                let c = check_expr(c, &cscope).map_err(at("condition"))?;
                Some(expect(c, ValueKind::Boolean, "condition")?)
            }
            None => None,
        };
        let action = match &f.action {
            Some(a) => {
                let a = check_expr(a, &scope).map_err(at("action"))?;
                Some(expect(a, ValueKind::Number, "action")?)
            }
            None => None,
        };
        let mut notifications = Vec::new();
        for n in &f.notifications {
            let target = od.functions.iter().position(|g| g.name == n.target).expect("checked above");
            let mut bindings = Vec::new();
            for (timer, value) in &n.bindings {
                let v = check_expr(value, &scope).map_err(at("notifications"))?;
                let v = expect(v, ValueKind::Number, "notification value")?;
                let slot = timers[target].iter().position(|t| t == timer).expect("collected");
                bindings.push((slot, timer.clone(), v));
            }
            notifications.push(CheckedNotification { target, bindings });
        }
        functions.push(CheckedFunction {
            name: f.name.clone(),
            event,
            condition,
            action,
            frequency: f.frequency,
            initial: f.initial_score(),
            timers: own_timers.clone(),
            notifications,
        });
    }

    let summary = match &od.summary {
        Summary::Sum => CheckedSummary::Sum,
        Summary::Expr(e) => {
            let scope = Scope {
                schema: None,
                constants: &od.constants,
                timers: None,
                scores: &function_names,
                seq_time: false,
            };
            let at = |kind| CheckError {
                location: "summary".into(),
                kind: match kind {
                    CheckErrorKind::Unresolved(n) => CheckErrorKind::UnknownSummaryName(n),
                    other => other,
                },
            };
            let typed = check_expr(e, &scope).map_err(at)?;
            if typed.ty != ValueKind::Number {
                return Err(at(type_error(format!("summary must be number, found {}", typed.ty))));
            }
            CheckedSummary::Expr(typed)
        }
    };

    Ok(CheckedOd {
        source: od.clone(),
        schema: schema.clone(),
        constants: od.constants.iter().map(|(_, v)| *v).collect(),
        functions,
        summary,
    })
}

/// Inside a scoring function an unresolved name is either another function's
/// score or a timer that nobody sets.
fn explain_unresolved(kind: CheckErrorKind, function: &str, functions: &[String]) -> CheckErrorKind {
    match kind {
        CheckErrorKind::Unresolved(name) if functions.contains(&name) => CheckErrorKind::ScoreOutsideSummary(name),
        CheckErrorKind::Unresolved(name) => CheckErrorKind::TimerWithoutNotifier {
            function: function.to_string(),
            timer: name,
        },
        other => other,
    }
}
