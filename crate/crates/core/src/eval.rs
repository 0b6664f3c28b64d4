//! Evaluation of checked expressions.
//!
//! `and`/`or` short-circuit, so a guard can protect a partial expression:
//! `false and 1 / 0 > 0` is `false`. Comparisons are exact on doubles.
//! Arithmetic that divides by zero or leaves the finite range is an error.

use thiserror::Error;

use crate::frontend::check::{Builtin, Node, TypedExpr, VarSource};
use crate::frontend::{BinaryOp, UnaryOp};
use crate::trace::Value;

/// Bindings visible while evaluating one expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub fields: &'a [Value],
    pub constants: &'a [Value],
    pub timers: &'a [f64],
    pub scores: &'a [f64],
    pub seq_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
    #[error("`{0}` is not bound in this context")]
    Unbound(String),
}

fn lookup<T: Copy>(slots: &[T], slot: usize, name: &str) -> Result<T, EvalError> {
    slots.get(slot).copied().ok_or_else(|| EvalError::Unbound(name.to_string()))
}

pub fn eval(expr: &TypedExpr, env: &Env<'_>) -> Result<Value, EvalError> {
    match &expr.node {
        Node::Literal(v) => Ok(*v),
        Node::Var { source, slot, name } => match source {
            VarSource::Field => lookup(env.fields, *slot, name),
            VarSource::Constant => lookup(env.constants, *slot, name),
            VarSource::Timer => lookup(env.timers, *slot, name).map(Value::Number),
            VarSource::Score => lookup(env.scores, *slot, name).map(Value::Number),
        },
        Node::SeqTime => env
            .seq_time
            .map(Value::Number)
            .ok_or_else(|| EvalError::Unbound("seq_time".into())),
        Node::Unary(UnaryOp::Neg, e) => Ok(Value::Number(-number(e, env)?)),
        Node::Unary(UnaryOp::Not, e) => Ok(Value::Bool(!boolean(e, env)?)),
        Node::Binary(op, l, r) => binary(expr, *op, l, r, env),
        Node::Call(builtin, args) => call(expr, *builtin, args, env),
    }
}

pub fn eval_number(expr: &TypedExpr, env: &Env<'_>) -> Result<f64, EvalError> {
    number(expr, env)
}

pub fn eval_bool(expr: &TypedExpr, env: &Env<'_>) -> Result<bool, EvalError> {
    boolean(expr, env)
}

fn number(expr: &TypedExpr, env: &Env<'_>) -> Result<f64, EvalError> {
    match eval(expr, env)? {
        Value::Number(x) => Ok(x),
        // the checker guarantees kinds, so this only guards hand-built trees
        other => Err(EvalError::Unbound(format!("{expr} (found {})", other.kind()))),
    }
}

fn boolean(expr: &TypedExpr, env: &Env<'_>) -> Result<bool, EvalError> {
    match eval(expr, env)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::Unbound(format!("{expr} (found {})", other.kind()))),
    }
}

fn finite(expr: &TypedExpr, x: f64) -> Result<Value, EvalError> {
    if x.is_finite() {
        Ok(Value::Number(x))
    } else {
        Err(EvalError::NonFinite(expr.to_string()))
    }
}

fn binary(
    whole: &TypedExpr,
    op: BinaryOp,
    l: &TypedExpr,
    r: &TypedExpr,
    env: &Env<'_>,
) -> Result<Value, EvalError> {
    match op {
        BinaryOp::And => Ok(Value::Bool(boolean(l, env)? && boolean(r, env)?)),
        BinaryOp::Or => Ok(Value::Bool(boolean(l, env)? || boolean(r, env)?)),
        BinaryOp::Add => finite(whole, number(l, env)? + number(r, env)?),
        BinaryOp::Sub => finite(whole, number(l, env)? - number(r, env)?),
        BinaryOp::Mul => finite(whole, number(l, env)? * number(r, env)?),
        BinaryOp::Div => {
            let (a, b) = (number(l, env)?, number(r, env)?);
            if b == 0.0 {
                return Err(EvalError::DivisionByZero(whole.to_string()));
            }
            finite(whole, a / b)
        }
        BinaryOp::Lt => Ok(Value::Bool(number(l, env)? < number(r, env)?)),
        BinaryOp::Le => Ok(Value::Bool(number(l, env)? <= number(r, env)?)),
        BinaryOp::Gt => Ok(Value::Bool(number(l, env)? > number(r, env)?)),
        BinaryOp::Ge => Ok(Value::Bool(number(l, env)? >= number(r, env)?)),
        BinaryOp::Eq | BinaryOp::Ne => {
            let equal = match (eval(l, env)?, eval(r, env)?) {
                (Value::Number(a), Value::Number(b)) => a == b,
                (Value::Bool(a), Value::Bool(b)) => a == b,
                (a, b) => {
                    return Err(EvalError::Unbound(format!(
                        "{whole} (cannot compare {} with {})",
                        a.kind(),
                        b.kind()
                    )))
                }
            };
            Ok(Value::Bool(if op == BinaryOp::Eq { equal } else { !equal }))
        }
    }
}

fn call(whole: &TypedExpr, builtin: Builtin, args: &[TypedExpr], env: &Env<'_>) -> Result<Value, EvalError> {
    match builtin {
        Builtin::Distance => {
            let point = |e: &TypedExpr| match eval(e, env)? {
                Value::Point(p) => Ok(p),
                other => Err(EvalError::Unbound(format!("{e} (found {})", other.kind()))),
            };
            let (p, q) = (point(&args[0])?, point(&args[1])?);
            finite(whole, p.distance(&q))
        }
        Builtin::Abs => Ok(Value::Number(number(&args[0], env)?.abs())),
        Builtin::Min | Builtin::Max => {
            let mut acc = number(&args[0], env)?;
            for a in &args[1..] {
                let x = number(a, env)?;
                acc = if builtin == Builtin::Min { acc.min(x) } else { acc.max(x) };
            }
            Ok(Value::Number(acc))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::check::{check_expr, Scope};
    use crate::frontend::parse_expr;
    use crate::trace::{Point2, TraceSchema, ValueKind};
    use proptest::prelude::*;

    fn schema() -> TraceSchema {
        TraceSchema::new([
            ("speed", ValueKind::Number),
            ("road_normal", ValueKind::Number),
            ("p", ValueKind::Point2),
            ("q", ValueKind::Point2),
        ])
        .unwrap()
    }

    fn constants() -> Vec<(String, Value)> {
        vec![
            ("MAX_SPEED".into(), Value::Number(20.0)),
            ("LW".into(), Value::Number(3.7)),
            ("TH".into(), Value::Number(0.3)),
        ]
    }

    fn run(src: &str, fields: &[Value]) -> Result<Value, EvalError> {
        let schema = schema();
        let consts = constants();
        let expr = check_expr(&parse_expr(src).unwrap(), &Scope::new(&schema, &consts)).unwrap();
        let values: Vec<Value> = consts.iter().map(|(_, v)| *v).collect();
        eval(
            &expr,
            &Env {
                fields,
                constants: &values,
                ..Env::default()
            },
        )
    }

    fn fields(speed: f64, road_normal: f64) -> Vec<Value> {
        vec![
            Value::Number(speed),
            Value::Number(road_normal),
            Value::Point(Point2::new(0.0, 0.0)),
            Value::Point(Point2::new(0.0, 0.0)),
        ]
    }

    #[test]
    fn distance_of_three_four_five() {
        assert_eq!(run("distance(point(0,0), point(3,4))", &[]), Ok(Value::Number(5.0)));
    }

    #[test]
    fn speeding_comparison() {
        assert_eq!(run("speed > MAX_SPEED", &fields(25.0, 0.0)), Ok(Value::Bool(true)));
        assert_eq!(run("speed > MAX_SPEED", &fields(20.0, 0.0)), Ok(Value::Bool(false)));
    }

    #[test]
    fn lane_line_band() {
        let band = "road_normal > LW-TH and road_normal < LW+TH";
        assert_eq!(run(band, &fields(0.0, 3.8)), Ok(Value::Bool(true)));
        assert_eq!(run(band, &fields(0.0, 4.1)), Ok(Value::Bool(false)));
    }

    #[test]
    fn short_circuit_guards_partial_expressions() {
        assert_eq!(run("false and (1/0 > 0)", &[]), Ok(Value::Bool(false)));
        assert_eq!(run("true or (1/0 > 0)", &[]), Ok(Value::Bool(true)));
        assert!(matches!(run("true and (1/0 > 0)", &[]), Err(EvalError::DivisionByZero(e)) if e == "1.0 / 0.0"));
    }

    #[test]
    fn arithmetic_and_builtins() {
        assert_eq!(run("min(3, -1, 2) + max(1, 4) * abs(-2)", &[]), Ok(Value::Number(7.0)));
        assert_eq!(run("-speed / 4", &fields(10.0, 0.0)), Ok(Value::Number(-2.5)));
        assert_eq!(run("1 != 2 == true", &[]), Ok(Value::Bool(true)));
        assert!(matches!(run("1e300 * 1e300", &[]), Err(EvalError::NonFinite(_))));
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(
            a in -1e6f64..1e6, b in -1e6f64..1e6, c in -1e6f64..1e6, d in -1e6f64..1e6,
        ) {
            let f = vec![Value::Number(0.0), Value::Number(0.0),
                Value::Point(Point2::new(a, b)), Value::Point(Point2::new(c, d))];
            let pq = run("distance(p, q)", &f).unwrap().as_number().unwrap();
            let qp = run("distance(q, p)", &f).unwrap().as_number().unwrap();
            prop_assert_eq!(pq, qp);
            prop_assert!(pq >= 0.0);
            prop_assert_eq!(run("distance(p, p)", &f).unwrap(), Value::Number(0.0));
            // purity
            prop_assert_eq!(run("distance(p, q)", &f).unwrap(), Value::Number(pq));
        }
    }
}
