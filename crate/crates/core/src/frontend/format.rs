//! Canonical pretty-printer. Output re-parses to a structurally equal AST.

use std::fmt::Write;

use super::ast::*;
use crate::trace::Value;

const NOT_PREC: u8 = 3;
const NEG_PREC: u8 = 7;
const ATOM_PREC: u8 = 8;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Unary(UnaryOp::Not, _) => NOT_PREC,
        Expr::Unary(UnaryOp::Neg, _) => NEG_PREC,
        Expr::Literal(Value::Number(x)) if x.is_sign_negative() => NEG_PREC,
        _ => ATOM_PREC,
    }
}

fn number(x: f64) -> String {
    format!("{x:?}")
}

fn literal(v: &Value) -> String {
    match v {
        Value::Number(x) => number(*x),
        Value::Bool(b) => b.to_string(),
        Value::Point(p) => format!("point({}, {})", number(p.x), number(p.y)),
    }
}

fn write_child(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Literal(v) => out.push_str(&literal(v)),
        Expr::Ident(name) => out.push_str(name),
        Expr::Unary(UnaryOp::Not, operand) => {
            out.push_str("not ");
            write_child(out, operand, expr_prec(operand) < NOT_PREC);
        }
        Expr::Unary(UnaryOp::Neg, operand) => {
            out.push('-');
            // `-` directly before a number would fold into a negative literal
            let folds = matches!(**operand, Expr::Literal(Value::Number(x)) if !x.is_sign_negative());
            write_child(out, operand, folds || expr_prec(operand) < NEG_PREC);
        }
        Expr::Binary(op, left, right) => {
            let p = op.precedence();
            // chained comparisons parse left to right but read ambiguously
            let chained = op.is_comparison() && matches!(**left, Expr::Binary(l, _, _) if l.is_comparison());
            write_child(out, left, chained || expr_prec(left) < p);
            let _ = write!(out, " {} ", op.symbol());
            write_child(out, right, expr_prec(right) <= p);
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn format_function(out: &mut String, f: &ScoringFunctionDef) {
    let mut params = vec![format!("event = {}", format_expr(&f.event))];
    if let Some(c) = &f.condition {
        params.push(format!("condition = {}", format_expr(c)));
    }
    if let Some(a) = &f.action {
        params.push(format!("action = {}", format_expr(a)));
    }
    params.push(format!("frequency = {}", f.frequency.keyword()));
    if let Some(init) = f.initial {
        params.push(format!("initial = {}", number(init)));
    }
    if !f.notifications.is_empty() {
        let list: Vec<String> = f
            .notifications
            .iter()
            .map(|n| {
                let bindings: Vec<String> = n
                    .bindings
                    .iter()
                    .map(|(timer, value)| format!("({timer}, {})", format_expr(value)))
                    .collect();
                format!("({}, [{}])", n.target, bindings.join(", "))
            })
            .collect();
        params.push(format!("notifications = [{}]", list.join(", ")));
    }
    let _ = writeln!(out, "{} = scoring_function(", f.name);
    let _ = writeln!(out, "    {}", params.join(",\n    "));
    out.push_str(");\n");
}

/// Renders an oracle definition: constants, functions, then an explicit summary.
pub fn format_od(od: &OracleDefinition) -> String {
    let mut out = String::new();
    for (name, value) in &od.constants {
        let _ = writeln!(out, "const {name} = {};", literal(value));
    }
    for f in &od.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        format_function(&mut out, f);
    }
    match &od.summary {
        Summary::Sum if od.functions.is_empty() => {}
        Summary::Sum => out.push_str("\nsummary = sum;\n"),
        Summary::Expr(e) => {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "summary = {};", format_expr(e));
        }
    }
    out
}
