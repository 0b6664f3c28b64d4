//! The oracle definition language: lexer, parser, checker and formatter.
//!
//! ```text
//! od          := { const_decl | sf_decl } [ summary_decl ]
//! const_decl  := "const" IDENT "=" literal ";"
//! sf_decl     := IDENT "=" "scoring_function" "(" param { "," param } ")" ";"
//! param       := "event" "=" expr | "condition" "=" expr | "action" "=" expr
//!              | "frequency" "=" ("first"|"action_sum"|"all_sum")
//!              | "initial" "=" number | "notifications" "=" notif_list
//! notif_list  := "[" notif { "," notif } "]"
//! notif       := "(" IDENT "," "[" binding { "," binding } "]" ")"
//! binding     := "(" IDENT "," expr ")"
//! summary_decl:= "summary" "=" ("sum" | expr) ";"
//! literal     := number | "true" | "false" | "point" "(" number "," number ")"
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

pub mod ast;
pub mod check;
pub mod format;
mod lexer;
pub mod parser;

pub use ast::*;
pub use check::{check_expr, check_od, check_structure, CheckError, CheckErrorKind, CheckedOd, Scope, TypedExpr};
pub use format::{format_expr, format_od};
pub use parser::{parse_expr, parse_od};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    DuplicateParam,
    DuplicateName,
    UnknownFrequency,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {}: {message}", self.kind_label())]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn kind_label(&self) -> &'static str {
        match self.kind {
            ParseErrorKind::Lexical => "lexical error",
            _ => "syntax error",
        }
    }
}
