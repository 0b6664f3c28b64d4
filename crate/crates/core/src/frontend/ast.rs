use std::fmt;

use crate::trace::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinaryOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
        }
    }

    /// Binding strength; larger binds tighter. `not` sits between `and` and
    /// the comparisons.
    pub(crate) fn precedence(&self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_comparison(&self) -> bool {
        self.precedence() == 4
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn number(x: f64) -> Self {
        Expr::Literal(Value::Number(x))
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Self {
        Expr::Unary(op, Box::new(operand))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    /// Visits every identifier in the tree.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Ident(name) => out.push(name),
            Expr::Unary(_, e) => e.collect_identifiers(out),
            Expr::Binary(_, l, r) => {
                l.collect_identifiers(out);
                r.collect_identifiers(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_identifiers(out)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyMode {
    /// Fires at most once per trace.
    First,
    /// Once per firing unit: every event-true message without a condition,
    /// once per maximal sequence with one.
    ActionSum,
    /// Every message where the event and condition hold.
    AllSum,
}

impl FrequencyMode {
    pub fn keyword(&self) -> &'static str {
        match self {
            FrequencyMode::First => "first",
            FrequencyMode::ActionSum => "action_sum",
            FrequencyMode::AllSum => "all_sum",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "first" => Some(FrequencyMode::First),
            "action_sum" => Some(FrequencyMode::ActionSum),
            "all_sum" => Some(FrequencyMode::AllSum),
            _ => None,
        }
    }
}

/// Sets timers of `target` when the owning function fires.
#[derive(Debug, Clone, PartialEq)]
pub struct NotificationSpec {
    pub target: String,
    pub bindings: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringFunctionDef {
    pub name: String,
    pub event: Expr,
    pub condition: Option<Expr>,
    pub action: Option<Expr>,
    pub frequency: FrequencyMode,
    pub notifications: Vec<NotificationSpec>,
    pub initial: Option<f64>,
}

impl ScoringFunctionDef {
    pub fn new(name: impl Into<String>, event: Expr, frequency: FrequencyMode) -> Self {
        ScoringFunctionDef {
            name: name.into(),
            event,
            condition: None,
            action: None,
            frequency,
            notifications: Vec::new(),
            initial: None,
        }
    }

    pub fn initial_score(&self) -> f64 {
        self.initial.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Summary {
    /// Sum of all function scores in declaration order.
    Sum,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDefinition {
    pub constants: Vec<(String, Value)>,
    pub functions: Vec<ScoringFunctionDef>,
    pub summary: Summary,
}

impl Default for OracleDefinition {
    fn default() -> Self {
        OracleDefinition {
            constants: Vec::new(),
            functions: Vec::new(),
            summary: Summary::Sum,
        }
    }
}

impl OracleDefinition {
    pub fn function(&self, name: &str) -> Option<&ScoringFunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.name.as_str())
    }
}
