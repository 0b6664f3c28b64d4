//! Recursive descent parser for oracle definitions.
//!
//! Expression precedence, loosest first: `or`, `and`, `not`, comparisons,
//! additive, multiplicative, unary minus, calls and primaries. A unary minus
//! directly in front of a number literal folds into a negative literal.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind, Pos};
use crate::trace::{Point2, Value};

/// Words that can never name a constant, function, timer or trace field
/// referenced from an oracle definition.
pub const KEYWORDS: &[&str] = &[
    "const",
    "scoring_function",
    "summary",
    "sum",
    "and",
    "or",
    "not",
    "true",
    "false",
    "point",
    "t",
    "seq_time",
];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn parse_od(source: &str) -> Result<OracleDefinition, ParseError> {
    let mut parser = Parser::new(tokenize(source)?);
    parser.oracle_definition()
}

/// Parses a standalone expression.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser::new(tokenize(source)?);
    let expr = parser.expr()?;
    parser.expect(Tok::Eof, "end of expression")?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, cursor: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.cursor].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.cursor + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.cursor].pos
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        token
    }

    fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError {
            pos: self.pos(),
            kind,
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(
            ParseErrorKind::Syntax,
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance().pos)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        if self.is_word(word) {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    /// A user-chosen name: any identifier that is not a keyword.
    fn name(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if is_reserved(&w) => Err(self.error(
                ParseErrorKind::Syntax,
                format!("`{w}` is reserved and cannot be used as {what}"),
            )),
            Tok::Ident(w) => Ok((w, self.advance().pos)),
            _ => Err(self.unexpected(what)),
        }
    }

    fn oracle_definition(&mut self) -> Result<OracleDefinition, ParseError> {
        let mut od = OracleDefinition::default();
        let mut names: Vec<String> = Vec::new();
        let declare = |name: &str, pos: Pos, names: &mut Vec<String>| {
            if names.iter().any(|n| n == name) {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::DuplicateName,
                    message: format!("`{name}` is declared more than once"),
                });
            }
            names.push(name.to_string());
            Ok(())
        };

        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(w) if w == "summary" => {
                    self.advance();
                    self.expect(Tok::Assign, "`=` after `summary`")?;
                    od.summary = if self.is_word("sum") && *self.peek_at(1) == Tok::Semi {
                        self.advance();
                        Summary::Sum
                    } else {
                        Summary::Expr(self.expr()?)
                    };
                    self.expect(Tok::Semi, "`;` after the summary")?;
                    if *self.peek() != Tok::Eof {
                        return Err(self.unexpected("end of input after the summary"));
                    }
                    break;
                }
                Tok::Ident(w) if w == "const" => {
                    self.advance();
                    let (name, pos) = self.name("a constant name")?;
                    declare(&name, pos, &mut names)?;
                    self.expect(Tok::Assign, "`=`")?;
                    let value = self.literal()?;
                    self.expect(Tok::Semi, "`;` after the constant")?;
                    od.constants.push((name, value));
                }
                _ => {
                    let (name, pos) = self.name("a declaration")?;
                    declare(&name, pos, &mut names)?;
                    let def = self.scoring_function(name)?;
                    od.functions.push(def);
                }
            }
        }
        Ok(od)
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let negative = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Number(x) => {
                self.advance();
                Ok(if negative { -x } else { x })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        if self.is_word("true") {
            self.advance();
            return Ok(Value::Bool(true));
        }
        if self.is_word("false") {
            self.advance();
            return Ok(Value::Bool(false));
        }
        if self.is_word("point") {
            return self.point_literal();
        }
        if matches!(self.peek(), Tok::Number(_) | Tok::Minus) {
            return self.signed_number().map(Value::Number);
        }
        Err(self.unexpected("a literal"))
    }

    fn point_literal(&mut self) -> Result<Value, ParseError> {
        self.expect_word("point")?;
        self.expect(Tok::LParen, "`(` after `point`")?;
        let x = self.signed_number()?;
        self.expect(Tok::Comma, "`,` between point coordinates")?;
        let y = self.signed_number()?;
        self.expect(Tok::RParen, "`)` closing the point")?;
        Ok(Value::Point(Point2::new(x, y)))
    }

    fn scoring_function(&mut self, name: String) -> Result<ScoringFunctionDef, ParseError> {
        self.expect(Tok::Assign, "`=` after the function name")?;
        self.expect_word("scoring_function")?;
        let open = self.expect(Tok::LParen, "`(`")?;

        let mut event = None;
        let mut condition = None;
        let mut action = None;
        let mut frequency = None;
        let mut notifications = None;
        let mut initial = None;

        loop {
            let key_pos = self.pos();
            let key = match self.peek() {
                Tok::Ident(k) => k.clone(),
                _ => return Err(self.unexpected("a parameter name")),
            };
            self.advance();
            self.expect(Tok::Assign, "`=` after the parameter name")?;
            let duplicate = || ParseError {
                pos: key_pos,
                kind: ParseErrorKind::DuplicateParam,
                message: format!("parameter `{key}` given more than once"),
            };
            match key.as_str() {
                "event" => set_once(&mut event, self.expr()?).map_err(|_| duplicate())?,
                "condition" => set_once(&mut condition, self.expr()?).map_err(|_| duplicate())?,
                "action" => set_once(&mut action, self.expr()?).map_err(|_| duplicate())?,
                "initial" => set_once(&mut initial, self.signed_number()?).map_err(|_| duplicate())?,
                "notifications" => {
                    set_once(&mut notifications, self.notification_list()?).map_err(|_| duplicate())?
                }
                "frequency" => {
                    let mode = match self.peek() {
                        Tok::Ident(w) => FrequencyMode::from_keyword(w).ok_or_else(|| {
                            self.error(
                                ParseErrorKind::UnknownFrequency,
                                format!("unknown frequency `{w}` (expected first, action_sum or all_sum)"),
                            )
                        })?,
                        _ => return Err(self.unexpected("a frequency keyword")),
                    };
                    self.advance();
                    set_once(&mut frequency, mode).map_err(|_| duplicate())?;
                }
                other => {
                    return Err(ParseError {
                        pos: key_pos,
                        kind: ParseErrorKind::Syntax,
                        message: format!("unknown parameter `{other}`"),
                    })
                }
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen, "`,` or `)` in the parameter list")?;
        self.expect(Tok::Semi, "`;` after the scoring function")?;

        let missing = |what: &str| ParseError {
            pos: open,
            kind: ParseErrorKind::Syntax,
            message: format!("scoring function `{name}` has no `{what}` parameter"),
        };
        Ok(ScoringFunctionDef {
            event: event.ok_or_else(|| missing("event"))?,
            frequency: frequency.ok_or_else(|| missing("frequency"))?,
            name,
            condition,
            action,
            notifications: notifications.unwrap_or_default(),
            initial,
        })
    }

    fn notification_list(&mut self) -> Result<Vec<NotificationSpec>, ParseError> {
        self.expect(Tok::LBracket, "`[` opening the notification list")?;
        let mut list = Vec::new();
        loop {
            self.expect(Tok::LParen, "`(` opening a notification")?;
            let (target, _) = self.name("a notification target")?;
            self.expect(Tok::Comma, "`,` after the notification target")?;
            self.expect(Tok::LBracket, "`[` opening the timer bindings")?;
            let mut bindings = Vec::new();
            loop {
                self.expect(Tok::LParen, "`(` opening a timer binding")?;
                let (timer, _) = self.name("a timer name")?;
                self.expect(Tok::Comma, "`,` after the timer name")?;
                let value = self.expr()?;
                self.expect(Tok::RParen, "`)` closing the timer binding")?;
                bindings.push((timer, value));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBracket, "`]` closing the timer bindings")?;
            self.expect(Tok::RParen, "`)` closing the notification")?;
            list.push(NotificationSpec { target, bindings });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBracket, "`]` closing the notification list")?;
        Ok(list)
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.is_word("or") {
            self.advance();
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.is_word("and") {
            self.advance();
            let right = self.not_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.is_word("not") {
            self.advance();
            let operand = self.not_expr()?;
            return Ok(Expr::unary(UnaryOp::Not, operand));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinaryOp::Lt,
                Tok::Le => BinaryOp::Le,
                Tok::Gt => BinaryOp::Gt,
                Tok::Ge => BinaryOp::Ge,
                Tok::EqEq => BinaryOp::Eq,
                Tok::Ne => BinaryOp::Ne,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.additive()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.advance();
            if let Tok::Number(x) = *self.peek() {
                self.advance();
                return Ok(Expr::number(-x));
            }
            let operand = self.unary()?;
            return Ok(Expr::unary(UnaryOp::Neg, operand));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(x) => {
                self.advance();
                Ok(Expr::number(x))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(w) => match w.as_str() {
                "true" | "false" | "point" => self.literal().map(Expr::Literal),
                "seq_time" => {
                    self.advance();
                    Ok(Expr::ident(w))
                }
                _ if is_reserved(&w) => Err(self.error(
                    ParseErrorKind::Syntax,
                    format!("expected an expression, found keyword `{w}`"),
                )),
                _ => {
                    self.advance();
                    if *self.peek() == Tok::LParen {
                        self.advance();
                        let mut args = Vec::new();
                        if *self.peek() != Tok::RParen {
                            loop {
                                args.push(self.expr()?);
                                if !self.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen, "`,` or `)` in the argument list")?;
                        Ok(Expr::Call(w, args))
                    } else {
                        Ok(Expr::Ident(w))
                    }
                }
            },
            _ => Err(self.unexpected("an expression")),
        }
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T) -> Result<(), ()> {
    if slot.is_some() {
        return Err(());
    }
    *slot = Some(value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING1: &str = "speeding = scoring_function( event = speed > MAX_SPEED,\n  action = -1, frequency = action_sum);";
    const LISTING4: &str = "collisions = scoring_function(
  event = collision and expiration > 0,
  action = 1.0, frequency = all_sum);
deceleration = scoring_function(
  event = acceleration < 0 and not collision,
  condition = seq_time > 2, frequency = all_sum,
  notifications = [(collisions, [(expiration, 0.5)])]);";

    #[test]
    fn parses_listing1() {
        let od = parse_od(LISTING1).unwrap();
        assert_eq!(od.functions.len(), 1);
        let f = &od.functions[0];
        assert_eq!(f.name, "speeding");
        assert_eq!(
            f.event,
            Expr::binary(BinaryOp::Gt, Expr::ident("speed"), Expr::ident("MAX_SPEED"))
        );
        assert_eq!(f.action, Some(Expr::number(-1.0)));
        assert_eq!(f.frequency, FrequencyMode::ActionSum);
        assert_eq!(od.summary, Summary::Sum);
    }

    #[test]
    fn parses_listing4_notifications() {
        let od = parse_od(LISTING4).unwrap();
        let names: Vec<_> = od.function_names().collect();
        assert_eq!(names, ["collisions", "deceleration"]);
        let decel = &od.functions[1];
        assert_eq!(decel.action, None);
        assert_eq!(
            decel.notifications,
            vec![NotificationSpec {
                target: "collisions".into(),
                bindings: vec![("expiration".into(), Expr::number(0.5))],
            }]
        );
        assert_eq!(
            decel.event,
            Expr::binary(
                BinaryOp::And,
                Expr::binary(BinaryOp::Lt, Expr::ident("acceleration"), Expr::number(0.0)),
                Expr::unary(UnaryOp::Not, Expr::ident("collision")),
            )
        );
    }

    #[test]
    fn missing_event_expression_is_a_syntax_error() {
        let err = parse_od("speeding = scoring_function(event = )").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.pos, Pos { line: 1, col: 37 });
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c < d or not e and f").unwrap();
        let expected = Expr::binary(
            BinaryOp::Or,
            Expr::binary(
                BinaryOp::Lt,
                Expr::binary(
                    BinaryOp::Add,
                    Expr::ident("a"),
                    Expr::binary(BinaryOp::Mul, Expr::ident("b"), Expr::ident("c")),
                ),
                Expr::ident("d"),
            ),
            Expr::binary(
                BinaryOp::And,
                Expr::unary(UnaryOp::Not, Expr::ident("e")),
                Expr::ident("f"),
            ),
        );
        assert_eq!(e, expected);
        assert_eq!(
            parse_expr("a - b - c").unwrap(),
            Expr::binary(
                BinaryOp::Sub,
                Expr::binary(BinaryOp::Sub, Expr::ident("a"), Expr::ident("b")),
                Expr::ident("c")
            )
        );
        assert_eq!(
            parse_expr("-x * 2").unwrap(),
            Expr::binary(
                BinaryOp::Mul,
                Expr::unary(UnaryOp::Neg, Expr::ident("x")),
                Expr::number(2.0)
            )
        );
        assert_eq!(parse_expr("-(1)").unwrap(), Expr::unary(UnaryOp::Neg, Expr::number(1.0)));
    }

    #[test]
    fn constants_and_summary() {
        let od = parse_od(
            "const LIMIT = -2.5; const HOME = point(1, -2); const ON = true;
             f = scoring_function(event = ON, frequency = first, initial = -3);
             summary = 0.5 * f + LIMIT;",
        )
        .unwrap();
        assert_eq!(
            od.constants,
            vec![
                ("LIMIT".into(), Value::Number(-2.5)),
                ("HOME".into(), Value::Point(Point2::new(1.0, -2.0))),
                ("ON".into(), Value::Bool(true)),
            ]
        );
        assert_eq!(od.functions[0].initial, Some(-3.0));
        assert!(matches!(od.summary, Summary::Expr(_)));
        assert_eq!(parse_od("summary = sum;").unwrap().summary, Summary::Sum);
    }

    #[test]
    fn rejects_duplicates_and_unknown_keywords() {
        let err = parse_od("f = scoring_function(event = a, event = b, frequency = first);").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateParam);
        let err = parse_od("f = scoring_function(event = a, frequency = sometimes);").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownFrequency);
        let err = parse_od("const f = 1; f = scoring_function(event = a, frequency = first);").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateName);
        let err = parse_od("f = scoring_function(event = a);").unwrap_err();
        assert!(err.message.contains("frequency"));
        let err = parse_od("const sum = 1;").unwrap_err();
        assert!(err.message.contains("reserved"));
        assert!(parse_expr("t > 1").is_err());
        assert!(parse_od("summary = sum; const X = 1;").is_err());
    }
}
