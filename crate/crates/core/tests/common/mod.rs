//! Seeded generators of small oracle definitions and traces.
#![allow(dead_code)]

use odl::frontend::{
    BinaryOp, Expr, FrequencyMode, NotificationSpec, OracleDefinition, ScoringFunctionDef, Summary, UnaryOp,
};
use odl::trace::{Point2, Trace, TraceMessage, TraceSchema, Value, ValueKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MODES: [FrequencyMode; 3] = [FrequencyMode::First, FrequencyMode::ActionSum, FrequencyMode::AllSum];
const TIMER_POOL: [&str; 3] = ["w0", "w1", "w2"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn schema() -> TraceSchema {
    TraceSchema::new([
        ("x", ValueKind::Number),
        ("y", ValueKind::Number),
        ("p", ValueKind::Point2),
        ("b", ValueKind::Boolean),
    ])
    .unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub max_functions: usize,
    pub max_messages: usize,
    pub conditions: bool,
    pub notifications: bool,
    /// Allow unguarded division, which can fail at run time.
    pub raw_division: bool,
    /// Restrict to operators that keep half-integer inputs exact.
    pub exact_arithmetic: bool,
    pub modes: &'static [FrequencyMode],
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            max_functions: 5,
            max_messages: 200,
            conditions: true,
            notifications: true,
            raw_division: true,
            exact_arithmetic: false,
            modes: &MODES,
        }
    }
}

struct ExprGen<'a, R: Rng> {
    rng: &'a mut R,
    opts: GenOptions,
    timers: &'a [String],
}

fn half(rng: &mut impl Rng, lo: i32, hi: i32) -> f64 {
    rng.gen_range(lo * 2..=hi * 2) as f64 / 2.0
}

impl<R: Rng> ExprGen<'_, R> {
    fn number(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.35) {
            return match self.rng.gen_range(0..6) {
                0 | 1 => Expr::number(half(self.rng, -3, 3)),
                2 => Expr::ident(if self.rng.gen() { "x" } else { "y" }),
                3 => Expr::ident(if self.rng.gen() { "C0" } else { "C1" }),
                4 if !self.timers.is_empty() => Expr::ident(self.timers.choose(self.rng).unwrap().clone()),
                4 => Expr::ident("x"),
                _ if self.opts.exact_arithmetic => Expr::ident("y"),
                _ => Expr::Call("distance".into(), vec![Expr::ident("p"), Expr::ident("P0")]),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..9) {
            0 => Expr::binary(BinaryOp::Add, self.number(d), self.number(d)),
            1 => Expr::binary(BinaryOp::Sub, self.number(d), self.number(d)),
            2 if self.opts.exact_arithmetic => Expr::binary(BinaryOp::Mul, Expr::number(half(self.rng, -2, 2)), self.number(d)),
            2 => Expr::binary(BinaryOp::Mul, self.number(d), self.number(d)),
            3 if self.opts.exact_arithmetic => Expr::binary(BinaryOp::Add, self.number(d), Expr::number(1.0)),
            3 => {
                let den = if self.opts.raw_division && self.rng.gen_bool(0.3) {
                    self.number(d)
                } else {
                    let inner = Expr::Call("abs".into(), vec![self.number(d)]);
                    Expr::binary(BinaryOp::Add, inner, Expr::number(1.0))
                };
                Expr::binary(BinaryOp::Div, self.number(d), den)
            }
            4 => Expr::unary(UnaryOp::Neg, self.number(d)),
            5 => Expr::Call("abs".into(), vec![self.number(d)]),
            6 | 7 => {
                let n = self.rng.gen_range(2..=3);
                let name = if self.rng.gen() { "min" } else { "max" };
                Expr::Call(name.into(), (0..n).map(|_| self.number(d)).collect())
            }
            _ => self.number(0),
        }
    }

    fn boolean(&mut self, depth: u32, seq_time: bool) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return match self.rng.gen_range(0..7) {
                0 => Expr::ident("b"),
                1 => Expr::Literal(Value::Bool(self.rng.gen_bool(0.8))),
                2 if seq_time => {
                    let op = *[BinaryOp::Gt, BinaryOp::Ge, BinaryOp::Lt].choose(self.rng).unwrap();
                    Expr::binary(op, Expr::ident("seq_time"), Expr::number(half(self.rng, 0, 3)))
                }
                3 if !self.timers.is_empty() => {
                    let timer = self.timers.choose(self.rng).unwrap().clone();
                    Expr::binary(BinaryOp::Gt, Expr::ident(timer), Expr::number(0.0))
                }
                _ => self.comparison(depth.saturating_sub(1)),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..4) {
            0 => Expr::binary(BinaryOp::And, self.boolean(d, seq_time), self.boolean(d, seq_time)),
            1 => Expr::binary(BinaryOp::Or, self.boolean(d, seq_time), self.boolean(d, seq_time)),
            2 => Expr::unary(UnaryOp::Not, self.boolean(d, seq_time)),
            _ => self.comparison(d),
        }
    }

    fn comparison(&mut self, depth: u32) -> Expr {
        let ops = [BinaryOp::Lt, BinaryOp::Le, BinaryOp::Gt, BinaryOp::Ge, BinaryOp::Eq, BinaryOp::Ne];
        let op = *ops.choose(self.rng).unwrap();
        Expr::binary(op, self.number(depth.min(2)), self.number(depth.min(1)))
    }
}

pub fn random_od(rng: &mut impl Rng, opts: GenOptions) -> OracleDefinition {
    let k = rng.gen_range(1..=opts.max_functions);
    let names: Vec<String> = (0..k).map(|i| format!("f{i}")).collect();

    // notification wiring first: timers of a function are the names bound by
    // notifications that target it
    let mut wiring: Vec<Vec<(usize, Vec<String>)>> = vec![Vec::new(); k];
    if opts.notifications {
        for source in wiring.iter_mut() {
            if !rng.gen_bool(0.45) {
                continue;
            }
            let mut targets: Vec<usize> = (0..k).collect();
            targets.shuffle(rng);
            for &target in targets.iter().take(rng.gen_range(1..=2)) {
                let mut pool = TIMER_POOL.to_vec();
                pool.shuffle(rng);
                let timers = pool.iter().take(rng.gen_range(1..=2)).map(|s| s.to_string()).collect();
                source.push((target, timers));
            }
        }
    }
    let mut timers: Vec<Vec<String>> = vec![Vec::new(); k];
    for source in &wiring {
        for (target, names) in source {
            for n in names {
                if !timers[*target].contains(n) {
                    timers[*target].push(n.clone());
                }
            }
        }
    }

    let mut functions = Vec::with_capacity(k);
    for i in 0..k {
        let mode = *opts.modes.choose(rng).unwrap();
        let mut g = ExprGen {
            rng,
            opts,
            timers: &timers[i],
        };
        let event = g.boolean(3, false);
        let condition = (opts.conditions && g.rng.gen_bool(0.4)).then(|| g.boolean(2, true));
        let action = g.rng.gen_bool(0.85).then(|| g.number(2));
        let mut notifications = Vec::new();
        for (target, bound) in &wiring[i] {
            let bindings = bound
                .iter()
                .map(|t| {
                    let value = if g.rng.gen_bool(0.7) {
                        Expr::number(half(g.rng, 0, 4))
                    } else {
                        g.number(1)
                    };
                    (t.clone(), value)
                })
                .collect();
            notifications.push(NotificationSpec {
                target: names[*target].clone(),
                bindings,
            });
        }
        let mut f = ScoringFunctionDef::new(names[i].clone(), event, mode);
        f.condition = condition;
        f.action = action;
        f.notifications = notifications;
        f.initial = rng.gen_bool(0.3).then(|| half(rng, -5, 5));
        functions.push(f);
    }

    let summary = if rng.gen_bool(0.5) {
        Summary::Sum
    } else {
        let mut e = Expr::ident(names[0].clone());
        for n in &names[1..] {
            let term = Expr::binary(BinaryOp::Mul, Expr::number(half(rng, -2, 2)), Expr::ident(n.clone()));
            e = Expr::binary(BinaryOp::Add, e, term);
        }
        if rng.gen() {
            e = Expr::binary(BinaryOp::Add, e, Expr::ident("C0"));
        }
        Summary::Expr(e)
    };

    OracleDefinition {
        constants: vec![
            ("C0".into(), Value::Number(half(rng, -2, 2))),
            ("C1".into(), Value::Number(half(rng, 0, 3))),
            ("P0".into(), Value::Point(Point2::new(half(rng, -2, 2), half(rng, -2, 2)))),
        ],
        functions,
        summary,
    }
}

pub fn random_trace(rng: &mut impl Rng, len: usize) -> Trace {
    let steps = [0.0, 0.25, 0.5, 0.5, 1.0, 1.5];
    let mut t = half(rng, 0, 2);
    let mut messages = Vec::with_capacity(len);
    for _ in 0..len {
        messages.push(TraceMessage {
            t,
            values: vec![
                Value::Number(half(rng, -3, 3)),
                Value::Number(half(rng, -3, 3)),
                Value::Point(Point2::new(half(rng, -4, 4), half(rng, -4, 4))),
                Value::Bool(rng.gen_bool(0.35)),
            ],
        });
        t += steps.choose(rng).unwrap();
    }
    Trace::new(schema(), messages).unwrap()
}

/// A random (OD, trace) pair; the same seed always gives the same pair.
pub fn random_case(seed: u64, opts: GenOptions) -> (OracleDefinition, Trace) {
    let mut r = rng(seed);
    let od = random_od(&mut r, opts);
    let len = r.gen_range(0..=opts.max_messages);
    (od, random_trace(&mut r, len))
}

/// Shifts `b` to start `gap` after the end of `a` and appends it.
pub fn concat(a: &Trace, b: &Trace, gap: f64) -> Trace {
    let offset = a.messages().last().map_or(0.0, |m| m.t + gap) - b.messages().first().map_or(0.0, |m| m.t);
    let mut messages = a.messages().to_vec();
    messages.extend(b.messages().iter().map(|m| TraceMessage {
        t: m.t + offset,
        values: m.values.clone(),
    }));
    Trace::new(a.schema().clone(), messages).unwrap()
}

pub fn permuted(od: &OracleDefinition, rng: &mut impl Rng) -> OracleDefinition {
    let mut od = od.clone();
    od.functions.shuffle(rng);
    od
}
