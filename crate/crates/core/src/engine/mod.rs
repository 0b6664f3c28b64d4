//! The scoring oracle: folds a trace through an oracle definition.
//!
//! Each message is processed in three phases. Every timer first decreases by
//! the time elapsed since the previous message. Functions then evaluate in
//! declaration order against the current message and their own timers,
//! firing according to their frequency mode. Finally the notifications queued
//! by this message's firings set their target timers, so they are visible
//! from the next message onward. When several firings of the same message set
//! one timer, the largest value wins.

use thiserror::Error;

use crate::eval::{eval_bool, eval_number, Env, EvalError};
use crate::frontend::check::{CheckedOd, CheckedSummary};
use crate::frontend::FrequencyMode;
use crate::trace::{Trace, TraceMessage};

mod reference;
mod report;

pub use reference::reference_score;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionState {
    pub score: f64,
    pub fired_first: bool,
    pub in_sequence: bool,
    pub sequence_start: f64,
    pub fired_this_sequence: bool,
    pub timers: Vec<f64>,
}

/// A timer write produced by a firing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub target: String,
    pub timer: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firing {
    pub message_index: usize,
    pub function: String,
    pub delta: f64,
    pub notifications: Vec<Dispatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Final score per function, in declaration order.
    pub scores: Vec<(String, f64)>,
    pub summary: f64,
    pub firings: Vec<Firing>,
}

impl ScoreReport {
    pub fn score(&self, function: &str) -> Option<f64> {
        self.scores.iter().find(|(n, _)| n == function).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("message {message_index} (t = {t}), function `{function}`: {source}")]
    Eval {
        message_index: usize,
        t: f64,
        function: String,
        source: EvalError,
    },
    #[error("message {message_index}: timestamp {t} precedes the previous timestamp {previous}")]
    TimestampRegression { message_index: usize, t: f64, previous: f64 },
    #[error("message {message_index} does not match the schema the oracle was checked against")]
    MessageShape { message_index: usize },
    #[error("the trace schema differs from the schema the oracle was checked against")]
    SchemaMismatch,
    #[error("summary: {0}")]
    Summary(EvalError),
}

/// Streaming interpreter state for one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState<'a> {
    od: &'a CheckedOd,
    functions: Vec<FunctionState>,
    previous_t: Option<f64>,
    message_index: usize,
    firings: Vec<Firing>,
}

impl<'a> EngineState<'a> {
    pub fn init(od: &'a CheckedOd) -> Self {
        let functions = od
            .functions
            .iter()
            .map(|f| FunctionState {
                score: f.initial,
                fired_first: false,
                in_sequence: false,
                sequence_start: 0.0,
                fired_this_sequence: false,
                timers: vec![0.0; f.timers.len()],
            })
            .collect();
        EngineState {
            od,
            functions,
            previous_t: None,
            message_index: 0,
            firings: Vec::new(),
        }
    }

    pub fn functions(&self) -> &[FunctionState] {
        &self.functions
    }

    pub fn function(&self, name: &str) -> Option<&FunctionState> {
        let i = self.od.functions.iter().position(|f| f.name == name)?;
        Some(&self.functions[i])
    }

    pub fn firings(&self) -> &[Firing] {
        &self.firings
    }

    pub fn step(&mut self, msg: &TraceMessage) -> Result<(), EngineError> {
        let index = self.message_index;
        let od = self.od;
        if msg.values.len() != od.schema.len() {
            return Err(EngineError::MessageShape { message_index: index });
        }
        let dt = match self.previous_t {
            None => 0.0,
            Some(previous) if msg.t < previous => {
                return Err(EngineError::TimestampRegression {
                    message_index: index,
                    t: msg.t,
                    previous,
                })
            }
            Some(previous) => msg.t - previous,
        };

        for state in &mut self.functions {
            for timer in &mut state.timers {
                *timer -= dt;
            }
        }

        let mut pending: Vec<(usize, usize, f64)> = Vec::new();
        for (def, state) in od.functions.iter().zip(self.functions.iter_mut()) {
            let fail = |source| EngineError::Eval {
                message_index: index,
                t: msg.t,
                function: def.name.clone(),
                source,
            };
            let env = Env {
                fields: &msg.values,
                constants: &od.constants,
                timers: &state.timers,
                scores: &[],
                seq_time: None,
            };
            if !eval_bool(&def.event, &env).map_err(fail)? {
                state.in_sequence = false;
                continue;
            }
            if !state.in_sequence {
                state.in_sequence = true;
                state.sequence_start = msg.t;
                state.fired_this_sequence = false;
            }
            let cond_ok = match &def.condition {
                None => true,
                Some(c) => {
                    let env = Env {
                        seq_time: Some(msg.t - state.sequence_start),
                        ..env
                    };
                    eval_bool(c, &env).map_err(fail)?
                }
            };
            let fire = match def.frequency {
                FrequencyMode::First => cond_ok && !state.fired_first,
                FrequencyMode::ActionSum if def.condition.is_none() => true,
                FrequencyMode::ActionSum => cond_ok && !state.fired_this_sequence,
                FrequencyMode::AllSum => cond_ok,
            };
            if !fire {
                continue;
            }
            let delta = match &def.action {
                Some(a) => eval_number(a, &env).map_err(fail)?,
                None => 0.0,
            };
            let mut dispatched = Vec::new();
            for n in &def.notifications {
                for (slot, timer, value) in &n.bindings {
                    let value = eval_number(value, &env).map_err(fail)?;
                    pending.push((n.target, *slot, value));
                    dispatched.push(Dispatch {
                        target: od.functions[n.target].name.clone(),
                        timer: timer.clone(),
                        value,
                    });
                }
            }
            state.score += delta;
            state.fired_first = true;
            state.fired_this_sequence = true;
            self.firings.push(Firing {
                message_index: index,
                function: def.name.clone(),
                delta,
                notifications: dispatched,
            });
        }

        for (target, slot, value) in merge_writes(&pending) {
            self.functions[target].timers[slot] = value;
        }
        self.previous_t = Some(msg.t);
        self.message_index += 1;
        Ok(())
    }

    pub fn finalize(mut self) -> Result<ScoreReport, EngineError> {
        for state in &mut self.functions {
            state.in_sequence = false;
        }
        let scores: Vec<f64> = self.functions.iter().map(|s| s.score).collect();
        let summary = summarize(self.od, &scores)?;
        Ok(ScoreReport {
            scores: self
                .od
                .functions
                .iter()
                .zip(scores)
                .map(|(f, s)| (f.name.clone(), s))
                .collect(),
            summary,
            firings: self.firings,
        })
    }
}

/// Collapses one message's timer writes so each timer is set once, to the
/// largest value written to it.
fn merge_writes(writes: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(writes.len());
    for &(target, slot, value) in writes {
        match merged.iter_mut().find(|(t, s, _)| *t == target && *s == slot) {
            Some(existing) => existing.2 = existing.2.max(value),
            None => merged.push((target, slot, value)),
        }
    }
    merged
}

pub(crate) fn summarize(od: &CheckedOd, scores: &[f64]) -> Result<f64, EngineError> {
    match &od.summary {
        CheckedSummary::Sum => Ok(scores.iter().fold(0.0, |acc, s| acc + s)),
        CheckedSummary::Expr(e) => {
            let env = Env {
                constants: &od.constants,
                scores,
                ..Env::default()
            };
            eval_number(e, &env).map_err(EngineError::Summary)
        }
    }
}

/// Scores a whole trace: init, one step per message, finalize.
pub fn score_trace(od: &CheckedOd, trace: &Trace) -> Result<ScoreReport, EngineError> {
    if *trace.schema() != od.schema {
        return Err(EngineError::SchemaMismatch);
    }
    let mut state = EngineState::init(od);
    for msg in trace.messages() {
        state.step(msg)?;
    }
    state.finalize()
}
