//! Whole-trace reference evaluator used as a differential oracle for the
//! streaming engine.
//!
//! Instead of folding message by message it works function by function over
//! the entire trace. Timer values depend on the notification schedule, which
//! depends on firings, so it iterates to a fixpoint: replay the timers for the
//! current schedule, materialize every maximal event-true sequence of every
//! function, apply the firing rules per sequence, and derive a new schedule.
//! Notifications only affect later messages, so once the schedule stops
//! changing it is the causal one.

use std::collections::BTreeMap;

use super::{summarize, Dispatch, EngineError, Firing, ScoreReport};
use crate::eval::{eval_bool, eval_number, Env, EvalError};
use crate::frontend::check::{CheckedFunction, CheckedOd};
use crate::frontend::FrequencyMode;
use crate::trace::Trace;

/// Timer writes grouped by the message whose firings produced them.
type Schedule = BTreeMap<usize, Vec<(usize, usize, f64)>>;

/// Timer values as seen during evaluation: `[message][function][slot]`.
type TimerTable = Vec<Vec<Vec<f64>>>;

struct FunctionOutcome {
    firings: Vec<Firing>,
    writes: Vec<(usize, usize, usize, f64)>,
    error: Option<(usize, EngineError)>,
}

fn replay_timers(od: &CheckedOd, trace: &Trace, schedule: &Schedule) -> TimerTable {
    let mut current: Vec<Vec<f64>> = od.functions.iter().map(|f| vec![0.0; f.timers.len()]).collect();
    let mut table = Vec::with_capacity(trace.len());
    let messages = trace.messages();
    for (m, msg) in messages.iter().enumerate() {
        let dt = if m == 0 { 0.0 } else { msg.t - messages[m - 1].t };
        for timers in &mut current {
            for timer in timers.iter_mut() {
                *timer -= dt;
            }
        }
        table.push(current.clone());
        if let Some(writes) = schedule.get(&m) {
            let mut winners: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(target, slot, value) in writes {
                winners
                    .entry((target, slot))
                    .and_modify(|v| *v = v.max(value))
                    .or_insert(value);
            }
            for ((target, slot), value) in winners {
                current[target][slot] = value;
            }
        }
    }
    table
}

/// Maximal runs of consecutive true values, as inclusive index ranges.
fn maximal_sequences(events: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &e) in events.iter().enumerate() {
        match (e, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, events.len() - 1));
    }
    runs
}

fn evaluate_function(od: &CheckedOd, trace: &Trace, timers: &TimerTable, fidx: usize) -> FunctionOutcome {
    let def: &CheckedFunction = &od.functions[fidx];
    let messages = trace.messages();
    let env_at = |m: usize| Env {
        fields: &messages[m].values,
        constants: &od.constants,
        timers: &timers[m][fidx],
        scores: &[],
        seq_time: None,
    };
    let error_at = |m: usize, source: EvalError| {
        (
            m,
            EngineError::Eval {
                message_index: m,
                t: messages[m].t,
                function: def.name.clone(),
                source,
            },
        )
    };
    let mut outcome = FunctionOutcome {
        firings: Vec::new(),
        writes: Vec::new(),
        error: None,
    };

    // first pass: the event over the whole trace, up to the first failure
    let mut events = Vec::with_capacity(messages.len());
    let mut event_error = None;
    for m in 0..messages.len() {
        match eval_bool(&def.event, &env_at(m)) {
            Ok(e) => events.push(e),
            Err(source) => {
                event_error = Some(error_at(m, source));
                break;
            }
        }
    }

    let mut fired_once = false;
    'runs: for (start, end) in maximal_sequences(&events) {
        let mut fired_in_run = false;
        for m in start..=end {
            let env = env_at(m);
            let cond_ok = match &def.condition {
                None => true,
                Some(c) => {
                    let env = Env {
                        seq_time: Some(messages[m].t - messages[start].t),
                        ..env
                    };
                    match eval_bool(c, &env) {
                        Ok(b) => b,
                        Err(source) => {
                            outcome.error = Some(error_at(m, source));
                            break 'runs;
                        }
                    }
                }
            };
            let fires = cond_ok
                && match def.frequency {
                    FrequencyMode::First => !fired_once,
                    FrequencyMode::ActionSum => def.condition.is_none() || !fired_in_run,
                    FrequencyMode::AllSum => true,
                };
            if !fires {
                continue;
            }
            let delta = match def.action.as_ref().map(|a| eval_number(a, &env)).transpose() {
                Ok(d) => d.unwrap_or(0.0),
                Err(source) => {
                    outcome.error = Some(error_at(m, source));
                    break 'runs;
                }
            };
            let mut dispatched = Vec::new();
            for n in &def.notifications {
                for (slot, timer, value) in &n.bindings {
                    match eval_number(value, &env) {
                        Ok(v) => {
                            outcome.writes.push((m, n.target, *slot, v));
                            dispatched.push(Dispatch {
                                target: od.functions[n.target].name.clone(),
                                timer: timer.clone(),
                                value: v,
                            });
                        }
                        Err(source) => {
                            outcome.error = Some(error_at(m, source));
                            break 'runs;
                        }
                    }
                }
            }
            fired_once = true;
            fired_in_run = true;
            outcome.firings.push(Firing {
                message_index: m,
                function: def.name.clone(),
                delta,
                notifications: dispatched,
            });
        }
    }
    // runs only cover messages before an event failure, so any error found
    // inside them comes first
    if outcome.error.is_none() {
        outcome.error = event_error;
    }
    outcome
}

/// Non-streaming evaluation; must agree exactly with [`super::score_trace`].
pub fn reference_score(od: &CheckedOd, trace: &Trace) -> Result<ScoreReport, EngineError> {
    if *trace.schema() != od.schema {
        return Err(EngineError::SchemaMismatch);
    }

    let mut schedule = Schedule::new();
    // each round fixes at least one more message of the schedule
    for _ in 0..=trace.len() + 1 {
        let timers = replay_timers(od, trace, &schedule);
        let outcomes: Vec<FunctionOutcome> = (0..od.functions.len())
            .map(|f| evaluate_function(od, trace, &timers, f))
            .collect();

        // earliest failure by (message, declaration order)
        let failure = outcomes
            .iter()
            .enumerate()
            .filter_map(|(f, o)| o.error.as_ref().map(|(m, e)| (*m, f, e)))
            .min_by_key(|(m, f, _)| (*m, *f));
        let horizon = failure.map_or(usize::MAX, |(m, _, _)| m);

        let mut next = Schedule::new();
        for o in &outcomes {
            for &(m, target, slot, value) in &o.writes {
                if m < horizon {
                    next.entry(m).or_default().push((target, slot, value));
                }
            }
        }
        for writes in next.values_mut() {
            writes.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        }

        if next != schedule {
            schedule = next;
            continue;
        }
        if let Some((_, _, err)) = failure {
            return Err(err.clone());
        }

        let mut firings: Vec<(usize, usize, Firing)> = outcomes
            .into_iter()
            .enumerate()
            .flat_map(|(f, o)| o.firings.into_iter().map(move |firing| (firing.message_index, f, firing)))
            .collect();
        firings.sort_by_key(|(m, f, _)| (*m, *f));

        let mut scores: Vec<f64> = od.functions.iter().map(|f| f.initial).collect();
        for (_, f, firing) in &firings {
            scores[*f] += firing.delta;
        }
        let summary = summarize(od, &scores)?;
        return Ok(ScoreReport {
            scores: od.functions.iter().map(|f| f.name.clone()).zip(scores).collect(),
            summary,
            firings: firings.into_iter().map(|(_, _, f)| f).collect(),
        });
    }
    unreachable!("notification schedule failed to converge")
}

#[cfg(test)]
mod tests {
    use super::maximal_sequences;

    #[test]
    fn runs() {
        assert_eq!(maximal_sequences(&[]), vec![]);
        assert_eq!(
            maximal_sequences(&[true, true, false, true, false, false, true]),
            vec![(0, 1), (3, 3), (6, 6)]
        );
    }
}
