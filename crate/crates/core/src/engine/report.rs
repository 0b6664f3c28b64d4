use std::fmt::Write;

use super::{Firing, ScoreReport};
use crate::trace::json_num;

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn firing_json(f: &Firing) -> String {
    let notes: Vec<String> = f
        .notifications
        .iter()
        .map(|d| {
            format!(
                "{{\"target\":{},\"timer\":{},\"value\":{}}}",
                json_str(&d.target),
                json_str(&d.timer),
                json_num(d.value)
            )
        })
        .collect();
    format!(
        "{{\"message_index\":{},\"function\":{},\"delta\":{},\"notifications\":[{}]}}",
        f.message_index,
        json_str(&f.function),
        json_num(f.delta),
        notes.join(",")
    )
}

impl ScoreReport {
    /// Single-line JSON object. Scores keep declaration order; numbers use the
    /// shortest decimal that round-trips.
    pub fn to_machine(&self, with_firings: bool) -> String {
        let scores: Vec<String> = self
            .scores
            .iter()
            .map(|(name, s)| format!("{}:{}", json_str(name), json_num(*s)))
            .collect();
        let mut out = format!("{{\"scores\":{{{}}},\"summary\":{}", scores.join(","), json_num(self.summary));
        if with_firings {
            let firings: Vec<String> = self.firings.iter().map(firing_json).collect();
            let _ = write!(out, ",\"firings\":[{}]", firings.join(","));
        }
        out.push('}');
        out
    }

    pub fn to_text(&self, with_firings: bool) -> String {
        let width = self.scores.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        for (name, score) in &self.scores {
            let _ = writeln!(out, "{name:<width$}  {}", json_num(*score));
        }
        let _ = writeln!(out, "{:<width$}  {}", "summary", json_num(self.summary));
        if with_firings {
            let _ = writeln!(out, "\nfirings: {}", self.firings.len());
            for f in &self.firings {
                let _ = write!(out, "  #{:<5} {:<width$}  {:+}", f.message_index, f.function, f.delta);
                for d in &f.notifications {
                    let _ = write!(out, "  -> {}.{} = {}", d.target, d.timer, json_num(d.value));
                }
                out.push('\n');
            }
        }
        out
    }
}
