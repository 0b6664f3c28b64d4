//! Deterministic trace generation from property episodes.
//!
//! A scenario lists episodes (speeding, lane departure, collision,
//! deceleration, arrival) on a timeline. The generator samples one message per
//! tick and injects each episode on exactly the ticks whose interval
//! `[t, t + tick)` meets the episode interval. Seeded jitter on speed,
//! acceleration and lateral offset stays far from every event threshold, so
//! oracle scores follow from the scenario alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Point2, Trace, TraceMessage, TraceSchema, Value, ValueKind};

/// Distance to the destination that counts as arrived.
pub const ARRIVAL_RADIUS: f64 = 12.0;
/// Half-width of the band around a lane line that counts as driving on it.
pub const LANE_LINE_BAND: f64 = 0.3;

const ROUTE_CLEARANCE: f64 = ARRIVAL_RADIUS + 1.0;
const SPEED_JITTER: f64 = 0.5;
const LATERAL_JITTER: f64 = 0.2;
const MAX_LATERAL_OFFSET: f64 = 0.25;
const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    Speeding,
    LaneDeparture,
    Collision,
    Deceleration,
    Arrival,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeParams {
    /// Speed held during a speeding episode, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_speed: Option<f64>,
    /// Offset from the lane line during a lane departure, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_offset: Option<f64>,
    /// Braking magnitude during a deceleration episode, m/s².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deceleration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub kind: EpisodeKind,
    pub start: f64,
    /// Defaults to `start` (a point event).
    #[serde(default)]
    pub end: Option<f64>,
    #[serde(default)]
    pub params: EpisodeParams,
}

impl Episode {
    pub fn new(kind: EpisodeKind, start: f64, end: f64) -> Self {
        Episode {
            kind,
            start,
            end: Some(end),
            params: EpisodeParams::default(),
        }
    }

    pub fn end(&self) -> f64 {
        self.end.unwrap_or(self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConstants {
    pub speed_limit: f64,
    pub destination: [f64; 2],
    pub route_start: [f64; 2],
    pub route_end: [f64; 2],
    pub lane_width: f64,
}

impl Default for ScenarioConstants {
    fn default() -> Self {
        ScenarioConstants {
            speed_limit: 22.35,
            destination: [300.0, 200.0],
            route_start: [0.0, 0.0],
            route_end: [300.0, 0.0],
            lane_width: 3.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub duration: f64,
    pub tick: f64,
    #[serde(default)]
    pub constants: ScenarioConstants,
    #[serde(default)]
    pub episodes: Vec<Episode>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn tick_index(&self, t: f64) -> usize {
        (t / self.tick + TICK_EPS).floor() as usize
    }

    /// Inclusive tick indices touched by an episode.
    fn ticks(&self, e: &Episode) -> (usize, usize) {
        (self.tick_index(e.start), self.tick_index(e.end()).min(self.last_index()))
    }

    fn last_index(&self) -> usize {
        self.tick_index(self.duration)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        let c = &self.constants;
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return invalid(format!("tick must be positive, got {}", self.tick));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return invalid(format!("duration must be non-negative, got {}", self.duration));
        }
        if self.duration / self.tick > 1e6 {
            return invalid("more than a million ticks".into());
        }
        if !(c.speed_limit > 2.0 * SPEED_JITTER / 0.3) {
            return invalid(format!("speed limit {} is too low", c.speed_limit));
        }
        if !(c.lane_width >= 2.0) {
            return invalid(format!("lane width {} is below 2 m", c.lane_width));
        }
        let numbers = [c.destination, c.route_start, c.route_end].concat();
        if numbers.iter().any(|x| !x.is_finite()) {
            return invalid("coordinates must be finite".into());
        }
        let clearance = segment_distance(
            point(c.route_start),
            point(c.route_end),
            point(c.destination),
        );
        if clearance <= ROUTE_CLEARANCE {
            return invalid(format!(
                "route passes within {clearance:.2} m of the destination (needs more than {ROUTE_CLEARANCE} m)"
            ));
        }

        for (i, e) in self.episodes.iter().enumerate() {
            let end = e.end();
            if !(e.start >= 0.0 && e.start <= end && end <= self.duration) {
                return invalid(format!(
                    "episode {i} ({:?}) spans [{}, {end}] outside [0, {}] or backwards",
                    e.kind, e.start, self.duration
                ));
            }
            match e.kind {
                EpisodeKind::Speeding => {
                    if let Some(peak) = e.params.peak_speed {
                        if !(peak > c.speed_limit && peak.is_finite()) {
                            return invalid(format!("episode {i}: peak speed {peak} is not above the limit"));
                        }
                    }
                }
                EpisodeKind::LaneDeparture => {
                    if let Some(off) = e.params.lateral_offset {
                        if !(off.abs() <= MAX_LATERAL_OFFSET) {
                            return invalid(format!(
                                "episode {i}: lateral offset {off} exceeds {MAX_LATERAL_OFFSET} m"
                            ));
                        }
                    }
                }
                EpisodeKind::Deceleration => {
                    if let Some(d) = e.params.deceleration {
                        if !(d > 0.0 && d.is_finite()) {
                            return invalid(format!("episode {i}: deceleration {d} must be positive"));
                        }
                    }
                }
                EpisodeKind::Collision | EpisodeKind::Arrival => {}
            }
        }
        for (i, a) in self.episodes.iter().enumerate() {
            for b in &self.episodes[i + 1..] {
                if a.kind != b.kind {
                    continue;
                }
                let ((a0, a1), (b0, b1)) = (self.ticks(a), self.ticks(b));
                if a0 <= b1 && b0 <= a1 {
                    return invalid(format!("overlapping {:?} episodes at {} and {}", a.kind, a.start, b.start));
                }
            }
        }
        Ok(())
    }
}

fn point(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&Point2::new(a.x + s * dx, a.y + s * dy))
}

/// Field layout of every generated trace.
pub fn generated_schema() -> TraceSchema {
    TraceSchema::new([
        ("speed", ValueKind::Number),
        ("acceleration", ValueKind::Number),
        ("position", ValueKind::Point2),
        ("road_normal", ValueKind::Number),
        ("collision", ValueKind::Boolean),
    ])
    .expect("static schema is valid")
}

pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<Trace, ScenarioError> {
    spec.validate()?;
    let c = &spec.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = spec.last_index();
    let cruise = 0.7 * c.speed_limit;
    let lane_center = 1.5 * c.lane_width;
    let (start, end) = (point(c.route_start), point(c.route_end));

    let active = |i: usize, kind: EpisodeKind| {
        spec.episodes.iter().find(|e| {
            let (a, b) = spec.ticks(e);
            e.kind == kind && a <= i && i <= b
        })
    };

    let mut messages = Vec::with_capacity(last + 1);
    for i in 0..=last {
        let t = i as f64 * spec.tick;
        // draw jitter unconditionally so episodes do not shift the stream
        let speed_noise = rng.gen_range(-SPEED_JITTER..=SPEED_JITTER);
        let accel_noise = rng.gen_range(0.05..=0.25);
        let lateral_noise = rng.gen_range(-LATERAL_JITTER..=LATERAL_JITTER);

        let speed = match active(i, EpisodeKind::Speeding) {
            Some(e) => e.params.peak_speed.unwrap_or(c.speed_limit * 1.2),
            None => cruise + speed_noise,
        };
        let acceleration = match active(i, EpisodeKind::Deceleration) {
            Some(e) => -e.params.deceleration.unwrap_or(3.0),
            None => accel_noise,
        };
        let road_normal = match active(i, EpisodeKind::LaneDeparture) {
            Some(e) => c.lane_width + e.params.lateral_offset.unwrap_or(0.1),
            None => lane_center + lateral_noise,
        };
        let position = if active(i, EpisodeKind::Arrival).is_some() {
            point(c.destination)
        } else {
            let s = if spec.duration > 0.0 { (t / spec.duration).min(1.0) } else { 0.0 };
            Point2::new(start.x + s * (end.x - start.x), start.y + s * (end.y - start.y))
        };
        let collision = active(i, EpisodeKind::Collision).is_some();

        messages.push(TraceMessage {
            t,
            values: vec![
                Value::Number(speed),
                Value::Number(acceleration),
                Value::Point(position),
                Value::Number(road_normal),
                Value::Bool(collision),
            ],
        });
    }
    Trace::new(generated_schema(), messages).map_err(|e| ScenarioError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(episodes: Vec<Episode>) -> ScenarioSpec {
        ScenarioSpec {
            duration: 10.0,
            tick: 0.5,
            constants: ScenarioConstants::default(),
            episodes,
        }
    }

    fn column(trace: &Trace, field: &str) -> Vec<Value> {
        (0..trace.len()).map(|i| trace.value(i, field).unwrap()).collect()
    }

    #[test]
    fn one_collision_one_message() {
        let tr = generate(&spec(vec![Episode::new(EpisodeKind::Collision, 5.0, 5.0)]), 7).unwrap();
        let hits: Vec<f64> = column(&tr, "collision")
            .iter()
            .zip(tr.messages())
            .filter(|(v, _)| **v == Value::Bool(true))
            .map(|(_, m)| m.t)
            .collect();
        assert_eq!(hits, vec![5.0]);
        // a point between ticks lands on the tick that contains it
        let tr = generate(&spec(vec![Episode::new(EpisodeKind::Collision, 5.2, 5.2)]), 7).unwrap();
        let idx = column(&tr, "collision").iter().position(|v| *v == Value::Bool(true));
        assert_eq!(idx, Some(10));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(vec![Episode::new(EpisodeKind::Speeding, 1.0, 3.0)]);
        let a = generate(&s, 42).unwrap().to_canonical_string();
        assert_eq!(a, generate(&s, 42).unwrap().to_canonical_string());
        assert_ne!(a, generate(&s, 43).unwrap().to_canonical_string());
    }

    #[test]
    fn covers_the_duration() {
        let tr = generate(&spec(vec![]), 1).unwrap();
        assert_eq!(tr.len(), 21);
        assert_eq!(tr.duration(), 10.0);
        let odd = ScenarioSpec {
            duration: 10.2,
            ..spec(vec![])
        };
        assert!((odd.duration - generate(&odd, 1).unwrap().duration()).abs() < odd.tick);
    }

    #[test]
    fn nominal_trace_stays_clear_of_thresholds() {
        let s = spec(vec![]);
        let c = &s.constants;
        let tr = generate(&s, 3).unwrap();
        for i in 0..tr.len() {
            let speed = tr.value(i, "speed").unwrap().as_number().unwrap();
            let acc = tr.value(i, "acceleration").unwrap().as_number().unwrap();
            let rn = tr.value(i, "road_normal").unwrap().as_number().unwrap();
            let pos = tr.value(i, "position").unwrap().as_point().unwrap();
            assert!(speed < c.speed_limit);
            assert!(acc > 0.0);
            assert!((rn - c.lane_width).abs() > LANE_LINE_BAND && (rn - 2.0 * c.lane_width).abs() > LANE_LINE_BAND);
            assert!(pos.distance(&point(c.destination)) > ARRIVAL_RADIUS);
        }
    }

    #[test]
    fn episodes_apply_on_their_ticks() {
        let mut lane = Episode::new(EpisodeKind::LaneDeparture, 2.0, 3.0);
        lane.params.lateral_offset = Some(-0.2);
        let s = spec(vec![
            Episode::new(EpisodeKind::Speeding, 1.0, 2.0),
            lane,
            Episode::new(EpisodeKind::Deceleration, 4.0, 4.5),
            Episode::new(EpisodeKind::Arrival, 9.0, 10.0),
        ]);
        let tr = generate(&s, 9).unwrap();
        let limit = s.constants.speed_limit;
        for (i, m) in tr.messages().iter().enumerate() {
            let speeding = tr.value(i, "speed").unwrap().as_number().unwrap() > limit;
            assert_eq!(speeding, (1.0..=2.0).contains(&m.t), "t = {}", m.t);
            let rn = tr.value(i, "road_normal").unwrap().as_number().unwrap();
            assert_eq!(rn == 3.5, (2.0..=3.0).contains(&m.t));
            let braking = tr.value(i, "acceleration").unwrap().as_number().unwrap() < 0.0;
            assert_eq!(braking, (4.0..=4.5).contains(&m.t));
            let arrived = tr.value(i, "position").unwrap().as_point().unwrap().distance(&point(s.constants.destination)) < ARRIVAL_RADIUS;
            assert_eq!(arrived, m.t >= 9.0);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = [
            ScenarioSpec { tick: 0.0, ..spec(vec![]) },
            spec(vec![Episode::new(EpisodeKind::Speeding, 3.0, 2.0)]),
            spec(vec![Episode::new(EpisodeKind::Speeding, 3.0, 11.0)]),
            spec(vec![
                Episode::new(EpisodeKind::Speeding, 1.0, 3.0),
                Episode::new(EpisodeKind::Speeding, 2.0, 4.0),
            ]),
            spec(vec![
                Episode::new(EpisodeKind::Collision, 5.0, 5.0),
                Episode::new(EpisodeKind::Collision, 5.2, 5.2),
            ]),
            ScenarioSpec {
                constants: ScenarioConstants {
                    route_end: [300.0, 195.0],
                    ..ScenarioConstants::default()
                },
                ..spec(vec![])
            },
        ];
        for s in bad {
            assert!(matches!(generate(&s, 0), Err(ScenarioError::Invalid(_))), "{s:?}");
        }
        let mut peak = Episode::new(EpisodeKind::Speeding, 1.0, 2.0);
        peak.params.peak_speed = Some(10.0);
        assert!(spec(vec![peak]).validate().is_err());
    }

    #[test]
    fn parses_scenario_files() {
        let text = r#"{"duration": 6, "tick": 0.5,
            "constants": {"speed_limit": 20},
            "episodes": [{"kind": "collision", "start": 5},
                         {"kind": "speeding", "start": 1, "end": 2, "params": {"peak_speed": 25}}]}"#;
        let s = ScenarioSpec::from_json(text).unwrap();
        assert_eq!(s.constants.lane_width, 3.7);
        assert_eq!(s.episodes[0].end(), 5.0);
        assert_eq!(ScenarioSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(matches!(
            ScenarioSpec::from_json(r#"{"duration": 1, "tick": 1, "episodes": [{"kind": "flying", "start": 0}]}"#),
            Err(ScenarioError::Parse(_))
        ));
    }
}
