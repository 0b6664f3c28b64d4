//! Timed execution traces.
//!
//! A trace file is line-delimited JSON. The first line is the schema, an
//! object mapping field names to `"number"`, `"boolean"` or `"point2"`. Every
//! following line is one record carrying `"t"` (seconds) and exactly the
//! schema fields. Point values are written as two-element arrays `[x, y]`.

use std::fmt;
use std::io::{BufRead, Write};

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

/// Name of the implicit time field.
pub const TIME_FIELD: &str = "t";

/// A position on the map, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Point(Point2),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Number(_) => ValueKind::Number,
            Value::Bool(_) => ValueKind::Boolean,
            Value::Point(_) => ValueKind::Point2,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_point(&self) -> Option<Point2> {
        match self {
            Value::Point(p) => Some(*p),
            _ => None,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Number(x) => x.is_finite(),
            Value::Bool(_) => true,
            Value::Point(p) => p.x.is_finite() && p.y.is_finite(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Point(p) => write!(f, "point({:?}, {:?})", p.x, p.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Number,
    Boolean,
    Point2,
}

impl ValueKind {
    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Number => "number",
            ValueKind::Boolean => "boolean",
            ValueKind::Point2 => "point2",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "number" => Some(ValueKind::Number),
            "boolean" => Some(ValueKind::Boolean),
            "point2" => Some(ValueKind::Point2),
            _ => None,
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered field declarations. The time field is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceSchema {
    fields: Vec<(String, ValueKind)>,
}

impl TraceSchema {
    pub fn new<I, S>(fields: I) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = (S, ValueKind)>,
        S: Into<String>,
    {
        let mut schema = TraceSchema::default();
        for (name, kind) in fields {
            schema.push(name.into(), kind)?;
        }
        Ok(schema)
    }

    fn push(&mut self, name: String, kind: ValueKind) -> Result<(), SchemaError> {
        if name == TIME_FIELD {
            return Err(SchemaError::ReservedTime);
        }
        if self.index_of(&name).is_some() {
            return Err(SchemaError::Duplicate(name));
        }
        self.fields.push((name, kind));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }

    pub fn kind_of(&self, name: &str) -> Option<ValueKind> {
        self.index_of(name).map(|i| self.fields[i].1)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, ValueKind)> {
        self.fields.iter().map(|(n, k)| (n.as_str(), *k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("field `t` is implicit and cannot be declared")]
    ReservedTime,
    #[error("duplicate schema field `{0}`")]
    Duplicate(String),
}

/// One time-stamped message. `values` is aligned with the schema's field order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMessage {
    pub t: f64,
    pub values: Vec<Value>,
}

/// A validated trace: conforming messages with non-decreasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    schema: TraceSchema,
    messages: Vec<TraceMessage>,
}

impl Trace {
    /// Builds a trace, checking every invariant. Errors carry the zero-based
    /// message index in place of a line number.
    pub fn new(schema: TraceSchema, messages: Vec<TraceMessage>) -> Result<Self, TraceError> {
        let mut prev = None;
        for (i, msg) in messages.iter().enumerate() {
            validate_message(&schema, msg, prev).map_err(|kind| TraceError { line: i, kind })?;
            prev = Some(msg.t);
        }
        Ok(Trace { schema, messages })
    }

    pub fn schema(&self) -> &TraceSchema {
        &self.schema
    }

    pub fn messages(&self) -> &[TraceMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Time between first and last message; zero for fewer than two messages.
    pub fn duration(&self) -> f64 {
        match (self.messages.first(), self.messages.last()) {
            (Some(first), Some(last)) if self.messages.len() >= 2 => last.t - first.t,
            _ => 0.0,
        }
    }

    /// Looks up a named field of message `index`.
    pub fn value(&self, index: usize, field: &str) -> Option<Value> {
        let slot = self.schema.index_of(field)?;
        self.messages.get(index).map(|m| m.values[slot])
    }

    /// Writes the canonical serialization: schema order, `t` first.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"{")?;
        for (i, (name, kind)) in self.schema.fields().enumerate() {
            if i > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{}:\"{}\"", json_str(name), kind)?;
        }
        out.write_all(b"}\n")?;
        for msg in &self.messages {
            write!(out, "{{\"t\":{}", json_num(msg.t))?;
            for ((name, _), value) in self.schema.fields().zip(&msg.values) {
                write!(out, ",{}:", json_str(name))?;
                match value {
                    Value::Number(x) => out.write_all(json_num(*x).as_bytes())?,
                    Value::Bool(b) => write!(out, "{b}")?,
                    Value::Point(p) => write!(out, "[{},{}]", json_num(p.x), json_num(p.y))?,
                }
            }
            out.write_all(b"}\n")?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("canonical output is UTF-8")
    }
}

/// Shortest round-trip decimal rendering of a finite double.
pub(crate) fn json_num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite numbers serialize")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Trace ingestion failure. `line` is 1-based when produced by [`parse_trace`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct TraceError {
    pub line: usize,
    pub kind: TraceErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceErrorKind {
    #[error("read failed: {0}")]
    Io(String),
    #[error("missing schema line")]
    MissingSchema,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("unknown field kind `{0}` (expected number, boolean or point2)")]
    UnknownKind(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unexpected field `{0}`")]
    UnexpectedField(String),
    #[error("duplicate field `{0}` in record")]
    DuplicateField(String),
    #[error("field `{field}` should be {expected}")]
    WrongKind { field: String, expected: ValueKind },
    #[error("field `{0}` is not a finite number")]
    NonFinite(String),
    #[error("timestamp {t} is earlier than the previous timestamp {previous}")]
    DecreasingTimestamp { t: f64, previous: f64 },
    #[error("message has {found} values but the schema declares {expected}")]
    Arity { found: usize, expected: usize },
}

impl TraceError {
    pub fn is_io(&self) -> bool {
        matches!(self.kind, TraceErrorKind::Io(_))
    }
}

fn validate_message(
    schema: &TraceSchema,
    msg: &TraceMessage,
    prev: Option<f64>,
) -> Result<(), TraceErrorKind> {
    if !msg.t.is_finite() {
        return Err(TraceErrorKind::NonFinite(TIME_FIELD.to_string()));
    }
    if msg.values.len() != schema.len() {
        return Err(TraceErrorKind::Arity {
            found: msg.values.len(),
            expected: schema.len(),
        });
    }
    for ((name, kind), value) in schema.fields().zip(&msg.values) {
        if value.kind() != kind {
            return Err(TraceErrorKind::WrongKind {
                field: name.to_string(),
                expected: kind,
            });
        }
        if !value.is_finite() {
            return Err(TraceErrorKind::NonFinite(name.to_string()));
        }
    }
    if let Some(previous) = prev {
        if msg.t < previous {
            return Err(TraceErrorKind::DecreasingTimestamp { t: msg.t, previous });
        }
    }
    Ok(())
}

/// JSON object kept as an ordered list of entries so that duplicate keys
/// can be reported instead of silently collapsed.
struct Entries(Vec<(String, serde_json::Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, serde_json::Value>()? {
                    entries.push((k, v));
                }
                Ok(Entries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn parse_entries(line: &str) -> Result<Entries, TraceErrorKind> {
    serde_json::from_str::<Entries>(line).map_err(|e| TraceErrorKind::Malformed(e.to_string()))
}

fn parse_schema(line: &str) -> Result<TraceSchema, TraceErrorKind> {
    let mut schema = TraceSchema::default();
    for (name, kind) in parse_entries(line)?.0 {
        let kind_name = kind
            .as_str()
            .ok_or_else(|| TraceErrorKind::Malformed(format!("kind of `{name}` must be a string")))?;
        let kind = ValueKind::from_name(kind_name)
            .ok_or_else(|| TraceErrorKind::UnknownKind(kind_name.to_string()))?;
        schema.push(name, kind)?;
    }
    Ok(schema)
}

fn finite_number(field: &str, v: &serde_json::Value) -> Result<f64, TraceErrorKind> {
    // serde_json rejects NaN/inf literals, but very large literals overflow to inf.
    let x = v.as_f64().ok_or_else(|| TraceErrorKind::WrongKind {
        field: field.to_string(),
        expected: ValueKind::Number,
    })?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(TraceErrorKind::NonFinite(field.to_string()))
    }
}

fn convert_value(field: &str, kind: ValueKind, v: &serde_json::Value) -> Result<Value, TraceErrorKind> {
    let wrong = || TraceErrorKind::WrongKind {
        field: field.to_string(),
        expected: kind,
    };
    match kind {
        ValueKind::Number => finite_number(field, v).map(Value::Number),
        ValueKind::Boolean => v.as_bool().map(Value::Bool).ok_or_else(wrong),
        ValueKind::Point2 => match v.as_array().map(Vec::as_slice) {
            Some([x, y]) if x.is_number() && y.is_number() => Ok(Value::Point(Point2::new(
                finite_number(field, x)?,
                finite_number(field, y)?,
            ))),
            _ => Err(wrong()),
        },
    }
}

fn parse_record(schema: &TraceSchema, line: &str) -> Result<TraceMessage, TraceErrorKind> {
    let mut t = None;
    let mut slots: Vec<Option<Value>> = vec![None; schema.len()];
    for (name, raw) in parse_entries(line)?.0 {
        if name == TIME_FIELD {
            if t.is_some() {
                return Err(TraceErrorKind::DuplicateField(name));
            }
            t = Some(finite_number(TIME_FIELD, &raw)?);
            continue;
        }
        let slot = schema
            .index_of(&name)
            .ok_or_else(|| TraceErrorKind::UnexpectedField(name.clone()))?;
        if slots[slot].is_some() {
            return Err(TraceErrorKind::DuplicateField(name));
        }
        let kind = schema.fields[slot].1;
        slots[slot] = Some(convert_value(&name, kind, &raw)?);
    }
    let t = t.ok_or_else(|| TraceErrorKind::MissingField(TIME_FIELD.to_string()))?;
    let values = slots
        .into_iter()
        .zip(schema.fields())
        .map(|(v, (name, _))| v.ok_or_else(|| TraceErrorKind::MissingField(name.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(TraceMessage { t, values })
}

/// Parses a trace file. Blank lines are ignored; every diagnostic carries the
/// 1-based line number of the offending line.
pub fn parse_trace<R: BufRead>(input: R) -> Result<Trace, TraceError> {
    let mut schema: Option<TraceSchema> = None;
    let mut messages: Vec<TraceMessage> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let at = |kind| TraceError { line: line_no, kind };
        let line = line.map_err(|e| at(TraceErrorKind::Io(e.to_string())))?;
        if line.trim().is_empty() {
            continue;
        }
        match &schema {
            None => schema = Some(parse_schema(&line).map_err(at)?),
            Some(s) => {
                let msg = parse_record(s, &line).map_err(at)?;
                validate_message(s, &msg, messages.last().map(|m| m.t)).map_err(at)?;
                messages.push(msg);
            }
        }
    }
    let schema = schema.ok_or(TraceError {
        line: 1,
        kind: TraceErrorKind::MissingSchema,
    })?;
    Ok(Trace { schema, messages })
}

pub fn parse_trace_str(input: &str) -> Result<Trace, TraceError> {
    parse_trace(input.as_bytes())
}
