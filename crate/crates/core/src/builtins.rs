//! Bundled oracle definitions.
//!
//! `listing1`..`listing4` cover one property class each (safety, liveness,
//! timeliness, temporal). `od1_rubric`, `od2_competition` and `od3_framework`
//! are representative reconstructions of three styles of driving oracle; they
//! weigh the same behaviours differently and are not copies of any real
//! rubric. All entries check against [`crate::scenario::generated_schema`].

use thiserror::Error;

pub const NAMES: [&str; 7] = [
    "listing1",
    "listing2",
    "listing3",
    "listing4",
    "od1_rubric",
    "od2_competition",
    "od3_framework",
];

const SOURCES: [&str; 7] = [
    include_str!("../assets/listing1.odl"),
    include_str!("../assets/listing2.odl"),
    include_str!("../assets/listing3.odl"),
    include_str!("../assets/listing4.odl"),
    include_str!("../assets/od1_rubric.odl"),
    include_str!("../assets/od2_competition.odl"),
    include_str!("../assets/od3_framework.odl"),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown builtin oracle {0:?} (available: {list})", list = NAMES.join(", "))]
pub struct UnknownBuiltin(pub String);

pub fn load_builtin(name: &str) -> Result<&'static str, UnknownBuiltin> {
    NAMES
        .iter()
        .position(|n| *n == name)
        .map(|i| SOURCES[i])
        .ok_or_else(|| UnknownBuiltin(name.to_string()))
}
