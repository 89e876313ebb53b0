//! Primitive-operation timings, motional excitation and re-cooling time.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Gate1q,
    Gate2q,
    Split,
    Merge,
    LinearShuttle,
    JunctionCross,
    Swap,
    Readout,
    Recool,
}

impl OpKind {
    pub const ALL: [OpKind; 9] = [
        OpKind::Gate1q,
        OpKind::Gate2q,
        OpKind::Split,
        OpKind::Merge,
        OpKind::LinearShuttle,
        OpKind::JunctionCross,
        OpKind::Swap,
        OpKind::Readout,
        OpKind::Recool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Gate1q => "gate1q",
            OpKind::Gate2q => "gate2q",
            OpKind::Split => "split",
            OpKind::Merge => "merge",
            OpKind::LinearShuttle => "linear_shuttle",
            OpKind::JunctionCross => "junction_cross",
            OpKind::Swap => "swap",
            OpKind::Readout => "readout",
            OpKind::Recool => "recool",
        }
    }

    pub fn is_transport(self) -> bool {
        matches!(self, OpKind::Split | OpKind::Merge | OpKind::LinearShuttle | OpKind::JunctionCross | OpKind::Swap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpTiming {
    pub duration_us: f64,
    pub coherent: f64,
    pub thermal: f64,
}

impl OpTiming {
    pub fn excitation(&self) -> f64 {
        self.coherent + self.thermal
    }
}

/// Per-operation table for the integrated-photonics traps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratedTable {
    pub split: OpTiming,
    pub merge: OpTiming,
    pub junction_cross: OpTiming,
    pub swap: OpTiming,
    pub linear_shuttle: OpTiming,
    pub gate: OpTiming,
    pub readout: OpTiming,
}

/// Durations (µs) for the segmented trap, where cooling follows readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedTable {
    pub split_merge: f64,
    pub linear: f64,
    pub gate: f64,
    pub readout: f64,
    pub recool: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Current,
    Intermediate,
    Optimistic,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Current, Scenario::Intermediate, Scenario::Optimistic];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Current => "current",
            Scenario::Intermediate => "intermediate",
            Scenario::Optimistic => "optimistic",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingScenario {
    pub tag: Scenario,
    /// quanta/s
    pub heating_rate: f64,
    /// W_c, quanta/s
    pub cooling_rate: f64,
    /// Target occupation after cooling.
    pub nbar0: f64,
    pub integrated: IntegratedTable,
    pub segmented: SegmentedTable,
}

#[derive(Deserialize)]
struct TimingFile {
    #[allow(dead_code)]
    version: u32,
    nbar0: f64,
    scenarios: BTreeMap<String, ScenarioRow>,
}

#[derive(Deserialize)]
struct ScenarioRow {
    heating_rate: f64,
    cooling_rate: f64,
    integrated: IntegratedTable,
    segmented: SegmentedTable,
}

const TIMING: &str = include_str!("../data/timing.json");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TimingError {
    #[error("cooling rate must be positive, got {0}")]
    CoolingRate(f64),
    #[error("target occupation must be positive, got {0}")]
    Target(f64),
}

impl TimingScenario {
    /// The shipped table row for `tag`.
    pub fn load(tag: Scenario) -> TimingScenario {
        let file: TimingFile = serde_json::from_str(TIMING).expect("shipped timing table parses");
        let row = file.scenarios.get(tag.name()).expect("all scenarios are shipped");
        TimingScenario {
            tag,
            heating_rate: row.heating_rate,
            cooling_rate: row.cooling_rate,
            nbar0: file.nbar0,
            integrated: row.integrated.clone(),
            segmented: row.segmented.clone(),
        }
    }

    /// Integrated-trap timing of one primitive. Re-cooling has no fixed row;
    /// its duration comes from [`cooling_time`].
    pub fn integrated_op(&self, kind: OpKind) -> OpTiming {
        let t = &self.integrated;
        match kind {
            OpKind::Gate1q | OpKind::Gate2q => t.gate,
            OpKind::Split => t.split,
            OpKind::Merge => t.merge,
            OpKind::LinearShuttle => t.linear_shuttle,
            OpKind::JunctionCross => t.junction_cross,
            OpKind::Swap => t.swap,
            OpKind::Readout => t.readout,
            OpKind::Recool => OpTiming { duration_us: 0.0, coherent: 0.0, thermal: 0.0 },
        }
    }

    /// Segmented-trap duration (µs) of one primitive.
    pub fn segmented_duration(&self, kind: OpKind) -> f64 {
        let t = &self.segmented;
        match kind {
            OpKind::Gate1q | OpKind::Gate2q => t.gate,
            OpKind::Split | OpKind::Merge | OpKind::Swap => t.split_merge,
            OpKind::LinearShuttle | OpKind::JunctionCross => t.linear,
            OpKind::Readout => t.readout,
            OpKind::Recool => t.recool,
        }
    }

    /// Re-cooling time in µs for occupation `nbar` under this scenario.
    pub fn recool_us(&self, nbar: f64) -> f64 {
        cooling_time(nbar, self.nbar0, self.cooling_rate).expect("shipped rates are positive") * 1e6
    }
}

/// Seconds needed to cool from `nbar` to `nbar0` at rate `wc`, assuming the
/// cooling rate is proportional to the occupation.
pub fn cooling_time(nbar: f64, nbar0: f64, wc: f64) -> Result<f64, TimingError> {
    if !(wc > 0.0) {
        return Err(TimingError::CoolingRate(wc));
    }
    if !(nbar0 > 0.0) {
        return Err(TimingError::Target(nbar0));
    }
    if nbar <= nbar0 {
        return Ok(0.0);
    }
    Ok((nbar / nbar0).ln() / wc)
}

/// Total excitation (quanta) of a crystal after `ops`, counted from the
/// last re-cooling in the sequence.
pub fn accumulate_excitation(ops: &[OpKind], scenario: &TimingScenario) -> f64 {
    let start = ops.iter().rposition(|&k| k == OpKind::Recool).map_or(0, |i| i + 1);
    ops[start..].iter().map(|&k| scenario.integrated_op(k).excitation()).sum()
}
