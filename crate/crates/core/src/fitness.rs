//! The four fitness functions, their orientation onto a common
//! lower-is-worse scale, normalization, and pass/fail verdicts.

use crate::error::{Error, Result};
use crate::sim::{min_distances, ScenarioTrace, TestInput};
use serde::{Deserialize, Serialize};
use std::fmt;

/// |offset| beyond which the ego has left its lane (m).
pub const INVASION_OFFSET: f64 = 0.5;
/// A lane change has settled once the ego stays this close to the adjacent centerline (m)...
pub const SETTLE_OFFSET: f64 = 0.1;
/// ...for this many consecutive steps.
pub const SETTLE_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FitnessId {
    #[serde(alias = "f1")]
    F1,
    #[serde(alias = "f2")]
    F2,
    #[serde(alias = "f3")]
    F3,
    #[serde(alias = "f4")]
    F4,
}

impl FitnessId {
    pub const ALL: [FitnessId; 4] = [FitnessId::F1, FitnessId::F2, FitnessId::F3, FitnessId::F4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["F1", "F2", "F3", "F4"][self.index()]
    }

    pub fn describe(self) -> &'static str {
        match self {
            FitnessId::F1 => "lane invasions",
            FitnessId::F2 => "distance to other vehicles",
            FitnessId::F3 => "distance to static objects",
            FitnessId::F4 => "distance to destination",
        }
    }
}

impl fmt::Display for FitnessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FitnessId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(FitnessId::F1),
            "F2" => Ok(FitnessId::F2),
            "F3" => Ok(FitnessId::F3),
            "F4" => Ok(FitnessId::F4),
            _ => Err(Error::Config(format!("unknown fitness function {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LowerIsWorse,
    HigherIsWorse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessSpec {
    pub id: FitnessId,
    pub orientation: Orientation,
    /// `[lo, hi]` in raw units; evaluated values are clamped into it.
    pub raw_range: [f64; 2],
    pub threshold: f64,
    /// Whether a value exactly at the threshold fails.
    pub inclusive: bool,
}

impl FitnessSpec {
    pub fn lo(&self) -> f64 {
        self.raw_range[0]
    }

    pub fn hi(&self) -> f64 {
        self.raw_range[1]
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.raw_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("{}: raw_range must satisfy lo < hi", self.id)));
        }
        if !(lo..=hi).contains(&self.threshold) {
            return Err(Error::Config(format!("{}: threshold outside raw_range", self.id)));
        }
        Ok(())
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo(), self.hi())
    }

    /// Maps a raw value onto the lower-is-worse scale.
    pub fn orient(&self, v: f64) -> f64 {
        match self.orientation {
            Orientation::LowerIsWorse => v,
            Orientation::HigherIsWorse => (self.hi() - v) + self.lo(),
        }
    }

    pub fn unorient(&self, o: f64) -> f64 {
        // the reflection is its own inverse
        self.orient(o)
    }

    pub fn normalize(&self, v: f64) -> Result<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        if v < lo - 1e-9 || v > hi + 1e-9 || v.is_nan() {
            return Err(Error::OutOfRange { value: v, lo, hi });
        }
        Ok(((v - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    /// Normalized oriented value in `[0, 1]`; 0 is the worst outcome.
    pub fn score(&self, raw: f64) -> Result<f64> {
        self.normalize(self.orient(raw))
    }

    /// Whether a raw value fails this function.
    pub fn fails(&self, raw: f64) -> bool {
        let t = self.threshold;
        let beyond = match self.orientation {
            Orientation::LowerIsWorse => raw < t,
            Orientation::HigherIsWorse => raw > t,
        };
        beyond || (self.inclusive && raw == t)
    }

    /// The same rule stated on oriented values: fail iff at or below the
    /// oriented threshold (strictly below when not inclusive).
    pub fn fails_oriented(&self, oriented: f64) -> bool {
        let t = self.orient(self.threshold);
        oriented < t || (self.inclusive && oriented == t)
    }
}

/// Per-function specs, indexed by [`FitnessId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessSpecs(pub [FitnessSpec; 4]);

impl Default for FitnessSpecs {
    fn default() -> Self {
        FitnessSpecs([
            // integer counts: > 0.5 fails exactly the counts >= 1
            FitnessSpec {
                id: FitnessId::F1,
                orientation: Orientation::HigherIsWorse,
                raw_range: [0.0, 10.0],
                threshold: 0.5,
                inclusive: false,
            },
            FitnessSpec {
                id: FitnessId::F2,
                orientation: Orientation::LowerIsWorse,
                raw_range: [0.0, 20.0],
                threshold: 0.5,
                inclusive: true,
            },
            FitnessSpec {
                id: FitnessId::F3,
                orientation: Orientation::LowerIsWorse,
                raw_range: [0.0, 20.0],
                threshold: 0.5,
                inclusive: true,
            },
            // wide enough that a stalled ego is never clamped
            FitnessSpec {
                id: FitnessId::F4,
                orientation: Orientation::HigherIsWorse,
                raw_range: [0.0, 150.0],
                threshold: 1.0,
                inclusive: false,
            },
        ])
    }
}

impl FitnessSpecs {
    pub fn get(&self, id: FitnessId) -> &FitnessSpec {
        &self.0[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FitnessSpec> {
        self.0.iter()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.0.iter().enumerate() {
            if s.id.index() != i {
                return Err(Error::Config(format!("fitness spec {i} has id {}", s.id)));
            }
            s.validate()?;
        }
        Ok(())
    }
}

/// Raw fitness values of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FitnessVector {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl FitnessVector {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        FitnessVector { f1, f2, f3, f4 }
    }

    pub fn get(&self, id: FitnessId) -> f64 {
        self.to_array()[id.index()]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }

    pub fn oriented(&self, specs: &FitnessSpecs) -> [f64; 4] {
        FitnessId::ALL.map(|id| specs.get(id).orient(self.get(id)))
    }

    /// Normalized oriented values.
    pub fn scores(&self, specs: &FitnessSpecs) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for id in FitnessId::ALL {
            out[id.index()] = specs.get(id).score(self.get(id))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// `true` = fail, per function.
    pub fails: [bool; 4],
}

impl Verdict {
    pub fn fails(&self, id: FitnessId) -> bool {
        self.fails[id.index()]
    }

    pub fn any(&self) -> bool {
        self.fails.iter().any(|&f| f)
    }
}

pub fn verdict(v: &FitnessVector, specs: &FitnessSpecs) -> Verdict {
    Verdict {
        fails: FitnessId::ALL.map(|id| specs.get(id).fails(v.get(id))),
    }
}

/// Counts lane invasions of the ego that are not completed lane changes.
///
/// An excursion starts when the ego leaves its reference lane (or moves more
/// than [`INVASION_OFFSET`] from its centerline) and ends when it is back.
/// An excursion whose last [`SETTLE_STEPS`] steps sit within
/// [`SETTLE_OFFSET`] of the adjacent lane's centerline is a lane change: it
/// is not counted and the adjacent lane becomes the reference.
pub fn count_lane_invasions(trace: &ScenarioTrace, input: &TestInput) -> usize {
    let layout = &input.layout;
    let samples: Vec<(usize, f64)> = trace.scenes.iter().map(|s| (s.ego().lane, s.ego().offset)).collect();
    count_invasions(&samples, |lane| layout.adjacent(lane))
}

/// [`count_lane_invasions`] over raw `(lane, offset)` samples.
pub fn count_invasions(samples: &[(usize, f64)], adjacent: impl Fn(usize) -> usize) -> usize {
    let Some(&(first, _)) = samples.first() else {
        return 0;
    };
    let mut reference = first;
    let mut count = 0;
    let mut in_excursion = false;
    let mut settled = 0;
    for &(lane, offset) in samples {
        let home = lane == reference && offset.abs() <= INVASION_OFFSET;
        if !in_excursion {
            if home {
                continue;
            }
            in_excursion = true;
            settled = 0;
        }
        if home {
            count += 1;
            in_excursion = false;
            continue;
        }
        if lane == adjacent(reference) && offset.abs() < SETTLE_OFFSET {
            settled += 1;
        } else {
            settled = 0;
        }
        if settled >= SETTLE_STEPS {
            reference = lane;
            in_excursion = false;
        }
    }
    if in_excursion {
        count += 1;
    }
    count
}

pub fn eval_f1(trace: &ScenarioTrace, input: &TestInput, specs: &FitnessSpecs) -> f64 {
    specs
        .get(FitnessId::F1)
        .clamp(count_lane_invasions(trace, input) as f64)
}

/// Evaluates all four functions on one run. Absent object classes report the
/// top of the F2/F3 ranges.
pub fn evaluate(trace: &ScenarioTrace, input: &TestInput, specs: &FitnessSpecs) -> FitnessVector {
    let d = min_distances(trace, input);
    let f2 = specs.get(FitnessId::F2);
    let f3 = specs.get(FitnessId::F3);
    FitnessVector {
        f1: eval_f1(trace, input, specs),
        f2: if input.non_egos.is_empty() {
            f2.hi()
        } else {
            f2.clamp(d.non_ego)
        },
        f3: if input.statics.is_empty() {
            f3.hi()
        } else {
            f3.clamp(d.statics)
        },
        f4: specs.get(FitnessId::F4).clamp(d.destination),
    }
}
