//! Test inputs: a configured initial scene plus simulation duration and time step.

use super::geometry::{Quad, Vec2};
use super::layout::RoadLayout;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::hash::Hasher;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: String,
    pub start: Vec2,
    pub destination: Vec2,
    pub target_speed: f64,
    pub length: f64,
    pub width: f64,
    pub is_ego: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticObjectSpec {
    pub center: Vec2,
    pub half_extents: Vec2,
}

impl StaticObjectSpec {
    pub fn footprint(&self) -> Quad {
        Quad::aabb(self.center, self.half_extents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ambient {
    /// 0 = clear, 1 = worst.
    pub weather: f64,
    /// 0 = noon, 1 = night.
    pub time_of_day: f64,
}

impl Ambient {
    pub fn severity(&self) -> f64 {
        (self.weather + self.time_of_day) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInput {
    pub id: String,
    pub layout: RoadLayout,
    pub ego: VehicleSpec,
    pub non_egos: Vec<VehicleSpec>,
    pub statics: Vec<StaticObjectSpec>,
    pub ambient: Ambient,
    pub duration: f64,
    pub time_step: f64,
}

/// A vehicle's route: it stays on one road, travelling from `start_along`
/// to `dest_along`, switching lanes if the two lanes differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub road: usize,
    pub start_lane: usize,
    pub dest_lane: usize,
    pub start_along: f64,
    pub dest_along: f64,
}

impl Route {
    pub fn heading(&self) -> f64 {
        let d = RoadLayout::road_dir(self.road);
        d.y.atan2(d.x)
    }

    pub fn changes_lane(&self) -> bool {
        self.start_lane != self.dest_lane
    }
}

pub const MAX_NON_EGOS: usize = 4;
pub const MAX_STATICS: usize = 6;

impl VehicleSpec {
    pub fn route(&self, layout: &RoadLayout) -> Result<Route> {
        let s = layout.lateral_offset(self.start)?;
        let d = layout.lateral_offset(self.destination)?;
        let road = s.lane / 2;
        if d.lane / 2 != road {
            return Err(Error::InvalidInput(format!(
                "vehicle {}: start and destination lie on different roads",
                self.id
            )));
        }
        let (start_along, _) = RoadLayout::road_frame(road, self.start);
        let (dest_along, _) = RoadLayout::road_frame(road, self.destination);
        Ok(Route {
            road,
            start_lane: s.lane,
            dest_lane: d.lane,
            start_along,
            dest_along,
        })
    }

    pub fn start_footprint(&self, layout: &RoadLayout) -> Result<Quad> {
        let r = self.route(layout)?;
        Ok(Quad::oriented(self.start, r.heading(), self.length, self.width))
    }

    fn validate(&self, layout: &RoadLayout) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("vehicle {}: {msg}", self.id)));
        if !(self.target_speed > 0.0 && self.target_speed.is_finite()) {
            return bad(format!("target_speed must be positive, got {}", self.target_speed));
        }
        if !(self.length > 0.0 && self.width > 0.0) {
            return bad("length and width must be positive".into());
        }
        if self.start == self.destination {
            return bad("start equals destination".into());
        }
        let r = self.route(layout)?;
        if r.dest_along <= r.start_along {
            return bad("destination must lie ahead of the start along the road".into());
        }
        Ok(())
    }
}

impl TestInput {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if !self.ego.is_ego {
            return Err(Error::InvalidInput("ego vehicle must have is_ego = true".into()));
        }
        if self.non_egos.iter().any(|v| v.is_ego) {
            return Err(Error::InvalidInput("exactly one vehicle may be the ego".into()));
        }
        if self.non_egos.len() > MAX_NON_EGOS || self.statics.len() > MAX_STATICS {
            return Err(Error::InvalidInput("too many objects".into()));
        }
        if !(self.time_step > 0.0 && self.duration >= self.time_step) {
            return Err(Error::InvalidInput(format!(
                "need duration >= time_step > 0, got duration {} and time_step {}",
                self.duration, self.time_step
            )));
        }
        let a = &self.ambient;
        if !(0.0..=1.0).contains(&a.weather) || !(0.0..=1.0).contains(&a.time_of_day) {
            return Err(Error::InvalidInput("ambient values must lie in [0, 1]".into()));
        }
        let mut footprints = Vec::with_capacity(1 + self.non_egos.len());
        for v in self.vehicles() {
            v.validate(&self.layout)?;
            footprints.push(v.start_footprint(&self.layout)?);
        }
        for i in 0..footprints.len() {
            for j in i + 1..footprints.len() {
                if footprints[i].overlaps(&footprints[j]) {
                    return Err(Error::InvalidInput(format!(
                        "vehicle start positions {i} and {j} overlap"
                    )));
                }
            }
        }
        for (k, s) in self.statics.iter().enumerate() {
            if !(s.half_extents.x > 0.0 && s.half_extents.y > 0.0) {
                return Err(Error::InvalidInput(format!("static {k}: non-positive extent")));
            }
            if s.footprint().overlaps(&footprints[0]) {
                return Err(Error::InvalidInput(format!(
                    "static {k} overlaps the ego start position"
                )));
            }
        }
        Ok(())
    }

    /// Ego first, then non-egos in declaration order.
    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleSpec> {
        std::iter::once(&self.ego).chain(self.non_egos.iter())
    }

    /// Number of integration steps; the trace holds one more scene than this.
    pub fn step_count(&self) -> usize {
        // the epsilon absorbs representation error, e.g. 30.0 / 0.1 = 299.999...
        (self.duration / self.time_step + 1e-9).floor() as usize
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("test inputs always serialize")
    }

    pub fn content_hash(&self) -> u64 {
        fnv1a(&self.canonical_bytes())
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self> {
        let input: TestInput = serde_json::from_slice(bytes)?;
        input.validate()?;
        Ok(input)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }
}
