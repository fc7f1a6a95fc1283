//! The sampled input space and its normalized variable encoding.
//!
//! Every variable is drawn uniformly from an inclusive range. Objects are
//! placed by road-frame coordinates, so vehicle starts and destinations land
//! exactly on lane centerlines. A placement that violates an invariant is
//! redrawn on its own, which keeps object counts exactly uniform.

use super::geometry::Vec2;
use super::input::{Ambient, StaticObjectSpec, TestInput, VehicleSpec, MAX_NON_EGOS, MAX_STATICS};
use super::layout::{LayoutKind, RoadLayout};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Retry budget shared by all placements of one draw.
pub const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    /// Maps `v` to `[0, 1]`; degenerate ranges map everything to 0.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.hi > self.lo {
            (v - self.lo) / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(Error::InvalidSpace(format!(
                "range {name} = [{}, {}] is empty",
                self.lo, self.hi
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub const fn new(lo: usize, hi: usize) -> Self {
        IntRange { lo, hi }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.lo..=self.hi)
    }

    pub fn as_range(&self) -> Range {
        Range::new(self.lo as f64, self.hi as f64)
    }

    fn check(&self, name: &str, max: usize) -> Result<()> {
        if self.lo <= self.hi && self.hi <= max {
            Ok(())
        } else {
            Err(Error::InvalidSpace(format!(
                "range {name} = [{}, {}] must be non-empty and within [0, {max}]",
                self.lo, self.hi
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputSpace {
    pub master_seed: u64,
    /// 0 = straight two-lane road, 1 = cross intersection.
    pub layout_kind: IntRange,
    pub lane_width: Range,
    pub arm_length: Range,
    pub non_ego_count: IntRange,
    pub static_count: IntRange,
    /// 0 = right lane, 1 = left lane.
    pub lane: IntRange,
    pub vehicle_length: Range,
    pub vehicle_width: Range,
    pub ego_start_along: Range,
    pub ego_dest_along: Range,
    pub ego_speed: Range,
    /// Clamped to the roads the layout has.
    pub non_ego_road: IntRange,
    pub non_ego_start_along: Range,
    pub non_ego_travel: Range,
    pub non_ego_speed: Range,
    pub static_road: IntRange,
    /// 0 = right of the road, 1 = left.
    pub static_side: IntRange,
    pub static_along: Range,
    /// Distance from the road edge to the near face of the object; negative values protrude into the road.
    pub static_edge_gap: Range,
    pub static_half_along: Range,
    pub static_half_lateral: Range,
    pub weather: Range,
    pub time_of_day: Range,
    pub duration: Range,
    pub time_step: Range,
}

impl Default for InputSpace {
    fn default() -> Self {
        InputSpace {
            master_seed: 0,
            layout_kind: IntRange::new(0, 1),
            lane_width: Range::new(3.0, 4.0),
            arm_length: Range::new(100.0, 100.0),
            non_ego_count: IntRange::new(0, 4),
            static_count: IntRange::new(0, 6),
            lane: IntRange::new(0, 1),
            vehicle_length: Range::new(4.0, 5.0),
            vehicle_width: Range::new(1.8, 2.0),
            ego_start_along: Range::new(-60.0, -30.0),
            ego_dest_along: Range::new(10.0, 60.0),
            ego_speed: Range::new(4.0, 10.0),
            non_ego_road: IntRange::new(0, 1),
            non_ego_start_along: Range::new(-70.0, 30.0),
            non_ego_travel: Range::new(20.0, 60.0),
            non_ego_speed: Range::new(3.0, 10.0),
            static_road: IntRange::new(0, 1),
            static_side: IntRange::new(0, 1),
            static_along: Range::new(-80.0, 80.0),
            static_edge_gap: Range::new(-0.5, 2.5),
            static_half_along: Range::new(0.5, 2.5),
            static_half_lateral: Range::new(0.3, 1.5),
            weather: Range::new(0.0, 1.0),
            time_of_day: Range::new(0.0, 1.0),
            duration: Range::new(20.0, 30.0),
            time_step: Range::new(0.1, 0.1),
        }
    }
}

/// Which group a variable belongs to, used by feature subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableGroup {
    Layout,
    Ambient,
    Scene,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix(parent, index)
}

impl InputSpace {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout_kind.check("layout_kind", 1)?;
        self.non_ego_count.check("non_ego_count", MAX_NON_EGOS)?;
        self.static_count.check("static_count", MAX_STATICS)?;
        self.lane.check("lane", 1)?;
        self.non_ego_road.check("non_ego_road", 1)?;
        self.static_road.check("static_road", 1)?;
        self.static_side.check("static_side", 1)?;
        for (name, r) in self.real_ranges() {
            r.check(name)?;
        }
        let positive = [
            ("lane_width", self.lane_width),
            ("arm_length", self.arm_length),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("ego_speed", self.ego_speed),
            ("non_ego_speed", self.non_ego_speed),
            ("non_ego_travel", self.non_ego_travel),
            ("static_half_along", self.static_half_along),
            ("static_half_lateral", self.static_half_lateral),
            ("time_step", self.time_step),
        ];
        for (name, r) in positive {
            if r.lo <= 0.0 {
                return Err(Error::InvalidSpace(format!("{name} must be positive")));
            }
        }
        if self.weather.lo < 0.0 || self.weather.hi > 1.0 || self.time_of_day.lo < 0.0 || self.time_of_day.hi > 1.0 {
            return Err(Error::InvalidSpace("ambient ranges must lie within [0, 1]".into()));
        }
        if self.ego_dest_along.lo <= self.ego_start_along.hi {
            return Err(Error::InvalidSpace(
                "ego destinations must lie ahead of every start".into(),
            ));
        }
        if self.duration.lo < self.time_step.hi {
            return Err(Error::InvalidSpace("duration must be at least the time step".into()));
        }
        Ok(())
    }

    fn real_ranges(&self) -> [(&'static str, Range); 18] {
        [
            ("lane_width", self.lane_width),
            ("arm_length", self.arm_length),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("ego_start_along", self.ego_start_along),
            ("ego_dest_along", self.ego_dest_along),
            ("ego_speed", self.ego_speed),
            ("non_ego_start_along", self.non_ego_start_along),
            ("non_ego_travel", self.non_ego_travel),
            ("non_ego_speed", self.non_ego_speed),
            ("static_along", self.static_along),
            ("static_edge_gap", self.static_edge_gap),
            ("static_half_along", self.static_half_along),
            ("static_half_lateral", self.static_half_lateral),
            ("weather", self.weather),
            ("time_of_day", self.time_of_day),
            ("duration", self.duration),
            ("time_step", self.time_step),
        ]
    }

    /// Draws test input `draw_index` of this space.
    pub fn sample(&self, draw_index: u64) -> Result<TestInput> {
        sample_test_input(self, draw_index)
    }

    /// Ordered variable names of the encoding.
    pub fn variable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = [
            "layout_kind",
            "lane_width",
            "arm_length",
            "weather",
            "time_of_day",
            "duration",
            "time_step",
            "non_ego_count",
            "static_count",
            "ego_start_lane",
            "ego_dest_lane",
            "ego_start_along",
            "ego_dest_along",
            "ego_speed",
            "ego_length",
            "ego_width",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for k in 0..MAX_NON_EGOS {
            for f in [
                "road",
                "start_lane",
                "dest_lane",
                "start_along",
                "dest_along",
                "speed",
                "length",
                "width",
            ] {
                names.push(format!("non_ego{k}_{f}"));
            }
        }
        for k in 0..MAX_STATICS {
            for f in ["road", "side", "along", "edge_gap", "half_along", "half_lateral"] {
                names.push(format!("static{k}_{f}"));
            }
        }
        names
    }

    pub fn variable_groups(&self) -> Vec<VariableGroup> {
        self.variable_names()
            .iter()
            .map(|n| match n.as_str() {
                "layout_kind" | "lane_width" | "arm_length" => VariableGroup::Layout,
                "weather" | "time_of_day" => VariableGroup::Ambient,
                _ => VariableGroup::Scene,
            })
            .collect()
    }

    /// Raw range of each variable, in [`InputSpace::variable_names`] order.
    pub fn variable_ranges(&self) -> Vec<Range> {
        let lane_r = self.lane.as_range();
        let mut r = vec![
            self.layout_kind.as_range(),
            self.lane_width,
            self.arm_length,
            self.weather,
            self.time_of_day,
            self.duration,
            self.time_step,
            self.non_ego_count.as_range(),
            self.static_count.as_range(),
            lane_r,
            lane_r,
            self.ego_start_along,
            self.ego_dest_along,
            self.ego_speed,
            self.vehicle_length,
            self.vehicle_width,
        ];
        for _ in 0..MAX_NON_EGOS {
            r.extend([
                self.non_ego_road.as_range(),
                lane_r,
                lane_r,
                self.non_ego_start_along,
                self.non_ego_dest_range(),
                self.non_ego_speed,
                self.vehicle_length,
                self.vehicle_width,
            ]);
        }
        for _ in 0..MAX_STATICS {
            r.extend([
                self.static_road.as_range(),
                self.static_side.as_range(),
                self.static_along,
                self.static_edge_gap,
                self.static_half_along,
                self.static_half_lateral,
            ]);
        }
        r
    }

    fn non_ego_dest_range(&self) -> Range {
        Range::new(
            self.non_ego_start_along.lo + self.non_ego_travel.lo,
            self.non_ego_start_along.hi + self.non_ego_travel.hi,
        )
    }

    /// Range-normalized variable vector of `input`; absent object slots are zero.
    pub fn variables(&self, input: &TestInput) -> Vec<f64> {
        let layout = &input.layout;
        let mut v = Vec::with_capacity(16 + 8 * MAX_NON_EGOS + 6 * MAX_STATICS);
        v.push(self.layout_kind.as_range().normalize(layout.layout_kind.index() as f64));
        v.push(self.lane_width.normalize(layout.lane_width));
        v.push(self.arm_length.normalize(layout.arm_length));
        v.push(self.weather.normalize(input.ambient.weather));
        v.push(self.time_of_day.normalize(input.ambient.time_of_day));
        v.push(self.duration.normalize(input.duration));
        v.push(self.time_step.normalize(input.time_step));
        v.push(self.non_ego_count.as_range().normalize(input.non_egos.len() as f64));
        v.push(self.static_count.as_range().normalize(input.statics.len() as f64));

        let lane_r = self.lane.as_range();
        let ego = input.ego.route(layout).expect("inputs from this space have routes");
        v.push(lane_r.normalize((ego.start_lane % 2) as f64));
        v.push(lane_r.normalize((ego.dest_lane % 2) as f64));
        v.push(self.ego_start_along.normalize(ego.start_along));
        v.push(self.ego_dest_along.normalize(ego.dest_along));
        v.push(self.ego_speed.normalize(input.ego.target_speed));
        v.push(self.vehicle_length.normalize(input.ego.length));
        v.push(self.vehicle_width.normalize(input.ego.width));

        let dest_r = self.non_ego_dest_range();
        for k in 0..MAX_NON_EGOS {
            match input.non_egos.get(k) {
                Some(spec) => {
                    let r = spec.route(layout).expect("inputs from this space have routes");
                    v.push(self.non_ego_road.as_range().normalize(r.road as f64));
                    v.push(lane_r.normalize((r.start_lane % 2) as f64));
                    v.push(lane_r.normalize((r.dest_lane % 2) as f64));
                    v.push(self.non_ego_start_along.normalize(r.start_along));
                    v.push(dest_r.normalize(r.dest_along));
                    v.push(self.non_ego_speed.normalize(spec.target_speed));
                    v.push(self.vehicle_length.normalize(spec.length));
                    v.push(self.vehicle_width.normalize(spec.width));
                }
                None => v.extend([0.0; 8]),
            }
        }
        for k in 0..MAX_STATICS {
            match input.statics.get(k) {
                Some(s) => {
                    let p = StaticPlacement::recover(layout, s);
                    v.push(self.static_road.as_range().normalize(p.road as f64));
                    v.push(self.static_side.as_range().normalize(p.side as f64));
                    v.push(self.static_along.normalize(p.along));
                    v.push(self.static_edge_gap.normalize(p.edge_gap));
                    v.push(self.static_half_along.normalize(p.half_along));
                    v.push(self.static_half_lateral.normalize(p.half_lateral));
                }
                None => v.extend([0.0; 6]),
            }
        }
        v
    }
}

/// Road-frame description of a static object.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StaticPlacement {
    road: usize,
    side: usize,
    along: f64,
    edge_gap: f64,
    half_along: f64,
    half_lateral: f64,
}

impl StaticPlacement {
    fn to_spec(self, layout: &RoadLayout) -> StaticObjectSpec {
        let sign = if self.side == 0 { -1.0 } else { 1.0 };
        let lateral = sign * (layout.lane_width + self.edge_gap + self.half_lateral);
        let center = RoadLayout::road_point(self.road, self.along, lateral);
        let half_extents = if self.road == 0 {
            Vec2::new(self.half_along, self.half_lateral)
        } else {
            Vec2::new(self.half_lateral, self.half_along)
        };
        StaticObjectSpec { center, half_extents }
    }

    fn recover(layout: &RoadLayout, s: &StaticObjectSpec) -> Self {
        let road = layout.lateral_offset(s.center).map(|o| o.lane / 2).unwrap_or(0);
        let (along, lateral) = RoadLayout::road_frame(road, s.center);
        let (half_along, half_lateral) = if road == 0 {
            (s.half_extents.x, s.half_extents.y)
        } else {
            (s.half_extents.y, s.half_extents.x)
        };
        StaticPlacement {
            road,
            side: usize::from(lateral > 0.0),
            along,
            edge_gap: lateral.abs() - layout.lane_width - half_lateral,
            half_along,
            half_lateral,
        }
    }
}

struct Budget {
    left: usize,
}

impl Budget {
    fn spend(&mut self, what: &str) -> Result<()> {
        if self.left == 0 {
            return Err(Error::UnsatisfiableSpace {
                reason: format!("no valid placement for {what} within {MAX_RETRIES} retries"),
                achieved: 0,
                requested: 1,
            });
        }
        self.left -= 1;
        Ok(())
    }
}

/// Draws a test input uniformly from `space`, deterministically in
/// `(space.master_seed, draw_index)`.
pub fn sample_test_input(space: &InputSpace, draw_index: u64) -> Result<TestInput> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(space.master_seed, draw_index));
    let mut budget = Budget { left: MAX_RETRIES };

    let kind = LayoutKind::from_index(space.layout_kind.sample(&mut rng));
    let layout = RoadLayout::new(
        kind,
        space.lane_width.sample(&mut rng),
        space.arm_length.sample(&mut rng),
    )?;
    let ambient = Ambient {
        weather: space.weather.sample(&mut rng),
        time_of_day: space.time_of_day.sample(&mut rng),
    };
    let duration = space.duration.sample(&mut rng);
    let time_step = space.time_step.sample(&mut rng);
    let n_non_egos = space.non_ego_count.sample(&mut rng);
    let n_statics = space.static_count.sample(&mut rng);

    let ego_start_lane = space.lane.sample(&mut rng);
    let ego_dest_lane = space.lane.sample(&mut rng);
    let ego = VehicleSpec {
        id: "ego".into(),
        start: layout.lane_point(ego_start_lane, space.ego_start_along.sample(&mut rng)),
        destination: layout.lane_point(ego_dest_lane, space.ego_dest_along.sample(&mut rng)),
        target_speed: space.ego_speed.sample(&mut rng),
        length: space.vehicle_length.sample(&mut rng),
        width: space.vehicle_width.sample(&mut rng),
        is_ego: true,
    };
    let mut footprints = vec![ego.start_footprint(&layout)?];

    let roads = layout.road_count();
    let mut non_egos = Vec::with_capacity(n_non_egos);
    for k in 0..n_non_egos {
        loop {
            budget.spend("a non-ego vehicle")?;
            let road = space.non_ego_road.sample(&mut rng).min(roads - 1);
            let start_lane = 2 * road + space.lane.sample(&mut rng);
            let dest_lane = 2 * road + space.lane.sample(&mut rng);
            let start_along = space.non_ego_start_along.sample(&mut rng);
            let travel = space.non_ego_travel.sample(&mut rng);
            let spec = VehicleSpec {
                id: format!("npc{k}"),
                start: layout.lane_point(start_lane, start_along),
                destination: layout.lane_point(dest_lane, start_along + travel),
                target_speed: space.non_ego_speed.sample(&mut rng),
                length: space.vehicle_length.sample(&mut rng),
                width: space.vehicle_width.sample(&mut rng),
                is_ego: false,
            };
            let fp = spec.start_footprint(&layout)?;
            if footprints.iter().all(|q| !q.overlaps(&fp)) {
                footprints.push(fp);
                non_egos.push(spec);
                break;
            }
        }
    }

    let mut statics = Vec::with_capacity(n_statics);
    for _ in 0..n_statics {
        loop {
            budget.spend("a static object")?;
            let placement = StaticPlacement {
                road: space.static_road.sample(&mut rng).min(roads - 1),
                side: space.static_side.sample(&mut rng),
                along: space.static_along.sample(&mut rng),
                edge_gap: space.static_edge_gap.sample(&mut rng),
                half_along: space.static_half_along.sample(&mut rng),
                half_lateral: space.static_half_lateral.sample(&mut rng),
            };
            // keep the crossing road clear
            let clear = roads == 1 || placement.along.abs() > layout.lane_width + placement.half_along + 1.0;
            let spec = placement.to_spec(&layout);
            if clear && !spec.footprint().overlaps(&footprints[0]) {
                statics.push(spec);
                break;
            }
        }
    }

    let input = TestInput {
        id: format!("d{draw_index}"),
        layout,
        ego,
        non_egos,
        statics,
        ambient,
        duration,
        time_step,
    };
    input.validate()?;
    Ok(input)
}

/// True iff `candidate` is farther than `epsilon` (max-norm over normalized
/// variables) from every accepted input.
pub fn diversity_filter(space: &InputSpace, candidate: &TestInput, accepted: &[TestInput], epsilon: f64) -> bool {
    let c = space.variables(candidate);
    accepted
        .iter()
        .all(|a| max_norm_distance(&c, &space.variables(a)) > epsilon)
}

pub fn max_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_length_matches_names() {
        let space = InputSpace::default();
        let input = space.sample(3).unwrap();
        assert_eq!(space.variables(&input).len(), space.variable_names().len());
        assert_eq!(space.variable_groups().len(), space.variable_names().len());
        assert_eq!(space.variable_ranges().len(), space.variable_names().len());
    }

    #[test]
    fn static_placement_round_trips() {
        let space = InputSpace::default();
        for i in 0..50 {
            let input = space.sample(i).unwrap();
            for s in &input.statics {
                let p = StaticPlacement::recover(&input.layout, s);
                let back = p.to_spec(&input.layout);
                assert!((back.center.x - s.center.x).abs() < 1e-9);
                assert!((back.center.y - s.center.y).abs() < 1e-9);
                assert!(p.edge_gap >= space.static_edge_gap.lo - 1e-9);
                assert!(p.edge_gap <= space.static_edge_gap.hi + 1e-9);
            }
        }
    }

    #[test]
    fn variables_are_normalized() {
        let space = InputSpace::default();
        for i in 0..100 {
            let input = space.sample(i).unwrap();
            for (x, name) in space.variables(&input).iter().zip(space.variable_names()) {
                assert!((-1e-9..=1.0 + 1e-9).contains(x), "{name} = {x}");
            }
        }
    }

    #[test]
    fn empty_range_rejected() {
        let space = InputSpace {
            weather: Range::new(0.8, 0.2),
            ..InputSpace::default()
        };
        assert!(matches!(space.sample(0), Err(Error::InvalidSpace(_))));
    }

    #[test]
    fn crowded_space_is_unsatisfiable() {
        // four non-egos forced onto the ego's own start position
        let space = InputSpace {
            layout_kind: IntRange::new(0, 0),
            lane: IntRange::new(0, 0),
            non_ego_count: IntRange::new(4, 4),
            ego_start_along: Range::new(-40.0, -40.0),
            non_ego_start_along: Range::new(-40.0, -40.0),
            ..InputSpace::default()
        };
        assert!(matches!(space.sample(0), Err(Error::UnsatisfiableSpace { .. })));
    }
}
