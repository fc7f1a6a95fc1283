//! Road layouts: a straight two-lane road, or two such roads crossing at the
//! origin.
//!
//! Every road is a straight axis through the origin with two same-direction
//! lanes. Lane `2 * road` is the right lane (centerline half a lane width to
//! the right of the axis), lane `2 * road + 1` the left lane. Road 0 runs
//! along +x, road 1 along +y. Signed lateral offsets are positive to the left
//! of the direction of travel.

use super::geometry::{point_segment_distance, Vec2};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    StraightTwoLane,
    CrossIntersectionTwoLane,
}

impl LayoutKind {
    pub fn road_count(self) -> usize {
        match self {
            LayoutKind::StraightTwoLane => 1,
            LayoutKind::CrossIntersectionTwoLane => 2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            LayoutKind::StraightTwoLane => 0,
            LayoutKind::CrossIntersectionTwoLane => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            LayoutKind::StraightTwoLane
        } else {
            LayoutKind::CrossIntersectionTwoLane
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadLayout {
    pub lane_width: f64,
    pub arm_length: f64,
    pub layout_kind: LayoutKind,
}

/// Position of a lane centerline segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub id: usize,
    pub road: usize,
    pub start: Vec2,
    pub end: Vec2,
    pub dir: Vec2,
}

/// Result of projecting a point onto the nearest lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneOffset {
    pub lane: usize,
    pub offset: f64,
}

impl RoadLayout {
    pub fn new(layout_kind: LayoutKind, lane_width: f64, arm_length: f64) -> Result<Self> {
        let layout = RoadLayout {
            lane_width,
            arm_length,
            layout_kind,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lane_width must be positive, got {}",
                self.lane_width
            )));
        }
        if !(self.arm_length > 0.0 && self.arm_length.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "arm_length must be positive, got {}",
                self.arm_length
            )));
        }
        Ok(())
    }

    pub fn road_count(&self) -> usize {
        self.layout_kind.road_count()
    }

    pub fn lane_count(&self) -> usize {
        2 * self.road_count()
    }

    /// Unit direction of travel on `road`.
    pub fn road_dir(road: usize) -> Vec2 {
        if road == 0 {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        }
    }

    /// Lateral coordinate of a lane centerline relative to its road axis.
    pub fn lane_lateral(&self, lane_in_road: usize) -> f64 {
        if lane_in_road == 0 {
            -self.lane_width / 2.0
        } else {
            self.lane_width / 2.0
        }
    }

    /// World point at `along` metres on `road`, `lateral` metres left of the axis.
    pub fn road_point(road: usize, along: f64, lateral: f64) -> Vec2 {
        let d = Self::road_dir(road);
        d * along + d.perp() * lateral
    }

    /// Along-road and lateral coordinates of `p` in the frame of `road`.
    pub fn road_frame(road: usize, p: Vec2) -> (f64, f64) {
        let d = Self::road_dir(road);
        (d.dot(p), d.cross(p))
    }

    pub fn lane(&self, id: usize) -> Lane {
        let road = id / 2;
        let dir = Self::road_dir(road);
        let lat = self.lane_lateral(id % 2);
        Lane {
            id,
            road,
            start: Self::road_point(road, -self.arm_length, lat),
            end: Self::road_point(road, self.arm_length, lat),
            dir,
        }
    }

    pub fn lanes(&self) -> impl Iterator<Item = Lane> + '_ {
        (0..self.lane_count()).map(|i| self.lane(i))
    }

    /// The other lane of the same road.
    pub fn adjacent(&self, lane: usize) -> usize {
        lane ^ 1
    }

    /// World point on the centerline of `lane` at along-road coordinate `along`.
    pub fn lane_point(&self, lane: usize, along: f64) -> Vec2 {
        Self::road_point(lane / 2, along, self.lane_lateral(lane % 2))
    }

    /// Signed offset from the (infinite) centerline of `lane`.
    pub fn offset_from_lane(&self, lane: usize, p: Vec2) -> f64 {
        let (_, lat) = Self::road_frame(lane / 2, p);
        lat - self.lane_lateral(lane % 2)
    }

    /// Nearest lane of `road` and the signed offset from its centerline.
    /// Ties resolve to the right lane.
    pub fn road_offset(&self, road: usize, p: Vec2) -> LaneOffset {
        let right = self.offset_from_lane(2 * road, p);
        let left = self.offset_from_lane(2 * road + 1, p);
        if left.abs() < right.abs() {
            LaneOffset {
                lane: 2 * road + 1,
                offset: left,
            }
        } else {
            LaneOffset {
                lane: 2 * road,
                offset: right,
            }
        }
    }

    /// Nearest lane and the signed distance from its centerline segment.
    ///
    /// Inside the extent of the segment the magnitude is the perpendicular
    /// distance; past an end it is the distance to the end point. Ties between
    /// lanes resolve to the lower lane id.
    pub fn lateral_offset(&self, p: Vec2) -> Result<LaneOffset> {
        let mut best: Option<(f64, Lane)> = None;
        for lane in self.lanes() {
            let d = point_segment_distance(p, lane.start, lane.end);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, lane));
            }
        }
        let (d, lane) = best.expect("layout has at least one lane");
        if d > self.arm_length {
            return Err(Error::OffMap { x: p.x, y: p.y });
        }
        let side = lane.dir.cross(p - lane.start);
        let offset = if side < 0.0 { -d } else { d };
        Ok(LaneOffset { lane: lane.id, offset })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross() -> RoadLayout {
        RoadLayout::new(LayoutKind::CrossIntersectionTwoLane, 3.5, 100.0).unwrap()
    }

    #[test]
    fn on_centerline_is_zero() {
        let l = cross();
        for lane in 0..4 {
            for along in [-80.0, -20.0, 35.0] {
                let p = l.lane_point(lane, along);
                let o = l.lateral_offset(p).unwrap();
                assert_eq!(o.offset, 0.0);
            }
        }
    }

    #[test]
    fn half_lane_width_perpendicular() {
        let l = RoadLayout::new(LayoutKind::StraightTwoLane, 3.5, 100.0).unwrap();
        let p = l.lane_point(0, 10.0) + Vec2::new(0.0, -1.75);
        let o = l.lateral_offset(p).unwrap();
        assert_eq!(o.lane, 0);
        assert!((o.offset + 1.75).abs() < 1e-12);
        // towards the other lane: equidistant, lower id wins
        let q = l.lane_point(0, 10.0) + Vec2::new(0.0, 1.75);
        let o = l.lateral_offset(q).unwrap();
        assert_eq!(o.lane, 0);
        assert!((o.offset - 1.75).abs() < 1e-12);
    }

    #[test]
    fn off_map_far_away() {
        let l = cross();
        assert!(matches!(
            l.lateral_offset(Vec2::new(500.0, 500.0)),
            Err(Error::OffMap { .. })
        ));
    }

    #[test]
    fn lane_offset_sign_is_left_positive() {
        let l = cross();
        // road 1 runs along +y; left of travel is -x
        let p = l.lane_point(2, 30.0) + Vec2::new(-0.4, 0.0);
        let o = l.lateral_offset(p).unwrap();
        assert_eq!(o.lane, 2);
        assert!((o.offset - 0.4).abs() < 1e-12);
        assert!((l.offset_from_lane(2, p) - 0.4).abs() < 1e-12);
    }
}
