//! Closed-loop kinematic bicycle simulation.
//!
//! Every vehicle (ego and non-ego alike) runs the same controller stack:
//! a PID lateral controller tracking its route's reference line on the
//! noise-corrupted lateral offset, a PI speed controller on the
//! noise-corrupted speed, and a brake override that fires when the
//! noise-corrupted distance to the nearest object in its forward zone drops
//! below the safety gap. Lane changes are scripted: the reference line blends
//! from the start lane to the destination lane over a fixed distance.

use super::geometry::{Quad, Vec2};
use super::input::{Route, TestInput};
use super::layout::RoadLayout;
use super::noise::{NoiseProfile, NoiseStream};
use super::trace::{ScenarioTrace, Scene, VehicleState};
use serde::{Deserialize, Serialize};

/// Controller and vehicle constants.
///
/// The lateral loop is deliberately underdamped at low speed so that sensor
/// noise can tip borderline runs into lane invasions or near misses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub lateral_kp: f64,
    pub lateral_ki: f64,
    pub lateral_kd: f64,
    pub lateral_integral_limit: f64,
    /// The lateral integral only accumulates while |error| is below this (m).
    pub lateral_integral_band: f64,
    pub speed_kp: f64,
    pub speed_ki: f64,
    pub speed_integral_limit: f64,
    /// rad
    pub max_steer: f64,
    /// m/s^2
    pub max_accel: f64,
    /// m/s^2, applied by the brake override
    pub max_brake: f64,
    /// Deceleration assumed when approaching the destination (m/s^2).
    pub stop_decel: f64,
    /// Floor of the approach speed profile (m/s).
    pub creep_speed: f64,
    /// Remaining distance (m) at which the vehicle commands a full stop.
    pub stop_tolerance: f64,
    /// Static part of the safety gap (m).
    pub safety_gap: f64,
    /// Speed-proportional part of the safety gap (s).
    pub headway: f64,
    /// Half-angle (rad) by which the forward zone widens with distance.
    pub cone_half_angle: f64,
    /// Lateral margin (m) added to the vehicle half-width when testing the forward zone.
    pub zone_margin: f64,
    /// Maximum look-ahead (m).
    pub zone_range: f64,
    /// Distance (m) over which a scripted lane change blends the reference line.
    pub lane_change_length: f64,
    /// Fraction of the route travelled before a lane change starts.
    pub lane_change_at: f64,
    /// Wheelbase as a fraction of vehicle length.
    pub wheelbase_ratio: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            lateral_kp: 0.12,
            lateral_ki: 0.01,
            lateral_kd: 0.05,
            lateral_integral_limit: 2.0,
            lateral_integral_band: 0.2,
            speed_kp: 1.0,
            speed_ki: 0.1,
            speed_integral_limit: 5.0,
            max_steer: 0.6,
            max_accel: 3.0,
            max_brake: 8.0,
            stop_decel: 2.0,
            creep_speed: 1.0,
            stop_tolerance: 0.3,
            safety_gap: 1.0,
            headway: 0.6,
            cone_half_angle: 0.1,
            zone_margin: 0.3,
            zone_range: 30.0,
            lane_change_length: 30.0,
            lane_change_at: 0.1,
            wheelbase_ratio: 0.6,
        }
    }
}

struct Agent {
    route: Route,
    length: f64,
    width: f64,
    target_speed: f64,
    pos: Vec2,
    heading: f64,
    speed: f64,
    lat_integral: f64,
    prev_lat_measured: Option<f64>,
    speed_integral: f64,
    lane: usize,
    offset: f64,
    off_map: bool,
    noise: NoiseStream,
}

impl Agent {
    fn footprint(&self) -> Quad {
        Quad::oriented(self.pos, self.heading, self.length, self.width)
    }

    fn state(&self) -> VehicleState {
        VehicleState {
            position: self.pos,
            heading: self.heading,
            speed: self.speed,
            lane: self.lane,
            offset: self.offset,
            off_map: self.off_map,
        }
    }
}

/// Reference lateral position (relative to the road axis) at along-road coordinate `s`.
fn reference_lateral(layout: &RoadLayout, route: &Route, gains: &ControllerGains, s: f64) -> f64 {
    let from = layout.lane_lateral(route.start_lane % 2);
    if !route.changes_lane() {
        return from;
    }
    let to = layout.lane_lateral(route.dest_lane % 2);
    let span = route.dest_along - route.start_along;
    let len = gains.lane_change_length.min(0.5 * span);
    let begin = route.start_along + gains.lane_change_at * span;
    let w = ((s - begin) / len).clamp(0.0, 1.0);
    let blend = 0.5 - 0.5 * (std::f64::consts::PI * w).cos();
    from + (to - from) * blend
}

/// Whether `obstacle` intersects the forward zone of a vehicle at `pos`/`heading`.
fn in_forward_zone(pos: Vec2, heading: f64, half_width: f64, obstacle: &Quad, gains: &ControllerGains) -> bool {
    let fwd = Vec2::from_angle(heading);
    let left = fwd.perp();
    let c = obstacle.center() - pos;
    let ahead = c.dot(fwd);
    if ahead <= 0.0 || ahead > gains.zone_range + obstacle.radius() {
        return false;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &obstacle.corners {
        let y = (p - pos).dot(left);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    let reach = half_width + gains.zone_margin + ahead * gains.cone_half_angle.tan();
    hi >= -reach && lo <= reach
}

/// Simulates `input` with the default controller gains.
pub fn simulate(input: &TestInput, run_seed: u64, noise: &NoiseProfile) -> ScenarioTrace {
    simulate_with(input, run_seed, noise, &ControllerGains::default())
}

/// Simulates `input`. The result is a pure function of the arguments.
///
/// # Panics
///
/// Panics if `input` does not satisfy [`TestInput::validate`].
pub fn simulate_with(input: &TestInput, run_seed: u64, noise: &NoiseProfile, gains: &ControllerGains) -> ScenarioTrace {
    let layout = input.layout;
    let dt = input.time_step;
    let mut agents: Vec<Agent> = input
        .vehicles()
        .enumerate()
        .map(|(i, v)| {
            let route = v.route(&layout).expect("validated input has routes");
            let lo = layout.road_offset(route.road, v.start);
            Agent {
                route,
                length: v.length,
                width: v.width,
                target_speed: v.target_speed,
                pos: v.start,
                heading: route.heading(),
                speed: 0.0,
                lat_integral: 0.0,
                prev_lat_measured: None,
                speed_integral: 0.0,
                lane: lo.lane,
                offset: lo.offset,
                off_map: false,
                noise: NoiseStream::new(run_seed, i as u64, noise, &input.ambient),
            }
        })
        .collect();
    let statics: Vec<Quad> = input.statics.iter().map(|s| s.footprint()).collect();

    let steps = input.step_count();
    let mut scenes = Vec::with_capacity(steps + 1);
    scenes.push(Scene {
        t: 0.0,
        vehicles: agents.iter().map(Agent::state).collect(),
    });

    for step in 0..steps {
        let footprints: Vec<Quad> = agents.iter().map(Agent::footprint).collect();
        let mut controls = Vec::with_capacity(agents.len());
        for (i, a) in agents.iter_mut().enumerate() {
            if a.off_map {
                controls.push((0.0, 0.0));
                continue;
            }
            let n = a.noise.at_step(step);
            let (s, lat) = RoadLayout::road_frame(a.route.road, a.pos);

            // lateral PID
            let err = lat - reference_lateral(&layout, &a.route, gains, s) + n.lateral;
            let deriv = a.prev_lat_measured.map_or(0.0, |p| (err - p) / dt);
            a.prev_lat_measured = Some(err);
            if err.abs() < gains.lateral_integral_band {
                a.lat_integral =
                    (a.lat_integral + err * dt).clamp(-gains.lateral_integral_limit, gains.lateral_integral_limit);
            }
            let steer_cmd = -(gains.lateral_kp * err + gains.lateral_ki * a.lat_integral + gains.lateral_kd * deriv);
            let steer = (steer_cmd * (1.0 + n.steer)).clamp(-gains.max_steer, gains.max_steer);

            // speed PI towards a profile that stops at the destination
            let remaining = (a.route.dest_along - s).max(0.0);
            let profile = (2.0 * gains.stop_decel * remaining).sqrt();
            let (v_des, feed_forward) = if remaining <= gains.stop_tolerance {
                (0.0, 0.0)
            } else if profile < a.target_speed && profile > gains.creep_speed {
                // follow the braking profile's own deceleration
                (profile, -gains.stop_decel)
            } else {
                (a.target_speed.min(profile.max(gains.creep_speed)), 0.0)
            };
            let v_err = v_des - (a.speed + n.speed);
            a.speed_integral =
                (a.speed_integral + v_err * dt).clamp(-gains.speed_integral_limit, gains.speed_integral_limit);
            let mut accel =
                (feed_forward + gains.speed_kp * v_err + gains.speed_ki * a.speed_integral) * (1.0 + n.throttle);
            accel = accel.clamp(-gains.max_brake, gains.max_accel);
            if remaining <= gains.stop_tolerance {
                accel = -gains.max_brake;
                a.speed_integral = 0.0;
            }

            // brake override
            let half_width = a.width / 2.0;
            let own = &footprints[i];
            let nearest = footprints
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| q)
                .chain(statics.iter())
                .filter(|q| in_forward_zone(a.pos, a.heading, half_width, q, gains))
                .map(|q| own.distance(q))
                .fold(f64::INFINITY, f64::min);
            let gap = gains.safety_gap + gains.headway * a.speed;
            if nearest.is_finite() && nearest + n.distance < gap {
                accel = -gains.max_brake;
                a.speed_integral = 0.0;
            }

            controls.push((steer, accel));
        }

        for (a, &(steer, accel)) in agents.iter_mut().zip(&controls) {
            if a.off_map {
                continue;
            }
            let wheelbase = a.length * gains.wheelbase_ratio;
            let v = a.speed;
            a.pos = a.pos + Vec2::from_angle(a.heading) * (v * dt);
            a.heading += v / wheelbase * steer.tan() * dt;
            a.speed = (v + accel * dt).max(0.0);
            if layout.lateral_offset(a.pos).is_ok() {
                let lo = layout.road_offset(a.route.road, a.pos);
                a.lane = lo.lane;
                a.offset = lo.offset;
            } else {
                a.off_map = true;
                a.speed = 0.0;
            }
        }

        scenes.push(Scene {
            t: (step + 1) as f64 * dt,
            vehicles: agents.iter().map(Agent::state).collect(),
        });
    }

    ScenarioTrace {
        input_id: input.id.clone(),
        run_seed,
        noise: *noise,
        scenes,
    }
}
