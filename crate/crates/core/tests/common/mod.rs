#![allow(dead_code)]

pub mod oracles;

use flakesim::sim::{Ambient, InputSpace, LayoutKind, RoadLayout, TestInput, Vec2, VehicleSpec};

pub fn vehicle(id: &str, start: Vec2, destination: Vec2, speed: f64, is_ego: bool) -> VehicleSpec {
    VehicleSpec {
        id: id.into(),
        start,
        destination,
        target_speed: speed,
        length: 4.5,
        width: 1.9,
        is_ego,
    }
}

/// Ego alone on the right lane of a straight road, travelling from `from` to `to`.
pub fn lone_ego(speed: f64, duration: f64, from: f64, to: f64) -> TestInput {
    let layout = RoadLayout::new(LayoutKind::StraightTwoLane, 3.5, 100.0).unwrap();
    TestInput {
        id: "lone".into(),
        layout,
        ego: vehicle("ego", layout.lane_point(0, from), layout.lane_point(0, to), speed, true),
        non_egos: vec![],
        statics: vec![],
        ambient: Ambient {
            weather: 0.0,
            time_of_day: 0.0,
        },
        duration,
        time_step: 0.1,
    }
}

/// Default-space inputs with some objects in the scene.
pub fn sampled_inputs(seed: u64, n: usize) -> Vec<TestInput> {
    let space = InputSpace::default().with_seed(seed);
    (0..n as u64).map(|k| space.sample(k).unwrap()).collect()
}
