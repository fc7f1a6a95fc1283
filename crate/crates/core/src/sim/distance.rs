use super::geometry::Quad;
use super::input::TestInput;
use super::trace::{ScenarioTrace, VehicleState};

/// Reported when a scene has no object of the requested class; equals the
/// upper end of the default distance fitness ranges.
pub const NO_OBJECT_DISTANCE: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDistances {
    /// Minimum footprint distance between the ego and any non-ego vehicle.
    pub non_ego: f64,
    /// Minimum footprint distance between the ego and any static object.
    pub statics: f64,
    /// Distance between the final ego center and its destination.
    pub destination: f64,
}

pub fn footprint(state: &VehicleState, length: f64, width: f64) -> Quad {
    Quad::oriented(state.position, state.heading, length, width)
}

pub fn min_distances(trace: &ScenarioTrace, input: &TestInput) -> MinDistances {
    min_distances_with_sentinel(trace, input, NO_OBJECT_DISTANCE)
}

/// Like [`min_distances`], with the value reported for absent object classes supplied.
pub fn min_distances_with_sentinel(trace: &ScenarioTrace, input: &TestInput, no_object: f64) -> MinDistances {
    let statics: Vec<Quad> = input.statics.iter().map(|s| s.footprint()).collect();
    let mut non_ego = f64::INFINITY;
    let mut stat = f64::INFINITY;
    for scene in &trace.scenes {
        let ego = footprint(scene.ego(), input.ego.length, input.ego.width);
        for (state, spec) in scene.vehicles[1..].iter().zip(&input.non_egos) {
            non_ego = non_ego.min(ego.distance(&footprint(state, spec.length, spec.width)));
        }
        for s in &statics {
            stat = stat.min(ego.distance(s));
        }
    }
    let last = trace.scenes.last().expect("traces are non-empty").ego();
    MinDistances {
        non_ego: if input.non_egos.is_empty() { no_object } else { non_ego },
        statics: if input.statics.is_empty() { no_object } else { stat },
        destination: last.position.distance(input.ego.destination),
    }
}
