//! Seeded 2D driving simulator.

pub mod distance;
pub mod engine;
pub mod geometry;
pub mod input;
pub mod layout;
pub mod noise;
pub mod space;
pub mod trace;

pub use distance::{min_distances, MinDistances, NO_OBJECT_DISTANCE};
pub use engine::{simulate, simulate_with, ControllerGains};
pub use geometry::{Quad, Vec2};
pub use input::{Ambient, Route, StaticObjectSpec, TestInput, VehicleSpec};
pub use layout::{LaneOffset, LayoutKind, RoadLayout};
pub use noise::NoiseProfile;
pub use space::{diversity_filter, sample_test_input, InputSpace, IntRange, Range};
pub use trace::{ScenarioTrace, Scene, VehicleState};
