use super::geometry::Vec2;
use super::noise::NoiseProfile;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Nearest lane of the vehicle's own road. Retained from the last on-map
    /// step once a vehicle goes off-map.
    pub lane: usize,
    /// Signed lateral offset from that lane's centerline (m), left positive.
    pub offset: f64,
    pub off_map: bool,
}

/// One frame of the simulation. Vehicle 0 is the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub t: f64,
    pub vehicles: Vec<VehicleState>,
}

impl Scene {
    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub input_id: String,
    pub run_seed: u64,
    pub noise: NoiseProfile,
    pub scenes: Vec<Scene>,
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    schema_version: u32,
    input_id: String,
    run_seed: u64,
    noise: NoiseProfile,
    scene_count: usize,
}

impl ScenarioTrace {
    /// Line-delimited form: a header line, then one scene per line.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        let header = TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            input_id: self.input_id.clone(),
            run_seed: self.run_seed,
            noise: self.noise,
            scene_count: self.scenes.len(),
        };
        let io = |e| Error::io("<trace>", e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for scene in &self.scenes {
            serde_json::to_writer(&mut w, scene)?;
            w.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or(Error::EmptyInput("trace has no header line"))?
            .map_err(|e| Error::io("<trace>", e))?;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "trace".into(),
                found: header.schema_version,
                expected: TRACE_SCHEMA_VERSION,
            });
        }
        let mut scenes = Vec::with_capacity(header.scene_count);
        for line in lines {
            let line = line.map_err(|e| Error::io("<trace>", e))?;
            if line.is_empty() {
                continue;
            }
            scenes.push(serde_json::from_str(&line)?);
        }
        Ok(ScenarioTrace {
            input_id: header.input_id,
            run_seed: header.run_seed,
            noise: header.noise,
            scenes,
        })
    }
}
