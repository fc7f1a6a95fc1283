//! Injectable nondeterminism.
//!
//! Each vehicle owns a ChaCha stream keyed by `(run_seed, vehicle index)`, and
//! every simulation step reads from a fixed word position within it, so the
//! noise seen by one vehicle at one step never depends on how many other
//! vehicles exist or how many steps came before.

use super::input::{fnv1a, Ambient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    /// Std-dev (m) of Gaussian noise on measured lateral offsets, distances and speeds.
    pub sensor_noise_std: f64,
    /// Std-dev of multiplicative noise on steering and throttle commands.
    pub actuation_jitter_std: f64,
    /// Scales both std-devs by `1 + ambient_gain * (weather + time_of_day) / 2`.
    pub ambient_gain: f64,
}

impl NoiseProfile {
    pub const ZERO: NoiseProfile = NoiseProfile {
        sensor_noise_std: 0.0,
        actuation_jitter_std: 0.0,
        ambient_gain: 0.0,
    };

    pub fn sensor(std: f64) -> Self {
        NoiseProfile {
            sensor_noise_std: std,
            ..Self::ZERO
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sensor_noise_std == 0.0 && self.actuation_jitter_std == 0.0
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.sensor_noise_std) && ok(self.actuation_jitter_std) && ok(self.ambient_gain) {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "noise profile fields must be finite and non-negative: {self:?}"
            )))
        }
    }

    pub fn ambient_scale(&self, ambient: &Ambient) -> f64 {
        1.0 + self.ambient_gain * ambient.severity()
    }

    pub fn content_hash(&self) -> u64 {
        fnv1a(&serde_json::to_vec(self).expect("noise profile serializes"))
    }
}

/// Noise samples consumed by one vehicle in one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepNoise {
    pub lateral: f64,
    pub speed: f64,
    pub distance: f64,
    pub steer: f64,
    pub throttle: f64,
}

// Room for rejection-sampling retries; five normals usually take ten words.
const WORDS_PER_STEP: u128 = 64;

pub struct NoiseStream {
    rng: ChaCha8Rng,
    sensor_std: f64,
    jitter_std: f64,
}

impl NoiseStream {
    pub fn new(run_seed: u64, vehicle_index: u64, profile: &NoiseProfile, ambient: &Ambient) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        rng.set_stream(vehicle_index);
        let scale = profile.ambient_scale(ambient);
        NoiseStream {
            rng,
            sensor_std: profile.sensor_noise_std * scale,
            jitter_std: profile.actuation_jitter_std * scale,
        }
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn at_step(&mut self, step: usize) -> StepNoise {
        if self.sensor_std == 0.0 && self.jitter_std == 0.0 {
            return StepNoise::default();
        }
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        StepNoise {
            lateral: self.normal() * self.sensor_std,
            speed: self.normal() * self.sensor_std,
            distance: self.normal() * self.sensor_std,
            steer: self.normal() * self.jitter_std,
            throttle: self.normal() * self.jitter_std,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AMB: Ambient = Ambient {
        weather: 0.5,
        time_of_day: 0.5,
    };

    #[test]
    fn keyed_by_step_not_history() {
        let p = NoiseProfile::sensor(0.1);
        let mut a = NoiseStream::new(7, 1, &p, &AMB);
        let mut b = NoiseStream::new(7, 1, &p, &AMB);
        for s in 0..10 {
            a.at_step(s);
        }
        assert_eq!(a.at_step(42), b.at_step(42));
    }

    #[test]
    fn streams_differ_by_vehicle_and_seed() {
        let p = NoiseProfile::sensor(0.1);
        let x = NoiseStream::new(7, 1, &p, &AMB).at_step(3);
        let y = NoiseStream::new(7, 2, &p, &AMB).at_step(3);
        let z = NoiseStream::new(8, 1, &p, &AMB).at_step(3);
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn zero_profile_is_silent() {
        let mut s = NoiseStream::new(1, 0, &NoiseProfile::ZERO, &AMB);
        assert_eq!(s.at_step(5), StepNoise::default());
    }

    #[test]
    fn empirical_std_close() {
        let p = NoiseProfile::sensor(0.2);
        let mut s = NoiseStream::new(
            3,
            0,
            &p,
            &Ambient {
                weather: 0.0,
                time_of_day: 0.0,
            },
        );
        let xs: Vec<f64> = (0..20000).map(|k| s.at_step(k).lateral).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() - 0.2).abs() < 0.01);
    }
}
