//! Synthetic minority oversampling.

use super::dataset::{DataPoint, Dataset};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_K: usize = 5;

/// `xi + u * (xnn - xi)`.
pub fn interpolate(xi: &[f64], xnn: &[f64], u: f64) -> Vec<f64> {
    xi.iter().zip(xnn).map(|(a, b)| a + u * (b - a)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Balances `train` by interpolating minority points towards one of their `k`
/// nearest minority neighbours. Original points come first, unchanged.
pub fn smote(train: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    let pos = train.positives();
    let neg = train.len() - pos;
    if pos == neg {
        return Ok(train.clone());
    }
    let minority_label = pos < neg;
    let minority: Vec<&DataPoint> = train.points.iter().filter(|p| p.label == minority_label).collect();
    if minority.len() < 2 {
        return Err(Error::DegenerateMinority(minority.len()));
    }
    let k = k.clamp(1, minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(&p.features, &q.features), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    let need = pos.max(neg) - minority.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train.clone();
    out.points.reserve(need);
    for s in 0..need {
        let i = s % minority.len();
        let j = neighbours[i][rng.random_range(0..neighbours[i].len())];
        let u: f64 = rng.random();
        out.points.push(DataPoint {
            features: interpolate(&minority[i].features, &minority[j].features, u),
            label: minority_label,
            input_hash: "synthetic".into(),
            runs: 0,
        });
    }
    Ok(out)
}
