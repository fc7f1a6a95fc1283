//! Brute-force reference implementations shared by the integration tests.

use flakesim::fitness::FitnessId;
use flakesim::ml::mlp::Mlp;
use flakesim::ml::{DataPoint, Dataset, FeatureSchema, FeatureSubset, FitnessFeatures, Partition};
use flakesim::sim::InputSpace;
use flakesim::stats::Alternative;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pairwise_max_difference(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in v {
        for b in v {
            best = best.max(a - b);
        }
    }
    best
}

/// Average ranks of |d| by direct counting.
pub fn ranks(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Signed-rank p-values by walking all 2^n sign assignments.
pub fn enumerated_p(d: &[f64], alt: Alternative) -> f64 {
    let r = ranks(d);
    let observed: f64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total: f64 = r.iter().sum();
    let n = d.len();
    let (mut le, mut ge, mut extreme) = (0u64, 0u64, 0u64);
    let dist = (observed - total / 2.0).abs();
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| r[k]).sum();
        le += u64::from(w <= observed + 1e-9);
        ge += u64::from(w >= observed - 1e-9);
        extreme += u64::from((w - total / 2.0).abs() >= dist - 1e-9);
    }
    let all = (1u64 << n) as f64;
    match alt {
        Alternative::Less => le as f64 / all,
        Alternative::Greater => ge as f64 / all,
        Alternative::TwoSided => (extreme as f64 / all).min(1.0),
    }
}

/// Random paired differences, with ties when `tied`.
pub fn random_differences(rng: &mut impl Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = if tied {
                rng.random_range(1..4) as f64
            } else {
                rng.random_range(0.01..5.0)
            };
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn pairwise_a12(a: &[f64], b: &[f64]) -> f64 {
    let mut wins = 0.0;
    for x in a {
        for y in b {
            wins += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (a.len() * b.len()) as f64
}

/// Corpus whose label is a deterministic function of the weather variable.
pub fn separable_corpus(n: usize, threshold: f64) -> Dataset {
    let space = InputSpace::default().with_seed(31);
    let schema = FeatureSchema::new(
        &space,
        FeatureSubset::All,
        FitnessFeatures::SingleRunValues,
        FitnessId::F1,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let points = (0..n as u64)
        .map(|k| {
            let input = space.sample(k).unwrap();
            let scores: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            DataPoint {
                features: schema.features(&space, &input, &scores).unwrap(),
                label: input.ambient.weather > threshold,
                input_hash: k.to_string(),
                runs: 1,
            }
        })
        .collect();
    Dataset {
        schema,
        partition: Partition::Stec,
        points,
    }
}

/// Largest relative gap between the analytic gradient and central differences.
pub fn gradient_error(net: &Mlp, xs: &[Vec<f64>], ys: &[bool]) -> f64 {
    let g = net.gradient(xs, ys);
    let p = net.params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut probe = net.clone();
        let mut q = p.clone();
        q[i] += h;
        probe.set_params(&q);
        let up = probe.loss(xs, ys);
        q[i] -= 2.0 * h;
        probe.set_params(&q);
        let down = probe.loss(xs, ys);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6));
    }
    worst
}

/// Whether `x` lies on the segment from `p` to `q`.
pub fn on_segment(x: &[f64], p: &[f64], q: &[f64]) -> bool {
    let mut u = None;
    x.iter().zip(p).zip(q).all(|((&x, &p), &q)| {
        if (q - p).abs() < 1e-12 {
            return (x - p).abs() < 1e-12;
        }
        let t = (x - p) / (q - p);
        let ok = (-1e-9..=1.0 + 1e-9).contains(&t) && u.is_none_or(|v: f64| (v - t).abs() < 1e-6);
        u = Some(t);
        ok
    })
}
