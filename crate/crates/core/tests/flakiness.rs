mod common;

use common::oracles::pairwise_max_difference;
use flakesim::fitness::{count_invasions, evaluate, FitnessId, FitnessSpecs, FitnessVector};
use flakesim::flakiness::{
    bucket_of, flakiness_table, hard_flaky, label, soft_flaky, soft_flaky_ratio, FlakinessCorpusStats, RerunRecord, Run,
};
use flakesim::sim::{simulate, NoiseProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_list(rng: &mut impl Rng) -> Vec<f64> {
    let n = rng.random_range(1..=12);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.5
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect()
}

#[test]
fn soft_flaky_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let v = random_list(&mut rng);
        assert_eq!(soft_flaky(&v).unwrap(), pairwise_max_difference(&v));
    }
}

#[test]
fn hard_flaky_matches_witness_search() {
    let specs = FitnessSpecs::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..1000 {
        let spec = specs.0[k % 4];
        let v: Vec<f64> = (0..rng.random_range(1..=10))
            .map(|_| {
                if rng.random_bool(0.2) {
                    spec.threshold
                } else {
                    rng.random_range(spec.lo()..=spec.hi())
                }
            })
            .collect();
        let oriented_thr = spec.orient(spec.threshold);
        let fails = |x: f64| {
            let o = spec.orient(x);
            o < oriented_thr || (spec.inclusive && o == oriented_thr)
        };
        let witness = v.iter().any(|&a| fails(a)) && v.iter().any(|&b| !fails(b));
        assert_eq!(hard_flaky(&v, &spec), witness, "{spec:?} {v:?}");
    }
}

#[test]
fn ratio_matches_division() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let max: f64 = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.01..1.0)
        };
        let sf = rng.random_range(0.0..=max);
        let expected = if max == 0.0 { 0.0 } else { sf / max };
        assert_eq!(soft_flaky_ratio(sf, max), expected);
    }
}

fn record(id: usize, runs: Vec<FitnessVector>) -> RerunRecord {
    let mut input = common::lone_ego(6.0, 20.0, -60.0, 40.0);
    input.id = format!("i{id}");
    RerunRecord {
        input,
        runs: runs
            .into_iter()
            .enumerate()
            .map(|(j, fitness)| Run {
                seed: j as u64,
                fitness,
            })
            .collect(),
    }
}

fn random_records(rng: &mut impl Rng, specs: &FitnessSpecs, n: usize) -> Vec<RerunRecord> {
    (0..n)
        .map(|i| {
            let center: [f64; 4] = std::array::from_fn(|k| rng.random_range(specs.0[k].lo()..=specs.0[k].hi()));
            let spread = if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..0.3)
            };
            let runs = (0..rng.random_range(2..=10))
                .map(|_| {
                    let v: [f64; 4] = std::array::from_fn(|k| {
                        let s = specs.0[k];
                        s.clamp(center[k] + spread * (s.hi() - s.lo()) * rng.random_range(-1.0..1.0))
                    });
                    FitnessVector::new(v[0].round(), v[1], v[2], v[3])
                })
                .collect();
            record(i, runs)
        })
        .collect()
}

#[test]
fn table_matches_direct_tally() {
    let specs = FitnessSpecs::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let corpus = random_records(&mut rng, &specs, 50);
        let stats = FlakinessCorpusStats::compute("c", &corpus, &specs).unwrap();
        let table = flakiness_table(&corpus, &stats, &specs).unwrap();
        for id in FitnessId::ALL {
            let spec = specs.get(id);
            let scores: Vec<Vec<f64>> = corpus
                .iter()
                .map(|r| r.raw(id).iter().map(|&v| spec.score(v).unwrap()).collect())
                .collect();
            let max = scores.iter().map(|s| pairwise_max_difference(s)).fold(0.0, f64::max);
            let mut buckets = [0usize; 5];
            for s in &scores {
                let ratio = if max == 0.0 {
                    0.0
                } else {
                    pairwise_max_difference(s) / max
                };
                let b = [0.01, 0.05, 0.10, 0.40].iter().filter(|&&u| ratio > u).count();
                buckets[b] += 1;
            }
            let hf = corpus.iter().filter(|r| hard_flaky(&r.raw(id), spec)).count();
            let row = &table.functions[id.index()];
            assert_eq!(row.max_sf, max);
            assert_eq!(row.buckets, buckets);
            assert_eq!(row.hard_flaky, hf);
            assert_eq!(buckets.iter().sum::<usize>(), corpus.len());
        }
    }
}

#[test]
fn hand_placed_ratios_fill_each_bucket_once() {
    let specs = FitnessSpecs::default();
    let f2 = specs.get(FitnessId::F2);
    let width = f2.hi() - f2.lo();
    let corpus: Vec<RerunRecord> = [0.0, 0.03, 0.07, 0.2, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = FitnessVector::new(0.0, 10.0, 20.0, 0.0);
            let b = FitnessVector::new(0.0, 10.0 + r * 0.5 * width, 20.0, 0.0);
            record(i, vec![a, b])
        })
        .collect();
    let stats = FlakinessCorpusStats::compute("c", &corpus, &specs).unwrap();
    let table = flakiness_table(&corpus, &stats, &specs).unwrap();
    assert_eq!(table.functions[FitnessId::F2.index()].buckets, [1, 1, 1, 1, 2]);
    assert_eq!(bucket_of(0.5), 4);
}

#[test]
fn zero_noise_corpus_is_never_flaky() {
    let specs = FitnessSpecs::default();
    let quiet = NoiseProfile::default();
    let corpus: Vec<RerunRecord> = common::sampled_inputs(6, 30)
        .into_iter()
        .map(|input| {
            let runs = (0..5)
                .map(|s| Run {
                    seed: s,
                    fitness: evaluate(&simulate(&input, s, &quiet), &input, &specs),
                })
                .collect();
            RerunRecord { input, runs }
        })
        .collect();
    let stats = FlakinessCorpusStats::compute("quiet", &corpus, &specs).unwrap();
    assert_eq!(stats.max_sf, [0.0; 4]);
    let table = flakiness_table(&corpus, &stats, &specs).unwrap();
    for row in &table.functions {
        assert_eq!(row.buckets[0], corpus.len());
        assert_eq!(row.hard_flaky, 0);
    }
    for r in &corpus {
        assert!(!label(r, &stats, &specs, 0.05).unwrap().flaky);
    }
}

#[test]
fn hard_flakiness_implies_spread_on_simulated_records() {
    let specs = FitnessSpecs::default();
    let noise = NoiseProfile::sensor(0.15);
    let mut hard = 0;
    for input in common::sampled_inputs(12, 40) {
        let runs: Vec<Run> = (0..8)
            .map(|s| Run {
                seed: s,
                fitness: evaluate(&simulate(&input, s, &noise), &input, &specs),
            })
            .collect();
        let r = RerunRecord { input, runs };
        let sf = r.soft_flakiness(&specs).unwrap();
        for (k, hf) in r.hard_flakiness(&specs).into_iter().enumerate() {
            if hf {
                hard += 1;
                assert!(sf[k] > 0.0);
            }
        }
    }
    assert!(hard > 0, "no hard-flaky record was generated");
}

#[test]
fn f1_counting_matches_segment_scan() {
    // Oracle: split the trace into maximal off-home runs; each run counts unless
    // it ends with five consecutive settled steps in the adjacent lane, which
    // moves the reference lane to it and ends the run there.
    fn oracle(samples: &[(usize, f64)]) -> usize {
        let mut reference = samples[0].0;
        let mut count = 0;
        let mut k = 0;
        while k < samples.len() {
            let (lane, off) = samples[k];
            if lane == reference && off.abs() <= 0.5 {
                k += 1;
                continue;
            }
            let mut settled = 0;
            let mut changed = false;
            while k < samples.len() {
                let (lane, off) = samples[k];
                if lane == reference && off.abs() <= 0.5 {
                    break;
                }
                settled = if lane == (reference ^ 1) && off.abs() < 0.1 {
                    settled + 1
                } else {
                    0
                };
                k += 1;
                if settled == 5 {
                    reference ^= 1;
                    changed = true;
                    break;
                }
            }
            if !changed {
                count += 1;
            }
        }
        count
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let n = rng.random_range(1..80);
        let mut lane = rng.random_range(0..2usize);
        let samples: Vec<(usize, f64)> = (0..n)
            .map(|_| {
                if rng.random_bool(0.08) {
                    lane ^= 1;
                }
                let off = match rng.random_range(0..4) {
                    0 => rng.random_range(-0.08..0.08),
                    1 => rng.random_range(-0.6..0.6),
                    2 => rng.random_range(-1.5..1.5),
                    _ => [0.5, -0.5, 0.1, -0.1][rng.random_range(0..4)],
                };
                (lane, off)
            })
            .collect();
        assert_eq!(count_invasions(&samples, |l| l ^ 1), oracle(&samples), "{samples:?}");
    }
}

#[test]
fn evaluated_values_stay_in_range() {
    let specs = FitnessSpecs::default();
    let noise = NoiseProfile::sensor(0.3);
    for input in common::sampled_inputs(21, 40) {
        let v = evaluate(&simulate(&input, 1, &noise), &input, &specs);
        for id in FitnessId::ALL {
            let s = specs.get(id);
            assert!((s.lo()..=s.hi()).contains(&v.get(id)), "{id}: {}", v.get(id));
        }
        assert_eq!(v.f1.fract(), 0.0);
    }
}

#[test]
fn record_round_trip() {
    let specs = FitnessSpecs::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let corpus = random_records(&mut rng, &specs, 10);
    let stats = FlakinessCorpusStats::compute("c", &corpus, &specs).unwrap();
    assert_eq!(FlakinessCorpusStats::from_json(&stats.to_json()).unwrap(), stats);
}

proptest! {
    #[test]
    fn orient_is_an_involution(v in 0.0f64..150.0, k in 0usize..4) {
        let s = FitnessSpecs::default().0[k];
        let v = s.clamp(v);
        prop_assert!((s.unorient(s.orient(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn fail_rule_agrees_on_both_scales(v in 0.0f64..150.0, k in 0usize..4) {
        let s = FitnessSpecs::default().0[k];
        prop_assert_eq!(s.fails(v), s.fails_oriented(s.orient(v)));
    }

    #[test]
    fn spread_is_translation_invariant_and_scale_covariant(
        v in prop::collection::vec(-10.0f64..10.0, 1..12),
        a in 0.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let moved: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let lhs = soft_flaky(&moved).unwrap();
        let rhs = a * soft_flaky(&v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn prefix_spread_never_shrinks(seed in any::<u64>()) {
        let specs = FitnessSpecs::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &random_records(&mut rng, &specs, 1)[0];
        for id in FitnessId::ALL {
            let d: Vec<f64> = (1..=r.runs.len()).map(|i| r.prefix_delta(id, i, &specs).unwrap()).collect();
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
