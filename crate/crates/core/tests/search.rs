mod common;

use flakesim::fitness::{FitnessId, FitnessSpecs, FitnessVector};
use flakesim::flakiness::Run;
use flakesim::search::{
    count_failures, fast_fitness, fitness_min, random_search, Candidate, Evaluation, RerunPolicy, SearchConfig,
    SearchRun, SimExecutor, Strategy, SEARCH_SCHEMA_VERSION,
};
use flakesim::sim::{InputSpace, NoiseProfile, TestInput};
use proptest::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

struct Stub {
    first: bool,
    /// Runs after which the multi-execution stub turns non-flaky.
    stop_after: Option<usize>,
}

impl RerunPolicy for Stub {
    fn flaky_after_first(&self, _: &TestInput, _: &FitnessVector) -> flakesim::Result<bool> {
        Ok(self.first)
    }

    fn flaky_after(&self, _: &TestInput, runs: &[FitnessVector]) -> flakesim::Result<bool> {
        Ok(self.stop_after.is_none_or(|k| runs.len() < k))
    }
}

const ALWAYS: Stub = Stub {
    first: true,
    stop_after: None,
};

/// Executor returning a fixed F3 sequence by seed offset and counting calls.
struct Scripted {
    base: u64,
    values: Vec<f64>,
    calls: AtomicUsize,
}

impl flakesim::search::Executor for Scripted {
    fn execute(&self, _: &TestInput, seed: u64) -> FitnessVector {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let v = self.values[(seed - self.base) as usize % self.values.len()];
        FitnessVector::new(0.0, 10.0, v, 0.0)
    }
}

fn scripted(values: &[f64]) -> Scripted {
    Scripted {
        base: 100,
        values: values.to_vec(),
        calls: AtomicUsize::new(0),
    }
}

#[test]
fn fitness_min_takes_the_lowest_of_n_runs() {
    let specs = FitnessSpecs::default();
    let input = common::lone_ego(6.0, 20.0, -60.0, 40.0);
    let ex = scripted(&[0.4, 0.2, 0.9]);
    let e = fitness_min(&input, 100, 3, FitnessId::F3, &specs, &ex);
    assert_eq!(e.value, 0.2);
    assert_eq!(e.simulations(), 3);
    let one = fitness_min(&input, 100, 1, FitnessId::F3, &specs, &ex);
    assert_eq!(one.value, 0.4);
}

#[test]
fn always_flaky_stubs_reproduce_fitness_min() {
    let specs = FitnessSpecs::default();
    let noise = NoiseProfile::sensor(0.1);
    let ex = SimExecutor::new(noise, specs);
    for input in common::sampled_inputs(40, 10) {
        for n in [1, 2, 4, 10] {
            for target in FitnessId::ALL {
                let a = fitness_min(&input, 9, n, target, &specs, &ex);
                let b = fast_fitness(&input, 9, n, target, &specs, &ALWAYS, &ex).unwrap();
                assert_eq!(a, b);
                assert_eq!(b.simulations(), n);
            }
        }
    }
}

#[test]
fn stub_decisions_bound_the_reruns() {
    let specs = FitnessSpecs::default();
    let input = common::lone_ego(6.0, 20.0, -60.0, 40.0);
    let seq = [0.7, 0.5, 0.9, 0.3];
    let never = Stub {
        first: false,
        stop_after: None,
    };
    let ex = scripted(&seq);
    let e = fast_fitness(&input, 100, 4, FitnessId::F3, &specs, &never, &ex).unwrap();
    assert_eq!((e.simulations(), e.value), (1, 0.7));
    let e = fast_fitness(&input, 100, 4, FitnessId::F3, &specs, &ALWAYS, &ex).unwrap();
    assert_eq!((e.simulations(), e.value), (4, 0.3));
    let two = Stub {
        first: true,
        stop_after: Some(2),
    };
    let e = fast_fitness(&input, 100, 4, FitnessId::F3, &specs, &two, &ex).unwrap();
    assert_eq!((e.simulations(), e.value), (2, 0.5));
    assert_eq!(ex.calls.load(Ordering::SeqCst), 7);
}

fn config(iterations: usize, rerun_budget: usize) -> SearchConfig {
    SearchConfig {
        iterations,
        repeats: 1,
        rerun_budget,
        target: FitnessId::F3,
        diversity_epsilon: 0.05,
        seed: 77,
    }
}

#[test]
fn fixed_budgets_scale_the_simulation_count() {
    let specs = FitnessSpecs::default();
    let space = InputSpace::default();
    let ex = SimExecutor::new(NoiseProfile::sensor(0.1), specs);
    let c = config(12, 10);
    let one = random_search("rs_1", &c, 0, &space, &specs, &Strategy::Fixed(1), &ex).unwrap();
    let ten = random_search("rs_n", &c, 0, &space, &specs, &Strategy::Fixed(10), &ex).unwrap();
    assert_eq!(one.simulations, 12);
    assert_eq!(ten.simulations, 120);
    for (a, b) in one.candidates.iter().zip(&ten.candidates) {
        assert_eq!(a.input, b.input);
        assert_eq!(a.evaluation.runs[0], b.evaluation.runs[0]);
    }
    assert!(ten.final_best() <= one.final_best());
    let again = random_search("rs_1", &c, 0, &space, &specs, &Strategy::Fixed(1), &ex).unwrap();
    assert_eq!(again, one);
}

#[test]
fn zero_noise_makes_reruns_redundant() {
    let specs = FitnessSpecs::default();
    let space = InputSpace::default();
    let ex = SimExecutor::new(NoiseProfile::default(), specs);
    let c = config(10, 10);
    let one = random_search("rs_1", &c, 3, &space, &specs, &Strategy::Fixed(1), &ex).unwrap();
    let ten = random_search("rs_n", &c, 3, &space, &specs, &Strategy::Fixed(10), &ex).unwrap();
    assert_eq!(one.f_opt, ten.f_opt);
    assert_eq!(one.failures, ten.failures);
}

#[test]
fn running_best_keeps_the_earlier_tie() {
    let specs = FitnessSpecs::default();
    let space = InputSpace::default();
    let values = [0.9, 0.5, 0.5, 0.7, 0.3];
    let calls = AtomicUsize::new(0);
    let ex = |_: &TestInput, _: u64| {
        let k = calls.fetch_add(1, Ordering::SeqCst);
        FitnessVector::new(0.0, 10.0, values[k], 0.0)
    };
    let run = random_search("rs_1", &config(5, 1), 0, &space, &specs, &Strategy::Fixed(1), &ex).unwrap();
    assert_eq!(run.f_opt, vec![0.9, 0.5, 0.5, 0.5, 0.3]);
    let run = random_search(
        "rs_1",
        &config(4, 1),
        0,
        &space,
        &specs,
        &Strategy::Fixed(1),
        &|_: &TestInput, _| FitnessVector::new(0.0, 10.0, 0.5, 0.0),
    )
    .unwrap();
    assert_eq!(run.best, 0);
}

#[test]
fn failures_are_counted_once_per_candidate() {
    let specs = FitnessSpecs::default();
    let input = common::lone_ego(6.0, 20.0, -60.0, 40.0);
    let ok = FitnessVector::new(0.0, 10.0, 10.0, 0.0);
    let near_miss = FitnessVector::new(0.0, 0.2, 10.0, 0.0);
    let lost = FitnessVector::new(3.0, 10.0, 10.0, 6.0);
    let candidate = |runs: Vec<FitnessVector>| Candidate {
        input_hash: String::new(),
        draw_index: 0,
        base_seed: 0,
        input: input.clone(),
        evaluation: Evaluation {
            value: 0.0,
            runs: runs.into_iter().map(|fitness| Run { seed: 0, fitness }).collect(),
        },
    };
    let run = SearchRun {
        schema_version: SEARCH_SCHEMA_VERSION,
        algorithm: "hand".into(),
        repeat: 0,
        config: config(3, 10),
        f_opt: vec![0.0; 3],
        best: 0,
        simulations: 0,
        failures: [0; 4],
        candidates: vec![
            candidate(vec![ok; 10]),
            candidate([vec![near_miss; 3], vec![ok; 7]].concat()),
            candidate(vec![lost, near_miss, ok]),
        ],
    };
    assert_eq!(count_failures(&run, &specs), [1, 2, 0, 1]);
    let clean = SearchRun {
        candidates: vec![candidate(vec![ok; 4])],
        ..run
    };
    assert_eq!(count_failures(&clean, &specs), [0; 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn best_so_far_never_rises(seed in any::<u64>(), n in 1usize..4) {
        let specs = FitnessSpecs::default();
        let ex = SimExecutor::new(NoiseProfile::sensor(0.1), specs);
        let c = SearchConfig { seed, ..config(8, n) };
        let run = random_search("p", &c, 0, &InputSpace::default(), &specs, &Strategy::Fixed(n), &ex).unwrap();
        prop_assert!(run.f_opt.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(run.simulations >= c.iterations);
        prop_assert_eq!(run.final_best(), run.candidates[run.best].evaluation.value);
    }
}
