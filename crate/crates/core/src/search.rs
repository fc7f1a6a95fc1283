//! Random search with fixed or adaptive rerun budgets.

use crate::error::{Error, Result};
use crate::fitness::{evaluate, FitnessId, FitnessSpecs, FitnessVector};
use crate::flakiness::{soft_flaky, soft_flaky_ratio, FlakinessCorpusStats, Run, DEFAULT_TAU};
use crate::ml::{FitnessFeatures, Model};
use crate::sim::space::derive_seed;
use crate::sim::{diversity_filter, simulate_with, ControllerGains, InputSpace, NoiseProfile, TestInput};
use serde::{Deserialize, Serialize};

pub const SEARCH_SCHEMA_VERSION: u32 = 1;

/// Draw attempts allowed per accepted candidate before the space is declared too small.
pub const MAX_DRAWS_PER_CANDIDATE: usize = 1000;

/// Runs one execution of a test input.
pub trait Executor: Sync {
    fn execute(&self, input: &TestInput, seed: u64) -> FitnessVector;
}

impl<F> Executor for F
where
    F: Fn(&TestInput, u64) -> FitnessVector + Sync,
{
    fn execute(&self, input: &TestInput, seed: u64) -> FitnessVector {
        self(input, seed)
    }
}

/// Simulates and evaluates.
#[derive(Debug, Clone)]
pub struct SimExecutor {
    pub noise: NoiseProfile,
    pub specs: FitnessSpecs,
    pub gains: ControllerGains,
}

impl SimExecutor {
    pub fn new(noise: NoiseProfile, specs: FitnessSpecs) -> Self {
        SimExecutor {
            noise,
            specs,
            gains: ControllerGains::default(),
        }
    }
}

impl Executor for SimExecutor {
    fn execute(&self, input: &TestInput, seed: u64) -> FitnessVector {
        evaluate(
            &simulate_with(input, seed, &self.noise, &self.gains),
            input,
            &self.specs,
        )
    }
}

/// Outcome of evaluating one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Minimum oriented target fitness over the executed runs.
    pub value: f64,
    pub runs: Vec<Run>,
}

impl Evaluation {
    pub fn simulations(&self) -> usize {
        self.runs.len()
    }
}

fn run_once(input: &TestInput, seed: u64, executor: &dyn Executor) -> Run {
    Run {
        seed,
        fitness: executor.execute(input, seed),
    }
}

fn min_oriented(runs: &[Run], target: FitnessId, specs: &FitnessSpecs) -> f64 {
    let spec = specs.get(target);
    runs.iter()
        .map(|r| spec.orient(r.fitness.get(target)))
        .fold(f64::INFINITY, f64::min)
}

/// Runs `input` with seeds `base_seed, base_seed + 1, ...` `n` times and
/// keeps the lowest oriented value of `target`.
pub fn fitness_min(
    input: &TestInput,
    base_seed: u64,
    n: usize,
    target: FitnessId,
    specs: &FitnessSpecs,
    executor: &dyn Executor,
) -> Evaluation {
    assert!(n >= 1, "the rerun budget must be at least 1");
    let runs: Vec<Run> = (0..n as u64)
        .map(|j| run_once(input, base_seed.wrapping_add(j), executor))
        .collect();
    Evaluation {
        value: min_oriented(&runs, target, specs),
        runs,
    }
}

/// Decides whether an input still looks flaky.
pub trait RerunPolicy: Sync {
    /// Queried after the first run.
    fn flaky_after_first(&self, input: &TestInput, first: &FitnessVector) -> Result<bool>;
    /// Queried after every further run with all runs so far.
    fn flaky_after(&self, input: &TestInput, runs: &[FitnessVector]) -> Result<bool>;
}

/// Reruns `input` only while `policy` keeps predicting it flaky, up to `n` runs.
pub fn fast_fitness(
    input: &TestInput,
    base_seed: u64,
    n: usize,
    target: FitnessId,
    specs: &FitnessSpecs,
    policy: &dyn RerunPolicy,
    executor: &dyn Executor,
) -> Result<Evaluation> {
    assert!(n >= 1, "the rerun budget must be at least 1");
    let mut runs = vec![run_once(input, base_seed, executor)];
    let mut flaky = policy.flaky_after_first(input, &runs[0].fitness)?;
    while flaky && runs.len() < n {
        runs.push(run_once(input, base_seed.wrapping_add(runs.len() as u64), executor));
        let so_far: Vec<FitnessVector> = runs.iter().map(|r| r.fitness).collect();
        flaky = policy.flaky_after(input, &so_far)?;
    }
    Ok(Evaluation {
        value: min_oriented(&runs, target, specs),
        runs,
    })
}

/// Max minus min of the normalized oriented values of `id` over `runs`.
pub fn running_delta(runs: &[FitnessVector], id: FitnessId, specs: &FitnessSpecs) -> Result<f64> {
    let scores: Vec<f64> = runs
        .iter()
        .map(|r| specs.get(id).score(r.get(id)))
        .collect::<Result<_>>()?;
    soft_flaky(&scores)
}

/// The threshold rule of the non-learned baseline: `delta > tau * MaxSF`,
/// evaluated as a ratio exactly like the ground-truth label so that a flaky
/// prediction on a prefix implies a flaky label.
pub fn baseline_flaky(delta: f64, stats: &FlakinessCorpusStats, tau: f64, id: FitnessId) -> bool {
    soft_flaky_ratio(delta, stats.max_sf(id)) > tau
}

/// Always reruns after the first run, then stops once the observed spread
/// stays within the flakiness threshold.
#[derive(Debug, Clone)]
pub struct BaselinePolicy {
    pub stats: FlakinessCorpusStats,
    pub specs: FitnessSpecs,
    pub target: FitnessId,
    pub tau: f64,
}

impl BaselinePolicy {
    pub fn new(stats: FlakinessCorpusStats, specs: FitnessSpecs, target: FitnessId) -> Self {
        BaselinePolicy {
            stats,
            specs,
            target,
            tau: DEFAULT_TAU,
        }
    }
}

impl RerunPolicy for BaselinePolicy {
    fn flaky_after_first(&self, _: &TestInput, _: &FitnessVector) -> Result<bool> {
        Ok(true)
    }

    fn flaky_after(&self, _: &TestInput, runs: &[FitnessVector]) -> Result<bool> {
        let delta = running_delta(runs, self.target, &self.specs)?;
        Ok(baseline_flaky(delta, &self.stats, self.tau, self.target))
    }
}

/// Classifier-guided rerun decisions: a single-execution model first, then a
/// multi-execution model on the observed spread of its target function.
#[derive(Debug, Clone)]
pub struct ModelPolicy {
    pub stec: Model,
    pub mtec: Model,
    pub space: InputSpace,
    pub specs: FitnessSpecs,
}

impl ModelPolicy {
    pub fn new(stec: Model, mtec: Model, space: InputSpace, specs: FitnessSpecs) -> Result<Self> {
        if stec.schema.fitness_features != FitnessFeatures::SingleRunValues {
            return Err(Error::SchemaMismatch(
                "first model is not a single-execution classifier".into(),
            ));
        }
        if mtec.schema.fitness_features != FitnessFeatures::MaxDifference {
            return Err(Error::SchemaMismatch(
                "second model is not a multi-execution classifier".into(),
            ));
        }
        if stec.schema.subset != mtec.schema.subset {
            return Err(Error::SchemaMismatch(format!(
                "models use different input subsets: {:?} vs {:?}",
                stec.schema.subset, mtec.schema.subset
            )));
        }
        stec.schema.check_space(&space)?;
        mtec.schema.check_space(&space)?;
        Ok(ModelPolicy {
            stec,
            mtec,
            space,
            specs,
        })
    }
}

impl RerunPolicy for ModelPolicy {
    fn flaky_after_first(&self, input: &TestInput, first: &FitnessVector) -> Result<bool> {
        let x = self
            .stec
            .schema
            .features(&self.space, input, &first.scores(&self.specs)?)?;
        Ok(self.stec.predict(&x)?.flaky)
    }

    fn flaky_after(&self, input: &TestInput, runs: &[FitnessVector]) -> Result<bool> {
        let target = self.mtec.schema.target;
        let delta = running_delta(runs, target, &self.specs)?;
        let x = self.mtec.schema.features(&self.space, input, &[delta])?;
        Ok(self.mtec.predict(&x)?.flaky)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub iterations: usize,
    pub repeats: usize,
    pub rerun_budget: usize,
    pub target: FitnessId,
    pub diversity_epsilon: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 50,
            repeats: 20,
            rerun_budget: 10,
            target: FitnessId::F3,
            diversity_epsilon: 0.05,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.rerun_budget == 0 || self.repeats == 0 {
            return Err(Error::Config(
                "iterations, repeats and rerun_budget must be at least 1".into(),
            ));
        }
        let e = self.diversity_epsilon;
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::Config(
                "diversity_epsilon must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// How each candidate is evaluated.
pub enum Strategy<'a> {
    /// `n` runs per candidate.
    Fixed(usize),
    /// Up to the configured budget, guided by a policy.
    Adaptive(&'a dyn RerunPolicy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub input_hash: String,
    pub draw_index: u64,
    pub base_seed: u64,
    pub input: TestInput,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    pub schema_version: u32,
    pub algorithm: String,
    pub repeat: usize,
    pub config: SearchConfig,
    /// Best-so-far oriented target fitness after each iteration.
    pub f_opt: Vec<f64>,
    /// Index of the candidate holding the final best value.
    pub best: usize,
    pub simulations: usize,
    pub failures: [usize; 4],
    pub candidates: Vec<Candidate>,
}

impl SearchRun {
    pub fn final_best(&self) -> f64 {
        *self.f_opt.last().expect("at least one iteration")
    }
}

/// Deterministic, diversity-filtered candidate stream of one search repeat.
pub struct CandidateStream {
    space: InputSpace,
    epsilon: f64,
    accepted: Vec<TestInput>,
    next_draw: u64,
    repeat: usize,
    repeat_seed: u64,
}

impl CandidateStream {
    pub fn new(space: &InputSpace, config: &SearchConfig, repeat: usize) -> Self {
        let repeat_seed = derive_seed(config.seed, repeat as u64);
        let mut space = space.clone();
        space.master_seed = derive_seed(repeat_seed, 0x5eed);
        CandidateStream {
            space,
            epsilon: config.diversity_epsilon,
            accepted: Vec::new(),
            next_draw: 0,
            repeat,
            repeat_seed,
        }
    }

    /// Next accepted candidate: `(draw index, base run seed, input)`.
    pub fn next_candidate(&mut self) -> Result<(u64, u64, TestInput)> {
        let k = self.accepted.len() as u64;
        for _ in 0..MAX_DRAWS_PER_CANDIDATE {
            let draw = self.next_draw;
            self.next_draw += 1;
            let mut input = self.space.sample(draw)?;
            input.id = format!("r{}c{k}", self.repeat);
            if diversity_filter(&self.space, &input, &self.accepted, self.epsilon) {
                self.accepted.push(input.clone());
                let base = derive_seed(derive_seed(self.repeat_seed, 0x7275_6e73), k);
                return Ok((draw, base, input));
            }
        }
        Err(Error::UnsatisfiableSpace {
            reason: format!("no diverse candidate within {MAX_DRAWS_PER_CANDIDATE} draws"),
            achieved: self.accepted.len(),
            requested: self.accepted.len() + 1,
        })
    }
}

/// Random search over `space` for one repeat.
pub fn random_search(
    algorithm: &str,
    config: &SearchConfig,
    repeat: usize,
    space: &InputSpace,
    specs: &FitnessSpecs,
    strategy: &Strategy<'_>,
    executor: &dyn Executor,
) -> Result<SearchRun> {
    config.validate()?;
    let mut stream = CandidateStream::new(space, config, repeat);
    let mut candidates = Vec::with_capacity(config.iterations);
    let mut f_opt = Vec::with_capacity(config.iterations);
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for k in 0..config.iterations {
        let (draw_index, base_seed, input) = stream.next_candidate()?;
        let evaluation = match strategy {
            Strategy::Fixed(n) => fitness_min(&input, base_seed, *n, config.target, specs, executor),
            Strategy::Adaptive(policy) => fast_fitness(
                &input,
                base_seed,
                config.rerun_budget,
                config.target,
                specs,
                *policy,
                executor,
            )?,
        };
        if k == 0 || evaluation.value < best_value {
            best_value = evaluation.value;
            best = k;
        }
        f_opt.push(best_value);
        candidates.push(Candidate {
            input_hash: input_hash(&input),
            draw_index,
            base_seed,
            input,
            evaluation,
        });
    }
    let mut run = SearchRun {
        schema_version: SEARCH_SCHEMA_VERSION,
        algorithm: algorithm.to_string(),
        repeat,
        config: *config,
        f_opt,
        best,
        simulations: candidates.iter().map(|c| c.evaluation.simulations()).sum(),
        failures: [0; 4],
        candidates,
    };
    run.failures = count_failures(&run, specs);
    Ok(run)
}

/// Hash of an input's content, independent of its id.
pub fn input_hash(input: &TestInput) -> String {
    let mut anon = input.clone();
    anon.id.clear();
    crate::sim::input::hash_hex(anon.content_hash())
}

/// Distinct candidates with at least one failing run, per function.
pub fn count_failures(run: &SearchRun, specs: &FitnessSpecs) -> [usize; 4] {
    let mut counts = [0; 4];
    for c in &run.candidates {
        for id in FitnessId::ALL {
            if c.evaluation.runs.iter().any(|r| specs.get(id).fails(r.fitness.get(id))) {
                counts[id.index()] += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted(Vec<f64>, AtomicUsize);

    impl Executor for Scripted {
        fn execute(&self, _: &TestInput, _: u64) -> FitnessVector {
            let k = self.1.fetch_add(1, Ordering::SeqCst);
            FitnessVector::new(0.0, 20.0, self.0[k % self.0.len()], 0.0)
        }
    }

    fn input() -> TestInput {
        InputSpace::default().sample(0).unwrap()
    }

    #[test]
    fn fitness_min_takes_lowest() {
        let specs = FitnessSpecs::default();
        let exec = Scripted(vec![0.4, 0.2, 0.9], AtomicUsize::new(0));
        let e = fitness_min(&input(), 1, 3, FitnessId::F3, &specs, &exec);
        assert_eq!(e.value, 0.2);
        assert_eq!(e.simulations(), 3);
    }

    #[test]
    fn running_f_opt_with_ties() {
        let specs = FitnessSpecs::default();
        let exec = Scripted(vec![0.9, 0.5, 0.7, 0.3, 0.3], AtomicUsize::new(0));
        let config = SearchConfig {
            iterations: 5,
            ..SearchConfig::default()
        };
        let run = random_search(
            "rs1",
            &config,
            0,
            &InputSpace::default(),
            &specs,
            &Strategy::Fixed(1),
            &exec,
        )
        .unwrap();
        assert_eq!(run.f_opt, vec![0.9, 0.5, 0.5, 0.3, 0.3]);
        assert_eq!(run.best, 3);
    }

    #[test]
    fn baseline_boundary() {
        let stats = FlakinessCorpusStats {
            schema_version: 1,
            corpus_id: "t".into(),
            max_sf: [0.5; 4],
            raw_ranges: FitnessSpecs::default().0.map(|s| s.raw_range),
        };
        assert!(!baseline_flaky(0.0, &stats, 0.05, FitnessId::F2));
        assert!(!baseline_flaky(0.05 * 0.5, &stats, 0.05, FitnessId::F2));
        assert!(baseline_flaky(0.06 * 0.5, &stats, 0.05, FitnessId::F2));
    }
}
