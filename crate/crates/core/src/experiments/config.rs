use crate::error::{Error, Result};
use crate::fitness::{FitnessId, FitnessSpecs};
use crate::flakiness::DEFAULT_TAU;
use crate::ml::cv::CvConfig;
use crate::ml::{FeatureSubset, Hyperparams, ModelKind};
use crate::search::SearchConfig;
use crate::sim::space::derive_seed;
use crate::sim::{InputSpace, NoiseProfile};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

const CORPUS_STREAM: u64 = 1;
const RERUN_STREAM: u64 = 2;
const CV_STREAM: u64 = 3;
const TRAIN_STREAM: u64 = 4;
const SEARCH_STREAM: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub size: usize,
    pub reruns: usize,
    pub diversity_epsilon: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            size: 200,
            reruns: 10,
            diversity_epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// One run per candidate.
    #[serde(rename = "rs_1")]
    Rs1,
    /// `rerun_budget` runs per candidate.
    RsN,
    /// Reruns guided by trained classifiers.
    RsMl,
    /// Reruns guided by the threshold baseline.
    RsB,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Rs1, Algorithm::RsN, Algorithm::RsMl, Algorithm::RsB];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rs1 => "rs_1",
            Algorithm::RsN => "rs_n",
            Algorithm::RsMl => "rs_ml",
            Algorithm::RsB => "rs_b",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub iterations: usize,
    pub repeats: usize,
    pub rerun_budget: usize,
    pub diversity_epsilon: f64,
    /// Each target gets its own bundle of algorithms.
    pub targets: Vec<FitnessId>,
    pub algorithms: Vec<Algorithm>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let base = SearchConfig::default();
        SearchSection {
            iterations: base.iterations,
            repeats: base.repeats,
            rerun_budget: base.rerun_budget,
            diversity_epsilon: base.diversity_epsilon,
            targets: FitnessId::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlConfig {
    pub kinds: Vec<ModelKind>,
    pub subsets: Vec<FeatureSubset>,
    /// Functions whose spread feeds a multi-execution model.
    pub mtec_targets: Vec<FitnessId>,
    pub hyper: Hyperparams,
    pub folds: usize,
    pub smote_k: usize,
    /// The models the classifier-guided search loads.
    pub policy_kind: ModelKind,
    pub policy_subset: FeatureSubset,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            kinds: ModelKind::ALL.to_vec(),
            subsets: FeatureSubset::ALL.to_vec(),
            mtec_targets: FitnessId::ALL.to_vec(),
            hyper: Hyperparams::default(),
            folds: CvConfig::default().folds,
            smote_k: CvConfig::default().smote_k,
            policy_kind: ModelKind::RandomForest,
            policy_subset: FeatureSubset::All,
        }
    }
}

/// Everything an end-to-end run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub tau: f64,
    pub noise: NoiseProfile,
    pub space: InputSpace,
    pub specs: FitnessSpecs,
    pub corpus: CorpusConfig,
    pub search: SearchSection,
    pub ml: MlConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            out: PathBuf::from("out"),
            tau: DEFAULT_TAU,
            noise: NoiseProfile::sensor(0.1),
            space: InputSpace::default(),
            specs: FitnessSpecs::default(),
            corpus: CorpusConfig::default(),
            search: SearchSection::default(),
            ml: MlConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "config".into(),
                found: c.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.noise.validate()?;
        self.specs.validate()?;
        self.search_config(FitnessId::F1).validate()?;
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Config(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            )));
        }
        if self.corpus.size == 0 {
            return Err(Error::Config("corpus.size must be at least 1".into()));
        }
        if self.corpus.reruns < 2 {
            return Err(Error::Config("corpus.reruns must be at least 2".into()));
        }
        let e = self.corpus.diversity_epsilon;
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::Config(
                "corpus.diversity_epsilon must be finite and non-negative".into(),
            ));
        }
        if self.ml.folds < 2 {
            return Err(Error::Config("ml.folds must be at least 2".into()));
        }
        if self.search.targets.is_empty() || self.search.algorithms.is_empty() {
            return Err(Error::Config(
                "search.targets and search.algorithms must be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// The search parameters for one target, seeded from the master seed.
    pub fn search_config(&self, target: FitnessId) -> SearchConfig {
        SearchConfig {
            iterations: self.search.iterations,
            repeats: self.search.repeats,
            rerun_budget: self.search.rerun_budget,
            target,
            diversity_epsilon: self.search.diversity_epsilon,
            seed: derive_seed(self.seed, SEARCH_STREAM),
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.ml.folds,
            smote_k: self.ml.smote_k,
            seed: derive_seed(self.seed, CV_STREAM),
        }
    }

    /// Seed of the corpus sampler.
    pub fn corpus_seed(&self) -> u64 {
        derive_seed(self.seed, CORPUS_STREAM)
    }

    /// Seed of the first rerun of corpus input `index`; later reruns add 1, 2, ...
    pub fn rerun_seed(&self, index: usize) -> u64 {
        derive_seed(derive_seed(self.seed, RERUN_STREAM), index as u64)
    }

    pub fn training_seed(&self) -> u64 {
        derive_seed(self.seed, TRAIN_STREAM)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = ExperimentConfig::from_toml("seed = 7\n[corpus]\nsize = 10\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.corpus.size, 10);
        assert_eq!(c.corpus.reruns, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::from_toml("sede = 7\n").is_err());
        assert!(matches!(
            ExperimentConfig::from_toml("schema_version = 9\n"),
            Err(Error::SchemaVersion { found: 9, .. })
        ));
    }
}
