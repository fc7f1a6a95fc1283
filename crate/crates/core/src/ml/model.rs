use super::dataset::Dataset;
use super::forest::{ForestParams, RandomForest};
use super::mlp::{Mlp, MlpParams};
use super::schema::FeatureSchema;
use super::tree::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Scores above this are predicted flaky.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub schema_version: u32,
    pub kind: ModelKind,
    pub schema: FeatureSchema,
    pub seed: u64,
    pub params: ModelParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub flaky: bool,
    pub score: f64,
}

pub fn train(kind: ModelKind, data: &Dataset, hyper: &Hyperparams, seed: u64) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training set is empty"));
    }
    let pos = data.positives();
    if pos == 0 || pos == data.len() {
        return Err(Error::SingleClass);
    }
    let xs: Vec<Vec<f64>> = data.points.iter().map(|p| p.features.clone()).collect();
    let ys = data.labels();
    let params = match kind {
        ModelKind::DecisionTree => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ModelParams::DecisionTree(DecisionTree::fit(&xs, &ys, hyper.tree, &mut rng))
        }
        ModelKind::RandomForest => ModelParams::RandomForest(RandomForest::fit(&xs, &ys, hyper.forest, seed)),
        ModelKind::Mlp => ModelParams::Mlp(Mlp::fit(&xs, &ys, hyper.mlp, seed)),
    };
    Ok(Model {
        schema_version: MODEL_SCHEMA_VERSION,
        kind,
        schema: data.schema.clone(),
        seed,
        params,
    })
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.schema.len(),
                x.len()
            )));
        }
        let score = match &self.params {
            ModelParams::DecisionTree(t) => t.score(x),
            ModelParams::RandomForest(f) => f.score(x),
            ModelParams::Mlp(m) => m.score(x),
        };
        Ok(Prediction {
            flaky: score > DECISION_THRESHOLD,
            score,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(s)?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "model".into(),
                found: m.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(m)
    }
}
