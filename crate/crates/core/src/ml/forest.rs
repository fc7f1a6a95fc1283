use super::tree::{DecisionTree, TreeParams};
use crate::sim::space::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 50,
            max_depth: 8,
            min_samples_split: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Bootstrap-aggregated trees, each split drawing `sqrt(d)` features.
    pub fn fit(xs: &[Vec<f64>], ys: &[bool], params: ForestParams, seed: u64) -> Self {
        let d = xs.first().map_or(1, Vec::len);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(((d as f64).sqrt().round() as usize).max(1)),
        };
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let picks: Vec<usize> = (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect();
                let bx: Vec<Vec<f64>> = picks.iter().map(|&i| xs[i].clone()).collect();
                let by: Vec<bool> = picks.iter().map(|&i| ys[i]).collect();
                DecisionTree::fit(&bx, &by, tree_params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    /// Fraction of trees voting positive.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.score(x) > 0.5).count();
        votes as f64 / self.trees.len().max(1) as f64
    }
}
