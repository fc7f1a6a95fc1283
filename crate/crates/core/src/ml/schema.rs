use crate::error::{Error, Result};
use crate::fitness::FitnessId;
use crate::sim::space::VariableGroup;
use crate::sim::{InputSpace, TestInput};
use serde::{Deserialize, Serialize};

/// Which input variables a classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    NoAmbient,
    NoLayout,
    NoAmbientNoLayout,
}

impl FeatureSubset {
    pub const ALL: [FeatureSubset; 4] = [
        FeatureSubset::All,
        FeatureSubset::NoAmbient,
        FeatureSubset::NoLayout,
        FeatureSubset::NoAmbientNoLayout,
    ];

    pub fn includes(self, group: VariableGroup) -> bool {
        match group {
            VariableGroup::Scene => true,
            VariableGroup::Ambient => matches!(self, FeatureSubset::All | FeatureSubset::NoLayout),
            VariableGroup::Layout => matches!(self, FeatureSubset::All | FeatureSubset::NoAmbient),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSubset::All => "all",
            FeatureSubset::NoAmbient => "no_ambient",
            FeatureSubset::NoLayout => "no_layout",
            FeatureSubset::NoAmbientNoLayout => "no_ambient_no_layout",
        }
    }
}

/// Which fitness-derived features follow the input variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessFeatures {
    /// The four normalized oriented values of the first run.
    SingleRunValues,
    /// The spread of the target function over the runs so far.
    MaxDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub subset: FeatureSubset,
    pub fitness_features: FitnessFeatures,
    /// Function whose spread feeds [`FitnessFeatures::MaxDifference`].
    pub target: FitnessId,
    pub names: Vec<String>,
    /// Raw `[lo, hi]` each feature was normalized from.
    pub ranges: Vec<[f64; 2]>,
    /// Positions of the selected variables in the full variable vector.
    pub variable_indices: Vec<usize>,
}

impl FeatureSchema {
    pub fn new(
        space: &InputSpace,
        subset: FeatureSubset,
        fitness_features: FitnessFeatures,
        target: FitnessId,
    ) -> Self {
        let names = space.variable_names();
        let ranges = space.variable_ranges();
        let variable_indices: Vec<usize> = space
            .variable_groups()
            .iter()
            .enumerate()
            .filter(|(_, g)| subset.includes(**g))
            .map(|(i, _)| i)
            .collect();
        let mut feature_names: Vec<String> = variable_indices.iter().map(|&i| names[i].clone()).collect();
        let mut feature_ranges: Vec<[f64; 2]> =
            variable_indices.iter().map(|&i| [ranges[i].lo, ranges[i].hi]).collect();
        match fitness_features {
            FitnessFeatures::SingleRunValues => {
                for id in FitnessId::ALL {
                    feature_names.push(format!("{}_score", id.name().to_lowercase()));
                    feature_ranges.push([0.0, 1.0]);
                }
            }
            FitnessFeatures::MaxDifference => {
                feature_names.push(format!("{}_delta", target.name().to_lowercase()));
                feature_ranges.push([0.0, 1.0]);
            }
        }
        FeatureSchema {
            subset,
            fitness_features,
            target,
            names: feature_names,
            ranges: feature_ranges,
            variable_indices,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn fitness_len(&self) -> usize {
        match self.fitness_features {
            FitnessFeatures::SingleRunValues => 4,
            FitnessFeatures::MaxDifference => 1,
        }
    }

    /// Fails unless `space` yields exactly the input variables this schema was built with.
    pub fn check_space(&self, space: &InputSpace) -> Result<()> {
        let fresh = FeatureSchema::new(space, self.subset, self.fitness_features, self.target);
        if fresh.names != self.names || fresh.ranges != self.ranges {
            return Err(Error::SchemaMismatch(format!(
                "the {} feature set was built from a different input space",
                self.subset.name()
            )));
        }
        Ok(())
    }

    /// Feature vector of `input` followed by `fitness` (normalized values).
    pub fn features(&self, space: &InputSpace, input: &TestInput, fitness: &[f64]) -> Result<Vec<f64>> {
        if fitness.len() != self.fitness_len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} fitness features, got {}",
                self.fitness_len(),
                fitness.len()
            )));
        }
        let vars = space.variables(input);
        let mut x: Vec<f64> = self.variable_indices.iter().map(|&i| vars[i]).collect();
        x.extend_from_slice(fitness);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_drop_groups() {
        let space = InputSpace::default();
        let all = FeatureSchema::new(
            &space,
            FeatureSubset::All,
            FitnessFeatures::SingleRunValues,
            FitnessId::F1,
        );
        let na = FeatureSchema::new(
            &space,
            FeatureSubset::NoAmbient,
            FitnessFeatures::SingleRunValues,
            FitnessId::F1,
        );
        let nl = FeatureSchema::new(
            &space,
            FeatureSubset::NoLayout,
            FitnessFeatures::SingleRunValues,
            FitnessId::F1,
        );
        let nn = FeatureSchema::new(
            &space,
            FeatureSubset::NoAmbientNoLayout,
            FitnessFeatures::MaxDifference,
            FitnessId::F2,
        );
        assert_eq!(all.len(), space.variable_names().len() + 4);
        assert_eq!(na.len(), all.len() - 2);
        assert_eq!(nl.len(), all.len() - 3);
        assert_eq!(nn.len(), all.len() - 5 - 3);
        assert!(!na.names.contains(&"weather".to_string()));
        assert!(!nl.names.contains(&"lane_width".to_string()));
        assert_eq!(nn.names.last().unwrap(), "f2_delta");
    }

    #[test]
    fn mismatched_space_is_detected() {
        let space = InputSpace::default();
        let schema = FeatureSchema::new(
            &space,
            FeatureSubset::All,
            FitnessFeatures::MaxDifference,
            FitnessId::F3,
        );
        assert!(schema.check_space(&space).is_ok());
        let mut other = space.clone();
        other.weather.hi = 0.5;
        assert!(matches!(schema.check_space(&other), Err(Error::SchemaMismatch(_))));
        let input = space.sample(0).unwrap();
        assert!(schema.features(&space, &input, &[0.1, 0.2]).is_err());
        assert_eq!(schema.features(&space, &input, &[0.1]).unwrap().len(), schema.len());
    }
}
