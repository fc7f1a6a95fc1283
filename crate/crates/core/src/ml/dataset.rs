use super::schema::{FeatureSchema, FeatureSubset, FitnessFeatures};
use crate::error::{Error, Result};
use crate::fitness::{FitnessId, FitnessSpecs};
use crate::flakiness::{label, FlakinessCorpusStats, RerunRecord};
use crate::search::input_hash;
use crate::sim::InputSpace;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Runs per record required by the multi-execution datasets.
pub const MTEC_RUNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: bool,
    pub input_hash: String,
    /// Executions the features were computed from; 0 for synthetic points.
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// One row per input from its first run.
    Stec,
    /// Spreads over the first `i` runs.
    Prefix(usize),
    /// All prefixes together.
    Union,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Partition::Stec => f.write_str("dstec"),
            Partition::Prefix(i) => write!(f, "d{i}"),
            Partition::Union => f.write_str("dmtec"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub partition: Partition,
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.points.iter().filter(|p| p.label).count()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            partition: self.partition,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }

    /// Drops repeated `(features, label)` pairs, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.points.retain(|p| {
            let key: (Vec<u64>, bool) = (p.features.iter().map(|x| x.to_bits()).collect(), p.label);
            seen.insert(key)
        });
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = vec!["schema_version".into(), "partition".into()];
        header.extend(self.schema.names.iter().cloned());
        header.extend(["label".into(), "input_hash".into(), "runs".into()]);
        w.write_record(&header)?;
        let version = DATASET_SCHEMA_VERSION.to_string();
        let part = self.partition.to_string();
        for p in &self.points {
            let mut row = vec![version.clone(), part.clone()];
            row.extend(p.features.iter().map(|x| format!("{x:?}")));
            row.extend([u8::from(p.label).to_string(), p.input_hash.clone(), p.runs.to_string()]);
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Reads rows written by [`Dataset::to_csv`] against a known schema.
    pub fn from_csv(schema: FeatureSchema, partition: Partition, text: &str) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        let expected = 2 + schema.len() + 3;
        if header.len() != expected
            || header
                .iter()
                .skip(2)
                .take(schema.len())
                .ne(schema.names.iter().map(String::as_str))
        {
            return Err(Error::SchemaMismatch(
                "dataset columns do not match the feature schema".into(),
            ));
        }
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let version: u32 = rec[0]
                .parse()
                .map_err(|_| Error::Malformed("bad schema_version column".into()))?;
            if version != DATASET_SCHEMA_VERSION {
                return Err(Error::SchemaVersion {
                    what: "dataset".into(),
                    found: version,
                    expected: DATASET_SCHEMA_VERSION,
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("bad number {s:?}")))
            };
            let features = (0..schema.len())
                .map(|k| parse(&rec[2 + k]))
                .collect::<Result<Vec<_>>>()?;
            let n = schema.len() + 2;
            points.push(DataPoint {
                features,
                label: &rec[n] == "1",
                input_hash: rec[n + 1].to_string(),
                runs: rec[n + 2]
                    .parse()
                    .map_err(|_| Error::Malformed("bad runs column".into()))?,
            });
        }
        Ok(Dataset {
            schema,
            partition,
            points,
        })
    }
}

/// Shared inputs of the dataset builders.
#[derive(Debug, Clone, Copy)]
pub struct LabelContext<'a> {
    pub stats: &'a FlakinessCorpusStats,
    pub specs: &'a FitnessSpecs,
    pub space: &'a InputSpace,
    pub tau: f64,
}

/// One row per input: its variables and the normalized fitness of run 1,
/// labelled from all of its runs.
pub fn build_dstec(corpus: &[RerunRecord], ctx: LabelContext<'_>, subset: FeatureSubset) -> Result<Dataset> {
    let schema = FeatureSchema::new(ctx.space, subset, FitnessFeatures::SingleRunValues, FitnessId::F1);
    let mut points = Vec::with_capacity(corpus.len());
    for r in corpus {
        let first = r.runs.first().ok_or(Error::InsufficientRuns {
            input_id: r.input.id.clone(),
            runs: 0,
            required: 2,
        })?;
        let lab = label(r, ctx.stats, ctx.specs, ctx.tau)?;
        points.push(DataPoint {
            features: schema.features(ctx.space, &r.input, &first.fitness.scores(ctx.specs)?)?,
            label: lab.flaky,
            input_hash: input_hash(&r.input),
            runs: 1,
        });
    }
    let mut d = Dataset {
        schema,
        partition: Partition::Stec,
        points,
    };
    d.dedup();
    Ok(d)
}

/// Prefix partitions `D^2 ..= D^10`: each row holds the spread of `target`
/// over the first `i` runs, labelled per input.
pub fn build_dmtec(
    corpus: &[RerunRecord],
    ctx: LabelContext<'_>,
    subset: FeatureSubset,
    target: FitnessId,
) -> Result<Vec<Dataset>> {
    let schema = FeatureSchema::new(ctx.space, subset, FitnessFeatures::MaxDifference, target);
    let mut parts: Vec<Dataset> = (2..=MTEC_RUNS)
        .map(|i| Dataset {
            schema: schema.clone(),
            partition: Partition::Prefix(i),
            points: Vec::with_capacity(corpus.len()),
        })
        .collect();
    for r in corpus {
        if r.runs.len() < MTEC_RUNS {
            return Err(Error::InsufficientRuns {
                input_id: r.input.id.clone(),
                runs: r.runs.len(),
                required: MTEC_RUNS,
            });
        }
        let lab = label(r, ctx.stats, ctx.specs, ctx.tau)?;
        let hash = input_hash(&r.input);
        let base = schema.features(ctx.space, &r.input, &[0.0])?;
        for (k, part) in parts.iter_mut().enumerate() {
            let i = k + 2;
            let mut features = base.clone();
            *features.last_mut().expect("delta slot") = r.prefix_delta(target, i, ctx.specs)?;
            part.points.push(DataPoint {
                features,
                label: lab.flaky,
                input_hash: hash.clone(),
                runs: i,
            });
        }
    }
    for p in &mut parts {
        p.dedup();
    }
    Ok(parts)
}

/// All prefix partitions in one deduplicated training set.
pub fn mtec_union(parts: &[Dataset]) -> Result<Dataset> {
    let first = parts.first().ok_or(Error::EmptyInput("no partitions"))?;
    let mut d = Dataset {
        schema: first.schema.clone(),
        partition: Partition::Union,
        points: parts.iter().flat_map(|p| p.points.iter().cloned()).collect(),
    };
    d.dedup();
    Ok(d)
}
