//! Soft and hard flakiness of rerun records, corpus-level ratios, labels and
//! bucketed tables.

use crate::error::{Error, Result};
use crate::fitness::{FitnessId, FitnessSpec, FitnessSpecs, FitnessVector};
use crate::sim::TestInput;
use serde::{Deserialize, Serialize};

pub const STATS_SCHEMA_VERSION: u32 = 1;
pub const TABLE_SCHEMA_VERSION: u32 = 1;

/// Default soft-flaky ratio above which a function is considered flaky.
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub seed: u64,
    pub fitness: FitnessVector,
}

/// One input with the fitness of each of its executions, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerunRecord {
    pub input: TestInput,
    pub runs: Vec<Run>,
}

impl RerunRecord {
    pub fn raw(&self, id: FitnessId) -> Vec<f64> {
        self.runs.iter().map(|r| r.fitness.get(id)).collect()
    }

    /// Normalized oriented values of `id`, one per run.
    pub fn scores(&self, id: FitnessId, specs: &FitnessSpecs) -> Result<Vec<f64>> {
        self.runs
            .iter()
            .map(|r| specs.get(id).score(r.fitness.get(id)))
            .collect()
    }

    pub fn soft_flakiness(&self, specs: &FitnessSpecs) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for id in FitnessId::ALL {
            out[id.index()] = soft_flaky(&self.scores(id, specs)?)?;
        }
        Ok(out)
    }

    pub fn hard_flakiness(&self, specs: &FitnessSpecs) -> [bool; 4] {
        FitnessId::ALL.map(|id| hard_flaky(&self.raw(id), specs.get(id)))
    }

    /// Max minus min over the first `i` normalized oriented values of `id`.
    pub fn prefix_delta(&self, id: FitnessId, i: usize, specs: &FitnessSpecs) -> Result<f64> {
        if i == 0 || i > self.runs.len() {
            return Err(Error::InsufficientRuns {
                input_id: self.input.id.clone(),
                runs: self.runs.len(),
                required: i.max(1),
            });
        }
        soft_flaky(&self.scores(id, specs)?[..i])
    }
}

/// Max minus min of `values`.
pub fn soft_flaky(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("soft flakiness needs at least one value"));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    Ok(hi - lo)
}

/// True iff the raw values contain both a passing and a failing run.
pub fn hard_flaky(values: &[f64], spec: &FitnessSpec) -> bool {
    let fails = values.iter().filter(|&&v| spec.fails(v)).count();
    fails > 0 && fails < values.len()
}

pub fn soft_flaky_ratio(sf: f64, max_sf: f64) -> f64 {
    if max_sf == 0.0 {
        0.0
    } else {
        sf / max_sf
    }
}

/// Per-function maxima of soft flakiness over a calibration corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlakinessCorpusStats {
    pub schema_version: u32,
    pub corpus_id: String,
    pub max_sf: [f64; 4],
    pub raw_ranges: [[f64; 2]; 4],
}

impl FlakinessCorpusStats {
    pub fn compute(corpus_id: &str, corpus: &[RerunRecord], specs: &FitnessSpecs) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("corpus has no records"));
        }
        let mut max_sf = [0.0f64; 4];
        for r in corpus {
            let sf = r.soft_flakiness(specs)?;
            for k in 0..4 {
                max_sf[k] = max_sf[k].max(sf[k]);
            }
        }
        Ok(FlakinessCorpusStats {
            schema_version: STATS_SCHEMA_VERSION,
            corpus_id: corpus_id.to_string(),
            max_sf,
            raw_ranges: specs.0.map(|s| s.raw_range),
        })
    }

    pub fn max_sf(&self, id: FitnessId) -> f64 {
        self.max_sf[id.index()]
    }

    pub fn ratios(&self, record: &RerunRecord, specs: &FitnessSpecs) -> Result<[f64; 4]> {
        let sf = record.soft_flakiness(specs)?;
        Ok(FitnessId::ALL.map(|id| soft_flaky_ratio(sf[id.index()], self.max_sf(id))))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stats: Self = serde_json::from_str(s)?;
        if stats.schema_version != STATS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "flakiness stats".into(),
                found: stats.schema_version,
                expected: STATS_SCHEMA_VERSION,
            });
        }
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlakyLabel {
    pub per_function: [bool; 4],
    pub flaky: bool,
}

/// Labels a record flaky if any function's soft-flaky ratio exceeds `tau`.
pub fn label(record: &RerunRecord, stats: &FlakinessCorpusStats, specs: &FitnessSpecs, tau: f64) -> Result<FlakyLabel> {
    if record.runs.len() < 2 {
        return Err(Error::InsufficientRuns {
            input_id: record.input.id.clone(),
            runs: record.runs.len(),
            required: 2,
        });
    }
    let per_function = stats.ratios(record, specs)?.map(|r| r > tau);
    Ok(FlakyLabel {
        per_function,
        flaky: per_function.iter().any(|&f| f),
    })
}

/// Ratio intervals of the flakiness table.
pub const BUCKET_LABELS: [&str; 5] = ["[0,1%]", "(1%,5%]", "(5%,10%]", "(10%,40%]", "(40%,100%]"];
const BUCKET_UPPER: [f64; 4] = [0.01, 0.05, 0.10, 0.40];

/// Index into [`BUCKET_LABELS`]; ratios above 1 land in the last bucket.
pub fn bucket_of(ratio: f64) -> usize {
    BUCKET_UPPER
        .iter()
        .position(|&u| ratio <= u)
        .unwrap_or(BUCKET_UPPER.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRow {
    pub function: FitnessId,
    pub max_sf: f64,
    pub buckets: [usize; 5],
    pub hard_flaky: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlakinessTable {
    pub schema_version: u32,
    pub corpus_id: String,
    pub corpus_size: usize,
    pub bucket_labels: Vec<String>,
    pub functions: Vec<FunctionRow>,
}

pub fn flakiness_table(
    corpus: &[RerunRecord],
    stats: &FlakinessCorpusStats,
    specs: &FitnessSpecs,
) -> Result<FlakinessTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus has no records"));
    }
    let mut rows: Vec<FunctionRow> = FitnessId::ALL
        .iter()
        .map(|&id| FunctionRow {
            function: id,
            max_sf: stats.max_sf(id),
            buckets: [0; 5],
            hard_flaky: 0,
        })
        .collect();
    for r in corpus {
        let ratios = stats.ratios(r, specs)?;
        let hf = r.hard_flakiness(specs);
        for (k, row) in rows.iter_mut().enumerate() {
            row.buckets[bucket_of(ratios[k])] += 1;
            row.hard_flaky += usize::from(hf[k]);
        }
    }
    Ok(FlakinessTable {
        schema_version: TABLE_SCHEMA_VERSION,
        corpus_id: stats.corpus_id.clone(),
        corpus_size: corpus.len(),
        bucket_labels: BUCKET_LABELS.iter().map(|s| s.to_string()).collect(),
        functions: rows,
    })
}

impl FlakinessTable {
    /// One row per (function, bucket), then one hard-flaky row per function.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["schema_version", "function", "bucket", "count"])?;
        let v = self.schema_version.to_string();
        for row in &self.functions {
            for (label, count) in self.bucket_labels.iter().zip(row.buckets) {
                w.write_record([v.as_str(), row.function.name(), label, &count.to_string()])?;
            }
        }
        for row in &self.functions {
            w.write_record([
                v.as_str(),
                row.function.name(),
                "hard_flaky",
                &row.hard_flaky.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_flaky_examples() {
        assert!((soft_flaky(&[0.2, 0.9, 0.5]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(soft_flaky(&[0.3; 4]).unwrap(), 0.0);
        assert!(matches!(soft_flaky(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn hard_flaky_examples() {
        // F2 is lower-is-worse with an inclusive 0.5 threshold
        let spec = *FitnessSpecs::default().get(FitnessId::F2);
        assert!(hard_flaky(&[0.3, 0.7], &spec));
        assert!(!hard_flaky(&[0.6, 0.7], &spec));
        assert!(hard_flaky(&[0.5, 0.6], &spec));
    }

    #[test]
    fn ratio_examples() {
        assert!((soft_flaky_ratio(0.07, 0.7) - 0.1).abs() < 1e-15);
        assert_eq!(soft_flaky_ratio(0.4, 0.4), 1.0);
        assert_eq!(soft_flaky_ratio(0.0, 0.0), 0.0);
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bucket_of(0.0), 0);
        assert_eq!(bucket_of(0.01), 0);
        assert_eq!(bucket_of(0.0100001), 1);
        assert_eq!(bucket_of(0.05), 1);
        assert_eq!(bucket_of(0.10), 2);
        assert_eq!(bucket_of(0.40), 3);
        assert_eq!(bucket_of(1.0), 4);
        assert_eq!(bucket_of(1.5), 4);
    }
}
