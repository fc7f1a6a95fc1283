//! Append-only cache of simulation results.

use crate::error::{Error, Result};
use crate::fitness::FitnessVector;
use crate::search::{input_hash, Executor, SimExecutor};
use crate::sim::input::{fnv1a, hash_hex};
use crate::sim::TestInput;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const RUNLOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub input_hash: String,
    pub seed: u64,
    pub noise_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    schema_version: u32,
    #[serde(flatten)]
    key: RunKey,
    fitness: FitnessVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<PathBuf>,
}

#[derive(Default)]
struct Inner {
    map: HashMap<RunKey, FitnessVector>,
    pending: Vec<Entry>,
}

/// Maps `(input hash, run seed, noise hash)` to the fitness of that run.
/// New entries are held until [`RunLogStore::flush`] appends them sorted by key,
/// so the file contents never depend on thread scheduling.
pub struct RunLogStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl RunLogStore {
    pub fn in_memory() -> Self {
        RunLogStore {
            path: None,
            inner: Mutex::default(),
        }
    }

    /// Opens or creates the JSON-lines log at `path`. Later lines win.
    pub fn open(path: &Path) -> Result<Self> {
        let mut inner = Inner::default();
        if path.exists() {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: Entry = serde_json::from_str(&line)?;
                if e.schema_version != RUNLOG_SCHEMA_VERSION {
                    return Err(Error::SchemaVersion {
                        what: "run log".into(),
                        found: e.schema_version,
                        expected: RUNLOG_SCHEMA_VERSION,
                    });
                }
                inner.map.insert(e.key, e.fitness);
            }
        }
        Ok(RunLogStore {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(inner),
        })
    }

    pub fn get(&self, key: &RunKey) -> Option<FitnessVector> {
        self.inner.lock().expect("store lock").map.get(key).copied()
    }

    /// Records a result; returns false if the key was already present.
    pub fn insert(&self, key: RunKey, fitness: FitnessVector) -> bool {
        let mut inner = self.inner.lock().expect("store lock");
        if inner.map.insert(key.clone(), fitness).is_some() {
            return false;
        }
        inner.pending.push(Entry {
            schema_version: RUNLOG_SCHEMA_VERSION,
            key,
            fitness,
            trace: None,
        });
        true
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("store lock").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries added since opening or the last flush.
    pub fn pending(&self) -> usize {
        self.inner.lock().expect("store lock").pending.len()
    }

    /// Appends pending entries to the log file; returns how many were written.
    pub fn flush(&self) -> Result<usize> {
        let mut inner = self.inner.lock().expect("store lock");
        let mut pending = std::mem::take(&mut inner.pending);
        let Some(path) = &self.path else {
            return Ok(pending.len());
        };
        if pending.is_empty() {
            return Ok(0);
        }
        pending.sort_by(|a, b| a.key.cmp(&b.key));
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut buf = String::new();
        for e in &pending {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(pending.len())
    }
}

/// Hash of everything besides the input and seed that determines a run's
/// fitness: the noise profile, and the controller and fitness specs, which
/// clamp the raw values.
pub fn profile_hash(sim: &SimExecutor) -> String {
    let bytes = serde_json::to_vec(&(&sim.noise, &sim.specs, &sim.gains)).expect("profile serializes");
    hash_hex(fnv1a(&bytes))
}

/// An executor that consults the store before simulating.
pub struct CachedExecutor<'a> {
    pub store: &'a RunLogStore,
    pub sim: SimExecutor,
    noise_hash: String,
}

impl<'a> CachedExecutor<'a> {
    pub fn new(store: &'a RunLogStore, sim: SimExecutor) -> Self {
        let noise_hash = profile_hash(&sim);
        CachedExecutor { store, sim, noise_hash }
    }

    pub fn key(&self, input: &TestInput, seed: u64) -> RunKey {
        RunKey {
            input_hash: input_hash(input),
            seed,
            noise_hash: self.noise_hash.clone(),
        }
    }
}

impl Executor for CachedExecutor<'_> {
    fn execute(&self, input: &TestInput, seed: u64) -> FitnessVector {
        let key = self.key(input, seed);
        if let Some(v) = self.store.get(&key) {
            return v;
        }
        let v = self.sim.execute(input, seed);
        self.store.insert(key, v);
        v
    }
}
