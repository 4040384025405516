//! Experiment plumbing: concept preparation with padding, derived-parameter
//! blocks, config hashing and JSON-lines run records.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distrib::{Padding, ProductDistribution};
use crate::error::{Error, Result};
use crate::learner::{query_bound, LearnerParams};
use crate::oracle::{Concept, ConceptConfig, ConceptKind};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NOFL_OUT_DIR";

/// `$NOFL_OUT_DIR`, or the current directory.
pub fn output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let text = serde_json::to_string(&value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// A concept ready for `k` parties, padded when `k` does not divide its arity.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub concept: Concept,
    pub padding: Option<Padding>,
}

/// Builds the concept of `config` for `k` parties.
///
/// Without an explicit distribution and with `k` not dividing `n`, the concept
/// is lifted to the next multiple of `k` with ignored trailing variables fixed
/// to zero by the marginal.
pub fn prepare_concept(config: &ConceptConfig, k: u32, base_dir: Option<&Path>) -> Result<Prepared> {
    if config.distribution.is_some() {
        return Ok(Prepared { concept: config.build(k, base_dir)?, padding: None });
    }
    let flat = config.build(1, base_dir)?;
    let n = flat.arity();
    if k > 0 && n.is_multiple_of(k) {
        return Ok(Prepared { concept: config.build(k, base_dir)?, padding: None });
    }
    let pad = Padding::new(n, k)?;
    let marginal = pad.uniform_product(k)?;
    let concept = match flat.kind() {
        ConceptKind::Deterministic(t) => Concept::deterministic(pad.lift_table(t)?, marginal)?,
        ConceptKind::Probabilistic(p) => {
            let extra = pad.extra();
            let lifted = (0..1u32 << pad.padded_n).map(|i| p[(i >> extra) as usize]).collect();
            Concept::probabilistic(lifted, marginal)?
        }
    };
    Ok(Prepared { concept, padding: Some(pad) })
}

/// Parameters recomputed from the configuration, never read from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n: u32,
    pub padded_n: u32,
    pub k: u32,
    pub gamma: f64,
    pub c: u32,
    /// `gamma * 2^{-c 2^k - k}`.
    pub theory_alpha: f64,
    pub alpha: f64,
    /// `2k * 2^{n - n/k}` for the padded arity.
    pub query_bound: u64,
    pub candidates: usize,
    pub validation: usize,
}

impl DerivedParams {
    pub fn compute(n: u32, padded_n: u32, params: &LearnerParams) -> Result<Self> {
        params.validate()?;
        Ok(DerivedParams {
            n,
            padded_n,
            k: params.k,
            gamma: params.gamma,
            c: params.c,
            theory_alpha: params.theory_alpha(),
            alpha: params.alpha(),
            query_bound: query_bound(padded_n, params.k),
            candidates: params.candidates(),
            validation: params.validation(),
        })
    }
}

/// One JSON-lines record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<serde_json::Value>,
    /// Set when the run aborted and only part of the metrics were collected.
    #[serde(default)]
    pub partial: bool,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: u64) -> Result<Self> {
        Ok(RunRecord {
            command: command.to_owned(),
            config_hash: config_hash(config)?,
            seed,
            metrics: BTreeMap::new(),
            derived: None,
            partial: false,
            wall_seconds: 0.0,
        })
    }

    pub fn metric<V: Serialize>(&mut self, name: &str, value: V) -> Result<&mut Self> {
        self.metrics.insert(name.to_owned(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn derived<V: Serialize>(&mut self, block: V) -> Result<&mut Self> {
        self.derived = Some(serde_json::to_value(block)?);
        Ok(self)
    }

    pub fn finish(&mut self, started: Instant) {
        self.wall_seconds = started.elapsed().as_secs_f64();
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// The record with timing removed, for reproducibility comparisons.
    pub fn counters(&self) -> (String, u64, &BTreeMap<String, serde_json::Value>) {
        (self.config_hash.clone(), self.seed, &self.metrics)
    }
}

/// Appends records to a JSON-lines sink.
pub struct RecordSink {
    out: Box<dyn Write>,
}

impl RecordSink {
    /// Appends to `path`, creating it and its directory if needed; stdout when `None`.
    pub fn open(path: Option<&Path>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Box::new(std::fs::OpenOptions::new().create(true).append(true).open(p)?)
            }
            None => Box::new(std::io::stdout()),
        };
        Ok(RecordSink { out })
    }

    pub fn emit(&mut self, record: &RunRecord) -> Result<()> {
        writeln!(self.out, "{}", record.to_json_line()?)?;
        self.out.flush()?;
        Ok(())
    }
}

/// Reads every record of a JSON-lines file.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() }))
        .collect()
}

/// Uniform `k`-product on `n` variables, or the padded one when `k` does not divide `n`.
pub fn uniform_for(n: u32, k: u32) -> Result<(ProductDistribution, Option<Padding>)> {
    if k > 0 && n.is_multiple_of(k) {
        return Ok((ProductDistribution::uniform(n, k)?, None));
    }
    let pad = Padding::new(n, k)?;
    Ok((pad.uniform_product(k)?, Some(pad)))
}
