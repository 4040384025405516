//! Truth-table compression: learn the table through simulated membership
//! queries, then hard-wire every remaining mistake.

use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{Label, TruthTable};
use crate::boost::{boost_exact, BoostParams, Margin, StopReason};
use crate::distrib::ProductDistribution;
use crate::error::{param, Error, Result};
use crate::learner::{Amplifier, Hypothesis, LearnerParams, LookupHypothesis};
use crate::oracle::{Concept, LabelOracle, MqOracle};

/// `max(2^{-ceil(n^0.99)}, 2^{-n})`.
pub fn default_epsilon(n: u32) -> f64 {
    let e = f64::from(n).powf(0.99).ceil().min(f64::from(n));
    2f64.powf(-e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressConfig {
    /// Parties of the uniform product distribution the learner runs on.
    pub k: u32,
    /// Advantage handed to the amplifier and the booster.
    pub alpha: f64,
    /// Booster target; [`default_epsilon`] when absent.
    pub epsilon: Option<f64>,
    pub rounds_cap: Option<usize>,
}

impl CompressConfig {
    pub fn new(k: u32, alpha: f64) -> Self {
        CompressConfig { k, alpha, epsilon: None, rounds_cap: None }
    }

    pub fn epsilon(&self, n: u32) -> f64 {
        self.epsilon.unwrap_or_else(|| default_epsilon(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub idx: u32,
    pub label: Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Member {
    pub step: f64,
    pub hypothesis: LookupHypothesis,
}

/// `sign(sum_t step_t h_t)` with a sorted patch list overriding it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct CompressedCircuit {
    n: u32,
    members: Vec<Member>,
    patches: Vec<Patch>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    n: u32,
    members: Vec<Member>,
    patches: Vec<Patch>,
}

impl From<CompressedCircuit> for CircuitRepr {
    fn from(c: CompressedCircuit) -> Self {
        CircuitRepr { n: c.n, members: c.members, patches: c.patches }
    }
}

impl TryFrom<CircuitRepr> for CompressedCircuit {
    type Error = Error;

    fn try_from(r: CircuitRepr) -> Result<Self> {
        CompressedCircuit::new(r.n, r.members, r.patches)
    }
}

impl CompressedCircuit {
    pub fn new(n: u32, members: Vec<Member>, patches: Vec<Patch>) -> Result<Self> {
        crate::boolfn::check_arity(n)?;
        if let Some(m) = members.iter().find(|m| m.hypothesis.arity() != n) {
            return Err(Error::ArityMismatch { expected: n, got: m.hypothesis.arity() });
        }
        if patches.windows(2).any(|w| w[0].idx >= w[1].idx) {
            return Err(Error::Malformed("patches must be sorted by strictly increasing index".into()));
        }
        if patches.last().is_some_and(|p| u64::from(p.idx) >> n != 0) {
            return Err(Error::Malformed("patch index out of range".into()));
        }
        Ok(CompressedCircuit { n, members, patches })
    }

    pub fn arity(&self) -> u32 {
        self.n
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// The ensemble value before patching.
    pub fn base_eval(&self, idx: u32) -> Label {
        Label::sign_of(self.members.iter().map(|m| m.step * m.hypothesis.eval_index(idx).as_f64()).sum())
    }

    pub fn eval(&self, idx: u32) -> Label {
        match self.patches.binary_search_by_key(&idx, |p| p.idx) {
            Ok(i) => self.patches[i].label,
            Err(_) => self.base_eval(idx),
        }
    }

    pub fn materialize(&self) -> Result<TruthTable> {
        let labels: Vec<Label> = (0..1u32 << self.n).into_par_iter().map(|i| self.eval(i)).collect();
        TruthTable::from_fn(self.n, |i| labels[i as usize])
    }

    pub fn size_report(&self) -> SizeReport {
        let entries = self.members.iter().map(|m| m.hypothesis.stored_entries() as u64).sum::<u64>();
        let patches = self.patches.len() as u64;
        let total = entries + patches;
        let ratio = total as f64 / 2f64.powi(self.n as i32);
        SizeReport { entries, patches, total, ratio, incompressible: ratio >= 0.5 }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        CompressedCircuit::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Size of a compressed circuit, in stored labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    /// Table entries stored by the ensemble.
    pub entries: u64,
    pub patches: u64,
    pub total: u64,
    /// `total / 2^n`.
    pub ratio: f64,
    /// `ratio >= 1/2`: no strict compression.
    pub incompressible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressStats {
    pub epsilon: f64,
    pub rounds: usize,
    pub stop: StopReason,
    pub mq_queries: u64,
    pub distinct_queries: u64,
    /// Disagreements between the ensemble and the table, i.e. the patch count.
    pub mistakes: u64,
    pub warnings: Vec<String>,
}

/// Patches `base` wherever it differs from `table`; the scan runs in parallel
/// and the patch list comes out sorted.
pub fn patch_against(table: &TruthTable, base: impl Fn(u32) -> Label + Sync) -> Vec<Patch> {
    (0..1u32 << table.arity())
        .into_par_iter()
        .filter_map(|i| {
            let want = table.get(i);
            (base(i) != want).then_some(Patch { idx: i, label: want })
        })
        .collect()
}

/// Learns `table` over the uniform `k`-product from simulated membership
/// queries, boosts to `epsilon`, and patches the remaining mistakes.
///
/// The result equals `table` on every point; only its size is random.
pub fn compress(
    table: &TruthTable,
    config: &CompressConfig,
    rng: &mut dyn RngCore,
) -> Result<(CompressedCircuit, CompressStats)> {
    let n = table.arity();
    if config.k < 2 || !n.is_multiple_of(config.k) {
        return Err(param(format!("k={} must be at least 2 and divide n={n}", config.k)));
    }
    let rho = ProductDistribution::uniform(n, config.k)?;
    let concept = Concept::deterministic(table.clone(), rho.clone())?;
    let epsilon = config.epsilon(n);
    let weak = Amplifier { rho, params: LearnerParams::new(config.k).with_alpha(config.alpha) };
    let params = BoostParams { rounds_cap: config.rounds_cap, ..BoostParams::new(config.alpha, epsilon) };
    let mut oracle = MqOracle::new(&concept);
    let out = boost_exact(&weak, &mut oracle, &concept, &params, rng)?;
    let mq_queries = oracle.mq_count();
    let distinct_queries = oracle.distinct_queries().map_or(mq_queries, |d| d as u64);
    let members: Vec<Member> =
        out.members.into_iter().map(|(step, hypothesis)| Member { step, hypothesis }).collect();
    let patches = patch_against(table, |i| out.table.get(i));
    let mistakes = patches.len() as u64;
    let circuit = CompressedCircuit::new(n, members, patches)?;
    let stats = CompressStats {
        epsilon,
        rounds: out.trace.len(),
        stop: out.stop,
        mq_queries,
        distinct_queries,
        mistakes,
        warnings: out.warnings,
    };
    Ok((circuit, stats))
}

/// Exhaustive check that `c` computes `table`.
pub fn verify_exact(c: &CompressedCircuit, table: &TruthTable) -> Result<bool> {
    if c.arity() != table.arity() {
        return Err(Error::ArityMismatch { expected: table.arity(), got: c.arity() });
    }
    Ok((0..1u32 << c.arity()).into_par_iter().all(|i| c.eval(i) == table.get(i)))
}

/// The sign of the ensemble in a [`Margin`], for callers that built one directly.
pub fn from_margin(n: u32, margin: Margin<LookupHypothesis>, table: &TruthTable) -> Result<CompressedCircuit> {
    let members: Vec<Member> =
        margin.into_members().into_iter().map(|(step, hypothesis)| Member { step, hypothesis }).collect();
    let base = CompressedCircuit::new(n, members, Vec::new())?;
    let patches = patch_against(table, |i| base.base_eval(i));
    CompressedCircuit::new(n, base.members, patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{make_named, NamedFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_epsilon_values() {
        assert_eq!(default_epsilon(1), 0.5);
        assert_eq!(default_epsilon(12), 2f64.powi(-12));
        assert_eq!(default_epsilon(100), 2f64.powi(-96));
    }

    #[test]
    fn patch_only_circuit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TruthTable::random(6, &mut rng).unwrap();
        let c = from_margin(6, Margin::new(), &t).unwrap();
        assert!(verify_exact(&c, &t).unwrap());
        let r = c.size_report();
        assert_eq!(r.entries, 0);
        assert_eq!(r.patches, t.count_minus());
        assert_eq!(r.total, r.patches);
    }

    #[test]
    fn xor_compresses_exactly() {
        let t = make_named(NamedFunction::Xor, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c, stats) = compress(&t, &CompressConfig::new(2, 0.25), &mut rng).unwrap();
        assert!(verify_exact(&c, &t).unwrap());
        assert_eq!(stats.mistakes, c.patches().len() as u64);
        let back = CompressedCircuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.materialize().unwrap(), t);
    }

    #[test]
    fn unsorted_patches_are_rejected() {
        let p = vec![Patch { idx: 3, label: Label::Minus }, Patch { idx: 1, label: Label::Plus }];
        assert!(CompressedCircuit::new(4, Vec::new(), p).is_err());
        assert!(CompressedCircuit::new(4, Vec::new(), vec![Patch { idx: 16, label: Label::Plus }]).is_err());
    }
}
