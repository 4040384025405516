//! The weak membership-query learner over `k`-product distributions, its
//! trial-and-error amplifier, and Monte Carlo advantage measurement.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{Label, Point, TruthTable};
use crate::design::{column_bit, dedup_enumerate, History, SeedTable, MAX_PARTIES};
use crate::distrib::{Permutation, ProductDistribution};
use crate::error::{param, Error, Result};
use crate::norm::{chernoff_halfwidth, DEFAULT_DELTA};
use crate::oracle::{Concept, LabelOracle, MqOracle};

/// Anything that labels every point of `{0,1}^n`.
pub trait Hypothesis {
    fn arity(&self) -> u32;

    fn eval_index(&self, idx: u32) -> Label;

    /// Table entries the hypothesis stores.
    fn stored_entries(&self) -> usize;

    fn materialize(&self) -> TruthTable {
        TruthTable::from_fn(self.arity(), |i| self.eval_index(i)).expect("hypothesis arity is valid")
    }
}

impl Hypothesis for TruthTable {
    fn arity(&self) -> u32 {
        TruthTable::arity(self)
    }

    fn eval_index(&self, idx: u32) -> Label {
        self.get(idx)
    }

    fn stored_entries(&self) -> usize {
        self.len()
    }

    fn materialize(&self) -> TruthTable {
        self.clone()
    }
}

/// A learner returning a hypothesis from oracle access alone.
pub trait WeakLearner {
    type Output: Hypothesis + Clone + Send + Sync;

    fn learn(&self, oracle: &mut dyn LabelOracle, rng: &mut dyn RngCore) -> Result<Self::Output>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    /// Number of parties (blocks of the product distribution).
    pub k: u32,
    /// Assumed optimal correlation of the touchstone class.
    pub gamma: f64,
    /// Protocol cost of the touchstone class.
    pub c: u32,
    /// Target advantage; when absent the worst-case value `gamma * 2^{-c 2^k - k}` is used.
    pub alpha: Option<f64>,
    pub candidate_const: f64,
    pub validation_const: f64,
}

impl LearnerParams {
    pub fn new(k: u32) -> Self {
        LearnerParams { k, gamma: 1.0, c: 1, alpha: None, candidate_const: 16.0, validation_const: 16.0 }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    /// `gamma * 2^{-c 2^k - k}`.
    pub fn theory_alpha(&self) -> f64 {
        let e = f64::from(self.c) * 2f64.powi(self.k as i32) + f64::from(self.k);
        self.gamma * 2f64.powf(-e)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| self.theory_alpha())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_PARTIES {
            return Err(param(format!("k={} outside 1..={MAX_PARTIES}", self.k)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(param(format!("gamma={} outside (0,1]", self.gamma)));
        }
        let a = self.alpha();
        if !(a > 0.0 && a <= self.gamma) {
            return Err(param(format!("alpha={a} outside (0, gamma]")));
        }
        if !(self.candidate_const > 0.0 && self.validation_const > 0.0) {
            return Err(param("amplifier constants must be positive"));
        }
        Ok(())
    }

    /// `ceil(c1 / alpha^2)`.
    pub fn candidates(&self) -> usize {
        (self.candidate_const / self.alpha().powi(2)).ceil() as usize
    }

    /// `ceil(c2 / alpha^2)`.
    pub fn validation(&self) -> usize {
        (self.validation_const / self.alpha().powi(2)).ceil() as usize
    }
}

/// Query bound of a single weak-learner run: `2k * 2^{n - n/k}`.
pub fn query_bound(n: u32, k: u32) -> u64 {
    (2 * u64::from(k)) << (n - n / k)
}

/// Removes block `j` from a layout index.
#[inline]
fn drop_block(y: u32, j: u32, k: u32, len: u32) -> u32 {
    let low_bits = (k - 1 - j) * len;
    let low = y & ((1u32 << low_bits) - 1);
    let high = y >> (low_bits + len);
    (high << low_bits) | low
}

#[inline]
fn insert_block(key: u32, j: u32, k: u32, len: u32, value: u32) -> u32 {
    let low_bits = (k - 1 - j) * len;
    let low = key & ((1u32 << low_bits) - 1);
    let high = key >> low_bits;
    (((high << len) | value) << low_bits) | low
}

/// The lookup-table hypothesis built by one weak-learner run.
///
/// `tables[j]` holds the labels of the block restriction "block `j` equals
/// `slices[j]`" for every column with `b_j = 0`, indexed by the remaining blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRepr", into = "HypothesisRepr")]
pub struct LookupHypothesis {
    k: u32,
    block_len: u32,
    b: u32,
    r: u64,
    slices: Vec<u32>,
    sigma: Permutation,
    sigma_inv: Permutation,
    tables: Vec<Option<Vec<Label>>>,
}

impl LookupHypothesis {
    /// Builds the hypothesis for a filled seed table, reading labels through `label_of`.
    pub fn from_seed(
        table: &SeedTable,
        r: u64,
        sigma: Permutation,
        mut label_of: impl FnMut(u32) -> Result<Label>,
    ) -> Result<Self> {
        let (k, len) = (table.k(), table.block_len());
        if sigma.len() != k * len {
            return Err(Error::ArityMismatch { expected: k * len, got: sigma.len() });
        }
        let sigma_inv = sigma.inverse();
        let b = table.b();
        let slices: Vec<u32> = (0..k).map(|i| table.entry(column_bit(b, k, i), i).expect("filled")).collect();
        let rest = (k - 1) * len;
        let mut tables = vec![None; k as usize];
        for res in table.restrictions() {
            let col = (0..1u32 << rest)
                .map(|key| label_of(sigma.apply_index(insert_block(key, res.block, k, len, res.value))))
                .collect::<Result<Vec<Label>>>()?;
            tables[res.block as usize] = Some(col);
        }
        let r = if k == 6 { r } else { r & ((1u64 << (1u32 << k)) - 1) };
        Ok(LookupHypothesis { k, block_len: len, b, r, slices, sigma, sigma_inv, tables })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn b_bar(&self) -> u32 {
        !self.b & ((1u32 << self.k) - 1)
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    /// `r_a` as a sign.
    #[inline]
    pub fn r(&self, a: u32) -> Label {
        Label::from_bit((self.r >> a) & 1 == 1)
    }

    /// `T` at a layout point inside the restriction of column `j`.
    #[inline]
    fn lookup(&self, j: u32, y: u32) -> Label {
        let t = self.tables[j as usize].as_ref().expect("column with b_j = 0 has a table");
        t[drop_block(y, j, self.k, self.block_len) as usize]
    }

    /// `B|_a` for the table completed with the blocks of `y` in rows `b_bar`.
    #[inline]
    fn design_point(&self, a: u32, y: u32) -> u32 {
        let (k, len) = (self.k, self.block_len);
        let mask = (1u32 << len) - 1;
        (0..k).fold(0u32, |acc, i| {
            let cell = if column_bit(a, k, i) == column_bit(self.b, k, i) {
                self.slices[i as usize]
            } else {
                (y >> ((k - 1 - i) * len)) & mask
            };
            (acc << len) | cell
        })
    }

    /// `v = prod_{a < b_bar} T[B|_a]`.
    fn v(&self, y: u32) -> Label {
        let k = self.k;
        let bbar = self.b_bar();
        let mut v = Label::Plus;
        for a in 0..bbar {
            // First column where a and b_bar differ; there a_j = 0 = b_j.
            let j = (0..k).find(|&i| column_bit(a, k, i) != column_bit(bbar, k, i)).expect("a < b_bar");
            v *= self.lookup(j, self.design_point(a, y));
        }
        v
    }

    /// `v * v' * r_{b_bar}` with `v' = prod_{a >= b_bar} r_a`, evaluated as written.
    pub fn eval_layout(&self, y: u32) -> Label {
        let bbar = self.b_bar();
        let v_prime = (bbar..1u32 << self.k).fold(Label::Plus, |acc, a| acc * self.r(a));
        self.v(y) * v_prime * self.r(bbar)
    }

    /// `v * prod_{a > b_bar} r_a`, the same value with `r_{b_bar}` cancelled.
    pub fn eval_layout_cancelled(&self, y: u32) -> Label {
        let bbar = self.b_bar();
        let tail = (bbar + 1..1u32 << self.k).fold(Label::Plus, |acc, a| acc * self.r(a));
        self.v(y) * tail
    }

    pub fn eval(&self, z: Point) -> Result<Label> {
        if z.arity() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: z.arity() });
        }
        Ok(self.eval_index(z.index()))
    }

    pub fn layout_of(&self, idx: u32) -> u32 {
        self.sigma_inv.apply_index(idx)
    }
}

impl Hypothesis for LookupHypothesis {
    fn arity(&self) -> u32 {
        self.k * self.block_len
    }

    #[inline]
    fn eval_index(&self, idx: u32) -> Label {
        self.eval_layout(self.sigma_inv.apply_index(idx))
    }

    fn stored_entries(&self) -> usize {
        self.tables.iter().flatten().map(Vec::len).sum()
    }
}

/// Serialized form: tables as strings of `0` (label `+1`) and `1` (label `-1`).
#[derive(Serialize, Deserialize)]
struct HypothesisRepr {
    k: u32,
    block_len: u32,
    b: u32,
    r: u64,
    slices: Vec<u32>,
    sigma: Permutation,
    tables: Vec<Option<String>>,
}

impl From<LookupHypothesis> for HypothesisRepr {
    fn from(h: LookupHypothesis) -> Self {
        let tables = h
            .tables
            .iter()
            .map(|t| t.as_ref().map(|t| t.iter().map(|l| if l.bit() { '1' } else { '0' }).collect()))
            .collect();
        HypothesisRepr { k: h.k, block_len: h.block_len, b: h.b, r: h.r, slices: h.slices, sigma: h.sigma, tables }
    }
}

impl TryFrom<HypothesisRepr> for LookupHypothesis {
    type Error = Error;

    fn try_from(h: HypothesisRepr) -> Result<Self> {
        let bad = |m: &str| Error::Malformed(format!("lookup hypothesis: {m}"));
        if h.k == 0 || h.k > MAX_PARTIES || h.block_len == 0 || h.sigma.len() != h.k * h.block_len {
            return Err(bad("inconsistent shape"));
        }
        if h.b >> h.k != 0 || h.slices.len() != h.k as usize || h.tables.len() != h.k as usize {
            return Err(bad("guess string, slices and tables must cover k columns"));
        }
        if h.slices.iter().any(|&s| s >> h.block_len != 0) {
            return Err(bad("slice wider than a block"));
        }
        let rest = 1usize << ((h.k - 1) * h.block_len);
        let mut tables = Vec::with_capacity(h.tables.len());
        for (j, t) in h.tables.into_iter().enumerate() {
            let needed = column_bit(h.b, h.k, j as u32) == 0;
            match (t, needed) {
                (Some(s), true) if s.len() == rest => {
                    let col = s
                        .bytes()
                        .map(|c| match c {
                            b'0' => Ok(Label::Plus),
                            b'1' => Ok(Label::Minus),
                            _ => Err(bad("table characters must be 0 or 1")),
                        })
                        .collect::<Result<Vec<Label>>>()?;
                    tables.push(Some(col));
                }
                (None, false) => tables.push(None),
                _ => return Err(bad("table presence or length does not match the guess string")),
            }
        }
        let sigma_inv = h.sigma.inverse();
        Ok(LookupHypothesis {
            k: h.k,
            block_len: h.block_len,
            b: h.b,
            r: h.r,
            slices: h.slices,
            sigma: h.sigma,
            sigma_inv,
            tables,
        })
    }
}

/// Labels already obtained by membership queries plus the restriction log that
/// keeps later runs from repeating them.
#[derive(Debug, Clone)]
pub struct QueryMemory {
    pub history: History,
    pub labels: HashMap<u32, Label>,
}

impl QueryMemory {
    pub fn new(k: u32, block_len: u32) -> Self {
        QueryMemory { history: History::new(k, block_len), labels: HashMap::new() }
    }

    pub fn for_distribution(rho: &ProductDistribution) -> Self {
        QueryMemory::new(rho.block_count(), rho.block_len())
    }
}

fn check_setup(o: &dyn LabelOracle, rho: &ProductDistribution, k: u32) -> Result<()> {
    if o.arity() != rho.arity() {
        return Err(Error::ArityMismatch { expected: rho.arity(), got: o.arity() });
    }
    if rho.block_count() != k {
        return Err(param(format!("distribution has {} blocks, the learner expects k={k}", rho.block_count())));
    }
    if k > MAX_PARTIES {
        return Err(param(format!("k={k} exceeds {MAX_PARTIES}")));
    }
    Ok(())
}

/// One run of the weak learner.
///
/// Draws two samples of `rho`, splits their layouts into `2k` slices, picks the
/// guess string `b` and the signs `r`, fills the seed table, and queries every
/// point covered by `B|_a` for `a < b_bar` that `memory` has not seen.
pub fn weak_learn_once(
    o: &mut dyn LabelOracle,
    rho: &ProductDistribution,
    k: u32,
    memory: &mut QueryMemory,
    rng: &mut dyn RngCore,
) -> Result<LookupHypothesis> {
    check_setup(o, rho, k)?;
    let len = rho.block_len();
    let mask = (1u32 << len) - 1;
    let inv = rho.sigma_inverse();
    let x0 = inv.apply_index(rho.sample_index(rng));
    let x1 = inv.apply_index(rho.sample_index(rng));
    let b = rng.gen_range(0..1u32 << k);
    let r: u64 = rng.gen();
    let slices: Vec<u32> = (0..k)
        .map(|i| {
            let x = if column_bit(b, k, i) == 0 { x0 } else { x1 };
            (x >> ((k - 1 - i) * len)) & mask
        })
        .collect();
    let table = SeedTable::new(k, len, b, &slices)?;
    let QueryMemory { history, labels } = memory;
    dedup_enumerate(&table.restrictions(), history, rho.sigma(), |z, _| {
        let y = o.mq(z, rng);
        labels.insert(z.index(), y);
    })?;
    LookupHypothesis::from_seed(&table, r, rho.sigma().clone(), |z| {
        labels.get(&z).copied().ok_or_else(|| Error::Invariant(format!("no label stored for point {z}")))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Amplified {
    #[serde(skip)]
    pub hypothesis: LookupHypothesis,
    pub index: usize,
    /// Fraction of validation examples the chosen candidate labels correctly.
    pub score: f64,
    pub candidates: usize,
    pub validation: usize,
    pub queries: u64,
}

/// Draws `params.candidates()` hypotheses with a shared query memory, scores them
/// on `params.validation()` fresh examples, and returns the best one (lowest
/// index on ties).
pub fn amplify(
    o: &mut dyn LabelOracle,
    rho: &ProductDistribution,
    params: &LearnerParams,
    rng: &mut dyn RngCore,
) -> Result<Amplified> {
    params.validate()?;
    check_setup(o, rho, params.k)?;
    let start = o.mq_count();
    let mut memory = QueryMemory::for_distribution(rho);
    let count = params.candidates();
    let mut hyps = Vec::with_capacity(count);
    for _ in 0..count {
        hyps.push(weak_learn_once(o, rho, params.k, &mut memory, rng)?);
    }
    let v = params.validation();
    let examples: Vec<(u32, Label)> = (0..v)
        .map(|_| {
            let (x, y) = o.ex(rng);
            (x.index(), y)
        })
        .collect();
    let scores: Vec<usize> = hyps
        .par_iter()
        .map(|h| examples.iter().filter(|&&(x, y)| h.eval_index(x) == y).count())
        .collect();
    let (index, &best) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one candidate");
    Ok(Amplified {
        hypothesis: hyps.swap_remove(index),
        index,
        score: best as f64 / v as f64,
        candidates: count,
        validation: v,
        queries: o.mq_count() - start,
    })
}

/// The amplifier as a [`WeakLearner`] over a fixed product distribution.
#[derive(Debug, Clone)]
pub struct Amplifier {
    pub rho: ProductDistribution,
    pub params: LearnerParams,
}

impl WeakLearner for Amplifier {
    type Output = LookupHypothesis;

    fn learn(&self, oracle: &mut dyn LabelOracle, rng: &mut dyn RngCore) -> Result<LookupHypothesis> {
        Ok(amplify(oracle, &self.rho, &self.params, rng)?.hypothesis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    /// Fraction of draws with `h(z) = y`.
    pub agreement: f64,
    pub halfwidth: f64,
    pub draws: u64,
    pub runs: u64,
    pub total_queries: u64,
    pub max_queries_per_run: u64,
    pub max_distinct_per_run: u64,
    pub query_bound: u64,
}

/// Independent generator for worker `stream` of a run seeded with `seed`.
pub fn split_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo estimate of `Pr[h(z) = y]` over fresh weak-learner runs and
/// examples `(z, y) ~ D`, evaluating each hypothesis on `points_per_run` examples.
///
/// Work is split over a fixed number of seeded streams, so the result depends
/// only on `seed`.
pub fn measure_advantage(
    concept: &Concept,
    k: u32,
    runs: u64,
    points_per_run: u64,
    seed: u64,
) -> Result<AdvantageReport> {
    if runs == 0 || points_per_run == 0 {
        return Err(param("runs and points per run must be positive"));
    }
    let rho = concept.marginal();
    let n = rho.arity();
    if rho.block_count() != k {
        return Err(param(format!("distribution has {} blocks, expected k={k}", rho.block_count())));
    }
    const STREAMS: u64 = 64;
    let parts: Vec<Result<(u64, u64, u64, u64)>> = (0..STREAMS)
        .into_par_iter()
        .map(|s| {
            let my_runs = runs / STREAMS + u64::from(s < runs % STREAMS);
            let mut rng = split_rng(seed, s + 1);
            let mut o = MqOracle::without_cache(concept);
            let (mut agree, mut max_q, mut max_d) = (0u64, 0u64, 0u64);
            for _ in 0..my_runs {
                let before = o.mq_count();
                let mut memory = QueryMemory::for_distribution(rho);
                let h = weak_learn_once(&mut o, rho, k, &mut memory, &mut rng)?;
                max_q = max_q.max(o.mq_count() - before);
                max_d = max_d.max(memory.labels.len() as u64);
                for _ in 0..points_per_run {
                    let (z, y) = o.ex(&mut rng);
                    if h.eval_index(z.index()) == y {
                        agree += 1;
                    }
                }
            }
            Ok((agree, o.mq_count(), max_q, max_d))
        })
        .collect();
    let (mut agree, mut total, mut max_q, mut max_d) = (0u64, 0u64, 0u64, 0u64);
    for p in parts {
        let (a, t, q, d) = p?;
        agree += a;
        total += t;
        max_q = max_q.max(q);
        max_d = max_d.max(d);
    }
    let draws = runs * points_per_run;
    Ok(AdvantageReport {
        agreement: agree as f64 / draws as f64,
        halfwidth: chernoff_halfwidth(draws, DEFAULT_DELTA)?,
        draws,
        runs,
        total_queries: total,
        max_queries_per_run: max_q,
        max_distinct_per_run: max_d,
        query_bound: query_bound(n, k),
    })
}
