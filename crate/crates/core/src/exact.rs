//! Exact learning with membership and equivalence queries, and
//! distribution-independent PAC learning with equivalence queries simulated by
//! random examples.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::boolfn::{check_arity, Label, Point, TruthTable};
use crate::boost::{boost, BoostParams, StopReason};
use crate::distrib::ProductDistribution;
use crate::error::{param, Error, Result};
use crate::learner::{Amplifier, LearnerParams};
use crate::oracle::{EqAnswer, EqOracle, LabelOracle};

/// Union-bound slack in the simulated equivalence-query schedule.
pub const SCHEDULE_SLACK: f64 = 2.0;

/// Settings of the learner run before the query loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: u32,
    pub alpha: f64,
    /// Booster target.
    pub epsilon: f64,
    pub rounds_cap: Option<usize>,
}

impl PipelineConfig {
    pub fn new(k: u32, alpha: f64) -> Self {
        PipelineConfig { k, alpha, epsilon: 0.05, rounds_cap: None }
    }
}

/// Turns a membership oracle into an example oracle under a known product
/// distribution: each example is a sampled point labelled by a query.
pub struct SimulatedExamples<'a> {
    mq: &'a mut dyn LabelOracle,
    rho: ProductDistribution,
}

impl<'a> SimulatedExamples<'a> {
    pub fn new(mq: &'a mut dyn LabelOracle, rho: ProductDistribution) -> Result<Self> {
        if rho.arity() != mq.arity() {
            return Err(Error::ArityMismatch { expected: mq.arity(), got: rho.arity() });
        }
        Ok(SimulatedExamples { mq, rho })
    }
}

impl LabelOracle for SimulatedExamples<'_> {
    fn arity(&self) -> u32 {
        self.mq.arity()
    }

    fn mq(&mut self, z: Point, rng: &mut dyn RngCore) -> Label {
        self.mq.mq(z, rng)
    }

    fn ex(&mut self, rng: &mut dyn RngCore) -> (Point, Label) {
        let x = self.rho.sample(rng);
        (x, self.mq.mq(x, rng))
    }

    fn mq_count(&self) -> u64 {
        self.mq.mq_count()
    }
}

/// Boosted amplifier over the uniform `k`-product, reached only through `mq`.
fn learn_uniform(
    mq: &mut dyn LabelOracle,
    config: &PipelineConfig,
    rng: &mut dyn RngCore,
) -> Result<(TruthTable, StopReason)> {
    let n = mq.arity();
    if config.k < 2 || !n.is_multiple_of(config.k) {
        return Err(param(format!("k={} must be at least 2 and divide n={n}", config.k)));
    }
    let rho = ProductDistribution::uniform(n, config.k)?;
    let weak = Amplifier { rho: rho.clone(), params: LearnerParams::new(config.k).with_alpha(config.alpha) };
    let params = BoostParams { rounds_cap: config.rounds_cap, ..BoostParams::new(config.alpha, config.epsilon) };
    let mut view = SimulatedExamples::new(mq, rho)?;
    let out = boost(&weak, &mut view, &params, rng)?;
    Ok((out.table, out.stop))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactLearnTrace {
    pub eq_calls: u64,
    pub mq_calls: u64,
    /// Counterexamples in the order they were patched.
    pub patches: Vec<u32>,
    pub terminated: bool,
    pub learner_stop: Option<StopReason>,
}

/// Repeatedly asks `eq` and negates the hypothesis at each counterexample.
/// Every patch removes one disagreement, so this ends after at most
/// `hamming(h, target) + 1` calls.
pub fn patch_until_equivalent(h: &mut TruthTable, eq: &mut EqOracle) -> Result<(u64, Vec<u32>)> {
    let start = eq.calls();
    let mut patches = Vec::new();
    let limit = (1u64 << h.arity()) + 1;
    loop {
        if eq.calls() - start >= limit {
            return Err(Error::Invariant("equivalence oracle returned more counterexamples than points".into()));
        }
        match eq.eq(h)? {
            EqAnswer::Success => return Ok((eq.calls() - start, patches)),
            EqAnswer::Counterexample(p) => {
                h.toggle(p.index());
                patches.push(p.index());
            }
        }
    }
}

/// Learns the target once from membership queries, then fixes it with
/// equivalence queries until the oracle answers success.
pub fn exact_learn(
    mq: &mut dyn LabelOracle,
    eq: &mut EqOracle,
    config: &PipelineConfig,
    rng: &mut dyn RngCore,
) -> Result<(TruthTable, ExactLearnTrace)> {
    if eq.target().arity() != mq.arity() {
        return Err(Error::ArityMismatch { expected: mq.arity(), got: eq.target().arity() });
    }
    let (mut h, stop) = learn_uniform(mq, config, rng)?;
    let (eq_calls, patches) = patch_until_equivalent(&mut h, eq)?;
    let trace = ExactLearnTrace { eq_calls, mq_calls: mq.mq_count(), patches, terminated: true, learner_stop: Some(stop) };
    Ok((h, trace))
}

/// Examples drawn in simulated equivalence query `t` (zero-based):
/// `ceil((1/epsilon) ln((t+1) c / delta))` with `c` = [`SCHEDULE_SLACK`].
pub fn pac_sample_schedule(t: u64, epsilon: f64, delta: f64) -> u64 {
    if epsilon >= 1.0 {
        return 0;
    }
    (((t + 1) as f64 * SCHEDULE_SLACK / delta).ln() / epsilon).ceil() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacRound {
    pub round: u64,
    pub samples: u64,
    /// The counterexample found, if any.
    pub counterexample: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacTrace {
    pub rounds: Vec<PacRound>,
    pub mq_calls: u64,
    pub examples: u64,
    pub learner_stop: Option<StopReason>,
}

impl PacTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,samples,counterexample\n");
        for r in &self.rounds {
            let ce = r.counterexample.map_or(String::new(), |c| c.to_string());
            s.push_str(&format!("{},{},{}\n", r.round, r.samples, ce));
        }
        s
    }
}

/// PAC learning under an arbitrary example distribution with membership queries.
///
/// The learner runs on the uniform product through `mq`; each equivalence query
/// is then replaced by [`pac_sample_schedule`] fresh examples from `ex`. The
/// first disagreeing example is patched with its membership-query label; a round
/// without disagreements ends the run. With `epsilon >= 1` nothing is queried and
/// the constant `+1` table is returned.
pub fn pac_di_learn(
    mq: &mut dyn LabelOracle,
    ex: &mut dyn FnMut(&mut dyn RngCore) -> (Point, Label),
    epsilon: f64,
    delta: f64,
    config: &PipelineConfig,
    rng: &mut dyn RngCore,
) -> Result<(TruthTable, PacTrace)> {
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(param("need epsilon > 0 and delta in (0,1)"));
    }
    let n = mq.arity();
    let mut trace = PacTrace { rounds: Vec::new(), mq_calls: 0, examples: 0, learner_stop: None };
    if epsilon >= 1.0 {
        return Ok((TruthTable::constant(n, Label::Plus)?, trace));
    }
    let (mut h, stop) = learn_uniform(mq, config, rng)?;
    trace.learner_stop = Some(stop);
    let limit = (1u64 << n) + 1;
    for round in 0..limit {
        let samples = pac_sample_schedule(round, epsilon, delta);
        trace.examples += samples;
        let mut counterexample = None;
        for _ in 0..samples {
            let (x, y) = ex(rng);
            if counterexample.is_none() && h.get(x.index()) != y {
                counterexample = Some(x);
            }
        }
        trace.rounds.push(PacRound { round, samples, counterexample: counterexample.map(|p| p.index()) });
        match counterexample {
            None => {
                trace.mq_calls = mq.mq_count();
                return Ok((h, trace));
            }
            Some(x) => {
                let y = mq.mq(x, rng);
                h.set(x.index(), y);
            }
        }
    }
    Err(Error::Invariant("simulated equivalence queries did not converge".into()))
}

/// An explicit distribution over `{0,1}^n`, not necessarily a product.
#[derive(Debug, Clone)]
pub struct ExplicitDistribution {
    n: u32,
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl ExplicitDistribution {
    pub fn new(n: u32, weights: Vec<f64>) -> Result<Self> {
        check_arity(n)?;
        if weights.len() != 1usize << n {
            return Err(param(format!("need {} weights, got {}", 1u64 << n, weights.len())));
        }
        let index = WeightedIndex::new(&weights).map_err(|e| param(format!("weights: {e}")))?;
        let total: f64 = weights.iter().sum();
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(ExplicitDistribution { n, probs, index })
    }

    /// Equal mixture of a biased product distribution and the uniform
    /// distribution on a random subcube of dimension `n/2`.
    pub fn planted<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<Self> {
        check_arity(n)?;
        let bias: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
        let free = n / 2;
        let fixed_mask: u32 = {
            let vars = rand::seq::index::sample(rng, n as usize, (n - free) as usize);
            vars.iter().fold(0, |m, v| m | (1 << v))
        };
        let fixed_value = rng.gen::<u32>() & fixed_mask;
        let cube = 1.0 / 2f64.powi(free as i32);
        let weights = (0..1u32 << n)
            .map(|x| {
                let product: f64 =
                    (0..n).map(|i| if (x >> i) & 1 == 1 { bias[i as usize] } else { 1.0 - bias[i as usize] }).product();
                let sub = if x & fixed_mask == fixed_value { cube } else { 0.0 };
                0.5 * product + 0.5 * sub
            })
            .collect();
        ExplicitDistribution::new(n, weights)
    }

    pub fn arity(&self) -> u32 {
        self.n
    }

    pub fn prob(&self, idx: u32) -> f64 {
        self.probs[idx as usize]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(self.n, self.index.sample(rng) as u32).expect("index below 2^n")
    }

    /// `Pr_{x ~ D}[h(x) != f(x)]`, exactly.
    pub fn error(&self, h: &TruthTable, f: &TruthTable) -> Result<f64> {
        for t in [h, f] {
            if t.arity() != self.n {
                return Err(Error::ArityMismatch { expected: self.n, got: t.arity() });
            }
        }
        Ok((0..1u32 << self.n).filter(|&i| h.get(i) != f.get(i)).fold(0.0, |acc, i| acc + self.prob(i)))
    }
}
