//! Concepts (distributions over labelled examples) and the query oracles that
//! learners use to access them.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::{make_named, Label, NamedFunction, Point, TruthTable};
use crate::distrib::{DistributionConfig, ProductDistribution};
use crate::error::{param, Error, Result};

/// How a concept labels a point.
#[derive(Debug, Clone)]
pub enum ConceptKind {
    Deterministic(TruthTable),
    /// `p[idx]` is the probability that the label at `idx` is `+1`.
    Probabilistic(Vec<f64>),
}

/// A distribution over `{0,1}^n x {-1,+1}`: marginal `rho` plus a conditional label law.
#[derive(Debug, Clone)]
pub struct Concept {
    n: u32,
    kind: ConceptKind,
    marginal: ProductDistribution,
}

impl Concept {
    pub fn deterministic(f: TruthTable, marginal: ProductDistribution) -> Result<Self> {
        if f.arity() != marginal.arity() {
            return Err(Error::ArityMismatch { expected: marginal.arity(), got: f.arity() });
        }
        Ok(Concept { n: f.arity(), kind: ConceptKind::Deterministic(f), marginal })
    }

    pub fn probabilistic(p: Vec<f64>, marginal: ProductDistribution) -> Result<Self> {
        let n = marginal.arity();
        if p.len() != 1usize << n {
            return Err(param(format!("expected {} probabilities, found {}", 1usize << n, p.len())));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(param(format!("label probability {bad} outside [0,1]")));
        }
        Ok(Concept { n, kind: ConceptKind::Probabilistic(p), marginal })
    }

    /// `f` with every label independently flipped with probability `eta`.
    pub fn noisy(f: &TruthTable, eta: f64, marginal: ProductDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(param(format!("flip rate {eta} outside [0,1]")));
        }
        let p = (0..f.len() as u32).map(|i| if f.get(i) == Label::Plus { 1.0 - eta } else { eta }).collect();
        Concept::probabilistic(p, marginal)
    }

    pub fn arity(&self) -> u32 {
        self.n
    }

    pub fn kind(&self) -> &ConceptKind {
        &self.kind
    }

    pub fn marginal(&self) -> &ProductDistribution {
        &self.marginal
    }

    pub fn table(&self) -> Option<&TruthTable> {
        match &self.kind {
            ConceptKind::Deterministic(t) => Some(t),
            ConceptKind::Probabilistic(_) => None,
        }
    }

    /// `Pr[y = +1 | x = idx]`.
    #[inline]
    pub fn prob_plus(&self, idx: u32) -> f64 {
        match &self.kind {
            ConceptKind::Deterministic(t) => {
                if t.get(idx) == Label::Plus {
                    1.0
                } else {
                    0.0
                }
            }
            ConceptKind::Probabilistic(p) => p[idx as usize],
        }
    }

    /// `E[y | x = idx]`.
    #[inline]
    pub fn bias(&self, idx: u32) -> f64 {
        2.0 * self.prob_plus(idx) - 1.0
    }

    pub fn draw_label<R: Rng + ?Sized>(&self, idx: u32, rng: &mut R) -> Label {
        match &self.kind {
            ConceptKind::Deterministic(t) => t.get(idx),
            ConceptKind::Probabilistic(p) => Label::from_bit(!rng.gen_bool(p[idx as usize])),
        }
    }

    /// Exact `E_{(x,y) ~ D}[h(x) y]`.
    pub fn correlation_with(&self, h: &TruthTable) -> Result<f64> {
        if h.arity() != self.n {
            return Err(Error::ArityMismatch { expected: self.n, got: h.arity() });
        }
        Ok((0..1u32 << self.n)
            .map(|i| {
                let m = self.marginal.mass_index(i);
                if m == 0.0 {
                    0.0
                } else {
                    m * h.get(i).as_f64() * self.bias(i)
                }
            })
            .sum())
    }
}

/// Access to a concept through labelled queries.
pub trait LabelOracle {
    fn arity(&self) -> u32;

    /// Membership query at `z`.
    fn mq(&mut self, z: Point, rng: &mut dyn RngCore) -> Label;

    /// A random example `(x, y) ~ D`.
    fn ex(&mut self, rng: &mut dyn RngCore) -> (Point, Label);

    /// Number of membership queries issued so far.
    fn mq_count(&self) -> u64;
}

/// Membership/example oracle for a [`Concept`] with query accounting.
///
/// With caching on (the default) the first answer at each point is replayed on
/// every later query of that point. Random examples always draw a fresh label.
#[derive(Debug)]
pub struct MqOracle<'c> {
    concept: &'c Concept,
    count: u64,
    ex_count: u64,
    cache: Option<HashMap<u32, Label>>,
    log: Option<Vec<u32>>,
}

impl<'c> MqOracle<'c> {
    pub fn new(concept: &'c Concept) -> Self {
        MqOracle { concept, count: 0, ex_count: 0, cache: Some(HashMap::new()), log: None }
    }

    pub fn without_cache(concept: &'c Concept) -> Self {
        MqOracle { cache: None, ..MqOracle::new(concept) }
    }

    /// Records every queried index in order.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn concept(&self) -> &'c Concept {
        self.concept
    }

    pub fn ex_count(&self) -> u64 {
        self.ex_count
    }

    pub fn log(&self) -> Option<&[u32]> {
        self.log.as_deref()
    }

    /// Distinct points queried so far (requires caching or logging).
    pub fn distinct_queries(&self) -> Option<usize> {
        if let Some(c) = &self.cache {
            return Some(c.len());
        }
        self.log.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }

    pub fn reset_counters(&mut self) {
        self.count = 0;
        self.ex_count = 0;
        if let Some(l) = &mut self.log {
            l.clear();
        }
    }
}

impl LabelOracle for MqOracle<'_> {
    fn arity(&self) -> u32 {
        self.concept.n
    }

    fn mq(&mut self, z: Point, rng: &mut dyn RngCore) -> Label {
        debug_assert_eq!(z.arity(), self.concept.n);
        self.count += 1;
        let idx = z.index();
        if let Some(l) = &mut self.log {
            l.push(idx);
        }
        match &mut self.cache {
            Some(cache) => *cache.entry(idx).or_insert_with(|| self.concept.draw_label(idx, rng)),
            None => self.concept.draw_label(idx, rng),
        }
    }

    fn ex(&mut self, rng: &mut dyn RngCore) -> (Point, Label) {
        self.ex_count += 1;
        let x = self.concept.marginal.sample(rng);
        let y = self.concept.draw_label(x.index(), rng);
        (x, y)
    }

    fn mq_count(&self) -> u64 {
        self.count
    }
}

/// Which disagreement an equivalence oracle reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterexamplePolicy {
    LowestIndex,
    /// Uniform over the disagreements, from a dedicated seeded generator.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqAnswer {
    Success,
    Counterexample(Point),
}

/// Equivalence oracle for a deterministic target.
#[derive(Debug)]
pub struct EqOracle {
    target: TruthTable,
    policy: CounterexamplePolicy,
    rng: ChaCha8Rng,
    calls: u64,
}

impl EqOracle {
    pub fn new(target: TruthTable, policy: CounterexamplePolicy) -> Self {
        let seed = match policy {
            CounterexamplePolicy::Random { seed } => seed,
            CounterexamplePolicy::LowestIndex => 0,
        };
        EqOracle { target, policy, rng: ChaCha8Rng::seed_from_u64(seed), calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn target(&self) -> &TruthTable {
        &self.target
    }

    pub fn eq(&mut self, h: &TruthTable) -> Result<EqAnswer> {
        self.calls += 1;
        let n = self.target.arity();
        let answer = match self.policy {
            CounterexamplePolicy::LowestIndex => {
                let diff = h.disagreements(&self.target)?;
                diff.first().map(|&i| Point::new_unchecked(n, i))
            }
            CounterexamplePolicy::Random { .. } => {
                let diff = h.disagreements(&self.target)?;
                diff.choose(&mut self.rng).map(|&i| Point::new_unchecked(n, i))
            }
        };
        Ok(answer.map_or(EqAnswer::Success, EqAnswer::Counterexample))
    }
}

/// Where a concept's labels come from in a [`ConceptConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptSource {
    /// Path to a truth-table file.
    Table(String),
    /// A named family such as `"XOR"` or `"GIP(3)"`, with its arity.
    Named { family: String, n: u32 },
    /// Per-point probability of label `+1`.
    Probabilistic(Vec<f64>),
}

/// JSON concept description: a label source, optional flip noise, optional marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptConfig {
    #[serde(flatten)]
    pub source: ConceptSource,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub distribution: Option<DistributionConfig>,
}

impl ConceptConfig {
    /// Builds the concept; without a distribution the marginal is uniform as a `k`-product.
    pub fn build(&self, k: u32, base_dir: Option<&Path>) -> Result<Concept> {
        let cfg_err = |path: &str, e: Error| Error::Config { path: path.into(), msg: e.to_string() };
        let marginal_for = |n: u32| -> Result<ProductDistribution> {
            match &self.distribution {
                Some(d) => d.build().map_err(|e| cfg_err("distribution", e)),
                None => ProductDistribution::uniform(n, k).map_err(|e| cfg_err("distribution", e)),
            }
        };
        let table = match &self.source {
            ConceptSource::Table(p) => {
                let path = match base_dir {
                    Some(d) => d.join(p),
                    None => p.into(),
                };
                Some(TruthTable::read_file(&path).map_err(|e| cfg_err("table", e))?)
            }
            ConceptSource::Named { family, n } => {
                let fam: NamedFunction = family.parse().map_err(|e| cfg_err("named.family", e))?;
                Some(make_named(fam, *n).map_err(|e| cfg_err("named", e))?)
            }
            ConceptSource::Probabilistic(_) => None,
        };
        match (table, &self.source) {
            (Some(t), _) => {
                let marginal = marginal_for(t.arity())?;
                match self.noise {
                    Some(eta) => Concept::noisy(&t, eta, marginal).map_err(|e| cfg_err("noise", e)),
                    None => Concept::deterministic(t, marginal).map_err(|e| cfg_err("distribution", e)),
                }
            }
            (None, ConceptSource::Probabilistic(p)) => {
                let n = p.len().trailing_zeros();
                if self.noise.is_some() {
                    return Err(Error::Config { path: "noise".into(), msg: "noise applies to deterministic sources only".into() });
                }
                Concept::probabilistic(p.clone(), marginal_for(n)?).map_err(|e| cfg_err("probabilistic", e))
            }
            (None, _) => unreachable!("table sources always yield a table"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
