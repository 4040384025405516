//! Distribution-specific agnostic boosting by relabelling.
//!
//! Round `t` runs the weak learner against an oracle for `D_t`, which has the
//! same marginal as `D` but keeps each label `y` at `x` only with probability
//! `w(g_t(x) y)` and replaces it by a fair coin otherwise. Accepted weak
//! hypotheses are added to the margin `g` with a constant step.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{Label, Point, TruthTable};
use crate::error::{param, Error, Result};
use crate::learner::{Hypothesis, WeakLearner};
use crate::norm::{chernoff_halfwidth, DEFAULT_DELTA};
use crate::oracle::{Concept, LabelOracle};

/// `min(1, max(0, 1 - m/2))`.
pub fn capped_weight(m: f64) -> f64 {
    (1.0 - m / 2.0).clamp(0.0, 1.0)
}

/// `g = sum_t step_t * h_t`, memoised at the points where it has been read.
#[derive(Debug, Clone)]
pub struct Margin<H> {
    members: Vec<(f64, H)>,
    memo: HashMap<u32, (usize, f64)>,
}

impl<H> Default for Margin<H> {
    fn default() -> Self {
        Margin { members: Vec::new(), memo: HashMap::new() }
    }
}

impl<H: Hypothesis> Margin<H> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: f64, h: H) {
        self.members.push((step, h));
    }

    pub fn rounds(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[(f64, H)] {
        &self.members
    }

    pub fn into_members(self) -> Vec<(f64, H)> {
        self.members
    }

    /// `g(idx)`, bringing the memoised value up to date with new members.
    pub fn value(&mut self, idx: u32) -> f64 {
        let entry = self.memo.entry(idx).or_insert((0, 0.0));
        for (step, h) in &self.members[entry.0..] {
            entry.1 += step * h.eval_index(idx).as_f64();
        }
        entry.0 = self.members.len();
        entry.1
    }

    /// `g(idx)` without touching the memo.
    pub fn value_of(&self, idx: u32) -> f64 {
        self.members.iter().map(|(s, h)| s * h.eval_index(idx).as_f64()).sum()
    }

    pub fn sign(&mut self, idx: u32) -> Label {
        Label::sign_of(self.value(idx))
    }

    /// Points at which `g` has been read.
    pub fn touched(&self) -> usize {
        self.memo.len()
    }
}

impl<H: Hypothesis + Sync> Margin<H> {
    /// `sign(g)` over all `2^n` points.
    pub fn materialize(&self, n: u32) -> Result<TruthTable> {
        let signs: Vec<Label> = (0..1u32 << n).into_par_iter().map(|i| Label::sign_of(self.value_of(i))).collect();
        TruthTable::from_fn(n, |i| signs[i as usize])
    }
}

/// Oracle view of the relabelled concept `D_t`.
pub struct RelabeledOracle<'a, H> {
    base: &'a mut dyn LabelOracle,
    margin: &'a mut Margin<H>,
}

impl<'a, H: Hypothesis> RelabeledOracle<'a, H> {
    pub fn new(base: &'a mut dyn LabelOracle, margin: &'a mut Margin<H>) -> Self {
        RelabeledOracle { base, margin }
    }

    fn relabel(&mut self, idx: u32, y: Label, rng: &mut dyn RngCore) -> Label {
        let w = capped_weight(self.margin.value(idx) * y.as_f64());
        if w >= 1.0 || (w > 0.0 && rng.gen_bool(w)) {
            y
        } else {
            Label::random(rng)
        }
    }
}

impl<H: Hypothesis> LabelOracle for RelabeledOracle<'_, H> {
    fn arity(&self) -> u32 {
        self.base.arity()
    }

    fn mq(&mut self, z: Point, rng: &mut dyn RngCore) -> Label {
        let y = self.base.mq(z, rng);
        self.relabel(z.index(), y, rng)
    }

    fn ex(&mut self, rng: &mut dyn RngCore) -> (Point, Label) {
        let (x, y) = self.base.ex(rng);
        (x, self.relabel(x.index(), y, rng))
    }

    fn mq_count(&self) -> u64 {
        self.base.mq_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    /// Advantage the weak learner is expected to deliver.
    pub alpha: f64,
    pub epsilon: f64,
    /// Margin increment per accepted round; defaults to `alpha / 2`.
    pub step: Option<f64>,
    /// Round cap; defaults to `ceil(8 / alpha^2) * ceil(log2(1/epsilon))`.
    pub rounds_cap: Option<usize>,
    /// Rounds without held-out improvement before stopping.
    pub patience: usize,
    /// Consecutive skipped rounds before stopping.
    pub max_skips: usize,
    /// The check of each weak hypothesis uses `ceil(check_const / alpha^2)` examples of `D_t`.
    pub check_const: f64,
    /// The held-out set has `ceil(holdout_const / epsilon^2)` examples of `D`.
    pub holdout_const: f64,
}

impl BoostParams {
    pub fn new(alpha: f64, epsilon: f64) -> Self {
        BoostParams {
            alpha,
            epsilon,
            step: None,
            rounds_cap: None,
            patience: 4,
            max_skips: 2,
            check_const: 64.0,
            holdout_const: 16.0,
        }
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(self.alpha / 2.0)
    }

    pub fn rounds_cap(&self) -> usize {
        self.rounds_cap.unwrap_or_else(|| {
            let per = (8.0 / (self.alpha * self.alpha)).ceil();
            let logs = (1.0 / self.epsilon).log2().ceil().max(1.0);
            (per * logs) as usize
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(param(format!("alpha={} outside (0,1]", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(param(format!("epsilon={} outside (0,1)", self.epsilon)));
        }
        if !(self.step() > 0.0) || self.rounds_cap() == 0 {
            return Err(param("step and round cap must be positive"));
        }
        if self.patience == 0 || self.max_skips == 0 {
            return Err(param("patience and skip limit must be positive"));
        }
        Ok(())
    }

    fn check_size(&self) -> u64 {
        (self.check_const / (self.alpha * self.alpha)).ceil() as u64
    }

    fn holdout_size(&self) -> u64 {
        (self.holdout_const / (self.epsilon * self.epsilon)).ceil() as u64
    }
}

/// One line of the per-round trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub attempts: u32,
    /// Estimated correlation of the weak hypothesis with `D_t` (last attempt).
    pub weak_corr: f64,
    pub accepted: bool,
    /// Held-out estimate of `E[sign(g) y]` under `D` after the round.
    pub holdout_corr: f64,
    pub mq_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The held-out correlation certified `1 - epsilon`.
    Validated,
    NoProgress,
    WeakLearnerFailed,
    RoundCap,
}

#[derive(Debug, Clone)]
pub struct BoostOutcome<H> {
    pub table: TruthTable,
    pub members: Vec<(f64, H)>,
    pub trace: Vec<RoundRecord>,
    pub stop: StopReason,
    pub holdout_halfwidth: f64,
    pub warnings: Vec<String>,
}

/// CSV of the per-round trace.
pub fn trace_csv(trace: &[RoundRecord]) -> String {
    let mut s = String::from("round,attempts,weak_corr,accepted,holdout_corr,mq_total\n");
    for r in trace {
        s.push_str(&format!(
            "{},{},{:.6},{},{:.6},{}\n",
            r.round, r.attempts, r.weak_corr, r.accepted, r.holdout_corr, r.mq_total
        ));
    }
    s
}

fn holdout_corr<H: Hypothesis>(margin: &mut Margin<H>, set: &[(u32, Label)]) -> f64 {
    let sum: f64 = set.iter().map(|&(x, y)| (margin.sign(x) * y).as_f64()).sum();
    sum / set.len() as f64
}

/// Boosts `weak` against `base` (which should cache its answers).
///
/// Each round calls the weak learner on `D_t` and checks the returned hypothesis
/// on fresh `D_t` examples; a hypothesis whose estimated correlation is below
/// `alpha / 2` is retried once and the round is skipped if it fails again.
/// The loop stops when a fixed held-out set of `D` examples certifies
/// correlation `1 - epsilon`, when the held-out correlation has not improved
/// for `patience` rounds, after `max_skips` consecutive skips, or at the round cap.
pub fn boost<W: WeakLearner>(
    weak: &W,
    base: &mut dyn LabelOracle,
    params: &BoostParams,
    rng: &mut dyn RngCore,
) -> Result<BoostOutcome<W::Output>> {
    params.validate()?;
    let holdout: Vec<(u32, Label)> = (0..params.holdout_size())
        .map(|_| {
            let (x, y) = base.ex(rng);
            (x.index(), y)
        })
        .collect();
    let hw = 2.0 * chernoff_halfwidth(holdout.len() as u64, DEFAULT_DELTA)?;
    boost_loop(weak, base, params, rng, Holdout::Sampled(holdout), hw)
}

/// [`boost`] with the held-out estimate replaced by the exact correlation of
/// `sign(g)` with `concept` (half-width 0). Used when the concept is known in
/// full, as in compression.
pub fn boost_exact<W: WeakLearner>(
    weak: &W,
    base: &mut dyn LabelOracle,
    concept: &Concept,
    params: &BoostParams,
    rng: &mut dyn RngCore,
) -> Result<BoostOutcome<W::Output>> {
    params.validate()?;
    if concept.arity() != base.arity() {
        return Err(Error::ArityMismatch { expected: base.arity(), got: concept.arity() });
    }
    boost_loop(weak, base, params, rng, Holdout::Exact(concept), 0.0)
}

enum Holdout<'c> {
    Sampled(Vec<(u32, Label)>),
    Exact(&'c Concept),
}

impl Holdout<'_> {
    fn corr<H: Hypothesis + Sync>(&self, margin: &mut Margin<H>, n: u32) -> Result<f64> {
        match self {
            Holdout::Sampled(set) => Ok(holdout_corr(margin, set)),
            Holdout::Exact(c) => c.correlation_with(&margin.materialize(n)?),
        }
    }
}

fn boost_loop<W: WeakLearner>(
    weak: &W,
    base: &mut dyn LabelOracle,
    params: &BoostParams,
    rng: &mut dyn RngCore,
    holdout: Holdout<'_>,
    hw: f64,
) -> Result<BoostOutcome<W::Output>> {
    let n = base.arity();
    let mut margin: Margin<W::Output> = Margin::new();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut best = holdout.corr(&mut margin, n)?;
    let (mut stale, mut skips) = (0usize, 0usize);
    let mut stop = StopReason::RoundCap;
    for round in 1..=params.rounds_cap() {
        let mut accepted = None;
        let mut attempts = 0;
        let mut weak_corr = 0.0;
        while attempts < 2 && accepted.is_none() {
            attempts += 1;
            let mut view = RelabeledOracle::new(base, &mut margin);
            let h = weak.learn(&mut view, rng)?;
            let m = params.check_size();
            let sum: f64 = (0..m)
                .map(|_| {
                    let (x, y) = view.ex(rng);
                    (h.eval_index(x.index()) * y).as_f64()
                })
                .sum();
            weak_corr = sum / m as f64;
            if weak_corr >= params.alpha / 2.0 {
                accepted = Some(h);
            }
        }
        let was_accepted = accepted.is_some();
        match accepted {
            Some(h) => {
                margin.push(params.step(), h);
                skips = 0;
            }
            None => {
                skips += 1;
                warnings.push(format!(
                    "round {round}: weak hypothesis correlation {weak_corr:.4} below {:.4} twice; round skipped",
                    params.alpha / 2.0
                ));
            }
        }
        let corr = holdout.corr(&mut margin, n)?;
        trace.push(RoundRecord {
            round,
            attempts,
            weak_corr,
            accepted: was_accepted,
            holdout_corr: corr,
            mq_total: base.mq_count(),
        });
        if corr - hw >= 1.0 - params.epsilon {
            stop = StopReason::Validated;
            break;
        }
        if skips >= params.max_skips {
            stop = StopReason::WeakLearnerFailed;
            break;
        }
        if corr > best {
            best = corr;
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                stop = StopReason::NoProgress;
                break;
            }
        }
    }
    let table = margin.materialize(n)?;
    Ok(BoostOutcome { table, members: margin.into_members(), trace, stop, holdout_halfwidth: hw, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{make_named, NamedFunction};
    use crate::distrib::ProductDistribution;
    use crate::oracle::MqOracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Returns a fixed table regardless of the oracle.
    struct Fixed(TruthTable);

    impl WeakLearner for Fixed {
        type Output = TruthTable;

        fn learn(&self, _: &mut dyn LabelOracle, _: &mut dyn RngCore) -> Result<TruthTable> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(capped_weight(0.0), 1.0);
        assert_eq!(capped_weight(2.0), 0.0);
        assert_eq!(capped_weight(5.0), 0.0);
        assert_eq!(capped_weight(1.0), 0.5);
        assert_eq!(capped_weight(-3.0), 1.0);
    }

    #[test]
    fn round_zero_view_is_the_base_oracle() {
        let f = make_named(NamedFunction::Ip, 6).unwrap();
        let c = Concept::noisy(&f, 0.2, ProductDistribution::uniform(6, 2).unwrap()).unwrap();
        let mut a = MqOracle::new(&c);
        let mut b = MqOracle::new(&c);
        let mut margin: Margin<TruthTable> = Margin::new();
        let mut view = RelabeledOracle::new(&mut b, &mut margin);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for i in 0..64 {
            let z = Point::new(6, i).unwrap();
            assert_eq!(a.mq(z, &mut r1), view.mq(z, &mut r2));
            assert_eq!(a.ex(&mut r1), view.ex(&mut r2));
        }
    }

    #[test]
    fn saturated_margin_gives_coins() {
        let f = make_named(NamedFunction::Xor, 4).unwrap();
        let c = Concept::deterministic(f.clone(), ProductDistribution::uniform(4, 2).unwrap()).unwrap();
        let mut base = MqOracle::new(&c);
        let mut margin = Margin::new();
        margin.push(2.0, f.clone());
        let mut view = RelabeledOracle::new(&mut base, &mut margin);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Point::new(4, 5).unwrap();
        let agree = (0..4000).filter(|_| view.mq(z, &mut rng) == f.get(5)).count();
        assert!((agree as f64 / 4000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn marginal_is_preserved() {
        let f = make_named(NamedFunction::Maj, 6).unwrap();
        let c = Concept::deterministic(f.clone(), ProductDistribution::uniform(6, 3).unwrap()).unwrap();
        let mut a = MqOracle::new(&c);
        let mut b = MqOracle::new(&c);
        let mut margin = Margin::new();
        margin.push(1.5, f.negated());
        let mut view = RelabeledOracle::new(&mut b, &mut margin);
        // Relabelling draws its coins only after the point, so equal seeds give equal points.
        for s in 0..200 {
            let mut r1 = ChaCha8Rng::seed_from_u64(s);
            let mut r2 = ChaCha8Rng::seed_from_u64(s);
            assert_eq!(a.ex(&mut r1).0, view.ex(&mut r2).0);
        }
    }

    #[test]
    fn single_unit_round_returns_the_weak_hypothesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = TruthTable::random(6, &mut rng).unwrap();
        let c = Concept::deterministic(f.clone(), ProductDistribution::uniform(6, 2).unwrap()).unwrap();
        let mut o = MqOracle::new(&c);
        let params = BoostParams { step: Some(1.0), rounds_cap: Some(1), ..BoostParams::new(0.25, 0.1) };
        let out = boost(&Fixed(f.clone()), &mut o, &params, &mut rng).unwrap();
        assert_eq!(out.table, f);
        assert_eq!(out.stop, StopReason::Validated);
    }

    #[test]
    fn useless_learner_is_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = make_named(NamedFunction::Xor, 6).unwrap();
        let c = Concept::deterministic(f.clone(), ProductDistribution::uniform(6, 2).unwrap()).unwrap();
        let mut o = MqOracle::new(&c);
        let dict = make_named(NamedFunction::Dictator(1), 6).unwrap();
        let out = boost(&Fixed(dict), &mut o, &BoostParams::new(0.25, 0.1), &mut rng).unwrap();
        assert_eq!(out.stop, StopReason::WeakLearnerFailed);
        assert!(out.members.is_empty());
        assert_eq!(out.warnings.len(), 2);
        assert_eq!(out.table, TruthTable::constant(6, Label::Plus).unwrap());
    }

    #[test]
    fn margin_memo_tracks_new_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = TruthTable::random(4, &mut rng).unwrap();
        let b = TruthTable::random(4, &mut rng).unwrap();
        let mut m = Margin::new();
        m.push(0.5, a.clone());
        let first = m.value(3);
        m.push(0.25, b.clone());
        assert_eq!(first, 0.5 * a.get(3).as_f64());
        assert_eq!(m.value(3), m.value_of(3));
        assert_eq!(m.touched(), 1);
    }

    #[test]
    fn exact_holdout_stops_on_the_first_correct_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = make_named(NamedFunction::Xor, 6).unwrap();
        let c = Concept::deterministic(f.clone(), ProductDistribution::uniform(6, 2).unwrap()).unwrap();
        let mut o = MqOracle::new(&c);
        let params = BoostParams::new(0.25, 1e-6);
        let out = boost_exact(&Fixed(f.clone()), &mut o, &c, &params, &mut rng).unwrap();
        assert_eq!(out.stop, StopReason::Validated);
        assert_eq!(out.members.len(), 1);
        assert_eq!(out.holdout_halfwidth, 0.0);
        assert_eq!(out.table, f);
    }
}
