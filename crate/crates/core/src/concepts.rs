//! Touchstone classes: polynomial threshold functions, SYM+ gates, circuits and
//! decision trees over them, planted instances, brute-force optima and the
//! savings-parameter formulas.
//!
//! Gate outputs feed later gates as bits with the usual label encoding
//! (`+1` is bit 0, `-1` is bit 1).

use std::collections::BTreeSet;
use std::path::Path;

use num_rational::Ratio;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::{check_arity, Label, TruthTable};
use crate::error::{param, Error, Result};
use crate::oracle::Concept;

/// Largest fan-in of a single gate (inputs are packed into a `u64`).
pub const MAX_FAN_IN: u32 = 64;

/// Packs the variables of a point (`x_1` the most significant bit of `idx`) so
/// that variable `i` (zero-based) is bit `i`.
#[inline]
pub fn point_bits(n: u32, idx: u32) -> u64 {
    u64::from(idx.reverse_bits() >> (32 - n))
}

/// A Boolean-input function usable as a gate or a tree query.
pub trait GateFunction {
    fn arity(&self) -> u32;

    fn degree(&self) -> u32;

    /// Evaluates with variable `i` read from bit `i` of `bits`.
    fn eval_bits(&self, bits: u64) -> Label;
}

/// A monomial given by its (zero-based) variables, with a coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term<C> {
    pub vars: Vec<u32>,
    pub coeff: C,
}

fn term_mask(vars: &[u32], arity: u32, degree: u32) -> Result<u64> {
    let set: BTreeSet<u32> = vars.iter().copied().collect();
    if set.len() != vars.len() {
        return Err(Error::Malformed(format!("repeated variable in monomial {vars:?}")));
    }
    if set.len() as u32 > degree {
        return Err(Error::Malformed(format!("monomial {vars:?} exceeds degree {degree}")));
    }
    if let Some(v) = set.iter().find(|&&v| v >= arity) {
        return Err(Error::Malformed(format!("variable {v} out of range for arity {arity}")));
    }
    Ok(set.iter().fold(0u64, |m, &v| m | (1u64 << v)))
}

fn check_fan_in(arity: u32) -> Result<()> {
    if arity == 0 || arity > MAX_FAN_IN {
        return Err(Error::Malformed(format!("arity {arity} outside 1..={MAX_FAN_IN}")));
    }
    Ok(())
}

/// `sign(p(x))` with `sign(0) = +1` for a polynomial `p` of bounded degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PtfRepr", into = "PtfRepr")]
pub struct Ptf {
    arity: u32,
    degree: u32,
    terms: Vec<Term<Ratio<i64>>>,
    /// Coefficients over a common denominator, with their monomial masks.
    scaled: Vec<(u64, i128)>,
}

#[derive(Serialize, Deserialize)]
struct PtfRepr {
    arity: u32,
    degree: u32,
    terms: Vec<Term<Ratio<i64>>>,
}

impl TryFrom<PtfRepr> for Ptf {
    type Error = Error;

    fn try_from(r: PtfRepr) -> Result<Self> {
        Ptf::new(r.arity, r.degree, r.terms)
    }
}

impl From<Ptf> for PtfRepr {
    fn from(p: Ptf) -> Self {
        PtfRepr { arity: p.arity, degree: p.degree, terms: p.terms }
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

impl Ptf {
    pub fn new(arity: u32, degree: u32, terms: Vec<Term<Ratio<i64>>>) -> Result<Self> {
        check_fan_in(arity)?;
        let denom = terms.iter().fold(1i128, |acc, t| lcm(acc, i128::from(*t.coeff.denom())));
        let scaled = terms
            .iter()
            .map(|t| {
                let m = term_mask(&t.vars, arity, degree)?;
                Ok((m, i128::from(*t.coeff.numer()) * (denom / i128::from(*t.coeff.denom()))))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ptf { arity, degree, terms, scaled })
    }

    /// Integer-coefficient convenience constructor.
    pub fn from_integers(arity: u32, degree: u32, terms: &[(Vec<u32>, i64)]) -> Result<Self> {
        let terms = terms.iter().map(|(v, c)| Term { vars: v.clone(), coeff: Ratio::from_integer(*c) }).collect();
        Ptf::new(arity, degree, terms)
    }

    pub fn terms(&self) -> &[Term<Ratio<i64>>] {
        &self.terms
    }

    /// `p(x)` scaled by the common denominator of the coefficients.
    pub fn scaled_value(&self, bits: u64) -> i128 {
        self.scaled.iter().filter(|(m, _)| bits & m == *m).map(|(_, c)| c).sum()
    }
}

impl GateFunction for Ptf {
    fn arity(&self) -> u32 {
        self.arity
    }

    fn degree(&self) -> u32 {
        self.degree
    }

    fn eval_bits(&self, bits: u64) -> Label {
        Label::from_bit(self.scaled_value(bits) < 0)
    }
}

/// `theta(p(x))` for an integer polynomial `p` with coefficients bounded by `size`.
///
/// `theta` is stored over `[lo, hi]`, the interval between the sums of the
/// negative and of the positive coefficients, which contains every attainable
/// value of `p`. Values outside map to `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymRepr", into = "SymRepr")]
pub struct SymPlus {
    arity: u32,
    degree: u32,
    size: u64,
    terms: Vec<Term<i64>>,
    masks: Vec<u64>,
    lo: i64,
    theta: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct SymRepr {
    arity: u32,
    degree: u32,
    size: u64,
    terms: Vec<Term<i64>>,
    theta_lo: i64,
    theta: Vec<Label>,
}

impl TryFrom<SymRepr> for SymPlus {
    type Error = Error;

    fn try_from(r: SymRepr) -> Result<Self> {
        let s = SymPlus::new(r.arity, r.degree, r.size, r.terms, |_| Label::Plus)?;
        if r.theta_lo != s.lo || r.theta.len() != s.theta.len() {
            return Err(Error::Malformed(format!(
                "theta must cover [{}, {}]",
                s.lo,
                s.lo + s.theta.len() as i64 - 1
            )));
        }
        Ok(SymPlus { theta: r.theta, ..s })
    }
}

impl From<SymPlus> for SymRepr {
    fn from(s: SymPlus) -> Self {
        SymRepr { arity: s.arity, degree: s.degree, size: s.size, terms: s.terms, theta_lo: s.lo, theta: s.theta }
    }
}

impl SymPlus {
    pub fn new(
        arity: u32,
        degree: u32,
        size: u64,
        terms: Vec<Term<i64>>,
        theta: impl Fn(i64) -> Label,
    ) -> Result<Self> {
        check_fan_in(arity)?;
        let masks = terms.iter().map(|t| term_mask(&t.vars, arity, degree)).collect::<Result<Vec<_>>>()?;
        if let Some(t) = terms.iter().find(|t| t.coeff.unsigned_abs() > size) {
            return Err(Error::Malformed(format!("coefficient {} exceeds size {size}", t.coeff)));
        }
        let lo: i64 = terms.iter().map(|t| t.coeff.min(0)).sum();
        let hi: i64 = terms.iter().map(|t| t.coeff.max(0)).sum();
        if hi - lo > 1 << 24 {
            return Err(Error::Malformed("polynomial range too large to tabulate theta".into()));
        }
        let theta = (lo..=hi).map(theta).collect();
        Ok(SymPlus { arity, degree, size, terms, masks, lo, theta })
    }

    /// The same polynomial as an integer PTF, with `theta = sign`.
    pub fn from_ptf(p: &Ptf, size: u64) -> Result<Self> {
        let terms = p
            .terms()
            .iter()
            .map(|t| {
                if !t.coeff.is_integer() {
                    return Err(param("SYM+ gates need integer coefficients"));
                }
                Ok(Term { vars: t.vars.clone(), coeff: t.coeff.to_integer() })
            })
            .collect::<Result<Vec<_>>>()?;
        SymPlus::new(p.arity, p.degree, size, terms, |v| Label::from_bit(v < 0))
    }

    pub fn value(&self, bits: u64) -> i64 {
        self.masks.iter().zip(&self.terms).filter(|(m, _)| bits & **m == **m).map(|(_, t)| t.coeff).sum()
    }

    pub fn theta(&self, v: i64) -> Label {
        usize::try_from(v - self.lo).ok().and_then(|i| self.theta.get(i).copied()).unwrap_or(Label::Plus)
    }
}

impl GateFunction for SymPlus {
    fn arity(&self) -> u32 {
        self.arity
    }

    fn degree(&self) -> u32 {
        self.degree
    }

    fn eval_bits(&self, bits: u64) -> Label {
        self.theta(self.value(bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wire {
    Input(u32),
    Gate(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate<G> {
    pub inputs: Vec<Wire>,
    pub func: G,
}

/// A circuit of at most `max_gates` gates in topological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit<G> {
    pub n: u32,
    pub max_gates: u32,
    pub gates: Vec<Gate<G>>,
    pub output: u32,
}

impl<G: GateFunction> Circuit<G> {
    pub fn new(n: u32, max_gates: u32, gates: Vec<Gate<G>>, output: u32) -> Result<Self> {
        let c = Circuit { n, max_gates, gates, output };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_arity(self.n)?;
        if self.gates.is_empty() || self.gates.len() > self.max_gates as usize {
            return Err(Error::Malformed(format!(
                "circuit has {} gates, allowed 1..={}",
                self.gates.len(),
                self.max_gates
            )));
        }
        for (i, g) in self.gates.iter().enumerate() {
            if g.inputs.len() != g.func.arity() as usize {
                return Err(Error::Malformed(format!("gate {i} reads {} wires, its function takes {}", g.inputs.len(), g.func.arity())));
            }
            for w in &g.inputs {
                match *w {
                    Wire::Input(v) if v >= self.n => {
                        return Err(Error::Malformed(format!("gate {i} reads input {v} of {}", self.n)))
                    }
                    Wire::Gate(j) if j as usize >= i => {
                        return Err(Error::Malformed(format!("gate {i} reads gate {j}, which is not earlier")))
                    }
                    _ => {}
                }
            }
        }
        if self.output as usize >= self.gates.len() {
            return Err(Error::Malformed(format!("output gate {} does not exist", self.output)));
        }
        Ok(())
    }

    pub fn eval_bits(&self, x: u64) -> Label {
        let mut out = vec![Label::Plus; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            let bits = g.inputs.iter().enumerate().fold(0u64, |acc, (p, w)| {
                let b = match *w {
                    Wire::Input(v) => (x >> v) & 1 == 1,
                    Wire::Gate(j) => out[j as usize].bit(),
                };
                acc | (u64::from(b) << p)
            });
            out[i] = g.func.eval_bits(bits);
        }
        out[self.output as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<G> {
    Leaf(Label),
    /// Goes to `plus` when the query answers `+1`.
    Query { func: G, plus: Box<TreeNode<G>>, minus: Box<TreeNode<G>> },
}

impl<G> TreeNode<G> {
    fn depth(&self) -> u32 {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Query { plus, minus, .. } => 1 + plus.depth().max(minus.depth()),
        }
    }
}

/// A decision tree of depth at most `max_depth` whose queries read all `n` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<G> {
    pub n: u32,
    pub max_depth: u32,
    pub root: TreeNode<G>,
}

impl<G: GateFunction> DecisionTree<G> {
    pub fn new(n: u32, max_depth: u32, root: TreeNode<G>) -> Result<Self> {
        let t = DecisionTree { n, max_depth, root };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_arity(self.n)?;
        if self.root.depth() > self.max_depth {
            return Err(Error::Malformed(format!("tree depth {} exceeds {}", self.root.depth(), self.max_depth)));
        }
        fn arities<G: GateFunction>(node: &TreeNode<G>, n: u32) -> Result<()> {
            match node {
                TreeNode::Leaf(_) => Ok(()),
                TreeNode::Query { func, plus, minus } => {
                    if func.arity() != n {
                        return Err(Error::Malformed(format!("query reads {} inputs, the tree has {n}", func.arity())));
                    }
                    arities(plus, n)?;
                    arities(minus, n)
                }
            }
        }
        arities(&self.root, self.n)
    }

    /// The output and the number of queries evaluated.
    pub fn eval_counting(&self, x: u64) -> (Label, u32) {
        let mut node = &self.root;
        let mut visited = 0;
        loop {
            match node {
                TreeNode::Leaf(l) => return (*l, visited),
                TreeNode::Query { func, plus, minus } => {
                    visited += 1;
                    node = if func.eval_bits(x) == Label::Plus { plus } else { minus };
                }
            }
        }
    }
}

/// An instance of one of the touchstone classes, tagged by `"class"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ClassInstance {
    Ptf(Ptf),
    PtfCircuit(Circuit<Ptf>),
    PtfTree(DecisionTree<Ptf>),
    SymPlus(SymPlus),
    SymCircuit(Circuit<SymPlus>),
    SymTree(DecisionTree<SymPlus>),
}

impl ClassInstance {
    pub fn arity(&self) -> u32 {
        match self {
            ClassInstance::Ptf(p) => p.arity(),
            ClassInstance::SymPlus(s) => s.arity(),
            ClassInstance::PtfCircuit(c) => c.n,
            ClassInstance::SymCircuit(c) => c.n,
            ClassInstance::PtfTree(t) => t.n,
            ClassInstance::SymTree(t) => t.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassInstance::Ptf(p) => check_arity(p.arity()),
            ClassInstance::SymPlus(s) => check_arity(s.arity()),
            ClassInstance::PtfCircuit(c) => c.validate(),
            ClassInstance::SymCircuit(c) => c.validate(),
            ClassInstance::PtfTree(t) => t.validate(),
            ClassInstance::SymTree(t) => t.validate(),
        }
    }

    /// Evaluates at the point with index `idx`.
    pub fn eval(&self, idx: u32) -> Label {
        let x = point_bits(self.arity(), idx);
        match self {
            ClassInstance::Ptf(p) => p.eval_bits(x),
            ClassInstance::SymPlus(s) => s.eval_bits(x),
            ClassInstance::PtfCircuit(c) => c.eval_bits(x),
            ClassInstance::SymCircuit(c) => c.eval_bits(x),
            ClassInstance::PtfTree(t) => t.eval_counting(x).0,
            ClassInstance::SymTree(t) => t.eval_counting(x).0,
        }
    }

    pub fn materialize(&self) -> Result<TruthTable> {
        TruthTable::from_fn(self.arity(), |i| self.eval(i))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: ClassInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        ClassInstance::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Parameters of a planted instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ClassParams {
    Ptf { degree: u32 },
    PtfCircuit { degree: u32, gates: u32 },
    PtfTree { degree: u32, depth: u32 },
    SymPlus { degree: u32, size: u64 },
    SymCircuit { degree: u32, size: u64, gates: u32 },
    SymTree { degree: u32, size: u64, depth: u32 },
}

/// Most monomials drawn for one planted gate.
const MAX_PLANTED_TERMS: usize = 40;
/// Most wires read by one planted circuit gate.
const PLANTED_FAN_IN: usize = 6;

fn random_monomials<R: Rng + ?Sized>(arity: u32, degree: u32, rng: &mut R) -> Vec<Vec<u32>> {
    let mut all: Vec<Vec<u32>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..degree.min(arity) {
        let mut next = Vec::new();
        for m in &frontier {
            let start = m.last().map_or(0, |&v| v + 1);
            for v in start..arity {
                let mut e = m.clone();
                e.push(v);
                next.push(e);
            }
            if next.len() > 4096 {
                break;
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    if all.len() <= MAX_PLANTED_TERMS {
        return all;
    }
    let mut picked: Vec<Vec<u32>> = vec![Vec::new()];
    for i in sample(rng, all.len() - 1, MAX_PLANTED_TERMS - 1) {
        picked.push(all[i + 1].clone());
    }
    picked
}

fn random_ptf<R: Rng + ?Sized>(arity: u32, degree: u32, rng: &mut R) -> Result<Ptf> {
    let terms = random_monomials(arity, degree, rng)
        .into_iter()
        .map(|vars| {
            let mut num = 0;
            while num == 0 {
                num = rng.gen_range(-8..=8);
            }
            Term { vars, coeff: Ratio::new(num, rng.gen_range(1..=4)) }
        })
        .collect();
    Ptf::new(arity, degree, terms)
}

fn random_sym<R: Rng + ?Sized>(arity: u32, degree: u32, size: u64, rng: &mut R) -> Result<SymPlus> {
    if size == 0 {
        return Err(param("SYM+ size must be positive"));
    }
    let s = size.min(1 << 20) as i64;
    let terms: Vec<Term<i64>> = random_monomials(arity, degree, rng)
        .into_iter()
        .map(|vars| {
            let mut c = 0;
            while c == 0 {
                c = rng.gen_range(-s..=s);
            }
            Term { vars, coeff: c }
        })
        .collect();
    let lo: i64 = terms.iter().map(|t| t.coeff.min(0)).sum();
    let hi: i64 = terms.iter().map(|t| t.coeff.max(0)).sum();
    let signs: Vec<Label> = (lo..=hi).map(|_| Label::random(rng)).collect();
    SymPlus::new(arity, degree, size, terms, |v| signs[(v - lo) as usize])
}

fn random_circuit<G: GateFunction, R: Rng + ?Sized>(
    n: u32,
    gates: u32,
    rng: &mut R,
    mut make: impl FnMut(u32, &mut R) -> Result<G>,
) -> Result<Circuit<G>> {
    if gates == 0 {
        return Err(param("a circuit needs at least one gate"));
    }
    let mut out = Vec::with_capacity(gates as usize);
    for i in 0..gates {
        let mut wires: Vec<Wire> = Vec::new();
        if i > 0 {
            wires.push(Wire::Gate(i - 1));
        }
        let pool: Vec<Wire> = (0..n).map(Wire::Input).chain((0..i.saturating_sub(1)).map(Wire::Gate)).collect();
        let want = if gates == 1 { n as usize } else { PLANTED_FAN_IN.min(pool.len() + wires.len()) };
        let extra = want.saturating_sub(wires.len()).min(pool.len());
        for j in sample(rng, pool.len(), extra) {
            wires.push(pool[j]);
        }
        let func = make(wires.len() as u32, rng)?;
        out.push(Gate { inputs: wires, func });
    }
    Circuit::new(n, gates, out, gates - 1)
}

fn random_tree<G: GateFunction, R: Rng + ?Sized>(
    n: u32,
    depth: u32,
    rng: &mut R,
    make: &mut impl FnMut(u32, &mut R) -> Result<G>,
) -> Result<TreeNode<G>> {
    if depth == 0 {
        return Ok(TreeNode::Leaf(Label::random(rng)));
    }
    let func = make(n, rng)?;
    let plus = Box::new(random_tree(n, depth - 1, rng, make)?);
    let minus = Box::new(random_tree(n, depth - 1, rng, make)?);
    Ok(TreeNode::Query { func, plus, minus })
}

/// A random well-formed instance and its truth table.
pub fn plant<R: Rng + ?Sized>(params: ClassParams, n: u32, rng: &mut R) -> Result<(ClassInstance, TruthTable)> {
    check_arity(n)?;
    let inst = match params {
        ClassParams::Ptf { degree } => ClassInstance::Ptf(random_ptf(n, degree, rng)?),
        ClassParams::SymPlus { degree, size } => ClassInstance::SymPlus(random_sym(n, degree, size, rng)?),
        ClassParams::PtfCircuit { degree, gates } => {
            ClassInstance::PtfCircuit(random_circuit(n, gates, rng, |a, r| random_ptf(a, degree, r))?)
        }
        ClassParams::SymCircuit { degree, size, gates } => {
            ClassInstance::SymCircuit(random_circuit(n, gates, rng, |a, r| random_sym(a, degree, size, r))?)
        }
        ClassParams::PtfTree { degree, depth } => {
            let root = random_tree(n, depth, rng, &mut |a, r: &mut R| random_ptf(a, degree, r))?;
            ClassInstance::PtfTree(DecisionTree::new(n, depth, root)?)
        }
        ClassParams::SymTree { degree, size, depth } => {
            let root = random_tree(n, depth, rng, &mut |a, r: &mut R| random_sym(a, degree, size, r))?;
            ClassInstance::SymTree(DecisionTree::new(n, depth, root)?)
        }
    };
    let table = inst.materialize()?;
    Ok((inst, table))
}

/// `max_i E[h_i(x) y]` over an explicit list, exact under the concept's marginal.
/// Ties go to the lowest index.
pub fn opt_bruteforce(concept: &Concept, hypotheses: &[TruthTable]) -> Result<(f64, usize)> {
    if hypotheses.is_empty() {
        return Err(param("hypothesis list is empty"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, h) in hypotheses.iter().enumerate() {
        let c = concept.correlation_with(h)?;
        if c > best.0 {
            best = (c, i);
        }
    }
    Ok(best)
}

/// Touchstone classes with known savings formulas. `degree` is the polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum TouchstoneClass {
    PtfCircuit { degree: u32, gates: u32 },
    PtfTree { degree: u32, depth: u32 },
    SymCircuit { degree: u32, size: u64, gates: u32 },
    SymTree { degree: u32, size: u64, depth: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    /// Parties of the protocol class the touchstone class sits in (`degree + 1`).
    pub parties: u32,
    /// Protocol cost bound used in the formulas.
    pub cost: f64,
    /// Savings `s(n)`: queries are `2^{n - s(n)}`.
    pub savings: f64,
    /// Advantage `gamma * 2^{-cost 2^parties - parties}`.
    pub alpha: f64,
    /// `s(n) <= 0`: no saving over querying everything.
    pub trivial: bool,
}

/// Evaluates the savings formulas; `big_o` multiplies every hidden constant.
///
/// * PTF circuits with `m` gates of degree `k`: cost `m k^3 log n log(mn)` and
///   `s = n/(k+1) - C (log(1/gamma) + 2^k m log n log(mn))`.
/// * PTF decision trees of depth `d`: the same with `d` for `m`.
/// * SYM+ circuits of `t1` gates of size `t2`, degree `k-1`, on `k` parties:
///   cost `t1 log t2` and `s = n/k - log k + 4 (log gamma - 2^k t1 log t2 + k)`.
/// * SYM+ decision trees of depth `d`, size `t`: the same with `d log t`.
///
/// Logarithms are base 2.
pub fn savings_params(class: TouchstoneClass, n: u32, gamma: f64, big_o: f64) -> Result<SavingsReport> {
    if n == 0 || !(gamma > 0.0 && gamma <= 1.0) || !(big_o > 0.0) {
        return Err(param("need n >= 1, gamma in (0,1] and a positive constant"));
    }
    let nf = f64::from(n);
    let log = f64::log2;
    // m log n log(mn), taken as 0 when m = 0.
    let mlog = |m: f64| if m == 0.0 { 0.0 } else { m * log(nf) * log(m * nf) };
    let (parties, cost, savings) = match class {
        TouchstoneClass::PtfCircuit { degree, gates: m } | TouchstoneClass::PtfTree { degree, depth: m } => {
            let k = f64::from(degree);
            let parties = degree + 1;
            let cost = big_o * k.powi(3) * mlog(f64::from(m));
            let s = nf / f64::from(parties) - big_o * (log(1.0 / gamma) + 2f64.powi(degree as i32) * mlog(f64::from(m)));
            (parties, cost, s)
        }
        TouchstoneClass::SymCircuit { degree, size, gates: m } | TouchstoneClass::SymTree { degree, size, depth: m } => {
            let parties = degree + 1;
            let kf = f64::from(parties);
            let cost = f64::from(m) * if size <= 1 { 0.0 } else { log(size as f64) };
            let s = nf / kf - log(kf) + 4.0 * (log(gamma) - 2f64.powi(parties as i32) * cost + kf);
            (parties, cost, s)
        }
    };
    let alpha = gamma * 2f64.powf(-(cost * 2f64.powi(parties as i32)) - f64::from(parties));
    Ok(SavingsReport { parties, cost, savings, alpha, trivial: savings <= 0.0 })
}
