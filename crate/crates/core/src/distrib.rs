//! `t`-product distributions over `{0,1}^n`.
//!
//! A sample is `sigma(x_1 || ... || x_t)` where each block `x_i` is drawn from
//! its own mass function over `{0,1}^{n/t}` and `sigma(z)_j = z_{sigma(j)}`.
//! Block mass tables are explicit so that exact expectations can be computed;
//! the learner only ever calls the samplers.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::{check_arity, Point, TruthTable};
use crate::error::{param, Error, Result};

const MASS_TOLERANCE: f64 = 1e-12;

/// A bijection on `0..n`, acting on points by `apply(z)_j = z_{map[j]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation {
    map: Vec<u32>,
    identity: bool,
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;
    fn try_from(map: Vec<u32>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Vec<u32> {
        p.map
    }
}

impl Permutation {
    /// Zero-based mapping; must be a bijection on `0..map.len()`.
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            let m = m as usize;
            if m >= n || seen[m] {
                return Err(param(format!("not a permutation of 0..{n}: {map:?}")));
            }
            seen[m] = true;
        }
        let identity = map.iter().enumerate().all(|(j, &m)| j as u32 == m);
        Ok(Permutation { map, identity })
    }

    pub fn identity(n: u32) -> Self {
        Permutation { map: (0..n).collect(), identity: true }
    }

    /// Reverses the variable order.
    pub fn reversal(n: u32) -> Self {
        Permutation::new((0..n).rev().collect()).expect("reversal is a bijection")
    }

    pub fn random<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut map: Vec<u32> = (0..n).collect();
        map.shuffle(rng);
        Permutation::new(map).expect("shuffle is a bijection")
    }

    pub fn len(&self) -> u32 {
        self.map.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.map.len()];
        for (j, &m) in self.map.iter().enumerate() {
            inv[m as usize] = j as u32;
        }
        Permutation { map: inv, identity: self.identity }
    }

    pub fn apply(&self, z: Point) -> Result<Point> {
        if z.arity() != self.len() {
            return Err(Error::ArityMismatch { expected: self.len(), got: z.arity() });
        }
        Ok(Point::new_unchecked(z.arity(), self.apply_index(z.index())))
    }

    /// `apply` on a raw index of arity `self.len()`.
    #[inline]
    pub fn apply_index(&self, idx: u32) -> u32 {
        if self.identity {
            return idx;
        }
        let n = self.map.len() as u32;
        let mut out = 0u32;
        for (j, &m) in self.map.iter().enumerate() {
            let bit = (idx >> (n - 1 - m)) & 1;
            out |= bit << (n - 1 - j as u32);
        }
        out
    }
}

/// Mass function of a single block.
#[derive(Debug, Clone)]
pub enum BlockMass {
    Uniform { len: u32 },
    Table { probs: Vec<f64>, sampler: WeightedIndex<f64> },
}

impl BlockMass {
    pub fn uniform(len: u32) -> Self {
        BlockMass::Uniform { len }
    }

    pub fn table(probs: Vec<f64>) -> Result<Self> {
        let size = probs.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(param(format!("block mass table has {size} entries, need a power of two >= 2")));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(param("block masses must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(param(format!("block masses sum to {total}, expected 1")));
        }
        let sampler = WeightedIndex::new(&probs).map_err(|e| param(e.to_string()))?;
        Ok(BlockMass::Table { probs, sampler })
    }

    /// Point mass on `value`.
    pub fn point(len: u32, value: u32) -> Result<Self> {
        let mut probs = vec![0.0; 1usize << len];
        *probs.get_mut(value as usize).ok_or_else(|| param("point mass value out of range"))? = 1.0;
        BlockMass::table(probs)
    }

    /// Independent bits, bit `j` (MSB first) equal to 1 with probability `p[j]`.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        let len = p.len() as u32;
        let probs = (0..1u32 << len)
            .map(|v| {
                (0..len)
                    .map(|j| if (v >> (len - 1 - j)) & 1 == 1 { p[j as usize] } else { 1.0 - p[j as usize] })
                    .product()
            })
            .collect();
        BlockMass::table(probs)
    }

    pub fn len(&self) -> u32 {
        match self {
            BlockMass::Uniform { len } => *len,
            BlockMass::Table { probs, .. } => probs.len().trailing_zeros(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn mass(&self, value: u32) -> f64 {
        match self {
            BlockMass::Uniform { len } => 1.0 / (1u64 << len) as f64,
            BlockMass::Table { probs, .. } => probs[value as usize],
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            BlockMass::Uniform { len } => rng.gen_range(0..1u32 << len),
            BlockMass::Table { sampler, .. } => sampler.sample(rng) as u32,
        }
    }

    fn spec(&self) -> BlockSpec {
        match self {
            BlockMass::Uniform { .. } => BlockSpec::Keyword("uniform".into()),
            BlockMass::Table { probs, .. } => BlockSpec::Masses(probs.clone()),
        }
    }
}

/// A `t`-product distribution with permutation `sigma`.
#[derive(Debug, Clone)]
pub struct ProductDistribution {
    n: u32,
    block_len: u32,
    blocks: Vec<BlockMass>,
    sigma: Permutation,
    sigma_inv: Permutation,
}

impl ProductDistribution {
    pub fn new(blocks: Vec<BlockMass>, sigma: Permutation) -> Result<Self> {
        let t = blocks.len() as u32;
        if t == 0 {
            return Err(param("product distribution needs at least one block"));
        }
        let block_len = blocks[0].len();
        if blocks.iter().any(|b| b.len() != block_len) {
            return Err(param("all blocks must have equal length"));
        }
        let n = t * block_len;
        check_arity(n)?;
        if sigma.len() != n {
            return Err(param(format!("sigma has length {}, expected n={n}", sigma.len())));
        }
        let sigma_inv = sigma.inverse();
        Ok(ProductDistribution { n, block_len, blocks, sigma, sigma_inv })
    }

    /// Uniform distribution on `{0,1}^n` viewed as a `t`-product with identity sigma.
    pub fn uniform(n: u32, t: u32) -> Result<Self> {
        if t == 0 || !n.is_multiple_of(t) {
            return Err(param(format!("t={t} must divide n={n}")));
        }
        let len = n / t;
        ProductDistribution::new((0..t).map(|_| BlockMass::uniform(len)).collect(), Permutation::identity(n))
    }

    pub fn arity(&self) -> u32 {
        self.n
    }

    pub fn block_count(&self) -> u32 {
        self.blocks.len() as u32
    }

    pub fn block_len(&self) -> u32 {
        self.block_len
    }

    pub fn blocks(&self) -> &[BlockMass] {
        &self.blocks
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    pub fn sigma_inverse(&self) -> &Permutation {
        &self.sigma_inv
    }

    pub fn is_uniform(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b, BlockMass::Uniform { .. }))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new_unchecked(self.n, self.sample_index(rng))
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let mut z = 0u32;
        for b in &self.blocks {
            z = (z << self.block_len) | b.sample(rng);
        }
        self.sigma.apply_index(z)
    }

    pub fn mass(&self, z: Point) -> Result<f64> {
        if z.arity() != self.n {
            return Err(Error::ArityMismatch { expected: self.n, got: z.arity() });
        }
        Ok(self.mass_index(z.index()))
    }

    /// `prod_i blocks[i](block i of sigma^{-1}(z))`.
    pub fn mass_index(&self, idx: u32) -> f64 {
        self.layout_mass(self.sigma_inv.apply_index(idx))
    }

    /// Mass of a point given in block layout (before `sigma` is applied).
    pub fn layout_mass(&self, y: u32) -> f64 {
        let t = self.blocks.len() as u32;
        let mask = (1u32 << self.block_len) - 1;
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| b.mass((y >> ((t - 1 - i as u32) * self.block_len)) & mask))
            .product()
    }

    pub fn to_config(&self) -> DistributionConfig {
        DistributionConfig {
            t: self.block_count(),
            n: self.n,
            sigma: Some(self.sigma.as_slice().to_vec()),
            blocks: self.blocks.iter().map(BlockMass::spec).collect(),
        }
    }
}

/// One block of a distribution config: the keyword `"uniform"` or an explicit mass list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockSpec {
    Keyword(String),
    Masses(Vec<f64>),
}

/// JSON form `{t, n, sigma: [..], blocks: [[mass, ...] | "uniform", ...]}`; `sigma` is zero-based
/// and defaults to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub t: u32,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<u32>>,
    pub blocks: Vec<BlockSpec>,
}

impl DistributionConfig {
    pub fn build(&self) -> Result<ProductDistribution> {
        let cfg_err = |path: &str, msg: String| Error::Config { path: path.into(), msg };
        if self.t == 0 || !self.n.is_multiple_of(self.t) {
            return Err(cfg_err("t", format!("t={} must divide n={}", self.t, self.n)));
        }
        if self.blocks.len() != self.t as usize {
            return Err(cfg_err("blocks", format!("expected {} blocks, found {}", self.t, self.blocks.len())));
        }
        let len = self.n / self.t;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, spec) in self.blocks.iter().enumerate() {
            let path = format!("blocks[{i}]");
            let b = match spec {
                BlockSpec::Keyword(k) if k.eq_ignore_ascii_case("uniform") => BlockMass::uniform(len),
                BlockSpec::Keyword(k) => return Err(cfg_err(&path, format!("unknown keyword `{k}`"))),
                BlockSpec::Masses(m) => {
                    if m.len() != 1usize << len {
                        return Err(cfg_err(&path, format!("expected {} masses, found {}", 1usize << len, m.len())));
                    }
                    BlockMass::table(m.clone()).map_err(|e| cfg_err(&path, e.to_string()))?
                }
            };
            blocks.push(b);
        }
        let sigma = match &self.sigma {
            Some(s) => Permutation::new(s.clone()).map_err(|e| cfg_err("sigma", e.to_string()))?,
            None => Permutation::identity(self.n),
        };
        ProductDistribution::new(blocks, sigma)
    }

    pub fn parse(text: &str) -> Result<ProductDistribution> {
        let cfg: DistributionConfig = serde_json::from_str(text)?;
        cfg.build()
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<ProductDistribution> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Extends arity `n` with zero-fixed, ignored trailing variables so that `k` divides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Padding {
    pub original_n: u32,
    pub padded_n: u32,
}

impl Padding {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        check_arity(n)?;
        if k == 0 {
            return Err(param("k must be positive"));
        }
        let padded_n = n.div_ceil(k) * k;
        check_arity(padded_n)?;
        Ok(Padding { original_n: n, padded_n })
    }

    pub fn extra(&self) -> u32 {
        self.padded_n - self.original_n
    }

    /// `f'(x || p) = f(x)` for every padding value `p`.
    pub fn lift_table(&self, f: &TruthTable) -> Result<TruthTable> {
        if f.arity() != self.original_n {
            return Err(Error::ArityMismatch { expected: self.original_n, got: f.arity() });
        }
        let extra = self.extra();
        TruthTable::from_fn(self.padded_n, |idx| f.get(idx >> extra))
    }

    /// `h(x) = h'(x || 0...0)`.
    pub fn project_table(&self, h: &TruthTable) -> Result<TruthTable> {
        if h.arity() != self.padded_n {
            return Err(Error::ArityMismatch { expected: self.padded_n, got: h.arity() });
        }
        let extra = self.extra();
        TruthTable::from_fn(self.original_n, |idx| h.get(idx << extra))
    }

    /// The uniform distribution on the original variables with padding fixed to zero,
    /// as a `k`-product on `padded_n` variables.
    pub fn uniform_product(&self, k: u32) -> Result<ProductDistribution> {
        if !self.padded_n.is_multiple_of(k) {
            return Err(param(format!("k={k} does not divide padded arity {}", self.padded_n)));
        }
        let len = self.padded_n / k;
        let mut blocks = Vec::with_capacity(k as usize);
        for i in 0..k {
            let start = i * len;
            let real = self.original_n.saturating_sub(start).min(len);
            if real == len {
                blocks.push(BlockMass::uniform(len));
                continue;
            }
            let pad_mask = (1u32 << (len - real)) - 1;
            let w = 1.0 / (1u64 << real) as f64;
            let probs = (0..1u32 << len).map(|v| if v & pad_mask == 0 { w } else { 0.0 }).collect();
            blocks.push(BlockMass::table(probs)?);
        }
        ProductDistribution::new(blocks, Permutation::identity(self.padded_n))
    }

    pub fn lift_point(&self, x: Point) -> Result<Point> {
        if x.arity() != self.original_n {
            return Err(Error::ArityMismatch { expected: self.original_n, got: x.arity() });
        }
        Point::new(self.padded_n, x.index() << self.extra())
    }
}

/// Concatenates block values, block 1 most significant, into a layout index.
pub fn point_in_layout(blocks: &[u32], block_len: u32) -> u32 {
    blocks.iter().fold(0u32, |acc, &b| (acc << block_len) | b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{make_named, NamedFunction};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apply_perm_examples() {
        let z = Point::from_bits(&[1, 0]).unwrap();
        assert_eq!(Permutation::identity(2).apply(z).unwrap(), z);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(swap.apply(z).unwrap(), Point::from_bits(&[0, 1]).unwrap());
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(swap.apply(Point::from_bits(&[1, 1, 1]).unwrap()).is_err());
    }

    #[test]
    fn sample_degenerate_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = ProductDistribution::new(
            vec![BlockMass::point(3, 0).unwrap(), BlockMass::uniform(3)],
            Permutation::random(6, &mut rng),
        )
        .unwrap();
        for _ in 0..200 {
            let y = rho.sigma_inverse().apply(rho.sample(&mut rng)).unwrap();
            assert_eq!(y.index() >> 3, 0);
        }
    }

    #[test]
    fn sample_reversal_with_point_mass_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = ProductDistribution::new(
            vec![BlockMass::uniform(2), BlockMass::point(2, 0b11).unwrap()],
            Permutation::reversal(4),
        )
        .unwrap();
        for _ in 0..200 {
            let x = rho.sample(&mut rng);
            assert_eq!((x.bit(0), x.bit(1)), (1, 1));
        }
    }

    #[test]
    fn uniform_marginals_are_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = ProductDistribution::uniform(6, 3).unwrap();
        let draws = 20_000;
        let mut ones = [0u32; 6];
        for _ in 0..draws {
            let x = rho.sample(&mut rng);
            for (i, o) in ones.iter_mut().enumerate() {
                *o += u32::from(x.bit(i as u32));
            }
        }
        for o in ones {
            // 4 standard deviations of Bin(20000, 1/2)
            assert!((f64::from(o) - 10_000.0).abs() < 4.0 * 70.8);
        }
    }

    #[test]
    fn mass_examples() {
        let rho = ProductDistribution::uniform(6, 2).unwrap();
        assert_eq!(rho.mass(Point::new(6, 17).unwrap()).unwrap(), 1.0 / 64.0);
        let pm = ProductDistribution::new(
            vec![BlockMass::point(2, 1).unwrap(), BlockMass::point(2, 2).unwrap()],
            Permutation::identity(4),
        )
        .unwrap();
        for idx in 0..16 {
            assert_eq!(pm.mass_index(idx), if idx == 0b0110 { 1.0 } else { 0.0 });
        }
        let b = ProductDistribution::new(
            vec![BlockMass::bernoulli(&[0.25]).unwrap(), BlockMass::bernoulli(&[0.25]).unwrap()],
            Permutation::reversal(2),
        )
        .unwrap();
        let z = Point::from_bits(&[1, 1]).unwrap();
        assert!((b.mass(b.sigma().apply(z).unwrap()).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn masses_sum_to_one_and_match_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let blocks = (0..2)
            .map(|_| {
                let raw: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                let mut probs: Vec<f64> = raw.iter().map(|r| r / s).collect();
                let fix: f64 = probs[1..].iter().sum();
                probs[0] = 1.0 - fix;
                BlockMass::table(probs).unwrap()
            })
            .collect();
        let rho = ProductDistribution::new(blocks, Permutation::random(8, &mut rng)).unwrap();
        let total: f64 = (0..256).map(|i| rho.mass_index(i)).sum();
        assert!((total - 1.0).abs() < 1e-9);

        let draws = 100_000u32;
        let mut counts = vec![0u32; 256];
        for _ in 0..draws {
            counts[rho.sample_index(&mut rng) as usize] += 1;
        }
        for (idx, &c) in counts.iter().enumerate() {
            let p = rho.mass_index(idx as u32);
            let mean = p * f64::from(draws);
            let sd = (mean * (1.0 - p)).sqrt();
            assert!((f64::from(c) - mean).abs() <= 4.0 * sd + 1.0, "idx {idx}: {c} vs {mean}");
        }
    }

    #[test]
    fn config_parsing() {
        let rho = DistributionConfig::parse(r#"{"t":2,"n":4,"sigma":[3,2,1,0],"blocks":["uniform",[0.5,0.5,0,0]]}"#)
            .unwrap();
        assert_eq!(rho.arity(), 4);
        assert_eq!(rho.block_count(), 2);
        let back = rho.to_config().build().unwrap();
        for i in 0..16 {
            assert_eq!(back.mass_index(i), rho.mass_index(i));
        }
        assert!(DistributionConfig::parse(r#"{"t":3,"n":4,"blocks":["uniform","uniform","uniform"]}"#).is_err());
        let err = DistributionConfig::parse(r#"{"t":2,"n":4,"blocks":["uniform",[0.5,0.6,0,0]]}"#).unwrap_err();
        assert!(err.to_string().contains("blocks[1]"));
    }

    #[test]
    fn padding_preserves_function() {
        let f = make_named(NamedFunction::Maj, 7).unwrap();
        let pad = Padding::new(7, 3).unwrap();
        assert_eq!(pad.padded_n, 9);
        let lifted = pad.lift_table(&f).unwrap();
        assert_eq!(pad.project_table(&lifted).unwrap(), f);
        let rho = pad.uniform_product(3).unwrap();
        let total: f64 = (0..512).map(|i| rho.mass_index(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for idx in 0..512u32 {
            let expect = if idx & 0b11 == 0 { 1.0 / 128.0 } else { 0.0 };
            assert_eq!(rho.mass_index(idx), expect);
        }
    }

    proptest! {
        #[test]
        fn inverse_is_group_inverse(seed in any::<u64>(), n in 1u32..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Permutation::random(n, &mut rng);
            let z = Point::new(n, rng.gen_range(0..1u32 << n)).unwrap();
            let inv = p.inverse();
            prop_assert_eq!(inv.apply(p.apply(z).unwrap()).unwrap(), z);
            prop_assert_eq!(p.apply(inv.apply(z).unwrap()).unwrap(), z);
        }
    }
}
