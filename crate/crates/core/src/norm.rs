//! The k-party norm
//!
//! `R_k(f) = E[ prod_{e in {0,1}^k} f(sigma(x_1^{e_1} || ... || x_k^{e_k})) ]`
//!
//! over independent slices `x_i^0, x_i^1` of `n/k` bits each, together with the
//! correlation bound it implies for low-cost protocols and a Chernoff half-width.
//!
//! The exact evaluators use the factorisation
//! `sum_{x^0_k, x^1_k} prod_e f(..) = (sum_x U(x))^2`, where `U(x)` is the product
//! over the first `k-1` coordinates of `e` with the last slice set to `x`.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{correlation, Point, TruthTable};
use crate::distrib::{Permutation, ProductDistribution};
use crate::error::{param, Error, Result};
use crate::oracle::LabelOracle;
use crate::protocol::NofProtocol;

/// Confidence used for reported half-widths.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum NormMethod {
    Exact,
    WeightedExact,
    MonteCarlo { samples: u64, halfwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    #[serde(flatten)]
    pub method: NormMethod,
}

impl NormResult {
    pub fn halfwidth(&self) -> f64 {
        match self.method {
            NormMethod::MonteCarlo { halfwidth, .. } => halfwidth,
            _ => 0.0,
        }
    }
}

fn check_split(n: u32, k: u32) -> Result<u32> {
    if k == 0 || k > n || !n.is_multiple_of(k) {
        return Err(param(format!("k={k} must divide n={n}")));
    }
    if k > 16 {
        return Err(param(format!("k={k} is too large")));
    }
    Ok(n / k)
}

/// `f` read in block layout: `g[y] = f(sigma(y))` as `+1`/`-1`.
fn layout_signs(f: &TruthTable, sigma: &Permutation) -> Vec<i8> {
    (0..f.len() as u32).map(|y| f.get(sigma.apply_index(y)).value()).collect()
}

/// Prefix layouts `x_1^{e_1} || ... || x_{k-1}^{e_{k-1}}` for an outer index that
/// packs the `2(k-1)` slices as `[x_1^0, x_1^1, x_2^0, ...]`, most significant first.
fn prefixes(outer: u64, k: u32, len: u32, out: &mut [u32]) {
    let mask = (1u64 << len) - 1;
    let slots = 2 * (k - 1);
    for (e, p) in out.iter_mut().enumerate() {
        let mut acc = 0u32;
        for i in 0..k - 1 {
            let row = (e >> (k - 2 - i)) & 1;
            let slot = 2 * i + row as u32;
            let v = (outer >> ((slots - 1 - slot) * len)) & mask;
            acc = (acc << len) | v as u32;
        }
        *p = acc;
    }
}

/// Exact `R_k(f)` with blocks taken from `sigma^{-1}(x)`.
pub fn norm_exact(f: &TruthTable, k: u32, sigma: &Permutation) -> Result<NormResult> {
    let n = f.arity();
    let len = check_split(n, k)?;
    if sigma.len() != n {
        return Err(Error::ArityMismatch { expected: n, got: sigma.len() });
    }
    let g = layout_signs(f, sigma);
    let outer_bits = 2 * (k - 1) * len;
    let total: u128 = (0..1u64 << outer_bits)
        .into_par_iter()
        .map_init(
            || vec![0u32; 1 << (k - 1)],
            |pre, outer| {
                prefixes(outer, k, len, pre);
                let s: i64 = (0..1u32 << len)
                    .map(|x| pre.iter().map(|&p| i64::from(g[((p << len) | x) as usize])).product::<i64>())
                    .sum();
                (s * s) as u128
            },
        )
        .sum();
    let value = total as f64 / 2f64.powi(2 * n as i32);
    Ok(NormResult { value, method: NormMethod::Exact })
}

/// Exact `R_k(f o rho)`: slices `x_i^0, x_i^1` drawn from the block masses of `rho`.
pub fn norm_weighted(f: &TruthTable, rho: &ProductDistribution) -> Result<NormResult> {
    let n = f.arity();
    if rho.arity() != n {
        return Err(Error::ArityMismatch { expected: n, got: rho.arity() });
    }
    let k = rho.block_count();
    let len = check_split(n, k)?;
    let g = layout_signs(f, rho.sigma());
    let blocks = rho.blocks();
    let outer_bits = 2 * (k - 1) * len;
    let mask = (1u64 << len) - 1;
    let chunks = 256u64.min(1 << outer_bits);
    let per = (1u64 << outer_bits) / chunks;
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut pre = vec![0u32; 1 << (k - 1)];
            let mut acc = 0.0;
            for outer in c * per..(c + 1) * per {
                let mut w = 1.0;
                for slot in 0..2 * (k - 1) {
                    let v = (outer >> ((2 * (k - 1) - 1 - slot) * len)) & mask;
                    w *= blocks[(slot / 2) as usize].mass(v as u32);
                }
                if w == 0.0 {
                    continue;
                }
                prefixes(outer, k, len, &mut pre);
                let last = &blocks[(k - 1) as usize];
                let s: f64 = (0..1u32 << len)
                    .map(|x| {
                        let m = last.mass(x);
                        if m == 0.0 {
                            return 0.0;
                        }
                        let u: i32 = pre.iter().map(|&p| i32::from(g[((p << len) | x) as usize])).product();
                        m * f64::from(u)
                    })
                    .sum();
                acc += w * s * s;
            }
            acc
        })
        .collect();
    Ok(NormResult { value: partial.iter().sum(), method: NormMethod::WeightedExact })
}

/// Base-2 log of the work `norm_exact` performs; callers switch to sampling above a budget.
pub fn exact_cost_log2(n: u32, k: u32) -> u32 {
    let len = n / k.max(1);
    2 * n - len + (k - 1)
}

/// Monte Carlo estimate of `R_k(f)` through membership queries.
///
/// Each sample draws `2k` uniform slices and multiplies the `2^k` labels. The
/// half-width is the Chernoff half-width of the `+1` frequency, doubled for the
/// `[-1, 1]` scale, at confidence `1 - DEFAULT_DELTA`.
pub fn norm_estimate<O: LabelOracle + ?Sized>(
    o: &mut O,
    k: u32,
    sigma: &Permutation,
    samples: u64,
    rng: &mut dyn RngCore,
) -> Result<NormResult> {
    let n = o.arity();
    let len = check_split(n, k)?;
    if sigma.len() != n {
        return Err(Error::ArityMismatch { expected: n, got: sigma.len() });
    }
    if samples == 0 {
        return Err(param("samples must be at least 1"));
    }
    let mut slices = vec![[0u32; 2]; k as usize];
    let mut plus = 0u64;
    for _ in 0..samples {
        for s in slices.iter_mut() {
            *s = [rng.gen_range(0..1u32 << len), rng.gen_range(0..1u32 << len)];
        }
        let mut prod = 1i8;
        for e in 0..1u32 << k {
            let y = slices
                .iter()
                .enumerate()
                .fold(0u32, |acc, (i, s)| (acc << len) | s[((e >> (k - 1 - i as u32)) & 1) as usize]);
            let z = Point::new_unchecked(n, sigma.apply_index(y));
            prod *= o.mq(z, rng).value();
        }
        if prod == 1 {
            plus += 1;
        }
    }
    let value = 2.0 * plus as f64 / samples as f64 - 1.0;
    let halfwidth = 2.0 * chernoff_halfwidth(samples, DEFAULT_DELTA)?;
    Ok(NormResult { value, method: NormMethod::MonteCarlo { samples, halfwidth } })
}

/// Smallest `t/m` with `exp(-t^2 / (2(m/2 + t/3))) <= delta`.
///
/// The bound is taken at `lambda = m/2`; the quadratic `t^2 - (2L/3)t - Lm = 0`
/// with `L = ln(1/delta)` has the closed-form positive root used here.
pub fn chernoff_halfwidth(m: u64, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(param("sample count must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param(format!("delta={delta} outside (0,1)")));
    }
    let l = (1.0 / delta).ln();
    let m = m as f64;
    let t = l / 3.0 + (l * l / 9.0 + l * m).sqrt();
    Ok(t / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub norm: f64,
    pub cost: u32,
    pub holds: bool,
}

/// Checks `|E[f * pi]| <= 2^cost * R_k(f)^{1/2^k}` under the uniform distribution,
/// with the norm taken over the protocol's own partition.
pub fn check_corr_bound(f: &TruthTable, pi: &NofProtocol) -> Result<CorrBoundReport> {
    if f.arity() != pi.arity() {
        return Err(Error::ArityMismatch { expected: pi.arity(), got: f.arity() });
    }
    let k = pi.parties();
    let lhs = correlation(f, &pi.materialize(), None)?.abs();
    let norm = norm_exact(f, k, pi.partition().sigma())?.value;
    let clamped = if norm < 1e-12 { 0.0 } else { norm };
    let rhs = 2f64.powi(pi.cost() as i32) * clamped.powf(1.0 / f64::from(1u32 << k));
    Ok(CorrBoundReport { lhs, rhs, norm, cost: pi.cost(), holds: lhs <= rhs + 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{make_named, Label, NamedFunction};
    use crate::distrib::BlockMass;
    use crate::protocol::Partition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the defining expectation over all `2^{2n}` seeds.
    fn brute_norm(f: &TruthTable, k: u32, sigma: &Permutation) -> f64 {
        let n = f.arity();
        let len = n / k;
        let mut sum = 0i64;
        for seed in 0..1u64 << (2 * n) {
            let slice = |i: u32, row: u32| ((seed >> ((2 * i + row) * len)) & ((1 << len) - 1)) as u32;
            let mut prod = 1i64;
            for e in 0..1u32 << k {
                let mut y = 0u32;
                for i in 0..k {
                    y = (y << len) | slice(i, (e >> i) & 1);
                }
                prod *= i64::from(f.get(sigma.apply_index(y)).value());
            }
            sum += prod;
        }
        sum as f64 / (1u64 << (2 * n)) as f64
    }

    #[test]
    fn factorised_matches_direct_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, k) in [(4, 2), (6, 2), (6, 3), (4, 4), (4, 1), (6, 1)] {
            for _ in 0..3 {
                let f = TruthTable::random(n, &mut rng).unwrap();
                let sigma = Permutation::random(n, &mut rng);
                let fast = norm_exact(&f, k, &sigma).unwrap().value;
                assert!((fast - brute_norm(&f, k, &sigma)).abs() < 1e-15, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn named_norms() {
        let id = Permutation::identity(4);
        assert_eq!(norm_exact(&TruthTable::constant(4, Label::Plus).unwrap(), 2, &id).unwrap().value, 1.0);
        assert_eq!(norm_exact(&make_named(NamedFunction::Xor, 4).unwrap(), 2, &id).unwrap().value, 1.0);
        assert_eq!(norm_exact(&make_named(NamedFunction::Ip, 4).unwrap(), 2, &id).unwrap().value, 0.25);
    }

    #[test]
    fn weighted_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = TruthTable::random(6, &mut rng).unwrap();
        let rho = ProductDistribution::uniform(6, 2).unwrap();
        let a = norm_exact(&f, 2, rho.sigma()).unwrap().value;
        let b = norm_weighted(&f, &rho).unwrap().value;
        assert!((a - b).abs() < 1e-12);

        let points = ProductDistribution::new(
            vec![BlockMass::point(3, 5).unwrap(), BlockMass::point(3, 2).unwrap()],
            Permutation::identity(6),
        )
        .unwrap();
        assert!((norm_weighted(&f, &points).unwrap().value - 1.0).abs() < 1e-12);

        let ip = make_named(NamedFunction::Ip, 4).unwrap();
        let half_point = ProductDistribution::new(
            vec![BlockMass::uniform(2), BlockMass::point(2, 1).unwrap()],
            Permutation::identity(4),
        )
        .unwrap();
        assert!((norm_weighted(&ip, &half_point).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_of_xor_is_exact() {
        let f = make_named(NamedFunction::Xor, 8).unwrap();
        let c = crate::oracle::Concept::deterministic(f, ProductDistribution::uniform(8, 2).unwrap()).unwrap();
        let mut o = crate::oracle::MqOracle::new(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = norm_estimate(&mut o, 2, &Permutation::identity(8), 500, &mut rng).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.halfwidth() > 0.0);
    }

    #[test]
    fn chernoff_examples() {
        let bisect = |m: f64, delta: f64| {
            let (mut lo, mut hi) = (0.0f64, 10.0 * m);
            for _ in 0..200 {
                let t = 0.5 * (lo + hi);
                if (-t * t / (2.0 * (m / 2.0 + t / 3.0))).exp() <= delta {
                    hi = t;
                } else {
                    lo = t;
                }
            }
            hi / m
        };
        let h = chernoff_halfwidth(10_000, 0.05).unwrap();
        assert!((h - bisect(1e4, 0.05)).abs() < 1e-9);
        assert!(chernoff_halfwidth(10_000, 0.999_999).unwrap() < 1e-4);
        let ratio = chernoff_halfwidth(10_000, 0.05).unwrap() / chernoff_halfwidth(20_000, 0.05).unwrap();
        assert!((ratio - 2f64.sqrt()).abs() < 0.01);
        assert!(chernoff_halfwidth(0, 0.5).is_err());
        assert!(chernoff_halfwidth(5, 1.0).is_err());
    }

    #[test]
    fn corr_bound_examples() {
        let p = Partition::contiguous(4, 2).unwrap();
        let c = NofProtocol::constant(p.clone(), Label::Plus).unwrap();
        let r = check_corr_bound(&TruthTable::constant(4, Label::Plus).unwrap(), &c).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 2.0));
        let r = check_corr_bound(&make_named(NamedFunction::Ip, 4).unwrap(), &c).unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-12);
        assert!((r.rhs - 2.0 * 0.25f64.powf(0.25)).abs() < 1e-12);
        assert!(r.holds);
        let par = NofProtocol::parity(p).unwrap();
        let r = check_corr_bound(&make_named(NamedFunction::Xor, 4).unwrap(), &par).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (1.0, 4.0, true));
    }
}
