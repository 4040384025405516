//! Bit-packed Boolean functions `{0,1}^n -> {-1,+1}`.
//!
//! A point `x = (x_1, ..., x_n)` is identified with the integer `idx(x)` whose
//! most significant bit is `x_1`. Bit `0` of the stored table encodes label
//! `+1` and bit `1` encodes `-1`, so a parity becomes a product of signs.

use std::fmt;
use std::ops::{Mul, MulAssign, Neg};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distrib::ProductDistribution;
use crate::error::{param, Error, Result};

/// Largest supported input arity.
pub const MAX_ARITY: u32 = 26;

/// An output value in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Label {
    /// `(-1)^bit`.
    #[inline]
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Label::Minus
        } else {
            Label::Plus
        }
    }

    #[inline]
    pub fn bit(self) -> bool {
        self == Label::Minus
    }

    #[inline]
    pub fn value(self) -> i8 {
        match self {
            Label::Plus => 1,
            Label::Minus => -1,
        }
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// Sign of a real number, with `0` mapped to `+1`.
    #[inline]
    pub fn sign_of(v: f64) -> Self {
        if v >= 0.0 {
            Label::Plus
        } else {
            Label::Minus
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Label::from_bit(rng.gen())
    }
}

impl Mul for Label {
    type Output = Label;
    #[inline]
    fn mul(self, rhs: Label) -> Label {
        Label::from_bit(self.bit() ^ rhs.bit())
    }
}

impl MulAssign for Label {
    #[inline]
    fn mul_assign(&mut self, rhs: Label) {
        *self = *self * rhs;
    }
}

impl Neg for Label {
    type Output = Label;
    #[inline]
    fn neg(self) -> Label {
        Label::from_bit(!self.bit())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Plus => write!(f, "+1"),
            Label::Minus => write!(f, "-1"),
        }
    }
}

/// A point of `{0,1}^n`, stored as its index with `x_1` most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    n: u32,
    idx: u32,
}

impl Point {
    pub fn new(n: u32, idx: u32) -> Result<Self> {
        check_arity(n)?;
        if u64::from(idx) >= 1u64 << n {
            return Err(param(format!("index {idx} out of range for n={n}")));
        }
        Ok(Point { n, idx })
    }

    #[inline]
    pub(crate) fn new_unchecked(n: u32, idx: u32) -> Self {
        debug_assert!(u64::from(idx) < 1u64 << n);
        Point { n, idx }
    }

    /// Builds a point from bits `x_1, ..., x_n` (each 0 or 1).
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let n = bits.len() as u32;
        check_arity(n)?;
        let mut idx = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(param(format!("bit value {b} is not 0 or 1")));
            }
            idx = (idx << 1) | u32::from(b);
        }
        Ok(Point { n, idx })
    }

    #[inline]
    pub fn arity(self) -> u32 {
        self.n
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.idx
    }

    /// Value of `x_{i+1}` (zero-based variable index).
    #[inline]
    pub fn bit(self, i: u32) -> u8 {
        ((self.idx >> (self.n - 1 - i)) & 1) as u8
    }

    pub fn to_bits(self) -> Vec<u8> {
        (0..self.n).map(|i| self.bit(i)).collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

pub(crate) fn check_arity(n: u32) -> Result<()> {
    if n == 0 || n > MAX_ARITY {
        return Err(param(format!("arity {n} outside 1..={MAX_ARITY}")));
    }
    Ok(())
}

/// A total Boolean function on `n` inputs, packed 64 points per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    n: u32,
    words: Vec<u64>,
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruthTable")
            .field("n", &self.n)
            .field("minus_count", &self.count_minus())
            .finish()
    }
}

impl TruthTable {
    pub fn constant(n: u32, label: Label) -> Result<Self> {
        check_arity(n)?;
        let mut t = TruthTable { n, words: vec![0; word_count(n)] };
        if label == Label::Minus {
            t.words.iter_mut().for_each(|w| *w = !0);
            t.clear_tail();
        }
        Ok(t)
    }

    /// Tabulates `f` over every index in `0..2^n`.
    pub fn from_fn(n: u32, mut f: impl FnMut(u32) -> Label) -> Result<Self> {
        check_arity(n)?;
        let mut words = vec![0u64; word_count(n)];
        for idx in 0..(1u32 << n) {
            if f(idx).bit() {
                words[(idx >> 6) as usize] |= 1 << (idx & 63);
            }
        }
        Ok(TruthTable { n, words })
    }

    pub fn random<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<Self> {
        check_arity(n)?;
        let mut t = TruthTable { n, words: (0..word_count(n)).map(|_| rng.gen()).collect() };
        t.clear_tail();
        Ok(t)
    }

    /// `f(x) = prod_i parts[i](block i of x)`, blocks contiguous and MSB first.
    pub fn block_product(parts: &[TruthTable]) -> Result<Self> {
        if parts.is_empty() {
            return Err(param("block product of zero parts"));
        }
        let n: u32 = parts.iter().map(|p| p.n).sum();
        check_arity(n)?;
        TruthTable::from_fn(n, |idx| {
            let mut shift = n;
            let mut out = Label::Plus;
            for p in parts {
                shift -= p.n;
                out *= p.get((idx >> shift) & ((1 << p.n) - 1));
            }
            out
        })
    }

    #[inline]
    pub fn arity(&self) -> u32 {
        self.n
    }

    /// Number of points, `2^n`.
    #[inline]
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Label at index `idx`; `idx` must be below `2^n`.
    #[inline]
    pub fn get(&self, idx: u32) -> Label {
        Label::from_bit((self.words[(idx >> 6) as usize] >> (idx & 63)) & 1 == 1)
    }

    #[inline]
    pub fn set(&mut self, idx: u32, label: Label) {
        let w = &mut self.words[(idx >> 6) as usize];
        let m = 1u64 << (idx & 63);
        if label.bit() {
            *w |= m;
        } else {
            *w &= !m;
        }
    }

    /// Flips the label at `idx`.
    pub fn toggle(&mut self, idx: u32) {
        self.words[(idx >> 6) as usize] ^= 1u64 << (idx & 63);
    }

    pub fn eval(&self, x: Point) -> Result<Label> {
        if x.n != self.n {
            return Err(Error::ArityMismatch { expected: self.n, got: x.n });
        }
        Ok(self.get(x.idx))
    }

    pub fn negated(&self) -> TruthTable {
        let mut t = TruthTable { n: self.n, words: self.words.iter().map(|w| !w).collect() };
        t.clear_tail();
        t
    }

    /// Number of points labelled `-1`.
    pub fn count_minus(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Number of points on which `self` and `other` disagree.
    pub fn hamming(&self, other: &TruthTable) -> Result<u64> {
        self.same_arity(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a ^ b).count_ones()))
            .sum())
    }

    /// Indices where `self` and `other` disagree, ascending.
    pub fn disagreements(&self, other: &TruthTable) -> Result<Vec<u32>> {
        self.same_arity(other)?;
        let mut out = Vec::new();
        for (wi, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut d = a ^ b;
            while d != 0 {
                let tz = d.trailing_zeros();
                out.push((wi as u32) << 6 | tz);
                d &= d - 1;
            }
        }
        Ok(out)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn same_arity(&self, other: &TruthTable) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ArityMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        if self.n < 6 {
            self.words[0] &= (1u64 << (1u32 << self.n)) - 1;
        }
    }

    /// Renders the two-line text format: `n=<n>` then `2^n` characters in `{0,1}`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() + 16);
        s.push_str(&format!("n={}\n", self.n));
        for idx in 0..(1u32 << self.n) {
            s.push(if self.get(idx).bit() { '1' } else { '0' });
        }
        s.push('\n');
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let n: u32 = header
            .trim()
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected `n=<int>`, got `{header}`") })?;
        check_arity(n).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let body = lines.next().unwrap_or("").trim_end_matches('\r');
        if body.len() != 1usize << n {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected {} characters, found {}", 1usize << n, body.len()),
            });
        }
        let mut t = TruthTable::constant(n, Label::Plus)?;
        for (idx, ch) in body.bytes().enumerate() {
            match ch {
                b'0' => {}
                b'1' => t.set(idx as u32, Label::Minus),
                other => {
                    return Err(Error::Parse {
                        line: 2,
                        msg: format!("invalid character `{}` at position {idx}", other as char),
                    })
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Parse { line: 3, msg: "trailing content".into() });
        }
        Ok(t)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[inline]
fn word_count(n: u32) -> usize {
    (1usize << n).div_ceil(64)
}

/// Named function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedFunction {
    /// Parity of all inputs.
    Xor,
    /// `x_i`, one-based.
    Dictator(u32),
    /// `-1` iff strictly more than half of the inputs are 1.
    Maj,
    /// Inner product mod 2 of the two halves.
    Ip,
    /// Generalized inner product with `k` rows: `XOR_j AND_i x_{i,j}`, row `i` being block `i`.
    Gip(u32),
}

impl fmt::Display for NamedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedFunction::Xor => write!(f, "XOR"),
            NamedFunction::Dictator(i) => write!(f, "DICTATOR({i})"),
            NamedFunction::Maj => write!(f, "MAJ"),
            NamedFunction::Ip => write!(f, "IP"),
            NamedFunction::Gip(k) => write!(f, "GIP({k})"),
        }
    }
}

impl FromStr for NamedFunction {
    type Err = Error;

    /// Accepts `XOR`, `MAJ`, `IP`, `DICTATOR(i)`/`DICT:i`, `GIP(k)`/`GIP:k`, case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let (head, arg) = match up.find(['(', ':']) {
            Some(p) => {
                let arg = up[p + 1..].trim_end_matches(')').trim();
                (&up[..p], Some(arg.parse::<u32>().map_err(|_| param(format!("bad argument in `{s}`")))?))
            }
            None => (up.as_str(), None),
        };
        match (head, arg) {
            ("XOR", None) => Ok(NamedFunction::Xor),
            ("MAJ", None) => Ok(NamedFunction::Maj),
            ("IP", None) => Ok(NamedFunction::Ip),
            ("DICT" | "DICTATOR", Some(i)) => Ok(NamedFunction::Dictator(i)),
            ("GIP", Some(k)) => Ok(NamedFunction::Gip(k)),
            _ => Err(param(format!("unknown function family `{s}`"))),
        }
    }
}

/// Exact table of a named function family.
pub fn make_named(family: NamedFunction, n: u32) -> Result<TruthTable> {
    check_arity(n)?;
    match family {
        NamedFunction::Xor => TruthTable::from_fn(n, |idx| Label::from_bit(idx.count_ones() & 1 == 1)),
        NamedFunction::Dictator(i) => {
            if i == 0 || i > n {
                return Err(param(format!("dictator index {i} outside 1..={n}")));
            }
            let shift = n - i;
            TruthTable::from_fn(n, |idx| Label::from_bit((idx >> shift) & 1 == 1))
        }
        NamedFunction::Maj => TruthTable::from_fn(n, |idx| Label::from_bit(2 * idx.count_ones() > n)),
        NamedFunction::Ip => {
            if !n.is_multiple_of(2) {
                return Err(param(format!("IP needs even n, got {n}")));
            }
            gip_table(n, 2)
        }
        NamedFunction::Gip(k) => {
            if k == 0 || !n.is_multiple_of(k) {
                return Err(param(format!("GIP({k}) needs k | n, got n={n}")));
            }
            gip_table(n, k)
        }
    }
}

fn gip_table(n: u32, k: u32) -> Result<TruthTable> {
    let len = n / k;
    let mask = (1u32 << len) - 1;
    TruthTable::from_fn(n, |idx| {
        let mut and = mask;
        for row in 0..k {
            and &= (idx >> ((k - 1 - row) * len)) & mask;
        }
        Label::from_bit(and.count_ones() & 1 == 1)
    })
}

/// `E_{x ~ dist}[f(x) g(x)]`, uniform when `dist` is `None`. Exact.
pub fn correlation(f: &TruthTable, g: &TruthTable, dist: Option<&ProductDistribution>) -> Result<f64> {
    match dist {
        None => {
            let d = f.hamming(g)? as f64;
            Ok(1.0 - 2.0 * d / f.len() as f64)
        }
        Some(rho) => {
            f.same_arity(g)?;
            if rho.arity() != f.n {
                return Err(Error::ArityMismatch { expected: f.n, got: rho.arity() });
            }
            let mut acc = 0.0;
            for idx in 0..(1u32 << f.n) {
                let m = rho.mass_index(idx);
                if m != 0.0 {
                    acc += m * (f.get(idx) * g.get(idx)).as_f64();
                }
            }
            Ok(acc)
        }
    }
}
