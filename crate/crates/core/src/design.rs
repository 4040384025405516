//! The seed table of the weak learner, its design projections, and duplicate-free
//! enumeration of the points those projections cover.
//!
//! Everything here works in block layout: a point's blocks are those of
//! `sigma^{-1}(z)`, block 0 in the most significant bits. Design indices `a` are
//! `k`-bit strings compared as integers with `a_0` the most significant bit.

use std::collections::HashSet;

use crate::boolfn::{Point, MAX_ARITY};
use crate::distrib::Permutation;
use crate::error::{param, Error, Result};

/// Largest supported party count (the hypothesis stores `2^k` random signs in a `u64`).
pub const MAX_PARTIES: u32 = 6;

/// Column `i` of a `k`-bit design string, column 0 most significant.
#[inline]
pub fn column_bit(a: u32, k: u32, i: u32) -> u32 {
    (a >> (k - 1 - i)) & 1
}

/// A `2 x k` table of `n/k`-bit slices, with row `b_i` of column `i` filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTable {
    k: u32,
    block_len: u32,
    entries: Vec<[Option<u32>; 2]>,
    b: u32,
}

impl SeedTable {
    /// Fills `B[b_i][i] = slices[i]`.
    pub fn new(k: u32, block_len: u32, b: u32, slices: &[u32]) -> Result<Self> {
        if k == 0 || k > MAX_PARTIES {
            return Err(param(format!("k={k} outside 1..={MAX_PARTIES}")));
        }
        if block_len == 0 || k * block_len > MAX_ARITY {
            return Err(param(format!("block length {block_len} invalid for k={k}")));
        }
        if slices.len() != k as usize || b >> k != 0 {
            return Err(param("need one slice per column and a k-bit guess string"));
        }
        if let Some(s) = slices.iter().find(|&&s| s >> block_len != 0) {
            return Err(param(format!("slice {s} wider than {block_len} bits")));
        }
        let entries = (0..k)
            .map(|i| {
                let mut col = [None, None];
                col[column_bit(b, k, i) as usize] = Some(slices[i as usize]);
                col
            })
            .collect();
        Ok(SeedTable { k, block_len, entries, b })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn block_len(&self) -> u32 {
        self.block_len
    }

    pub fn arity(&self) -> u32 {
        self.k * self.block_len
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    /// The complement of `b`.
    pub fn b_bar(&self) -> u32 {
        !self.b & ((1u32 << self.k) - 1)
    }

    pub fn entry(&self, row: u32, col: u32) -> Option<u32> {
        self.entries[col as usize][row as usize]
    }

    /// Places `blocks[i]` into the unfilled row of every column.
    pub fn place(&mut self, blocks: &[u32]) -> Result<()> {
        if blocks.len() != self.k as usize {
            return Err(param("need one block per column"));
        }
        let bbar = self.b_bar();
        for (i, col) in self.entries.iter_mut().enumerate() {
            col[column_bit(bbar, self.k, i as u32) as usize] = Some(blocks[i]);
        }
        Ok(())
    }

    /// `B|_a`: column `i` contributes `B[a_i][i]`, or stars when that cell is empty.
    pub fn project(&self, a: u32) -> PartialAssignment {
        let mut mask = 0u32;
        let mut value = 0u32;
        let full = (1u32 << self.block_len) - 1;
        for i in 0..self.k {
            mask <<= self.block_len;
            value <<= self.block_len;
            if let Some(v) = self.entry(column_bit(a, self.k, i), i) {
                mask |= full;
                value |= v;
            }
        }
        PartialAssignment { n: self.arity(), mask, value }
    }

    /// The block restrictions whose union is the set of points covered by
    /// `B|_a` over all `a < b_bar`, in the order the ascending scan over `a`
    /// first reaches them: one restriction per column `j` with `b_j = 0`.
    pub fn restrictions(&self) -> Vec<BlockRestriction> {
        (0..self.k)
            .filter(|&j| column_bit(self.b, self.k, j) == 0)
            .map(|j| BlockRestriction { block: j, value: self.entry(0, j).expect("row b_j is filled") })
            .collect()
    }
}

/// Positions fixed by `mask` carry the matching bits of `value`; the rest are stars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialAssignment {
    pub n: u32,
    pub mask: u32,
    pub value: u32,
}

impl PartialAssignment {
    pub fn stars(&self) -> u32 {
        self.n - self.mask.count_ones()
    }

    /// Number of completions, `2^stars`.
    pub fn consistent_count(&self) -> u64 {
        1u64 << self.stars()
    }

    pub fn is_consistent(&self, y: u32) -> bool {
        y & self.mask == self.value
    }

    /// The assignment seen in point coordinates after applying `sigma`.
    pub fn permuted(&self, sigma: &Permutation) -> PartialAssignment {
        PartialAssignment { n: self.n, mask: sigma.apply_index(self.mask), value: sigma.apply_index(self.value) }
    }

    /// Completions in ascending index order.
    pub fn completions(&self) -> Completions {
        Completions { mask: self.mask, value: self.value, limit: 1u64 << self.n, next: Some(self.value) }
    }
}

/// Ascending iterator over `{ y : y & mask == value }`.
#[derive(Debug, Clone)]
pub struct Completions {
    mask: u32,
    value: u32,
    limit: u64,
    next: Option<u32>,
}

impl Iterator for Completions {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        let succ = ((u64::from(cur | self.mask) + 1) & !u64::from(self.mask)) | u64::from(self.value);
        self.next = if succ < self.limit && succ > u64::from(cur) { Some(succ as u32) } else { None };
        Some(cur)
    }
}

/// Points consistent with `sigma(pa)`, ascending by index.
pub fn enumerate_consistent(pa: &PartialAssignment, sigma: &Permutation) -> impl Iterator<Item = Point> {
    let n = pa.n;
    pa.permuted(sigma).completions().map(move |z| Point::new_unchecked(n, z))
}

/// All points whose layout block `block` equals `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRestriction {
    pub block: u32,
    pub value: u32,
}

impl BlockRestriction {
    pub fn assignment(&self, k: u32, block_len: u32) -> PartialAssignment {
        let shift = (k - 1 - self.block) * block_len;
        PartialAssignment {
            n: k * block_len,
            mask: ((1u32 << block_len) - 1) << shift,
            value: self.value << shift,
        }
    }
}

/// Log of block restrictions already queried, stored by representative.
#[derive(Debug, Clone, Default)]
pub struct History {
    k: u32,
    block_len: u32,
    seen: Vec<HashSet<u32>>,
}

impl History {
    pub fn new(k: u32, block_len: u32) -> Self {
        History { k, block_len, seen: vec![HashSet::new(); k as usize] }
    }

    pub fn len(&self) -> usize {
        self.seen.iter().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, r: BlockRestriction) -> bool {
        self.seen[r.block as usize].contains(&r.value)
    }

    /// Whether the layout point `y` lies in a logged restriction.
    #[inline]
    pub fn covers(&self, y: u32) -> bool {
        let mask = (1u32 << self.block_len) - 1;
        (0..self.k).any(|i| {
            let set = &self.seen[i as usize];
            !set.is_empty() && set.contains(&((y >> ((self.k - 1 - i) * self.block_len)) & mask))
        })
    }

    pub fn record(&mut self, r: BlockRestriction) {
        self.seen[r.block as usize].insert(r.value);
    }
}

/// Enumerates the union of `restrictions` in order, skipping every point that lies
/// in a restriction logged in `history` (including earlier ones from this call),
/// and logs each restriction once its points have been produced.
///
/// `visit` receives each new point (in point coordinates, ascending within a
/// restriction) together with its layout index.
pub fn dedup_enumerate(
    restrictions: &[BlockRestriction],
    history: &mut History,
    sigma: &Permutation,
    mut visit: impl FnMut(Point, u32),
) -> Result<()> {
    let (k, len) = (history.k, history.block_len);
    if sigma.len() != k * len {
        return Err(Error::ArityMismatch { expected: k * len, got: sigma.len() });
    }
    let sigma_inv = sigma.inverse();
    for &r in restrictions {
        if r.block >= k || r.value >> len != 0 {
            return Err(param(format!("restriction {r:?} does not fit {k} blocks of {len} bits")));
        }
        if history.contains(r) {
            continue;
        }
        for z in enumerate_consistent(&r.assignment(k, len), sigma) {
            let y = sigma_inv.apply_index(z.index());
            if !history.covers(y) {
                visit(z, y);
            }
        }
        history.record(r);
    }
    Ok(())
}
