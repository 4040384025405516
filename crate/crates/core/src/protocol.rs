//! Number-on-forehead protocols: simulation, cost accounting, exhaustive verification.
//!
//! The `n` input variables are split into `k` blocks of `n/k` bits through a
//! permutation `sigma`: block `i` of `x` is block `i` of `sigma^{-1}(x)`, the
//! same layout convention as [`ProductDistribution`](crate::distrib::ProductDistribution).
//! Party `i` sees every block except block `i`.
//!
//! Every message is one broadcast bit and the last bit sent is the output, so a
//! leaf's label is `(-1)^{last bit}` and the cost of a protocol is its depth.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boolfn::{check_arity, Label, TruthTable};
use crate::distrib::Permutation;
use crate::error::{param, Error, Result};

/// An equal split of `n` variables into `k` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: u32,
    block_len: u32,
    sigma: Permutation,
    sigma_inv: Permutation,
}

impl Partition {
    pub fn new(k: u32, sigma: Permutation) -> Result<Self> {
        let n = sigma.len();
        check_arity(n)?;
        if k < 2 || !n.is_multiple_of(k) {
            return Err(param(format!("need k >= 2 dividing n, got k={k}, n={n}")));
        }
        let sigma_inv = sigma.inverse();
        Ok(Partition { k, block_len: n / k, sigma, sigma_inv })
    }

    /// Contiguous blocks, block 1 holding the most significant bits.
    pub fn contiguous(n: u32, k: u32) -> Result<Self> {
        Partition::new(k, Permutation::identity(n))
    }

    pub fn arity(&self) -> u32 {
        self.sigma.len()
    }

    pub fn parties(&self) -> u32 {
        self.k
    }

    pub fn block_len(&self) -> u32 {
        self.block_len
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    /// `sigma^{-1}(x)`: the point with its blocks laid out contiguously.
    #[inline]
    pub fn layout(&self, x: u32) -> u32 {
        self.sigma_inv.apply_index(x)
    }

    #[inline]
    pub fn block(&self, layout: u32, i: u32) -> u32 {
        let shift = (self.k - 1 - i) * self.block_len;
        (layout >> shift) & ((1u32 << self.block_len) - 1)
    }

    /// Arity of a party's view: all blocks but one.
    pub fn visible_arity(&self) -> u32 {
        (self.k - 1) * self.block_len
    }

    /// Blocks other than `party`, concatenated in order.
    #[inline]
    pub fn visible(&self, layout: u32, party: u32) -> u32 {
        let low_bits = (self.k - 1 - party) * self.block_len;
        let low = layout & ((1u32 << low_bits) - 1);
        let high = layout >> (low_bits + self.block_len);
        (high << low_bits) | low
    }

    /// Inverse of [`visible`](Self::visible) with `party`'s own block set to `own`.
    #[inline]
    pub fn insert_block(&self, visible: u32, party: u32, own: u32) -> u32 {
        let low_bits = (self.k - 1 - party) * self.block_len;
        let low = visible & ((1u32 << low_bits) - 1);
        let high = visible >> low_bits;
        (((high << self.block_len) | own) << low_bits) | low
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// End of the protocol; the output is the last broadcast bit.
    Output,
    Speak {
        speaker: u32,
        /// Message bit as a function of the speaker's view (`Minus` encodes bit 1).
        message: TruthTable,
        children: Box<[Node; 2]>,
    },
}

impl Node {
    pub fn speak(speaker: u32, message: TruthTable, zero: Node, one: Node) -> Node {
        Node::Speak { speaker, message, children: Box::new([zero, one]) }
    }

    fn depth(&self) -> u32 {
        match self {
            Node::Output => 0,
            Node::Speak { children, .. } => 1 + children[0].depth().max(children[1].depth()),
        }
    }

    fn min_depth(&self) -> u32 {
        match self {
            Node::Output => 0,
            Node::Speak { children, .. } => 1 + children[0].min_depth().min(children[1].min_depth()),
        }
    }
}

/// A deterministic k-party number-on-forehead protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct NofProtocol {
    partition: Partition,
    root: Node,
    cost: u32,
}

impl NofProtocol {
    pub fn new(partition: Partition, root: Node) -> Result<Self> {
        if matches!(root, Node::Output) {
            return Err(Error::Malformed("a protocol must broadcast at least its output bit".into()));
        }
        validate(&partition, &root)?;
        let cost = root.depth();
        Ok(NofProtocol { partition, root, cost })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn parties(&self) -> u32 {
        self.partition.k
    }

    pub fn arity(&self) -> u32 {
        self.partition.arity()
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Bits broadcast on the longest execution path, output bit included.
    pub fn cost(&self) -> u32 {
        self.cost
    }

    /// Whether every execution path broadcasts exactly `cost` bits.
    pub fn is_depth_uniform(&self) -> bool {
        self.root.min_depth() == self.cost
    }

    pub fn run(&self, x: u32) -> Label {
        self.run_traced(x).0
    }

    /// The output together with the broadcast transcript `(speaker, bit)`.
    pub fn run_traced(&self, x: u32) -> (Label, Vec<(u32, bool)>) {
        let y = self.partition.layout(x);
        let mut node = &self.root;
        let mut transcript = Vec::with_capacity(self.cost as usize);
        let mut last = false;
        while let Node::Speak { speaker, message, children } = node {
            last = message.get(self.partition.visible(y, *speaker)).bit();
            transcript.push((*speaker, last));
            node = &children[usize::from(last)];
        }
        (Label::from_bit(last), transcript)
    }

    pub fn materialize(&self) -> TruthTable {
        TruthTable::from_fn(self.arity(), |x| self.run(x)).expect("partition arity was validated")
    }

    pub fn verify_computes(&self, f: &TruthTable) -> Result<bool> {
        if f.arity() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: f.arity() });
        }
        Ok(self.materialize().hamming(f)? == 0)
    }

    /// Cost-1 protocol with a fixed output.
    pub fn constant(partition: Partition, label: Label) -> Result<Self> {
        let msg = TruthTable::constant(partition.visible_arity(), label)?;
        NofProtocol::new(partition, Node::speak(0, msg, Node::Output, Node::Output))
    }

    /// Cost-1 protocol in which `speaker` announces `g` of its view.
    ///
    /// `g` receives a layout index whose block `speaker` is zero.
    pub fn broadcast(partition: Partition, speaker: u32, mut g: impl FnMut(u32) -> Label) -> Result<Self> {
        if speaker >= partition.k {
            return Err(param(format!("speaker {speaker} out of range for {} parties", partition.k)));
        }
        let msg = TruthTable::from_fn(partition.visible_arity(), |v| g(partition.insert_block(v, speaker, 0)))?;
        NofProtocol::new(partition, Node::speak(speaker, msg, Node::Output, Node::Output))
    }

    /// Cost-1 protocol computing the variable `var` (zero-based), announced by the
    /// party after the owner of that variable.
    pub fn dictator(partition: Partition, var: u32) -> Result<Self> {
        let n = partition.arity();
        if var >= n {
            return Err(param(format!("variable {var} out of range for n={n}")));
        }
        let pos = partition.sigma.as_slice()[var as usize];
        let owner = pos / partition.block_len;
        let speaker = (owner + 1) % partition.k;
        NofProtocol::broadcast(partition, speaker, |y| Label::from_bit((y >> (n - 1 - pos)) & 1 == 1))
    }

    /// Cost-2 protocol for the parity of all `n` bits.
    pub fn parity(partition: Partition) -> Result<Self> {
        let va = partition.visible_arity();
        let first = TruthTable::from_fn(va, |v| Label::from_bit(v.count_ones() % 2 == 1))?;
        let second = |flip: bool| {
            TruthTable::from_fn(va, |v| {
                let y = partition.insert_block(v, 1, 0);
                let own_block0 = partition.block(y, 0);
                Label::from_bit((own_block0.count_ones() % 2 == 1) ^ flip)
            })
        };
        let root = Node::speak(
            0,
            first,
            Node::speak(1, second(false)?, Node::Output, Node::Output),
            Node::speak(1, second(true)?, Node::Output, Node::Output),
        );
        NofProtocol::new(partition, root)
    }

    /// A complete tree of the given depth with random speakers and messages.
    pub fn random<R: Rng + ?Sized>(partition: Partition, depth: u32, rng: &mut R) -> Result<Self> {
        if depth == 0 {
            return Err(param("depth must be at least 1"));
        }
        fn grow<R: Rng + ?Sized>(p: &Partition, depth: u32, rng: &mut R) -> Result<Node> {
            if depth == 0 {
                return Ok(Node::Output);
            }
            let speaker = rng.gen_range(0..p.k);
            let msg = TruthTable::random(p.visible_arity(), rng)?;
            let zero = grow(p, depth - 1, rng)?;
            let one = grow(p, depth - 1, rng)?;
            Ok(Node::speak(speaker, msg, zero, one))
        }
        let root = grow(&partition, depth, rng)?;
        NofProtocol::new(partition, root)
    }

    /// Text form: a header line `nof k=<k> sigma=<i,j,...>` followed by the tree as
    /// nested `(speak <party> <bits> <child0> <child1>)` terms, with `out` for leaves.
    pub fn to_text(&self) -> String {
        let sigma: Vec<String> = self.partition.sigma.as_slice().iter().map(u32::to_string).collect();
        let mut s = format!("nof k={} sigma={}\n", self.partition.k, sigma.join(","));
        write_node(&self.root, &mut s);
        s.push('\n');
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty protocol".into() })?;
        let mut k = None;
        let mut sigma = None;
        let mut words = header.split_whitespace();
        if words.next() != Some("nof") {
            return Err(Error::Parse { line: 1, msg: "expected header starting with `nof`".into() });
        }
        for w in words {
            let bad = || Error::Parse { line: 1, msg: format!("bad header field `{w}`") };
            if let Some(v) = w.strip_prefix("k=") {
                k = Some(v.parse::<u32>().map_err(|_| bad())?);
            } else if let Some(v) = w.strip_prefix("sigma=") {
                let map: std::result::Result<Vec<u32>, _> = v.split(',').map(str::parse).collect();
                sigma = Some(map.map_err(|_| bad())?);
            } else {
                return Err(bad());
            }
        }
        let k = k.ok_or_else(|| Error::Parse { line: 1, msg: "missing k".into() })?;
        let sigma = sigma.ok_or_else(|| Error::Parse { line: 1, msg: "missing sigma".into() })?;
        let partition = Partition::new(k, Permutation::new(sigma)?)?;
        let body: String = lines.collect::<Vec<_>>().join(" ");
        let spaced = body.replace('(', " ( ").replace(')', " ) ");
        let mut tokens = spaced.split_whitespace();
        let root = parse_node(&mut tokens, partition.visible_arity())?;
        if let Some(t) = tokens.next() {
            return Err(Error::Parse { line: 2, msg: format!("trailing token `{t}`") });
        }
        NofProtocol::new(partition, root)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        NofProtocol::parse_text(&std::fs::read_to_string(path)?)
    }
}

fn validate(p: &Partition, node: &Node) -> Result<()> {
    match node {
        Node::Output => Ok(()),
        Node::Speak { speaker, message, children } => {
            if *speaker >= p.k {
                return Err(Error::Malformed(format!("speaker {speaker} out of range for {} parties", p.k)));
            }
            if message.arity() != p.visible_arity() {
                return Err(Error::Malformed(format!(
                    "message of party {speaker} reads {} bits, the view has {}",
                    message.arity(),
                    p.visible_arity()
                )));
            }
            validate(p, &children[0])?;
            validate(p, &children[1])
        }
    }
}

fn write_node(node: &Node, out: &mut String) {
    match node {
        Node::Output => out.push_str("out"),
        Node::Speak { speaker, message, children } => {
            let bits: String = (0..message.len() as u32).map(|i| if message.get(i).bit() { '1' } else { '0' }).collect();
            let _ = write!(out, "(speak {speaker} {bits} ");
            write_node(&children[0], out);
            out.push(' ');
            write_node(&children[1], out);
            out.push(')');
        }
    }
}

fn parse_node<'a>(tokens: &mut impl Iterator<Item = &'a str>, visible_arity: u32) -> Result<Node> {
    let err = |msg: String| Error::Parse { line: 2, msg };
    match tokens.next() {
        Some("out") => Ok(Node::Output),
        Some("(") => {
            if tokens.next() != Some("speak") {
                return Err(err("expected `speak`".into()));
            }
            let speaker = tokens
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| err("expected a party number".into()))?;
            let bits = tokens.next().ok_or_else(|| err("expected a message table".into()))?;
            if bits.len() != 1usize << visible_arity || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(err(format!("message table must be {} characters of 0/1", 1usize << visible_arity)));
            }
            let bytes = bits.as_bytes();
            let message = TruthTable::from_fn(visible_arity, |i| Label::from_bit(bytes[i as usize] == b'1'))?;
            let zero = parse_node(tokens, visible_arity)?;
            let one = parse_node(tokens, visible_arity)?;
            if tokens.next() != Some(")") {
                return Err(err("expected `)`".into()));
            }
            Ok(Node::speak(speaker, message, zero, one))
        }
        Some(t) => Err(err(format!("unexpected token `{t}`"))),
        None => Err(err("unexpected end of protocol".into())),
    }
}

/// A public-coin protocol: a uniform choice among deterministic members.
#[derive(Debug, Clone)]
pub struct RandomizedProtocol {
    members: Vec<NofProtocol>,
}

impl RandomizedProtocol {
    pub fn new(members: Vec<NofProtocol>) -> Result<Self> {
        let first = members.first().ok_or_else(|| param("a randomized protocol needs at least one member"))?;
        if members.iter().any(|m| m.partition != first.partition) {
            return Err(Error::Malformed("members must share the partition".into()));
        }
        Ok(RandomizedProtocol { members })
    }

    pub fn members(&self) -> &[NofProtocol] {
        &self.members
    }

    pub fn cost(&self) -> u32 {
        self.members.iter().map(NofProtocol::cost).max().unwrap_or(0)
    }

    /// `max_x Pr_coin[pi_coin(x) != f(x)]`, exact over the coin space.
    pub fn rand_error(&self, f: &TruthTable) -> Result<f64> {
        let n = self.members[0].arity();
        if f.arity() != n {
            return Err(Error::ArityMismatch { expected: n, got: f.arity() });
        }
        let tables: Vec<TruthTable> = self.members.iter().map(NofProtocol::materialize).collect();
        let worst = (0..1u32 << n)
            .map(|x| tables.iter().filter(|t| t.get(x) != f.get(x)).count())
            .max()
            .unwrap_or(0);
        Ok(worst as f64 / tables.len() as f64)
    }
}

/// A fixed, seeded set of partitions: contiguous blocks under every cyclic
/// rotation, the reversal, and `random_count` random permutations.
pub fn partition_sweep(n: u32, k: u32, random_count: usize, seed: u64) -> Result<Vec<Partition>> {
    let mut out: Vec<Partition> = Vec::new();
    let mut push = |p: Partition| {
        if !out.contains(&p) {
            out.push(p);
        }
    };
    for shift in 0..n {
        let map = (0..n).map(|j| (j + shift) % n).collect();
        push(Partition::new(k, Permutation::new(map)?)?);
    }
    push(Partition::new(k, Permutation::reversal(n))?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_count {
        push(Partition::new(k, Permutation::random(n, &mut rng))?);
    }
    Ok(out)
}

/// Whether `build(partition)` computes `f` for every partition in the sweep.
pub fn verify_over_partitions(
    f: &TruthTable,
    partitions: &[Partition],
    mut build: impl FnMut(Partition) -> Result<NofProtocol>,
) -> Result<bool> {
    for p in partitions {
        if !build(p.clone())?.verify_computes(f)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{make_named, NamedFunction};

    #[test]
    fn view_round_trip() {
        let p = Partition::contiguous(6, 3).unwrap();
        for y in 0..64 {
            for party in 0..3 {
                let v = p.visible(y, party);
                assert_eq!(p.insert_block(v, party, p.block(y, party)), y);
            }
        }
    }

    #[test]
    fn parity_protocol_is_xor() {
        let p = Partition::contiguous(6, 3).unwrap();
        let pi = NofProtocol::parity(p).unwrap();
        assert_eq!(pi.cost(), 2);
        assert!(pi.verify_computes(&make_named(NamedFunction::Xor, 6).unwrap()).unwrap());
        assert!(!pi.verify_computes(&make_named(NamedFunction::Ip, 6).unwrap()).unwrap());
    }

    #[test]
    fn one_broadcast_computes_a_block_function() {
        let p = Partition::contiguous(4, 2).unwrap();
        let pi = NofProtocol::broadcast(p.clone(), 0, |y| Label::from_bit(p.block(y, 1) == 3)).unwrap();
        assert_eq!(pi.cost(), 1);
        for x in 0..16 {
            assert_eq!(pi.run(x), Label::from_bit(x & 3 == 3));
        }
    }

    #[test]
    fn constant_protocol() {
        let p = Partition::contiguous(4, 2).unwrap();
        let pi = NofProtocol::constant(p, Label::Minus).unwrap();
        assert!(pi.verify_computes(&TruthTable::constant(4, Label::Minus).unwrap()).unwrap());
    }

    #[test]
    fn dictator_under_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let p = Partition::new(2, Permutation::random(6, &mut rng)).unwrap();
            for var in 0..6 {
                let pi = NofProtocol::dictator(p.clone(), var).unwrap();
                let f = make_named(NamedFunction::Dictator(var + 1), 6).unwrap();
                assert!(pi.verify_computes(&f).unwrap());
            }
        }
    }

    #[test]
    fn randomized_error_examples() {
        let p = Partition::contiguous(4, 2).unwrap();
        let xor = make_named(NamedFunction::Xor, 4).unwrap();
        let good = NofProtocol::parity(p.clone()).unwrap();
        let neg_root = match good.root().clone() {
            Node::Speak { speaker, message, children } => {
                let [a, b] = *children;
                let flip = |n: Node| match n {
                    Node::Speak { speaker, message, children } => Node::Speak {
                        speaker,
                        message: message.negated(),
                        children,
                    },
                    other => other,
                };
                Node::speak(speaker, message, flip(a), flip(b))
            }
            Node::Output => unreachable!(),
        };
        let bad = NofProtocol::new(p, neg_root).unwrap();
        assert!(bad.verify_computes(&xor.negated()).unwrap());
        let one = RandomizedProtocol::new(vec![good.clone()]).unwrap();
        assert_eq!(one.rand_error(&xor).unwrap(), 0.0);
        let half = RandomizedProtocol::new(vec![good.clone(), bad.clone()]).unwrap();
        assert_eq!(half.rand_error(&xor).unwrap(), 0.5);
        let third = RandomizedProtocol::new(vec![good.clone(), good, bad]).unwrap();
        assert!((third.rand_error(&xor).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Partition::new(3, Permutation::random(6, &mut rng)).unwrap();
        let pi = NofProtocol::random(p, 3, &mut rng).unwrap();
        let back = NofProtocol::parse_text(&pi.to_text()).unwrap();
        assert_eq!(back, pi);
        assert!(NofProtocol::parse_text("nof k=2 sigma=0,1\nout\n").is_err());
        assert!(NofProtocol::parse_text("nof k=2 sigma=0,1,2,3\n(speak 2 0101 out out)\n").is_err());
    }

    #[test]
    fn sweep_is_seeded() {
        let a = partition_sweep(6, 2, 4, 11).unwrap();
        let b = partition_sweep(6, 2, 4, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.len() >= 6);
    }
}
