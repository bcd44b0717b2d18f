//! Compact bit sets of node indices.
//!
//! Node indices are positions in a graph's name table. Names are kept in
//! lexicographic order, so ascending index order is also name order and
//! every iteration over a [`NodeSet`] is deterministic.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

/// Index of a node in a graph's name table.
pub type NodeIdx = usize;

const WORD: usize = 64;

/// A set of node indices, stored as a little-endian bit vector.
///
/// The representation is normalized (no trailing zero words), so the
/// derived `Eq` and `Hash` are structural.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: SmallVec<[u64; 2]>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(idx: NodeIdx) -> Self {
        let mut s = Self::new();
        s.insert(idx);
        s
    }

    /// The set `{0, 1, ..., n - 1}`.
    pub fn full(n: usize) -> Self {
        (0..n).collect()
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn insert(&mut self, idx: NodeIdx) -> bool {
        let (w, b) = (idx / WORD, idx % WORD);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, idx: NodeIdx) -> bool {
        let (w, b) = (idx / WORD, idx % WORD);
        if w >= self.words.len() {
            return false;
        }
        let present = self.words[w] & (1 << b) != 0;
        self.words[w] &= !(1 << b);
        self.normalize();
        present
    }

    pub fn contains(&self, idx: NodeIdx) -> bool {
        let (w, b) = (idx / WORD, idx % WORD);
        self.words.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Smallest member, if any.
    pub fn first(&self) -> Option<NodeIdx> {
        self.iter().next()
    }

    pub fn iter(&self) -> Iter<'_> {
        Iter {
            words: &self.words,
            word: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = long.clone();
        for (w, s) in out.words.iter_mut().zip(short.words.iter()) {
            *w |= s;
        }
        out
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        let mut out = NodeSet {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        };
        out.normalize();
        out
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(other.words.iter()) {
            *w &= !o;
        }
        out.normalize();
        out
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words.iter().enumerate().all(|(i, w)| {
            let o = other.words.get(i).copied().unwrap_or(0);
            w & !o == 0
        })
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    pub fn extend_from(&mut self, other: &NodeSet) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (w, o) in self.words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
    }

    pub fn to_vec(&self) -> Vec<NodeIdx> {
        self.iter().collect()
    }
}

/// Ascending iterator over a [`NodeSet`].
pub struct Iter<'a> {
    words: &'a [u64],
    word: usize,
    current: u64,
}

impl Iterator for Iter<'_> {
    type Item = NodeIdx;

    fn next(&mut self) -> Option<NodeIdx> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word * WORD + bit);
            }
            self.word += 1;
            self.current = *self.words.get(self.word)?;
        }
    }
}

impl<'a> IntoIterator for &'a NodeSet {
    type Item = NodeIdx;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

impl FromIterator<NodeIdx> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeIdx>>(iter: I) -> Self {
        let mut s = NodeSet::new();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl Extend<NodeIdx> for NodeSet {
    fn extend<I: IntoIterator<Item = NodeIdx>>(&mut self, iter: I) {
        for i in iter {
            self.insert(i);
        }
    }
}

/// Lexicographic order on the ascending member sequences.
impl Ord for NodeSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for NodeSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
