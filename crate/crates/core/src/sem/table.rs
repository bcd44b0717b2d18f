//! Dense tables over finite joint domains.

use crate::nodeset::{NodeIdx, NodeSet};

use super::SemError;

/// Mixed-radix layout of a list of variables; the last variable varies fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Space {
    pub vars: Vec<NodeIdx>,
    pub cards: Vec<usize>,
    pub strides: Vec<usize>,
    pub size: usize,
}

impl Space {
    pub fn new(vars: Vec<NodeIdx>, cards: Vec<usize>) -> Space {
        let mut strides = vec![1; vars.len()];
        for i in (0..vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        let size = cards.iter().product();
        Space {
            vars,
            cards,
            strides,
            size,
        }
    }

    /// Position of a full realization, indexed by node.
    pub fn index(&self, v: &[usize]) -> usize {
        self.vars
            .iter()
            .zip(&self.strides)
            .map(|(&x, s)| v[x] * s)
            .sum()
    }

    pub fn digit(&self, idx: usize, pos: usize) -> usize {
        (idx / self.strides[pos]) % self.cards[pos]
    }

    /// Writes the values encoded by `idx` into the full realization `v`.
    pub fn decode(&self, idx: usize, v: &mut [usize]) {
        for pos in 0..self.vars.len() {
            v[self.vars[pos]] = self.digit(idx, pos);
        }
    }

    /// Steps `v` to the next realization of these variables; false after the last.
    pub fn advance(&self, v: &mut [usize]) -> bool {
        for pos in (0..self.vars.len()).rev() {
            let x = self.vars[pos];
            v[x] += 1;
            if v[x] < self.cards[pos] {
                return true;
            }
            v[x] = 0;
        }
        false
    }

    pub fn position(&self, x: NodeIdx) -> Option<usize> {
        self.vars.iter().position(|&y| y == x)
    }
}

/// How a table is normalized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Sums to one over the whole table.
    Joint,
    /// Sums to one over the other variables for every value of `given`.
    Conditional { given: NodeSet },
    /// No normalization is claimed.
    None,
}

/// Probabilities over the joint domain of `vars`, last variable fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DistTable {
    space: Space,
    data: Vec<f64>,
    norm: Normalization,
}

impl DistTable {
    pub(crate) fn from_parts(space: Space, data: Vec<f64>, norm: Normalization) -> DistTable {
        debug_assert_eq!(space.size, data.len());
        DistTable { space, data, norm }
    }

    pub fn vars(&self) -> &[NodeIdx] {
        &self.space.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.space.cards
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn space(&self) -> &Space {
        &self.space
    }

    /// Entry for the given values, listed in the order of [`vars`](Self::vars).
    pub fn get(&self, values: &[usize]) -> f64 {
        assert_eq!(
            values.len(),
            self.space.vars.len(),
            "one value per variable"
        );
        let idx: usize = values
            .iter()
            .zip(&self.space.strides)
            .map(|(a, s)| a * s)
            .sum();
        self.data[idx]
    }

    /// Entry at a full realization indexed by node.
    pub fn at(&self, v: &[usize]) -> f64 {
        self.data[self.space.index(v)]
    }

    /// Sums out everything not in `keep`.
    pub fn marginal(&self, keep: &NodeSet) -> DistTable {
        let (vars, cards): (Vec<_>, Vec<_>) = self
            .space
            .vars
            .iter()
            .zip(&self.space.cards)
            .filter(|(x, _)| keep.contains(**x))
            .map(|(&x, &c)| (x, c))
            .unzip();
        let target = Space::new(vars, cards);
        let mut data = vec![0.0; target.size];
        let mut v = vec![0; self.max_var() + 1];
        for (idx, p) in self.data.iter().enumerate() {
            self.space.decode(idx, &mut v);
            data[target.index(&v)] += p;
        }
        let norm = match &self.norm {
            Normalization::Joint => Normalization::Joint,
            _ => Normalization::None,
        };
        DistTable {
            space: target,
            data,
            norm,
        }
    }

    /// Divides by the marginal of `given`, turning a joint table into a
    /// conditional family.
    pub fn conditional(&self, given: &NodeSet) -> Result<DistTable, SemError> {
        if given.is_empty() {
            return Ok(self.clone());
        }
        let m = self.marginal(given);
        let mut v = vec![0; self.max_var() + 1];
        let mut data = self.data.clone();
        for (idx, p) in data.iter_mut().enumerate() {
            self.space.decode(idx, &mut v);
            let d = m.at(&v);
            if d <= 0.0 {
                return Err(SemError::Eval(
                    "conditioning event has zero probability".into(),
                ));
            }
            *p /= d;
        }
        Ok(DistTable {
            space: self.space.clone(),
            data,
            norm: Normalization::Conditional {
                given: given.clone(),
            },
        })
    }

    /// Largest absolute entrywise difference; `None` when the layouts differ.
    pub fn max_abs_diff(&self, other: &DistTable) -> Option<f64> {
        (self.space == other.space).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    fn max_var(&self) -> usize {
        self.space.vars.iter().copied().max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DistTable {
        // Variables 0 and 2, binary and ternary.
        let space = Space::new(vec![0, 2], vec![2, 3]);
        DistTable::from_parts(
            space,
            vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1],
            Normalization::Joint,
        )
    }

    #[test]
    fn layout_is_last_fastest() {
        let t = table();
        assert_eq!(t.get(&[0, 1]), 0.2);
        assert_eq!(t.get(&[1, 0]), 0.3);
        assert_eq!(t.at(&[1, 9, 2]), 0.1);
        let mut v = vec![0; 3];
        let mut n = 1;
        while t.space().advance(&mut v) {
            n += 1;
        }
        assert_eq!(n, 6);
        assert_eq!(v, vec![0, 0, 0]);
    }

    #[test]
    fn marginal_and_conditional() {
        let t = table();
        let m = t.marginal(&NodeSet::singleton(0));
        assert_eq!(m.vars(), &[0]);
        assert!((m.data()[0] - 0.4).abs() < 1e-15 && (m.data()[1] - 0.6).abs() < 1e-15);
        let c = t.conditional(&NodeSet::singleton(0)).unwrap();
        assert!((c.get(&[0, 1]) - 0.5).abs() < 1e-15);
        assert!((c.get(&[1, 0]) - 0.5).abs() < 1e-15);
    }
}
