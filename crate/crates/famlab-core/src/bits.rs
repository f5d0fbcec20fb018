//! Fixed-width dense bit sets used as the carrier of Boolean-algebra
//! elements (one bit per atom).

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitSet {
    domain: usize,
    words: Vec<u64>,
}

fn location(bit: usize) -> (usize, u64) {
    (bit / 64, 1u64 << (bit % 64))
}

impl BitSet {
    pub fn empty(domain: usize) -> Self {
        Self {
            domain,
            words: vec![0; domain.div_ceil(64)],
        }
    }

    pub fn full(domain: usize) -> Self {
        let mut s = Self::empty(domain);
        for (i, w) in s.words.iter_mut().enumerate() {
            let lo = i * 64;
            let n = (domain - lo).min(64);
            *w = if n == 64 { !0 } else { (1u64 << n) - 1 };
        }
        s
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn contains(&self, bit: usize) -> bool {
        assert!(bit < self.domain);
        let (i, mask) = location(bit);
        self.words[i] & mask != 0
    }

    pub fn insert(&mut self, bit: usize) {
        assert!(bit < self.domain);
        let (i, mask) = location(bit);
        self.words[i] |= mask;
    }

    pub fn remove(&mut self, bit: usize) {
        assert!(bit < self.domain);
        let (i, mask) = location(bit);
        self.words[i] &= !mask;
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> Self {
        let full = Self::full(self.domain);
        full.difference(self)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        assert_eq!(self.domain, other.domain);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        assert_eq!(self.domain, other.domain);
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, w)| {
            let mut w = *w;
            core::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * 64 + b)
                }
            })
        })
    }

    fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.domain, other.domain);
        Self {
            domain: self.domain,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn basic_ops() {
        let mut a = BitSet::empty(70);
        a.insert(0);
        a.insert(65);
        let mut b = BitSet::empty(70);
        b.insert(65);
        b.insert(3);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), vec![65]);
        assert_eq!(a.union(&b).len(), 3);
        assert_eq!(a.difference(&b).iter().collect::<Vec<_>>(), vec![0]);
        assert!(a.intersects(&b));
        assert!(!a.is_subset(&b));
        assert_eq!(BitSet::full(70).len(), 70);
        assert_eq!(BitSet::full(70).complement().len(), 0);
    }
}
