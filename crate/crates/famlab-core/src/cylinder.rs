//! Finite-depth dyadic cylinder algebras: the depth-`n` model of the
//! measure algebra adding many random reals.
//!
//! A [`DyadicAlgebra`] names finitely many coordinates out of the ambient
//! index set; its atoms are the 0/1 assignments to those coordinates, all
//! with equal weight `2^-n`. Basic clopen sets are finite partial
//! assignments ([`Cylinder`]); [`density_search`] finds a cylinder on which
//! a given positive element has conditional measure at least `1 - eps`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::boolalg::{AtomSpace, Element, MeasuredAlgebra};
use crate::rat::{self, Rat};

/// Label of a single 0/1 coordinate.
pub type Coord = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CylinderError {
    /// The cylinder names coordinates outside the algebra's support; the
    /// caller must refine the algebra first.
    RefinementNeeded { missing: Vec<Coord> },
    EmptySupport,
    NullElement,
    BadEpsilon,
}

impl fmt::Display for CylinderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CylinderError::RefinementNeeded { missing } => {
                write!(f, "coordinates {missing:?} outside algebra support")
            }
            CylinderError::EmptySupport => write!(f, "algebra needs at least one coordinate"),
            CylinderError::NullElement => write!(f, "element must have positive measure"),
            CylinderError::BadEpsilon => write!(f, "epsilon must satisfy 0 < eps < 1"),
        }
    }
}

/// A basic clopen set: a finite partial assignment of coordinates to bits.
#[derive(Debug, Clone, PartialEq, Eq, Default, PartialOrd, Ord)]
pub struct Cylinder {
    fixed: BTreeMap<Coord, bool>,
}

impl Cylinder {
    /// The empty condition (the whole space).
    pub fn everything() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(Coord, bool)]) -> Self {
        Self {
            fixed: pairs.iter().copied().collect(),
        }
    }

    pub fn fix(mut self, coord: Coord, bit: bool) -> Self {
        self.fixed.insert(coord, bit);
        self
    }

    pub fn fixed(&self) -> &BTreeMap<Coord, bool> {
        &self.fixed
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed.len()
    }
}

/// A clopen set: a finite union of basic cylinders.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clopen {
    pub cylinders: Vec<Cylinder>,
}

impl From<Cylinder> for Clopen {
    fn from(c: Cylinder) -> Self {
        Self {
            cylinders: alloc::vec![c],
        }
    }
}

/// The depth-`n` cylinder algebra over a finite coordinate support, backed
/// by a uniform measured algebra with `2^n` atoms.
///
/// Atom index encoding: bit `j` of the atom index is the value the atom
/// assigns to the `j`-th smallest coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicAlgebra {
    coords: Vec<Coord>,
    backing: MeasuredAlgebra,
}

impl DyadicAlgebra {
    pub fn new(coords: &[Coord]) -> Result<Self, CylinderError> {
        let coords: BTreeSet<Coord> = coords.iter().copied().collect();
        if coords.is_empty() {
            return Err(CylinderError::EmptySupport);
        }
        let coords: Vec<Coord> = coords.into_iter().collect();
        let backing = MeasuredAlgebra::uniform(1usize << coords.len())
            .expect("2^n uniform weights are a distribution");
        Ok(Self { coords, backing })
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn depth(&self) -> usize {
        self.coords.len()
    }

    pub fn space(&self) -> AtomSpace {
        self.backing.space()
    }

    pub fn backing(&self) -> &MeasuredAlgebra {
        &self.backing
    }

    pub fn leb(&self, a: &Element) -> Rat {
        self.backing.measure(a).expect("element over backing space")
    }

    fn coord_pos(&self, c: Coord) -> Option<usize> {
        self.coords.binary_search(&c).ok()
    }

    /// The element whose atoms are exactly the points extending `c`.
    pub fn embed_cylinder(&self, c: &Cylinder) -> Result<Element, CylinderError> {
        let missing: Vec<Coord> = c
            .fixed
            .keys()
            .copied()
            .filter(|k| self.coord_pos(*k).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(CylinderError::RefinementNeeded { missing });
        }
        let mut mask = 0usize; // positions fixed by c
        let mut want = 0usize; // required bit values at those positions
        for (&coord, &bit) in &c.fixed {
            let j = self.coord_pos(coord).expect("checked above");
            mask |= 1 << j;
            if bit {
                want |= 1 << j;
            }
        }
        let n = self.backing.space().size();
        let mut bits = crate::bits::BitSet::empty(n);
        for atom in 0..n {
            if atom & mask == want {
                bits.insert(atom);
            }
        }
        Ok(Element::from_bits(bits))
    }

    pub fn embed(&self, c: &Clopen) -> Result<Element, CylinderError> {
        let mut acc = Element::zero(self.space());
        for cyl in &c.cylinders {
            let e = self.embed_cylinder(cyl)?;
            acc = acc.join(&e).expect("same space");
        }
        Ok(acc)
    }

    /// Extends the support with further coordinates. Measures of refined
    /// elements are preserved (each atom splits evenly).
    pub fn refine(&self, extra: &[Coord]) -> Result<DyadicAlgebra, CylinderError> {
        let mut coords: BTreeSet<Coord> = self.coords.iter().copied().collect();
        coords.extend(extra.iter().copied());
        DyadicAlgebra::new(&coords.into_iter().collect::<Vec<_>>())
    }

    /// Transports an element of `self` into the refined algebra `finer`.
    pub fn refine_element(&self, e: &Element, finer: &DyadicAlgebra) -> Element {
        let positions: Vec<usize> = self
            .coords
            .iter()
            .map(|c| finer.coord_pos(*c).expect("finer must extend self"))
            .collect();
        let n = finer.space().size();
        let mut bits = crate::bits::BitSet::empty(n);
        for atom in 0..n {
            let mut coarse = 0usize;
            for (j, &pos) in positions.iter().enumerate() {
                if atom & (1 << pos) != 0 {
                    coarse |= 1 << j;
                }
            }
            if e.contains_atom(coarse) {
                bits.insert(atom);
            }
        }
        Element::from_bits(bits)
    }

    /// All basic cylinders, fewest fixed coordinates first, then
    /// lexicographic on the fixed coordinate set, then on the bit values
    /// (coordinates read in increasing order, 0 before 1).
    pub fn all_cylinders(&self) -> Vec<Cylinder> {
        let n = self.coords.len();
        let mut out = Vec::new();
        for size in 0..=n {
            for subset in combinations(n, size) {
                for vals in 0..(1u64 << size) {
                    let mut cyl = Cylinder::everything();
                    for (idx, &pos) in subset.iter().enumerate() {
                        // first coordinate of the subset most significant
                        let bit = vals >> (size - 1 - idx) & 1 == 1;
                        cyl = cyl.fix(self.coords[pos], bit);
                    }
                    out.push(cyl);
                }
            }
        }
        out
    }

    /// Finds the first basic cylinder `s` (in [`all_cylinders`] order) with
    /// conditional measure `Leb_s(b) >= 1 - eps`. Terminates because at
    /// full depth some atom cylinder lies inside `b`.
    ///
    /// [`all_cylinders`]: DyadicAlgebra::all_cylinders
    pub fn density_search(&self, b: &Element, eps: &Rat) -> Result<Cylinder, CylinderError> {
        if self.leb(b).is_zero() {
            return Err(CylinderError::NullElement);
        }
        if !eps.is_positive() {
            return Err(CylinderError::BadEpsilon);
        }
        let target = rat::one() - eps;
        for cyl in self.all_cylinders() {
            let s = self.embed_cylinder(&cyl).expect("own coordinates");
            let meet = s.meet(b).expect("same space");
            // Leb_s(b) = Leb(b meet s) / Leb(s); Leb(s) = 2^-k > 0.
            if self.leb(&meet) >= &target * self.leb(&s) {
                return Ok(cyl);
            }
        }
        unreachable!("an atom cylinder inside b gives conditional measure 1")
    }
}

/// Size-`k` subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}
