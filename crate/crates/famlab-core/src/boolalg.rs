//! Finite atomic Boolean algebras with strictly positive exact-rational
//! measures.
//!
//! An `Element` is the set of atoms below it, so every Boolean identity is
//! a bit-set identity and every measure identity is exact rational
//! arithmetic. Finitely generated subalgebras are handled through
//! [`generated_atoms`], which enumerates the meets `a_sigma` of generators
//! and their complements and keeps the nonzero ones; those meets are
//! pairwise disjoint and join to 1.

use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::bits::BitSet;
use crate::rat::Rat;

/// Upper bound on the number of generators [`generated_atoms`] accepts.
pub const GENERATOR_BOUND: usize = 16;

/// The atom space of the ambient algebra: atoms are indexed `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomSpace {
    size: usize,
}

impl AtomSpace {
    pub fn new(size: usize) -> Result<Self, AlgebraError> {
        if size == 0 {
            return Err(AlgebraError::EmptyAtomSpace);
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// An element of the ambient algebra, identified with its atom set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    atoms: BitSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    EmptyAtomSpace,
    /// Two elements from different atom spaces were combined.
    SpaceMismatch { left: usize, right: usize },
    TooManyGenerators { given: usize, bound: usize },
    /// Weight vector is not a strictly positive probability distribution.
    BadWeights,
    /// Conditioning on an event of measure zero.
    NullConditioningEvent,
    AtomOutOfRange { atom: usize, size: usize },
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::EmptyAtomSpace => write!(f, "atom space must have at least one atom"),
            AlgebraError::SpaceMismatch { left, right } => {
                write!(f, "elements over different atom spaces ({left} vs {right})")
            }
            AlgebraError::TooManyGenerators { given, bound } => {
                write!(f, "{given} generators exceed the bound {bound}")
            }
            AlgebraError::BadWeights => {
                write!(f, "weights must be strictly positive and sum to 1")
            }
            AlgebraError::NullConditioningEvent => {
                write!(f, "cannot condition on an event of measure zero")
            }
            AlgebraError::AtomOutOfRange { atom, size } => {
                write!(f, "atom index {atom} out of range for size {size}")
            }
        }
    }
}

impl Element {
    pub fn zero(space: AtomSpace) -> Self {
        Self {
            atoms: BitSet::empty(space.size),
        }
    }

    pub fn one(space: AtomSpace) -> Self {
        Self {
            atoms: BitSet::full(space.size),
        }
    }

    pub fn atom(space: AtomSpace, index: usize) -> Result<Self, AlgebraError> {
        if index >= space.size {
            return Err(AlgebraError::AtomOutOfRange {
                atom: index,
                size: space.size,
            });
        }
        let mut atoms = BitSet::empty(space.size);
        atoms.insert(index);
        Ok(Self { atoms })
    }

    pub fn from_atoms(space: AtomSpace, indices: &[usize]) -> Result<Self, AlgebraError> {
        let mut atoms = BitSet::empty(space.size);
        for &i in indices {
            if i >= space.size {
                return Err(AlgebraError::AtomOutOfRange {
                    atom: i,
                    size: space.size,
                });
            }
            atoms.insert(i);
        }
        Ok(Self { atoms })
    }

    pub fn from_bits(atoms: BitSet) -> Self {
        Self { atoms }
    }

    pub fn space_size(&self) -> usize {
        self.atoms.domain()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms.iter()
    }

    pub fn contains_atom(&self, atom: usize) -> bool {
        self.atoms.contains(atom)
    }

    fn check(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.space_size() != other.space_size() {
            return Err(AlgebraError::SpaceMismatch {
                left: self.space_size(),
                right: other.space_size(),
            });
        }
        Ok(())
    }

    pub fn meet(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check(other)?;
        Ok(Self {
            atoms: self.atoms.intersection(&other.atoms),
        })
    }

    pub fn join(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check(other)?;
        Ok(Self {
            atoms: self.atoms.union(&other.atoms),
        })
    }

    pub fn complement(&self) -> Self {
        Self {
            atoms: self.atoms.complement(),
        }
    }

    /// `a ∼ b`, i.e. `a ∧ ∼b`.
    pub fn minus(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check(other)?;
        Ok(Self {
            atoms: self.atoms.difference(&other.atoms),
        })
    }

    pub fn leq(&self, other: &Self) -> Result<bool, AlgebraError> {
        self.check(other)?;
        Ok(self.atoms.is_subset(&other.atoms))
    }

    pub fn disjoint_from(&self, other: &Self) -> Result<bool, AlgebraError> {
        self.check(other)?;
        Ok(!self.atoms.intersects(&other.atoms))
    }
}

/// Enumerates the atoms of the subalgebra generated by `generators`: all
/// nonzero meets of each generator or its complement, ordered by the
/// sign pattern (generator 0 most significant, un-complemented first).
///
/// The empty generator list yields `[1]`.
pub fn generated_atoms(
    space: AtomSpace,
    generators: &[Element],
) -> Result<Vec<Element>, AlgebraError> {
    if generators.len() > GENERATOR_BOUND {
        return Err(AlgebraError::TooManyGenerators {
            given: generators.len(),
            bound: GENERATOR_BOUND,
        });
    }
    for g in generators {
        if g.space_size() != space.size {
            return Err(AlgebraError::SpaceMismatch {
                left: g.space_size(),
                right: space.size,
            });
        }
    }
    // Group atoms of the ambient algebra by their generator sign pattern;
    // the groups are exactly the nonzero a_sigma.
    let n = generators.len();
    let mut groups: alloc::collections::BTreeMap<u32, BitSet> = alloc::collections::BTreeMap::new();
    for atom in 0..space.size {
        let mut sig: u32 = 0;
        for (pos, g) in generators.iter().enumerate() {
            if !g.contains_atom(atom) {
                sig |= 1 << (n - 1 - pos);
            }
        }
        groups
            .entry(sig)
            .or_insert_with(|| BitSet::empty(space.size))
            .insert(atom);
    }
    Ok(groups.into_values().map(Element::from_bits).collect())
}

/// A finite Boolean algebra carrying a strictly positive probability
/// measure, given by one exact-rational weight per atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredAlgebra {
    space: AtomSpace,
    weights: Vec<Rat>,
}

impl MeasuredAlgebra {
    pub fn new(weights: Vec<Rat>) -> Result<Self, AlgebraError> {
        let space = AtomSpace::new(weights.len())?;
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(AlgebraError::BadWeights);
        }
        let total: Rat = weights.iter().sum();
        if !total.is_one() {
            return Err(AlgebraError::BadWeights);
        }
        Ok(Self { space, weights })
    }

    pub fn uniform(atoms: usize) -> Result<Self, AlgebraError> {
        let space = AtomSpace::new(atoms)?;
        let w = Rat::new(1.into(), (atoms as i64).into());
        Ok(Self {
            space,
            weights: alloc::vec![w; atoms],
        })
    }

    pub fn space(&self) -> AtomSpace {
        self.space
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    pub fn measure(&self, a: &Element) -> Result<Rat, AlgebraError> {
        if a.space_size() != self.space.size {
            return Err(AlgebraError::SpaceMismatch {
                left: a.space_size(),
                right: self.space.size,
            });
        }
        Ok(a.atoms().map(|i| self.weights[i].clone()).sum())
    }

    /// The conditional measure `mu_b(a) = mu(a ∧ b) / mu(b)`.
    pub fn conditional(&self, event: &Element) -> Result<Conditional<'_>, AlgebraError> {
        let mass = self.measure(event)?;
        if mass.is_zero() {
            return Err(AlgebraError::NullConditioningEvent);
        }
        Ok(Conditional {
            algebra: self,
            event: event.clone(),
            mass,
        })
    }

    /// Shorthand for `conditional(event)?.measure(a)`.
    pub fn conditional_measure(&self, event: &Element, a: &Element) -> Result<Rat, AlgebraError> {
        self.conditional(event)?.measure(a)
    }
}

/// A conditional measure `mu_b`; itself a finitely additive probability
/// measure, and a strictly positive one on the relative algebra below `b`.
pub struct Conditional<'a> {
    algebra: &'a MeasuredAlgebra,
    event: Element,
    mass: Rat,
}

impl Conditional<'_> {
    pub fn measure(&self, a: &Element) -> Result<Rat, AlgebraError> {
        let both = a.meet(&self.event)?;
        Ok(self.algebra.measure(&both)? / &self.mass)
    }

    pub fn event(&self) -> &Element {
        &self.event
    }

    /// The relative algebra `B_{<= b}` as a measured algebra in its own
    /// right: atoms of `b` reindexed densely, weights renormalized.
    /// Also returns the ambient atom index of each relative atom.
    pub fn relative_algebra(&self) -> (MeasuredAlgebra, Vec<usize>) {
        let atom_map: Vec<usize> = self.event.atoms().collect();
        let weights = atom_map
            .iter()
            .map(|&i| self.algebra.weights[i].clone() / &self.mass)
            .collect();
        (
            MeasuredAlgebra::new(weights).expect("renormalized weights are a distribution"),
            atom_map,
        )
    }
}
