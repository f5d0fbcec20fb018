//! Free finitely additive probability measures on the naturals, restricted
//! to the algebra of eventually periodic sets.
//!
//! Mass lives on residue classes modulo a period; finite sets get measure
//! zero, so freeness holds literally. Simple functions are periodic value
//! tables, and every integral is a finite exact-rational sum.
//! [`uniform_approx_select`] realizes the finite uniform approximation
//! constructively by replicating residues proportionally to their weights,
//! so the approximation error is exactly zero.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use num_integer::Integer;
use num_traits::{One, Signed};

use crate::rat::{self, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamError {
    BadPeriod,
    BadWeights,
    /// Residue index at or above the declared modulus.
    ResidueOutOfRange { residue: u64, modulus: u64 },
    /// Set with zero measure used where positive mass is required.
    IllegalRegion,
    /// Value table length does not match the declared period.
    BadValueTable,
    /// Blocks do not partition the residues.
    BadPartition,
}

impl fmt::Display for FamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamError::BadPeriod => write!(f, "period must be positive"),
            FamError::BadWeights => write!(f, "residue weights must be >= 0 and sum to 1"),
            FamError::ResidueOutOfRange { residue, modulus } => {
                write!(f, "residue {residue} out of range mod {modulus}")
            }
            FamError::IllegalRegion => write!(f, "region must have positive measure"),
            FamError::BadValueTable => write!(f, "value table length must equal the period"),
            FamError::BadPartition => write!(f, "blocks must partition the residues"),
        }
    }
}

/// A free finitely additive probability measure given by residue-class
/// weights modulo `period`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicFam {
    period: u64,
    weights: Vec<Rat>,
}

impl PeriodicFam {
    pub fn new(weights: Vec<Rat>) -> Result<Self, FamError> {
        if weights.is_empty() {
            return Err(FamError::BadPeriod);
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(FamError::BadWeights);
        }
        let total: Rat = weights.iter().sum();
        if !total.is_one() {
            return Err(FamError::BadWeights);
        }
        Ok(Self {
            period: weights.len() as u64,
            weights,
        })
    }

    pub fn uniform(period: u64) -> Result<Self, FamError> {
        if period == 0 {
            return Err(FamError::BadPeriod);
        }
        let w = Rat::new(1.into(), (period as i64).into());
        Self::new(alloc::vec![w; period as usize])
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    /// Weight of the residue class `j mod modulus`, for any `modulus`
    /// divisible by the period.
    pub fn weight_at(&self, modulus: u64, residue: u64) -> Rat {
        debug_assert_eq!(modulus % self.period, 0);
        let copies = modulus / self.period;
        self.weights[(residue % self.period) as usize].clone()
            / Rat::from_integer((copies as i64).into())
    }

    /// The measure of a periodic set; finite adjustments contribute zero.
    pub fn xi(&self, s: &PeriodicSet) -> Rat {
        let m = self.period.lcm(&s.modulus);
        let mut total = rat::zero();
        for j in 0..m {
            if s.residues.contains(&(j % s.modulus)) {
                total += self.weight_at(m, j);
            }
        }
        total
    }
}

/// An eventually periodic subset of the naturals: a union of residue
/// classes modulo `modulus`, with finitely many points added or removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicSet {
    modulus: u64,
    residues: BTreeSet<u64>,
    added: BTreeSet<u64>,
    removed: BTreeSet<u64>,
}

impl PeriodicSet {
    pub fn new(modulus: u64, residues: &[u64]) -> Result<Self, FamError> {
        if modulus == 0 {
            return Err(FamError::BadPeriod);
        }
        for &r in residues {
            if r >= modulus {
                return Err(FamError::ResidueOutOfRange {
                    residue: r,
                    modulus,
                });
            }
        }
        Ok(Self {
            modulus,
            residues: residues.iter().copied().collect(),
            added: BTreeSet::new(),
            removed: BTreeSet::new(),
        })
    }

    /// The whole index set.
    pub fn everything() -> Self {
        Self::new(1, &[0]).expect("valid")
    }

    /// A finite set (measure zero under any free FAM).
    pub fn finite(points: &[u64]) -> Self {
        let mut s = Self::new(1, &[]).expect("valid");
        s.added = points.iter().copied().collect();
        s
    }

    pub fn with_added(mut self, points: &[u64]) -> Self {
        self.added.extend(points.iter().copied());
        self
    }

    pub fn with_removed(mut self, points: &[u64]) -> Self {
        self.removed.extend(points.iter().copied());
        self
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn residues(&self) -> &BTreeSet<u64> {
        &self.residues
    }

    pub fn contains(&self, k: u64) -> bool {
        if self.added.contains(&k) {
            return true;
        }
        if self.removed.contains(&k) {
            return false;
        }
        self.residues.contains(&(k % self.modulus))
    }

    /// The same set re-expressed at a larger modulus (must be a multiple).
    pub fn expand_to(&self, modulus: u64) -> PeriodicSet {
        debug_assert_eq!(modulus % self.modulus, 0);
        let residues: Vec<u64> = (0..modulus)
            .filter(|j| self.residues.contains(&(j % self.modulus)))
            .collect();
        let mut s = PeriodicSet::new(modulus, &residues).expect("valid expansion");
        s.added = self.added.clone();
        s.removed = self.removed.clone();
        s
    }

    pub fn finite_exceptions(&self) -> impl Iterator<Item = u64> + '_ {
        self.added.iter().chain(self.removed.iter()).copied()
    }
}

/// A periodic simple function: one rational value per residue class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicSimpleFunction {
    period: u64,
    values: Vec<Rat>,
}

impl PeriodicSimpleFunction {
    pub fn new(values: Vec<Rat>) -> Result<Self, FamError> {
        if values.is_empty() {
            return Err(FamError::BadPeriod);
        }
        Ok(Self {
            period: values.len() as u64,
            values,
        })
    }

    pub fn constant(c: Rat) -> Self {
        Self {
            period: 1,
            values: alloc::vec![c],
        }
    }

    /// The characteristic function of a periodic set (finite adjustments
    /// are dropped: they are invisible to every integral).
    pub fn indicator(s: &PeriodicSet) -> Self {
        let values = (0..s.modulus)
            .map(|j| {
                if s.residues.contains(&j) {
                    rat::one()
                } else {
                    rat::zero()
                }
            })
            .collect();
        Self {
            period: s.modulus,
            values,
        }
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn at(&self, k: u64) -> &Rat {
        &self.values[(k % self.period) as usize]
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self {
            period: self.period,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let m = self.period.lcm(&other.period);
        let values = (0..m).map(|j| self.at(j) + other.at(j)).collect();
        Self { period: m, values }
    }
}

/// `∫_over f dΞ`, an exact finite sum over residues mod the lcm of all
/// periods involved. Finite adjustments of `over` contribute nothing.
pub fn integrate(f: &PeriodicSimpleFunction, fam: &PeriodicFam, over: &PeriodicSet) -> Rat {
    let m = f.period.lcm(&fam.period).lcm(&over.modulus);
    let mut total = rat::zero();
    for j in 0..m {
        if over.residues.contains(&(j % over.modulus)) {
            total += f.at(j) * fam.weight_at(m, j);
        }
    }
    total
}

/// A finite partition of the index set into residue-class unions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    modulus: u64,
    blocks: Vec<PeriodicSet>,
}

impl IndexPartition {
    /// Blocks given as residue lists modulo `modulus`; they must cover
    /// every residue exactly once.
    pub fn new(modulus: u64, block_residues: &[Vec<u64>]) -> Result<Self, FamError> {
        if modulus == 0 {
            return Err(FamError::BadPeriod);
        }
        let mut seen = BTreeSet::new();
        for block in block_residues {
            for &r in block {
                if r >= modulus {
                    return Err(FamError::ResidueOutOfRange {
                        residue: r,
                        modulus,
                    });
                }
                if !seen.insert(r) {
                    return Err(FamError::BadPartition);
                }
            }
        }
        if seen.len() as u64 != modulus {
            return Err(FamError::BadPartition);
        }
        let blocks = block_residues
            .iter()
            .map(|rs| PeriodicSet::new(modulus, rs).expect("validated"))
            .collect();
        Ok(Self { modulus, blocks })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn blocks(&self) -> &[PeriodicSet] {
        &self.blocks
    }

    /// Block masses `a_m = Ξ(B_m)`.
    pub fn block_masses(&self, fam: &PeriodicFam) -> Vec<Rat> {
        self.blocks.iter().map(|b| fam.xi(b)).collect()
    }

    /// Index of the block containing `k`.
    pub fn block_of(&self, k: u64) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(k))
            .expect("blocks partition the residues")
    }
}

/// `⟨∫_{B_m} f dΞ⟩`; the entries sum exactly to `∫_K f dΞ`.
pub fn partition_decompose(
    f: &PeriodicSimpleFunction,
    fam: &PeriodicFam,
    partition: &IndexPartition,
) -> Vec<Rat> {
    partition
        .blocks()
        .iter()
        .map(|b| integrate(f, fam, b))
        .collect()
}

/// Finds a nonempty finite `u ⊆ K \ forbidden` whose uniform average of
/// every supplied `f` equals `∫_E f dΞ / Ξ(E)` exactly.
///
/// Construction: at the common modulus, each residue of `E` is replicated
/// across fresh full periods beyond everything in `forbidden`, with
/// multiplicity proportional to its weight. Zero-weight residues are
/// skipped; since all data are rational the average reproduces the
/// integral with error zero, which beats any `eps > 0`.
pub fn uniform_approx_select(
    fs: &[PeriodicSimpleFunction],
    fam: &PeriodicFam,
    region: &PeriodicSet,
    forbidden: &BTreeSet<u64>,
    eps: &Rat,
) -> Result<BTreeSet<u64>, FamError> {
    if !eps.is_positive() {
        return Err(FamError::IllegalRegion);
    }
    let mass = fam.xi(region);
    if !mass.is_positive() {
        return Err(FamError::IllegalRegion);
    }
    let modulus = fs
        .iter()
        .fold(fam.period.lcm(&region.modulus), |m, f| m.lcm(&f.period));

    // Normalized weight of each region residue at the common modulus.
    let mut shares: Vec<(u64, Rat)> = Vec::new();
    for j in 0..modulus {
        if region.residues.contains(&(j % region.modulus)) {
            let w = fam.weight_at(modulus, j) / &mass;
            if w.is_positive() {
                shares.push((j, w));
            }
        }
    }
    debug_assert!(!shares.is_empty());

    // Integer multiplicities: scale by the lcm of the share denominators.
    let mut denom_lcm = num_bigint::BigInt::one();
    for (_, w) in &shares {
        denom_lcm = denom_lcm.lcm(w.denom());
    }
    let scale = Rat::from_integer(denom_lcm);

    // Skip past every forbidden point and every finite exception of the
    // region, so u really is inside the periodic part of E and out of F.
    let horizon = forbidden
        .iter()
        .copied()
        .chain(region.finite_exceptions())
        .max()
        .map_or(0, |m| m + 1);
    let first_window = horizon.div_ceil(modulus);

    let mut u = BTreeSet::new();
    for (j, w) in &shares {
        let copies = (w * &scale).to_integer();
        let mut t = first_window;
        let mut left = copies.clone();
        while left.is_positive() {
            u.insert(t * modulus + j);
            t += 1;
            left -= 1;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;
    use alloc::vec;

    #[test]
    fn xi_examples() {
        let fam = PeriodicFam::uniform(4).unwrap();
        assert_eq!(fam.xi(&PeriodicSet::everything()), frac(1, 1));
        assert_eq!(fam.xi(&PeriodicSet::new(4, &[2]).unwrap()), frac(1, 4));
        // adding a stray point changes nothing
        let adjusted = PeriodicSet::new(4, &[2]).unwrap().with_added(&[17]);
        assert_eq!(fam.xi(&adjusted), frac(1, 4));
        // finite sets are null
        assert_eq!(fam.xi(&PeriodicSet::finite(&[0, 1, 2, 100])), frac(0, 1));
    }

    #[test]
    fn integrate_indicator_equals_xi() {
        let fam = PeriodicFam::new(vec![frac(1, 2), frac(1, 4), frac(1, 8), frac(1, 8)]).unwrap();
        let e = PeriodicSet::new(4, &[1, 3]).unwrap();
        let chi = PeriodicSimpleFunction::indicator(&e);
        assert_eq!(
            integrate(&chi, &fam, &PeriodicSet::everything()),
            fam.xi(&e)
        );
    }

    #[test]
    fn integrate_constant_and_average() {
        let fam = PeriodicFam::uniform(4).unwrap();
        let c = PeriodicSimpleFunction::constant(frac(3, 7));
        assert_eq!(
            integrate(&c, &fam, &PeriodicSet::everything()),
            frac(3, 7)
        );
        let f =
            PeriodicSimpleFunction::new(vec![frac(0, 1), frac(1, 2), frac(1, 1), frac(1, 2)])
                .unwrap();
        assert_eq!(
            integrate(&f, &fam, &PeriodicSet::everything()),
            frac(1, 2)
        );
    }

    #[test]
    fn partition_decompose_examples() {
        let fam = PeriodicFam::uniform(3).unwrap();
        let f = PeriodicSimpleFunction::constant(frac(1, 1));
        let p = IndexPartition::new(3, &[vec![0], vec![1, 2]]).unwrap();
        assert_eq!(
            partition_decompose(&f, &fam, &p),
            vec![frac(1, 3), frac(2, 3)]
        );

        let trivial = IndexPartition::new(1, &[vec![0]]).unwrap();
        let g = PeriodicSimpleFunction::new(vec![frac(1, 5), frac(2, 5)]).unwrap();
        assert_eq!(
            partition_decompose(&g, &fam, &trivial),
            vec![integrate(&g, &fam, &PeriodicSet::everything())]
        );

        // indicator of one block splits cleanly
        let chi = PeriodicSimpleFunction::indicator(&p.blocks()[0]);
        assert_eq!(
            partition_decompose(&chi, &fam, &p),
            vec![frac(1, 3), frac(0, 1)]
        );
    }

    #[test]
    fn partition_validation() {
        assert!(IndexPartition::new(3, &[vec![0], vec![1]]).is_err());
        assert!(IndexPartition::new(3, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn select_uniform_fresh_period() {
        let fam = PeriodicFam::uniform(4).unwrap();
        let f = PeriodicSimpleFunction::new(vec![
            frac(0, 1),
            frac(1, 3),
            frac(2, 3),
            frac(1, 1),
        ])
        .unwrap();
        let forbidden: BTreeSet<u64> = (0..10).collect();
        let u = uniform_approx_select(
            core::slice::from_ref(&f),
            &fam,
            &PeriodicSet::everything(),
            &forbidden,
            &frac(1, 100),
        )
        .unwrap();
        assert_eq!(u, BTreeSet::from([12, 13, 14, 15]));
        // exact reproduction of the mean
        let avg: Rat = u.iter().map(|&k| f.at(k).clone()).sum::<Rat>()
            / Rat::from_integer((u.len() as i64).into());
        assert_eq!(avg, integrate(&f, &fam, &PeriodicSet::everything()));
    }

    #[test]
    fn select_skips_zero_weight_residues() {
        let fam =
            PeriodicFam::new(vec![frac(1, 2), frac(1, 2), frac(0, 1), frac(0, 1)]).unwrap();
        let f = PeriodicSimpleFunction::new(vec![
            frac(1, 1),
            frac(1, 2),
            frac(1, 7),
            frac(1, 9),
        ])
        .unwrap();
        let forbidden: BTreeSet<u64> = (0..10).collect();
        let u = uniform_approx_select(
            core::slice::from_ref(&f),
            &fam,
            &PeriodicSet::everything(),
            &forbidden,
            &frac(1, 100),
        )
        .unwrap();
        assert_eq!(u, BTreeSet::from([12, 13]));
        let avg: Rat = u.iter().map(|&k| f.at(k).clone()).sum::<Rat>()
            / Rat::from_integer((u.len() as i64).into());
        assert_eq!(avg, integrate(&f, &fam, &PeriodicSet::everything()));
    }

    #[test]
    fn select_proportional_replication() {
        // weights (1/3, 2/3): residue 1 must appear twice as often.
        let fam = PeriodicFam::new(vec![frac(1, 3), frac(2, 3)]).unwrap();
        let f = PeriodicSimpleFunction::new(vec![frac(0, 1), frac(1, 1)]).unwrap();
        let u = uniform_approx_select(
            core::slice::from_ref(&f),
            &fam,
            &PeriodicSet::everything(),
            &BTreeSet::new(),
            &frac(1, 100),
        )
        .unwrap();
        let avg: Rat = u.iter().map(|&k| f.at(k).clone()).sum::<Rat>()
            / Rat::from_integer((u.len() as i64).into());
        assert_eq!(avg, frac(2, 3));
    }

    #[test]
    fn select_within_block() {
        let fam = PeriodicFam::uniform(4).unwrap();
        let evens = PeriodicSet::new(2, &[0]).unwrap();
        let forbidden: BTreeSet<u64> = BTreeSet::from([3]);
        let u = uniform_approx_select(
            &[PeriodicSimpleFunction::constant(frac(1, 2))],
            &fam,
            &evens,
            &forbidden,
            &frac(1, 10),
        )
        .unwrap();
        assert!(!u.is_empty());
        assert!(u.iter().all(|k| evens.contains(*k) && !forbidden.contains(k)));
    }

    #[test]
    fn select_null_region_is_error() {
        let fam =
            PeriodicFam::new(vec![frac(1, 2), frac(1, 2), frac(0, 1), frac(0, 1)]).unwrap();
        let nulls = PeriodicSet::new(4, &[2, 3]).unwrap();
        assert!(matches!(
            uniform_approx_select(&[], &fam, &nulls, &BTreeSet::new(), &frac(1, 2)),
            Err(FamError::IllegalRegion)
        ));
    }
}
