//! The limit pipeline: grid refinement of conditional averages, limit
//! elements for condition sequences, the probability-tree witness search,
//! certificate checking, and the assembled linked-family witness.
//!
//! Throughout, `K` is the index set carrying a free finitely additive
//! measure, `W` is partitioned into finite label blocks `P_k`, and each
//! condition sequence assigns a nonzero algebra element to every label.
//! The guiding quantities are the success fractions
//! `ϱ^i_r(k) = |{ℓ ∈ P_k : r ≤ r^i_ℓ}| / |P_k|`, their measured averages
//! `f^i_r(k) = (1/|P_k|) Σ_ℓ μ_r(r^i_ℓ)`, and the per-block means
//! `c_{i,m}(r) = (1/a_m) ∫_{B_m} f^i_r dΞ`. All arithmetic is exact.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_integer::Integer;
use num_traits::Signed;
use rand_core::SeedableRng;

use crate::bits::BitSet;
use crate::boolalg::{AlgebraError, Element, MeasuredAlgebra};
use crate::fam::{
    self, FamError, IndexPartition, PeriodicFam, PeriodicSet, PeriodicSimpleFunction,
};
use crate::intnum::{self, IntError, IntersectionQuery};
use crate::ptree::{ProbTree, TreeError};
use crate::rat::{self, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LimitError {
    BadBlocks,
    BadSequence,
    BadDeltas,
    BadEpsilon,
    NullCondition,
    /// The averaged-integral hypothesis fails below the starting condition.
    HypothesisViolated { sequence: usize, condition: Element },
    /// A sequence entry with conditional measure below the threshold.
    PreconditionFailed { k: u64, label: usize },
    /// A conclusion guaranteed by the theory failed to materialize; this
    /// signals a bug, not a property of the input.
    InternalInvariant { detail: String },
    /// Sampled search ran out of paths. Carries empirical tail statistics;
    /// it does not disprove that the event has positive probability.
    BudgetExhausted {
        paths: u64,
        best_block_deviation: Rat,
        best_success_margin: Rat,
    },
    /// Some nonzero elements are not covered by any density set.
    Coverage { uncovered: Vec<Element> },
    Algebra(AlgebraError),
    Fam(FamError),
    Tree(TreeError),
    Int(IntError),
}

impl fmt::Display for LimitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitError::BadBlocks => write!(f, "block sizes must be nonempty and positive"),
            LimitError::BadSequence => write!(f, "condition sequence shape mismatch"),
            LimitError::BadDeltas => write!(f, "one delta per sequence required"),
            LimitError::BadEpsilon => write!(f, "tolerance must be positive"),
            LimitError::NullCondition => write!(f, "conditions must be nonzero"),
            LimitError::HypothesisViolated {
                sequence,
                condition,
            } => write!(
                f,
                "integral hypothesis fails for sequence {sequence} below {condition:?}"
            ),
            LimitError::PreconditionFailed { k, label } => write!(
                f,
                "conditional measure below threshold at block {k}, label {label}"
            ),
            LimitError::InternalInvariant { detail } => {
                write!(f, "internal invariant violated: {detail}")
            }
            LimitError::BudgetExhausted {
                paths,
                best_block_deviation,
                best_success_margin,
            } => write!(
                f,
                "no witness in {paths} paths (best block deviation {best_block_deviation}, best success margin {best_success_margin})"
            ),
            LimitError::Coverage { uncovered } => {
                write!(f, "{} elements uncovered by the density sets", uncovered.len())
            }
            LimitError::Algebra(e) => write!(f, "{e}"),
            LimitError::Fam(e) => write!(f, "{e}"),
            LimitError::Tree(e) => write!(f, "{e}"),
            LimitError::Int(e) => write!(f, "{e}"),
        }
    }
}

impl From<AlgebraError> for LimitError {
    fn from(e: AlgebraError) -> Self {
        LimitError::Algebra(e)
    }
}
impl From<FamError> for LimitError {
    fn from(e: FamError) -> Self {
        LimitError::Fam(e)
    }
}
impl From<TreeError> for LimitError {
    fn from(e: TreeError) -> Self {
        LimitError::Tree(e)
    }
}
impl From<IntError> for LimitError {
    fn from(e: IntError) -> Self {
        LimitError::Int(e)
    }
}

/// The label blocks `P_k`: block `k` has `sizes[k mod period]` labels,
/// identified as pairs `(k, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockFamily {
    sizes: Vec<usize>,
}

impl BlockFamily {
    pub fn new(sizes: Vec<usize>) -> Result<Self, LimitError> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(LimitError::BadBlocks);
        }
        Ok(Self { sizes })
    }

    pub fn period(&self) -> u64 {
        self.sizes.len() as u64
    }

    pub fn size_at(&self, k: u64) -> usize {
        self.sizes[(k % self.period()) as usize]
    }
}

/// A periodic assignment of a nonzero element to every label `(k, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionSequence {
    table: Vec<Vec<Element>>,
}

impl ConditionSequence {
    pub fn new(table: Vec<Vec<Element>>, blocks: &BlockFamily) -> Result<Self, LimitError> {
        if table.is_empty() {
            return Err(LimitError::BadSequence);
        }
        let period = table.len() as u64;
        let span = period.lcm(&blocks.period());
        for k in 0..span {
            if table[(k % period) as usize].len() != blocks.size_at(k) {
                return Err(LimitError::BadSequence);
            }
        }
        if table.iter().flatten().any(Element::is_zero) {
            return Err(LimitError::NullCondition);
        }
        Ok(Self { table })
    }

    pub fn period(&self) -> u64 {
        self.table.len() as u64
    }

    /// The conditions of block `k`, one per label.
    pub fn at(&self, k: u64) -> &[Element] {
        &self.table[(k % self.period()) as usize]
    }
}

/// Everything a limit computation needs: the measured algebra (strictly
/// positive weights), the free measure on indices, the index partition
/// `⟨B_m⟩`, the label blocks, and the condition sequences with their
/// thresholds `δ_i`.
#[derive(Debug, Clone)]
pub struct LimitContext {
    algebra: MeasuredAlgebra,
    fam: PeriodicFam,
    partition: IndexPartition,
    blocks: BlockFamily,
    sequences: Vec<ConditionSequence>,
    deltas: Vec<Rat>,
}

impl LimitContext {
    pub fn new(
        algebra: MeasuredAlgebra,
        fam: PeriodicFam,
        partition: IndexPartition,
        blocks: BlockFamily,
        sequences: Vec<ConditionSequence>,
        deltas: Vec<Rat>,
    ) -> Result<Self, LimitError> {
        if sequences.len() != deltas.len() {
            return Err(LimitError::BadDeltas);
        }
        let size = algebra.space().size();
        for seq in &sequences {
            for e in seq.table.iter().flatten() {
                if e.space_size() != size {
                    return Err(LimitError::Algebra(AlgebraError::SpaceMismatch {
                        left: size,
                        right: e.space_size(),
                    }));
                }
            }
        }
        Ok(Self {
            algebra,
            fam,
            partition,
            blocks,
            sequences,
            deltas,
        })
    }

    pub fn algebra(&self) -> &MeasuredAlgebra {
        &self.algebra
    }
    pub fn fam(&self) -> &PeriodicFam {
        &self.fam
    }
    pub fn partition(&self) -> &IndexPartition {
        &self.partition
    }
    pub fn blocks(&self) -> &BlockFamily {
        &self.blocks
    }
    pub fn sequences(&self) -> &[ConditionSequence] {
        &self.sequences
    }
    pub fn deltas(&self) -> &[Rat] {
        &self.deltas
    }

    /// Relative measure `μ_r(b) = μ(r ∧ b)/μ(r)`; `r` must be nonzero.
    pub fn mu_rel(&self, r: &Element, b: &Element) -> Result<Rat, LimitError> {
        if r.is_zero() {
            return Err(LimitError::NullCondition);
        }
        Ok(self.algebra.measure(&r.meet(b)?)? / self.algebra.measure(r)?)
    }

    /// `ϱ_r(k)` for an arbitrary sequence: the fraction of labels in `P_k`
    /// whose condition lies above `r`.
    pub fn success_fraction(
        &self,
        seq: &ConditionSequence,
        r: &Element,
        k: u64,
    ) -> Result<Rat, LimitError> {
        let entries = seq.at(k);
        let mut hits = 0i64;
        for b in entries {
            if r.leq(b)? {
                hits += 1;
            }
        }
        Ok(rat::frac(hits, entries.len() as i64))
    }

    /// `f_r` for a sequence: `f_r(k) = (1/|P_k|) Σ_ℓ μ_r(b_ℓ)`.
    pub fn averaged_function(
        &self,
        seq: &ConditionSequence,
        r: &Element,
    ) -> Result<PeriodicSimpleFunction, LimitError> {
        let period = seq.period().lcm(&self.blocks.period());
        let mut values = Vec::with_capacity(period as usize);
        for k in 0..period {
            let entries = seq.at(k);
            let mut total = rat::zero();
            for b in entries {
                total += self.mu_rel(r, b)?;
            }
            values.push(total / Rat::from_integer((entries.len() as i64).into()));
        }
        Ok(PeriodicSimpleFunction::new(values)?)
    }

    /// `∫_K f_r dΞ` for sequence `i`.
    pub fn integral(&self, i: usize, r: &Element) -> Result<Rat, LimitError> {
        let f = self.averaged_function(&self.sequences[i], r)?;
        Ok(fam::integrate(&f, &self.fam, &PeriodicSet::everything()))
    }

    /// Block indices with positive mass, and all the block masses.
    pub fn m_set(&self) -> (Vec<usize>, Vec<Rat>) {
        let masses = self.partition.block_masses(&self.fam);
        let m = masses
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_positive())
            .map(|(i, _)| i)
            .collect();
        (m, masses)
    }

    /// `c_{i,m}(r) = (1/a_m) ∫_{B_m} f^i_r dΞ` for each positive-mass `m`.
    pub fn c_values(&self, r: &Element) -> Result<Vec<Vec<Rat>>, LimitError> {
        let (m_set, masses) = self.m_set();
        let mut out = Vec::with_capacity(self.sequences.len());
        for seq in &self.sequences {
            let f = self.averaged_function(seq, r)?;
            let row = m_set
                .iter()
                .map(|&m| {
                    fam::integrate(&f, &self.fam, &self.partition.blocks()[m]) / &masses[m]
                })
                .collect();
            out.push(row);
        }
        Ok(out)
    }

    fn atoms_below(&self, r: &Element) -> Vec<Element> {
        let size = self.algebra.space().size();
        r.atoms()
            .map(|a| {
                let mut b = BitSet::empty(size);
                b.insert(a);
                Element::from_bits(b)
            })
            .collect()
    }
}

/// Output of [`grid_refine`]: a condition `r*` and grid values `c̄` such
/// that every `r' ≤ r*` keeps each `c_{i,m}(r')` within `eps` of `c_{i,m}`
/// (so the in-tolerance set is dense below `r*` and contains it).
#[derive(Debug, Clone)]
pub struct GridResult {
    pub r_star: Element,
    /// `c[i][t]` for the `t`-th positive-mass block.
    pub c: Vec<Vec<Rat>>,
    pub m_set: Vec<usize>,
    pub eps: Rat,
}

impl GridResult {
    /// Membership in `D*`: every `c_{i,m}(q)` within `eps` of the grid.
    pub fn in_dstar(&self, ctx: &LimitContext, q: &Element) -> Result<bool, LimitError> {
        let cq = ctx.c_values(q)?;
        for (i, row) in self.c.iter().enumerate() {
            for (t, target) in row.iter().enumerate() {
                if rat::abs(&(&cq[i][t] - target)) >= self.eps {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Stuck-induction over the `1/N`-grid of candidate block averages.
///
/// Atoms below `r` are filtered against each feasible grid vector in
/// lexicographic order; as soon as every surviving atom lies within `eps`
/// of the current vector the induction is stuck and that vector is the
/// answer. Since `c_{i,m}` is affine in the conditional measure, every
/// element below the join of in-tolerance atoms is itself in tolerance,
/// which yields the density conclusion outright.
pub fn grid_refine(ctx: &LimitContext, r: &Element, eps: &Rat) -> Result<GridResult, LimitError> {
    if !eps.is_positive() {
        return Err(LimitError::BadEpsilon);
    }
    if r.is_zero() {
        return Err(LimitError::NullCondition);
    }
    let (m_set, masses) = ctx.m_set();
    let atoms = ctx.atoms_below(r);

    // per-atom grid coordinates, plus the integral hypothesis check
    let mut atom_c: Vec<Vec<Vec<Rat>>> = Vec::with_capacity(atoms.len());
    for a in &atoms {
        let c = ctx.c_values(a)?;
        for (i, row) in c.iter().enumerate() {
            let total: Rat = m_set
                .iter()
                .enumerate()
                .map(|(t, &m)| &row[t] * &masses[m])
                .sum();
            if total < ctx.deltas[i] {
                return Err(LimitError::HypothesisViolated {
                    sequence: i,
                    condition: a.clone(),
                });
            }
        }
        atom_c.push(c);
    }

    let i_star = ctx.sequences.len();
    if i_star == 0 || m_set.is_empty() {
        return Ok(GridResult {
            r_star: r.clone(),
            c: alloc::vec![Vec::new(); i_star],
            m_set,
            eps: eps.clone(),
        });
    }

    // smallest N with 1/N < eps
    let n_grid: i64 = {
        let inv = eps.recip();
        let fl = inv.floor().to_integer();
        i64::try_from(&fl).expect("grid resolution fits in i64") + 1
    };

    // feasible grid vectors for one sequence, in lexicographic order
    let per_i: Vec<Vec<Vec<Rat>>> = (0..i_star)
        .map(|i| {
            let mut all = Vec::new();
            let mut digits = alloc::vec![0i64; m_set.len()];
            loop {
                let vec: Vec<Rat> = digits.iter().map(|&d| rat::frac(d, n_grid)).collect();
                let total: Rat = vec
                    .iter()
                    .zip(&m_set)
                    .map(|(v, &m)| v * &masses[m])
                    .sum();
                if total >= ctx.deltas[i] {
                    all.push(vec);
                }
                // next vector, most significant digit first
                let mut pos = m_set.len();
                loop {
                    if pos == 0 {
                        return all;
                    }
                    pos -= 1;
                    if digits[pos] < n_grid {
                        digits[pos] += 1;
                        for d in digits.iter_mut().skip(pos + 1) {
                            *d = 0;
                        }
                        break;
                    }
                }
            }
        })
        .collect();
    if per_i.iter().any(Vec::is_empty) {
        // no grid vector meets some delta: the hypothesis cannot hold
        return Err(LimitError::InternalInvariant {
            detail: String::from("empty grid despite verified hypothesis"),
        });
    }

    let in_ball = |atom: usize, choice: &[usize]| -> bool {
        (0..i_star).all(|i| {
            let target = &per_i[i][choice[i]];
            (0..m_set.len()).all(|t| rat::abs(&(&atom_c[atom][i][t] - &target[t])) < *eps)
        })
    };

    let mut survivors: Vec<usize> = (0..atoms.len()).collect();
    let mut choice = alloc::vec![0usize; i_star];
    loop {
        let out: Vec<usize> = survivors
            .iter()
            .copied()
            .filter(|&a| !in_ball(a, &choice))
            .collect();
        if out.is_empty() {
            // stuck: every surviving atom is in tolerance for this vector
            let mut joined = Element::zero(ctx.algebra.space());
            for &a in &survivors {
                joined = joined.join(&atoms[a])?;
            }
            let c = (0..i_star)
                .map(|i| per_i[i][choice[i]].clone())
                .collect();
            return Ok(GridResult {
                r_star: joined,
                c,
                m_set,
                eps: eps.clone(),
            });
        }
        survivors = out;
        // advance the grid odometer
        let mut pos = i_star;
        loop {
            if pos == 0 {
                // exhausting the grid contradicts the stuck-induction bound
                return Err(LimitError::InternalInvariant {
                    detail: String::from("grid exhausted without sticking"),
                });
            }
            pos -= 1;
            if choice[pos] + 1 < per_i[pos].len() {
                choice[pos] += 1;
                for c in choice.iter_mut().skip(pos + 1) {
                    *c = 0;
                }
                break;
            }
        }
    }
}

/// The largest element `r⊗ ≤ r*` below which the averaged integral of the
/// sequence never drops under `delta`: the join of the atoms whose
/// integral clears the threshold. Affinity of the integral in the
/// conditional measure makes this exactly the maximal valid element, so it
/// agrees with a decreasing-measure scan over the whole algebra.
pub fn limit_construct(
    ctx: &LimitContext,
    seq: &ConditionSequence,
    r_star: &Element,
    delta: &Rat,
) -> Result<Element, LimitError> {
    if r_star.is_zero() {
        return Err(LimitError::NullCondition);
    }
    // precondition: every entry has conditional measure at least delta
    let span = seq.period().lcm(&ctx.blocks.period());
    for k in 0..span {
        for (label, b) in seq.at(k).iter().enumerate() {
            if ctx.mu_rel(r_star, b)? < *delta {
                return Err(LimitError::PreconditionFailed { k, label });
            }
        }
    }

    let mut best: Option<(Rat, Element)> = None;
    let mut good = Element::zero(ctx.algebra.space());
    for a in ctx.atoms_below(r_star) {
        let f = ctx.averaged_function(seq, &a)?;
        let integral = fam::integrate(&f, &ctx.fam, &PeriodicSet::everything());
        if integral >= *delta {
            good = good.join(&a)?;
        } else if best.as_ref().is_none_or(|(v, _)| integral > *v) {
            best = Some((integral, a));
        }
    }
    if good.is_zero() {
        let (v, a) = best.expect("r_star has atoms");
        return Err(LimitError::InternalInvariant {
            detail: format!("no admissible atom; best integral {v} at {a:?}"),
        });
    }
    Ok(good)
}

/// Tree-size parameters: the (even) height `h*` and grid tolerance `ε*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeParams {
    pub eps: Rat,
    pub h_star: u64,
    pub eps_star: Rat,
    /// Set when `h*` was chosen by hand rather than from the variance
    /// bounds; certificates remain exact, only the existence guarantee
    /// for the search event is waived.
    pub empirical: bool,
}

impl TreeParams {
    /// Smallest even `h*` with
    /// `2 a_m (1 − a_m) / (h* ε²) < 1/(m* + i*)` for every positive block
    /// and `1/h* < (ε/2)² / (2(m* + i*))`, then the largest dyadic
    /// `ε* < ε` with `(2/h* + ε*) / (ε/2)² < 1/(m* + i*)`.
    pub fn derive(
        eps: &Rat,
        block_masses: &[Rat],
        i_star: usize,
    ) -> Result<TreeParams, LimitError> {
        if !eps.is_positive() || *eps >= rat::one() {
            return Err(LimitError::BadEpsilon);
        }
        let m_star = block_masses.len();
        let denom = Rat::from_integer(((m_star + i_star) as i64).into());
        let eps2 = eps * eps;
        let half_eps2 = &(eps / rat::int(2)) * &(eps / rat::int(2));

        // h > (m*+i*)·2a(1−a)/ε²  and  h > 2(m*+i*)/(ε/2)²
        let mut bound = rat::int(2) * &denom / &half_eps2;
        for a in block_masses {
            if !a.is_positive() {
                continue;
            }
            let cand = &denom * rat::int(2) * a * (rat::one() - a) / &eps2;
            if cand > bound {
                bound = cand;
            }
        }
        let mut h = i64::try_from(&bound.floor().to_integer()).expect("fits") + 1;
        if h % 2 != 0 {
            h += 1;
        }
        // strictness at the boundary: bump if any constraint is not strict
        let strict = |h: i64| -> bool {
            let hr = rat::int(h);
            if rat::one() / &hr >= &half_eps2 / (rat::int(2) * &denom) {
                return false;
            }
            block_masses.iter().all(|a| {
                !a.is_positive()
                    || rat::int(2) * a * (rat::one() - a) / (&hr * &eps2)
                        < rat::one() / &denom
            })
        };
        while !strict(h) {
            h += 2;
        }

        let eps_star = dyadic_below(&eps_star_bound(eps, h as u64, m_star, i_star), eps)?;
        Ok(TreeParams {
            eps: eps.clone(),
            h_star: h as u64,
            eps_star,
            empirical: false,
        })
    }

    /// Hand-picked `h*` (even) and `ε*`; the certificate search still
    /// verifies exactly, only the probabilistic guarantee is waived.
    pub fn empirical(eps: &Rat, h_star: u64, eps_star: &Rat) -> Result<TreeParams, LimitError> {
        if !eps.is_positive() || h_star == 0 || !h_star.is_multiple_of(2) || !eps_star.is_positive() {
            return Err(LimitError::BadEpsilon);
        }
        Ok(TreeParams {
            eps: eps.clone(),
            h_star,
            eps_star: eps_star.clone(),
            empirical: true,
        })
    }
}

/// Upper bound for `ε*`: `(ε/2)²/(m*+i*) − 2/h*`.
fn eps_star_bound(eps: &Rat, h_star: u64, m_star: usize, i_star: usize) -> Rat {
    let half = eps / rat::int(2);
    &half * &half / rat::int((m_star + i_star) as i64) - rat::frac(2, h_star as i64)
}

/// Largest `1/2^j` strictly below both arguments.
fn dyadic_below(bound: &Rat, eps: &Rat) -> Result<Rat, LimitError> {
    if !bound.is_positive() {
        return Err(LimitError::BadEpsilon);
    }
    let mut v = rat::one();
    for _ in 0..512 {
        if v < *bound && v < *eps {
            return Ok(v);
        }
        v /= rat::int(2);
    }
    Err(LimitError::BadEpsilon)
}

/// Edge labels: odd levels pick a positive-mass block, even levels pick a
/// pattern (membership bits over the live labels) and a fresh index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeLabel {
    Block(usize),
    Choice { sigma: Vec<u8>, k: u64 },
}

/// Per-node bookkeeping for the witness tree.
#[derive(Debug, Clone)]
pub struct NodeData {
    /// The node's condition `r_ρ`.
    pub r: Element,
    /// Indices consumed along this path (the freshness set).
    pub used: BTreeSet<u64>,
    /// The chosen index at each completed round.
    pub k_hist: Vec<u64>,
    /// The chosen block at each round.
    pub m_hist: Vec<usize>,
    /// The candidate set the parent drew `k` from, for audits.
    pub u_choice: Option<BTreeSet<u64>>,
}

/// A lazily expanded witness tree of height `h*`.
pub struct WitnessTree<'a> {
    ctx: &'a LimitContext,
    grid: &'a GridResult,
    params: TreeParams,
    forbidden: BTreeSet<u64>,
    tree: ProbTree<TreeLabel, NodeData>,
}

/// Root r* comes from `grid`, which must have been produced with
/// tolerance `ε*/4`.
pub fn build_tree<'a>(
    ctx: &'a LimitContext,
    grid: &'a GridResult,
    forbidden: BTreeSet<u64>,
    params: TreeParams,
) -> Result<WitnessTree<'a>, LimitError> {
    debug_assert_eq!(grid.eps, &params.eps_star / rat::int(4));
    let root = NodeData {
        r: grid.r_star.clone(),
        used: BTreeSet::new(),
        k_hist: Vec::new(),
        m_hist: Vec::new(),
        u_choice: None,
    };
    Ok(WitnessTree {
        ctx,
        grid,
        params,
        forbidden,
        tree: ProbTree::new(root),
    })
}

fn expand_node(
    ctx: &LimitContext,
    grid: &GridResult,
    params: &TreeParams,
    forbidden: &BTreeSet<u64>,
    path: &[TreeLabel],
    data: &NodeData,
) -> Result<Vec<(TreeLabel, Rat, NodeData)>, TreeError> {
    let fail = |msg: String| TreeError::Expand(msg);
    if path.len() as u64 >= params.h_star {
        return Ok(Vec::new());
    }
    if path.len().is_multiple_of(2) {
        // block round: one child per positive-mass block, weight a_m
        let (m_set, masses) = ctx.m_set();
        return Ok(m_set
            .into_iter()
            .map(|m| {
                let mut child = data.clone();
                child.m_hist.push(m);
                child.u_choice = None;
                (TreeLabel::Block(m), masses[m].clone(), child)
            })
            .collect());
    }

    // index round: draw a fresh candidate set inside the chosen block,
    // split the condition into its label patterns, and hand every
    // (pattern, index) pair its conditional weight
    let m = *data.m_hist.last().expect("odd level follows a block pick");
    let mut barred = data.used.clone();
    barred.extend(forbidden.iter().copied());
    let fs: Vec<PeriodicSimpleFunction> = ctx
        .sequences
        .iter()
        .map(|seq| ctx.averaged_function(seq, &data.r))
        .collect::<Result<_, _>>()
        .map_err(|e| fail(format!("averaged function: {e}")))?;
    let quarter = &params.eps_star / rat::int(4);
    let u = fam::uniform_approx_select(
        &fs,
        ctx.fam(),
        &ctx.partition().blocks()[m],
        &barred,
        &quarter,
    )
    .map_err(|e| fail(format!("index selection: {e}")))?;

    // group the ambient atoms below r by their pattern over the live labels
    let domain: Vec<(usize, u64, usize)> = (0..ctx.sequences.len())
        .flat_map(|i| {
            u.iter()
                .flat_map(move |&k| (0..ctx.blocks.size_at(k)).map(move |j| (i, k, j)))
        })
        .collect();
    let size = ctx.algebra.space().size();
    let mut groups: alloc::collections::BTreeMap<Vec<u8>, BitSet> =
        alloc::collections::BTreeMap::new();
    for atom in data.r.atoms() {
        let sigma: Vec<u8> = domain
            .iter()
            .map(|&(i, k, j)| {
                if ctx.sequences[i].at(k)[j].contains_atom(atom) {
                    0
                } else {
                    1
                }
            })
            .collect();
        groups
            .entry(sigma)
            .or_insert_with(|| BitSet::empty(size))
            .insert(atom);
    }

    let r_mass = ctx
        .algebra
        .measure(&data.r)
        .map_err(|e| fail(format!("measure: {e}")))?;
    let u_len = Rat::from_integer((u.len() as i64).into());
    let mut children = Vec::with_capacity(groups.len() * u.len());
    for (sigma, bits) in groups {
        let y = Element::from_bits(bits);
        let weight = ctx
            .algebra
            .measure(&y)
            .map_err(|e| fail(format!("measure: {e}")))?
            / &r_mass;
        // the child condition must land in the refined set D*
        match grid.in_dstar(ctx, &y) {
            Ok(true) => {}
            Ok(false) => {
                return Err(fail(format!(
                    "density failure: no refined condition below pattern {sigma:?}"
                )))
            }
            Err(e) => return Err(fail(format!("membership: {e}"))),
        }
        for &k in &u {
            let mut child = data.clone();
            child.r = y.clone();
            child.used.extend(u.iter().copied());
            child.k_hist.push(k);
            child.u_choice = Some(u.clone());
            children.push((
                TreeLabel::Choice {
                    sigma: sigma.clone(),
                    k,
                },
                &weight / &u_len,
                child,
            ));
        }
    }
    Ok(children)
}

impl<'a> WitnessTree<'a> {
    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn tree(&self) -> &ProbTree<TreeLabel, NodeData> {
        &self.tree
    }

    /// Expands every level up to `h*` (exponential; small trees only).
    pub fn materialize_full(&mut self) -> Result<(), LimitError> {
        let (ctx, grid, params, forbidden) = (self.ctx, self.grid, &self.params, &self.forbidden);
        self.tree
            .materialize(params.h_star as usize, |path, data| {
                expand_node(ctx, grid, params, forbidden, path, data)
            })?;
        Ok(())
    }

    /// Block frequency deviations `|V_m − a_m|` at a leaf, one per block.
    fn block_deviations(&self, data: &NodeData) -> Vec<Rat> {
        let masses = self.ctx.partition.block_masses(&self.ctx.fam);
        let total = Rat::from_integer((data.k_hist.len() as i64).into());
        (0..self.ctx.partition.blocks().len())
            .map(|m| {
                let hits = data
                    .k_hist
                    .iter()
                    .filter(|&&k| self.ctx.partition.blocks()[m].contains(k))
                    .count();
                rat::abs(&(rat::int(hits as i64) / &total - &masses[m]))
            })
            .collect()
    }

    /// Success averages `Y_i` at a leaf.
    fn success_averages(&self, data: &NodeData) -> Result<Vec<Rat>, LimitError> {
        let total = Rat::from_integer((data.k_hist.len() as i64).into());
        self.ctx
            .sequences
            .iter()
            .map(|seq| {
                let mut sum = rat::zero();
                for &k in &data.k_hist {
                    sum += self.ctx.success_fraction(seq, &data.r, k)?;
                }
                Ok(sum / &total)
            })
            .collect()
    }

    fn is_event_member(&self, data: &NodeData) -> Result<bool, LimitError> {
        for dev in self.block_deviations(data) {
            if dev >= self.params.eps {
                return Ok(false);
            }
        }
        for (y, delta) in self.success_averages(data)?.iter().zip(&self.ctx.deltas) {
            if *y <= delta - &self.params.eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn certificate_from(&self, data: &NodeData) -> Result<Certificate, LimitError> {
        let u: BTreeSet<u64> = data.k_hist.iter().copied().collect();
        debug_assert_eq!(u.len(), data.k_hist.len(), "indices are fresh per round");
        Ok(Certificate {
            u,
            r_plus: data.r.clone(),
            block_deviations: self.block_deviations(data),
            success_averages: self.success_averages(data)?,
            eps: self.params.eps.clone(),
            deltas: self.ctx.deltas.to_vec(),
            block_masses: self.ctx.partition.block_masses(&self.ctx.fam),
            h_star: self.params.h_star,
            eps_star: self.params.eps_star.clone(),
        })
    }

    /// Searches level `h*` for an event member. Exhaustive mode reports
    /// the exact event probability as well; sampled mode expands only the
    /// visited paths. Every certificate is re-verified from scratch before
    /// being returned.
    pub fn witness_search(&mut self, mode: SearchMode) -> Result<SearchOutcome, LimitError> {
        let outcome = match mode {
            SearchMode::Exhaustive => {
                self.materialize_full()?;
                let level = self.params.h_star as usize;
                let paths: Vec<Vec<TreeLabel>> = self
                    .tree
                    .level_paths(level)?
                    .into_iter()
                    .cloned()
                    .collect();
                let mut member_paths = Vec::new();
                for p in &paths {
                    let data = self.tree.payload(p)?;
                    if self.is_event_member(&data.clone())? {
                        member_paths.push(p.clone());
                    }
                }
                let mut pr = rat::zero();
                for p in &member_paths {
                    pr += self.tree.path_probability(p)?;
                }
                if member_paths.is_empty() {
                    return Err(LimitError::InternalInvariant {
                        detail: String::from("event empty in exhaustive search"),
                    });
                }
                let data = self.tree.payload(&member_paths[0])?.clone();
                SearchOutcome {
                    certificate: self.certificate_from(&data)?,
                    event_probability: Some(pr),
                    paths_tried: paths.len() as u64,
                }
            }
            SearchMode::Sampled { seed, budget } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let (ctx, grid, params) = (self.ctx, self.grid, self.params.clone());
                let forbidden = self.forbidden.clone();
                let mut best_dev: Option<Rat> = None;
                let mut best_margin: Option<Rat> = None;
                let mut found: Option<NodeData> = None;
                let mut tried = 0u64;
                while tried < budget {
                    tried += 1;
                    let path = self.tree.sample_and_expand(
                        params.h_star as usize,
                        &mut rng,
                        |p, d| expand_node(ctx, grid, &params, &forbidden, p, d),
                    )?;
                    let data = self.tree.payload(&path)?.clone();
                    if self.is_event_member(&data)? {
                        found = Some(data);
                        break;
                    }
                    let dev = self
                        .block_deviations(&data)
                        .into_iter()
                        .max()
                        .unwrap_or_else(rat::zero);
                    if best_dev.as_ref().is_none_or(|b| dev < *b) {
                        best_dev = Some(dev);
                    }
                    let margin = self
                        .success_averages(&data)?
                        .iter()
                        .zip(&self.ctx.deltas)
                        .map(|(y, d)| y - d)
                        .min()
                        .unwrap_or_else(rat::zero);
                    if best_margin.as_ref().is_none_or(|b| margin > *b) {
                        best_margin = Some(margin);
                    }
                }
                let Some(data) = found else {
                    return Err(LimitError::BudgetExhausted {
                        paths: tried,
                        best_block_deviation: best_dev.unwrap_or_else(rat::zero),
                        best_success_margin: best_margin.unwrap_or_else(rat::zero),
                    });
                };
                SearchOutcome {
                    certificate: self.certificate_from(&data)?,
                    event_probability: None,
                    paths_tried: tried,
                }
            }
        };
        // independent exact re-verification of the certificate
        if !verify_certificate(self.ctx, &outcome.certificate)? {
            return Err(LimitError::InternalInvariant {
                detail: String::from("certificate failed re-verification"),
            });
        }
        Ok(outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Sampled { seed: u64, budget: u64 },
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub certificate: Certificate,
    /// Exact event probability; exhaustive mode only.
    pub event_probability: Option<Rat>,
    pub paths_tried: u64,
}

/// A witness: a fresh finite index set `u` and a condition `r⊕` whose
/// block frequencies and success averages meet the advertised tolerances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub u: BTreeSet<u64>,
    pub r_plus: Element,
    pub block_deviations: Vec<Rat>,
    pub success_averages: Vec<Rat>,
    pub eps: Rat,
    pub deltas: Vec<Rat>,
    pub block_masses: Vec<Rat>,
    pub h_star: u64,
    pub eps_star: Rat,
}

/// Recomputes every certificate quantity from `u` and `r⊕` alone and
/// checks the strict inequalities; independent of how the certificate was
/// found.
pub fn verify_certificate(ctx: &LimitContext, cert: &Certificate) -> Result<bool, LimitError> {
    if cert.u.is_empty() || cert.r_plus.is_zero() {
        return Ok(false);
    }
    let total = Rat::from_integer((cert.u.len() as i64).into());
    let masses = ctx.partition.block_masses(&ctx.fam);
    for (m, a) in masses.iter().enumerate() {
        let hits = cert
            .u
            .iter()
            .filter(|&&k| ctx.partition.blocks()[m].contains(k))
            .count();
        let dev = rat::abs(&(rat::int(hits as i64) / &total - a));
        if dev >= cert.eps || dev != cert.block_deviations[m] {
            return Ok(false);
        }
    }
    for (i, seq) in ctx.sequences.iter().enumerate() {
        let mut sum = rat::zero();
        for &k in &cert.u {
            sum += ctx.success_fraction(seq, &cert.r_plus, k)?;
        }
        let avg = sum / &total;
        if avg <= &cert.deltas[i] - &cert.eps || avg != cert.success_averages[i] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pass/fail table for the two linked-family conditions: block-frequency
/// agreement per block, and success averages against `1 − ε_i − ε'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterizationReport {
    pub block_pass: Vec<bool>,
    pub sequence_pass: Vec<bool>,
}

impl CharacterizationReport {
    pub fn all_pass(&self) -> bool {
        self.block_pass.iter().all(|&b| b) && self.sequence_pass.iter().all(|&b| b)
    }
}

/// Re-checks a certificate against the characterization inequalities with
/// the uniform measure on `u`: `||u ∩ B_m|/|u| − a_m| < ε` per block and
/// `(1/|u|) Σ_k ϱ^i(k) ≥ 1 − ε_i − ε'` per sequence.
pub fn verify_characterization(
    ctx: &LimitContext,
    cert: &Certificate,
    eps_bars: &[Rat],
    eps_prime: &Rat,
) -> Result<CharacterizationReport, LimitError> {
    let total = Rat::from_integer((cert.u.len() as i64).into());
    let masses = ctx.partition.block_masses(&ctx.fam);
    let block_pass = masses
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let hits = cert
                .u
                .iter()
                .filter(|&&k| ctx.partition.blocks()[m].contains(k))
                .count();
            rat::abs(&(rat::int(hits as i64) / &total - a)) < cert.eps
        })
        .collect();
    let mut sequence_pass = Vec::with_capacity(ctx.sequences.len());
    for (i, seq) in ctx.sequences.iter().enumerate() {
        let mut sum = rat::zero();
        for &k in &cert.u {
            sum += ctx.success_fraction(seq, &cert.r_plus, k)?;
        }
        let lhs = sum / &total;
        sequence_pass.push(lhs >= rat::one() - &eps_bars[i] - eps_prime);
    }
    Ok(CharacterizationReport {
        block_pass,
        sequence_pass,
    })
}

/// One density set `Q_{s,ε} = {b ≠ 0 : μ_s(b) ≥ 1 − ε}` with its
/// certified intersection-number lower bound.
#[derive(Debug, Clone)]
pub struct DensityEntry {
    pub s_index: usize,
    pub eps: Rat,
    pub elements: Vec<Element>,
    pub kelley: Rat,
}

#[derive(Debug, Clone)]
pub struct FamWitness {
    pub entries: Vec<DensityEntry>,
}

impl FamWitness {
    /// Whether `b` belongs to the set for `(s_index, eps)`.
    pub fn contains(&self, entry: usize, b: &Element) -> bool {
        self.entries[entry].elements.contains(b)
    }
}

/// Materializes every `Q_{s,ε}`, verifies that the union covers all
/// nonzero elements, and certifies `kelley_lower(Q_{s,ε}) ≥ 1 − ε`.
pub fn fam_linked_witness(
    algebra: &MeasuredAlgebra,
    family: &[Element],
    eps_grid: &[Rat],
) -> Result<FamWitness, LimitError> {
    let n = algebra.space().size();
    debug_assert!(n <= 20, "element enumeration is exponential in atoms");
    let mut all: Vec<Element> = Vec::new();
    for mask in 1u64..(1u64 << n) {
        let mut bits = BitSet::empty(n);
        for a in 0..n {
            if mask & (1 << a) != 0 {
                bits.insert(a);
            }
        }
        all.push(Element::from_bits(bits));
    }

    let mut entries = Vec::new();
    let mut covered = alloc::vec![false; all.len()];
    for (s_index, s) in family.iter().enumerate() {
        let s_mass = algebra.measure(s)?;
        if !s_mass.is_positive() {
            return Err(LimitError::NullCondition);
        }
        for eps in eps_grid {
            let threshold = (rat::one() - eps) * &s_mass;
            let mut elements = Vec::new();
            for (idx, b) in all.iter().enumerate() {
                if algebra.measure(&b.meet(s)?)? >= threshold {
                    elements.push(b.clone());
                    covered[idx] = true;
                }
            }
            if elements.is_empty() {
                continue;
            }
            let query = IntersectionQuery::new(elements.clone(), 1)?;
            let kelley = intnum::kelley_lower(&query)?.value;
            entries.push(DensityEntry {
                s_index,
                eps: eps.clone(),
                elements,
                kelley,
            });
        }
    }
    let uncovered: Vec<Element> = all
        .into_iter()
        .zip(covered)
        .filter(|(_, c)| !c)
        .map(|(b, _)| b)
        .collect();
    if !uncovered.is_empty() {
        return Err(LimitError::Coverage { uncovered });
    }
    Ok(FamWitness { entries })
}

/// The limit map of the linked witness: the maximal condition below `s`
/// keeping every averaged integral of `b̄` at or above `1 − ε`.
pub fn fam_limit_map(
    ctx: &LimitContext,
    seq: &ConditionSequence,
    s: &Element,
    eps: &Rat,
) -> Result<Element, LimitError> {
    limit_construct(ctx, seq, s, &(rat::one() - eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;
    use alloc::vec;

    fn element(space: crate::boolalg::AtomSpace, atoms: &[usize]) -> Element {
        Element::from_atoms(space, atoms).unwrap()
    }

    /// Uniform 4-atom algebra, uniform free measure mod 2 with blocks
    /// evens/odds, singleton label blocks, one sequence alternating the
    /// two halves {a0,a1} and {a2,a3}, threshold 1/2.
    fn halves_context() -> LimitContext {
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let fam = PeriodicFam::uniform(2).unwrap();
        let partition = IndexPartition::new(2, &[vec![0], vec![1]]).unwrap();
        let blocks = BlockFamily::new(vec![1]).unwrap();
        let seq = ConditionSequence::new(
            vec![
                vec![element(space, &[0, 1])],
                vec![element(space, &[2, 3])],
            ],
            &blocks,
        )
        .unwrap();
        LimitContext::new(algebra, fam, partition, blocks, vec![seq], vec![frac(1, 2)]).unwrap()
    }

    #[test]
    fn grid_refine_trivial_cases() {
        // no sequences: r* = r, empty grid
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let fam = PeriodicFam::uniform(2).unwrap();
        let partition = IndexPartition::new(2, &[vec![0], vec![1]]).unwrap();
        let blocks = BlockFamily::new(vec![1]).unwrap();
        let ctx = LimitContext::new(algebra, fam, partition, blocks, vec![], vec![]).unwrap();
        let r = Element::one(space);
        let g = grid_refine(&ctx, &r, &frac(1, 4)).unwrap();
        assert_eq!(g.r_star, r);
        assert!(g.c.is_empty());

        // constant-one sequence: c = 1 at a grid point, r* = r
        let ctx = {
            let algebra = MeasuredAlgebra::uniform(4).unwrap();
            let space = algebra.space();
            let fam = PeriodicFam::uniform(2).unwrap();
            let partition = IndexPartition::new(2, &[vec![0], vec![1]]).unwrap();
            let blocks = BlockFamily::new(vec![1]).unwrap();
            let seq = ConditionSequence::new(vec![vec![Element::one(space)]], &blocks).unwrap();
            LimitContext::new(algebra, fam, partition, blocks, vec![seq], vec![frac(1, 2)])
                .unwrap()
        };
        let r = Element::one(ctx.algebra().space());
        let g = grid_refine(&ctx, &r, &frac(1, 4)).unwrap();
        assert_eq!(g.r_star, r);
        // c(q) = 1 everywhere, so the sticking grid point is within eps of 1
        assert!(g.c[0].iter().all(|c| rat::abs(&(c - frac(1, 1))) < frac(1, 4)));
        assert!(g.in_dstar(&ctx, &r).unwrap());
    }

    #[test]
    fn grid_refine_halves_matches_direct_evaluation() {
        let ctx = halves_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let eps = frac(1, 4);
        let g = grid_refine(&ctx, &r, &eps).unwrap();
        assert!(g.r_star.leq(&r).unwrap());
        assert!(g.in_dstar(&ctx, &g.r_star).unwrap());
        // grid conclusions
        for (i, row) in g.c.iter().enumerate() {
            let total: Rat = row
                .iter()
                .zip(&g.m_set)
                .map(|(c, &m)| c * &ctx.partition().block_masses(ctx.fam())[m])
                .sum();
            assert!(total >= ctx.deltas()[i]);
            assert!(row.iter().all(|c| *c >= frac(0, 1) && *c <= frac(1, 1)));
        }
        // membership test agrees with direct evaluation on all 15 elements
        for mask in 1u64..16 {
            let atoms: Vec<usize> = (0..4).filter(|a| mask & (1 << a) != 0).collect();
            let q = element(space, &atoms);
            let direct = {
                let cq = ctx.c_values(&q).unwrap();
                g.c.iter().enumerate().all(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .all(|(t, c)| rat::abs(&(&cq[i][t] - c)) < eps)
                })
            };
            assert_eq!(g.in_dstar(&ctx, &q).unwrap(), direct, "mask {mask}");
        }
        // density below r*: every element below r* is in tolerance
        for mask in 1u64..16 {
            let atoms: Vec<usize> = (0..4).filter(|a| mask & (1 << a) != 0).collect();
            let q = element(space, &atoms);
            if q.leq(&g.r_star).unwrap() {
                assert!(g.in_dstar(&ctx, &q).unwrap());
            }
        }
    }

    #[test]
    fn grid_refine_detects_hypothesis_violation() {
        // alternating {a0,a1}, {a0,a2}: atom a3 has integral 0 < 1/2
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let fam = PeriodicFam::uniform(2).unwrap();
        let partition = IndexPartition::new(2, &[vec![0], vec![1]]).unwrap();
        let blocks = BlockFamily::new(vec![1]).unwrap();
        let seq = ConditionSequence::new(
            vec![
                vec![element(space, &[0, 1])],
                vec![element(space, &[0, 2])],
            ],
            &blocks,
        )
        .unwrap();
        let ctx =
            LimitContext::new(algebra, fam, partition, blocks, vec![seq], vec![frac(1, 2)])
                .unwrap();
        let r = Element::one(space);
        match grid_refine(&ctx, &r, &frac(1, 4)) {
            Err(LimitError::HypothesisViolated { sequence: 0, condition }) => {
                assert_eq!(condition, element(space, &[3]));
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn limit_construct_examples() {
        let ctx = halves_context();
        let space = ctx.algebra().space();
        // constant-one sequence: everything survives
        let ones = ConditionSequence::new(vec![vec![Element::one(space)]], ctx.blocks()).unwrap();
        let r = Element::one(space);
        assert_eq!(limit_construct(&ctx, &ones, &r, &frac(1, 2)).unwrap(), r);
        // delta = 0: everything survives too
        let seq = ctx.sequences()[0].clone();
        assert_eq!(limit_construct(&ctx, &seq, &r, &frac(0, 1)).unwrap(), r);
    }

    #[test]
    fn limit_construct_alternating_example() {
        // alternating {a0,a1}, {a0,a2} with delta 1/2 and index weights
        // (3/4, 1/4): a0 integrates to 1, a1 to 3/4, a2 to 1/4, a3 to 0,
        // so exactly {a0, a1} survives
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let fam = PeriodicFam::new(vec![frac(3, 4), frac(1, 4)]).unwrap();
        let partition = IndexPartition::new(1, &[vec![0]]).unwrap();
        let blocks = BlockFamily::new(vec![1]).unwrap();
        let seq = ConditionSequence::new(
            vec![
                vec![element(space, &[0, 1])],
                vec![element(space, &[0, 2])],
            ],
            &blocks,
        )
        .unwrap();
        let ctx =
            LimitContext::new(algebra, fam, partition, blocks, vec![], vec![]).unwrap();
        let r = Element::one(space);
        let out = limit_construct(&ctx, &seq, &r, &frac(1, 2)).unwrap();
        assert_eq!(out, element(space, &[0, 1]));
        // exhaustive confirmation: every element below out clears delta
        for mask in 1u64..16 {
            let atoms: Vec<usize> = (0..4).filter(|a| mask & (1 << a) != 0).collect();
            let q = element(space, &atoms);
            if q.leq(&out).unwrap() {
                let f = ctx.averaged_function(&seq, &q).unwrap();
                let v = fam::integrate(&f, ctx.fam(), &PeriodicSet::everything());
                assert!(v >= frac(1, 2));
            }
        }
    }

    #[test]
    fn limit_construct_precondition() {
        let ctx = halves_context();
        let space = ctx.algebra().space();
        let seq = ctx.sequences()[0].clone();
        // below r* = {a0,a1}, the entry {a2,a3} has conditional measure 0
        let r = element(space, &[0, 1]);
        assert!(matches!(
            limit_construct(&ctx, &seq, &r, &frac(1, 2)),
            Err(LimitError::PreconditionFailed { .. })
        ));
    }

    #[test]
    fn params_derivation() {
        // one block of mass 1, no sequences, eps = 3/4:
        // constraints: 0 < 1/(1) trivially for a(1-a)=0; 1/h < (3/8)^2/2
        let p = TreeParams::derive(&frac(3, 4), &[frac(1, 1)], 0).unwrap();
        assert!(p.h_star.is_multiple_of(2));
        let hr = rat::int(p.h_star as i64);
        assert!(rat::one() / &hr < frac(9, 64) / rat::int(2));
        assert!((frac(2, 1) / &hr + &p.eps_star) / frac(9, 64) < rat::one());
        assert!(p.eps_star < frac(3, 4));
        // eps* is dyadic
        assert!(p.eps_star.denom().magnitude().count_ones() == 1);

        let p2 = TreeParams::derive(&frac(1, 4), &[frac(1, 2), frac(1, 2)], 1).unwrap();
        let hr2 = rat::int(p2.h_star as i64);
        assert!(frac(2, 1) * frac(1, 2) * frac(1, 2) / (&hr2 * frac(1, 16)) < frac(1, 3));
        assert!(rat::one() / &hr2 < frac(1, 64) / rat::int(6));
    }

    fn tree_context() -> LimitContext {
        halves_context()
    }

    #[test]
    fn tree_level_one_weights_follow_block_masses() {
        let ctx = tree_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let params = TreeParams::empirical(&frac(3, 4), 2, &frac(1, 4)).unwrap();
        let grid = grid_refine(&ctx, &r, &(&params.eps_star / rat::int(4))).unwrap();
        let mut wt = build_tree(&ctx, &grid, BTreeSet::new(), params).unwrap();
        wt.materialize_full().unwrap();
        let children = wt.tree().children(&[]).unwrap().to_vec();
        assert_eq!(children.len(), 2);
        for (label, p) in &children {
            assert!(matches!(label, TreeLabel::Block(_)));
            assert_eq!(*p, frac(1, 2));
        }
        // odd-level weights sum to one under each block child
        for (label, _) in &children {
            let grand = wt.tree().children(core::slice::from_ref(label)).unwrap();
            let sum: Rat = grand.iter().map(|(_, p)| p.clone()).sum();
            assert_eq!(sum, frac(1, 1));
        }
    }

    #[test]
    fn exhaustive_search_returns_verified_certificate() {
        let ctx = tree_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let params = TreeParams::empirical(&frac(3, 4), 2, &frac(1, 4)).unwrap();
        let grid = grid_refine(&ctx, &r, &(&params.eps_star / rat::int(4))).unwrap();
        let forbidden: BTreeSet<u64> = (0..4).collect();
        let mut wt = build_tree(&ctx, &grid, forbidden.clone(), params).unwrap();
        let out = wt.witness_search(SearchMode::Exhaustive).unwrap();
        let pr = out.event_probability.clone().unwrap();
        assert!(pr.is_positive());
        let cert = &out.certificate;
        assert!(verify_certificate(&ctx, cert).unwrap());
        assert!(cert.u.iter().all(|k| !forbidden.contains(k)));
    }

    #[test]
    fn sampled_search_is_deterministic() {
        let ctx = tree_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let params = TreeParams::empirical(&frac(3, 4), 4, &frac(1, 4)).unwrap();
        let grid = grid_refine(&ctx, &r, &(&params.eps_star / rat::int(4))).unwrap();
        let run = |seed| {
            let mut wt =
                build_tree(&ctx, &grid, BTreeSet::new(), params.clone()).unwrap();
            wt.witness_search(SearchMode::Sampled { seed, budget: 500 })
                .unwrap()
        };
        let a = run(11);
        let b = run(11);
        assert_eq!(a.certificate, b.certificate);
        assert_eq!(a.paths_tried, b.paths_tried);
    }

    #[test]
    fn tampered_certificate_fails() {
        let ctx = tree_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let params = TreeParams::empirical(&frac(3, 4), 2, &frac(1, 4)).unwrap();
        let grid = grid_refine(&ctx, &r, &(&params.eps_star / rat::int(4))).unwrap();
        let mut wt = build_tree(&ctx, &grid, BTreeSet::new(), params).unwrap();
        let out = wt.witness_search(SearchMode::Exhaustive).unwrap();
        let mut cert = out.certificate;
        let dropped = *cert.u.iter().next().unwrap();
        cert.u.remove(&dropped);
        assert!(!verify_certificate(&ctx, &cert).unwrap());
    }

    #[test]
    fn characterization_report() {
        let ctx = tree_context();
        let space = ctx.algebra().space();
        let r = Element::one(space);
        let params = TreeParams::empirical(&frac(3, 4), 2, &frac(1, 4)).unwrap();
        let grid = grid_refine(&ctx, &r, &(&params.eps_star / rat::int(4))).unwrap();
        let mut wt = build_tree(&ctx, &grid, BTreeSet::new(), params).unwrap();
        let out = wt.witness_search(SearchMode::Exhaustive).unwrap();
        // delta = 1/2 corresponds to eps_bar = 1/2; eps' = eps = 3/4
        let report = verify_characterization(
            &ctx,
            &out.certificate,
            &[frac(1, 2)],
            &frac(3, 4),
        )
        .unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn linked_witness_depth2_coverage() {
        // uniform 4-atom algebra standing in for the depth-2 cylinder
        // algebra; family = the four atoms; eps = 1/2
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let family: Vec<Element> = (0..4).map(|a| element(space, &[a])).collect();
        let w = fam_linked_witness(&algebra, &family, &[frac(1, 2)]).unwrap();
        assert_eq!(w.entries.len(), 4);
        for entry in &w.entries {
            assert!(entry.kelley >= rat::one() - &entry.eps);
            // s itself always belongs: conditional measure 1
            assert!(entry
                .elements
                .contains(&family[entry.s_index]));
        }
    }

    #[test]
    fn linked_witness_whole_algebra_set() {
        // s = 1: Q_{1,eps} = measure threshold set
        let algebra = MeasuredAlgebra::uniform(4).unwrap();
        let space = algebra.space();
        let one = Element::one(space);
        let w = fam_linked_witness(&algebra, &[one], &[frac(1, 2)]);
        // eps = 1/2 with s = 1 covers only b with measure >= 1/2
        assert!(matches!(w, Err(LimitError::Coverage { .. })));
        // eps = 3/4 lowers the threshold to 1/4 and covers everything
        let w = fam_linked_witness(&algebra, &[Element::one(space)], &[frac(3, 4)]).unwrap();
        assert_eq!(w.entries.len(), 1);
        assert_eq!(w.entries[0].elements.len(), 15);
        assert!(w.entries[0].kelley >= frac(1, 4));
    }
}
