//! Intersection numbers of finite sets of Boolean-algebra elements.
//!
//! `istar` is the exact combinatorial count; `int_upper` minimizes
//! `istar(q̄)/n` over bounded-length sequences (an upper bound on the true
//! infimum); `kelley_lower` certifies a lower bound through the measure
//! dual: any probability weighting `w` with `w(q) >= t` for all `q`
//! witnesses that the intersection number is at least `t`. Both bounds are
//! exact rationals and the sandwich `lower <= upper` holds identically.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::boolalg::{AlgebraError, Element, MeasuredAlgebra};
use crate::rat::{self, Rat};
use crate::simplex::{self, Constraint, LpOutcome, Relation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntError {
    EmptySequence,
    EmptyQuery,
    ZeroElement,
    BadLength,
    Algebra(AlgebraError),
}

impl fmt::Display for IntError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntError::EmptySequence => write!(f, "sequence must be nonempty"),
            IntError::EmptyQuery => write!(f, "query set must be nonempty"),
            IntError::ZeroElement => write!(f, "query elements must be nonzero"),
            IntError::BadLength => write!(f, "max_len must be at least 1"),
            IntError::Algebra(e) => write!(f, "{e}"),
        }
    }
}

impl From<AlgebraError> for IntError {
    fn from(e: AlgebraError) -> Self {
        IntError::Algebra(e)
    }
}

#[derive(Debug, Clone)]
pub struct IntersectionQuery {
    elements: Vec<Element>,
    max_len: usize,
}

impl IntersectionQuery {
    pub fn new(elements: Vec<Element>, max_len: usize) -> Result<Self, IntError> {
        if elements.is_empty() {
            return Err(IntError::EmptyQuery);
        }
        if max_len == 0 {
            return Err(IntError::BadLength);
        }
        if elements.iter().any(Element::is_zero) {
            return Err(IntError::ZeroElement);
        }
        let size = elements[0].space_size();
        for e in &elements[1..] {
            if e.space_size() != size {
                return Err(IntError::Algebra(AlgebraError::SpaceMismatch {
                    left: size,
                    right: e.space_size(),
                }));
            }
        }
        Ok(Self { elements, max_len })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

/// `i*(q̄)`: the largest number of entries (counted with multiplicity)
/// whose meet is nonzero.
pub fn istar(qs: &[Element]) -> Result<usize, IntError> {
    if qs.is_empty() {
        return Err(IntError::EmptySequence);
    }
    if qs.iter().any(Element::is_zero) {
        return Err(IntError::ZeroElement);
    }
    // Equal entries always share a lower bound, so group them and search
    // over subsets of the distinct elements only.
    let mut groups: BTreeMap<&Element, usize> = BTreeMap::new();
    for q in qs {
        *groups.entry(q).or_insert(0) += 1;
    }
    let distinct: Vec<(&Element, usize)> = groups.into_iter().collect();
    let d = distinct.len();
    debug_assert!(d <= 64, "istar subset search limited to 64 distinct elements");
    let mut best = 0usize;
    for mask in 1u64..(1u64 << d) {
        let mut count = 0usize;
        let mut meet: Option<Element> = None;
        for (i, (e, c)) in distinct.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            count += c;
            meet = Some(match meet {
                None => (*e).clone(),
                Some(m) => m.meet(e)?,
            });
        }
        if count > best && !meet.expect("mask nonzero").is_zero() {
            best = count;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct UpperBound {
    pub value: Rat,
    pub witness: Vec<Element>,
    /// Set when the enumeration budget ran out before all lengths were done.
    pub partial: bool,
    pub sequences_examined: u64,
}

/// Minimum of `istar(q̄)/n` over multisets `q̄` from `Q` of size `n <=
/// max_len`. Enumeration is over multisets since `istar` ignores order.
/// `budget` caps the number of sequences examined; exceeding it returns the
/// best bound so far with `partial` set.
pub fn int_upper(query: &IntersectionQuery, budget: Option<u64>) -> Result<UpperBound, IntError> {
    let q = &query.elements;
    let mut best: Option<(Rat, Vec<Element>)> = None;
    let mut examined = 0u64;
    let mut partial = false;

    // non-decreasing index tuples = multisets
    'outer: for n in 1..=query.max_len {
        let mut idx = alloc::vec![0usize; n];
        loop {
            if let Some(b) = budget {
                if examined >= b {
                    partial = true;
                    break 'outer;
                }
            }
            examined += 1;
            let seq: Vec<Element> = idx.iter().map(|&i| q[i].clone()).collect();
            let value = Rat::new((istar(&seq)? as i64).into(), (n as i64).into());
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, seq));
            }
            // advance the non-decreasing tuple
            let mut pos = n;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                if idx[pos] + 1 < q.len() {
                    let next = idx[pos] + 1;
                    for slot in idx.iter_mut().skip(pos) {
                        *slot = next;
                    }
                    break;
                }
                if pos == 0 {
                    continue 'outer;
                }
            }
            if idx.iter().all(|&i| i == 0) {
                // wrapped around (only happens when q.len() == 1)
                continue 'outer;
            }
        }
    }

    let (value, witness) = best.expect("at least one sequence is examined");
    Ok(UpperBound {
        value,
        witness,
        partial,
        sequences_examined: examined,
    })
}

#[derive(Debug, Clone)]
pub struct KelleyBound {
    pub value: Rat,
    /// Optimal atom weights: a probability measure giving every query
    /// element mass at least `value`.
    pub weights: Vec<Rat>,
}

/// Discards elements that lie above another element of the set; their
/// constraints are implied.
fn minimal_elements(q: &[Element]) -> Vec<&Element> {
    let mut keep: Vec<&Element> = Vec::new();
    'outer: for (i, e) in q.iter().enumerate() {
        for (j, other) in q.iter().enumerate() {
            if i == j {
                continue;
            }
            let below = other.leq(e).unwrap_or(false);
            // strict domination, or an equal twin earlier in the list
            if below && (!e.leq(other).unwrap_or(false) || j < i) {
                continue 'outer;
            }
        }
        keep.push(e);
    }
    keep
}

/// Solves `max t` over probability weights `w` on atoms with `w(q) >= t`
/// for every `q` in the query, by constraint generation: violated query
/// constraints are added one at a time and the small LP is re-solved
/// exactly. The optimum certifies `int(Q) >= t`.
pub fn kelley_lower(query: &IntersectionQuery) -> Result<KelleyBound, IntError> {
    let atoms = query.elements[0].space_size();
    let nvars = atoms + 1; // w_0..w_{atoms-1}, then t

    let pool: Vec<&Element> = if query.elements.len() <= 2000 {
        minimal_elements(&query.elements)
    } else {
        query.elements.iter().collect()
    };

    let mass = |e: &Element, w: &[Rat]| -> Rat {
        e.atoms().map(|a| w[a].clone()).sum()
    };

    let mut active: Vec<&Element> = Vec::new();
    loop {
        let mut constraints = Vec::with_capacity(active.len() + 2);
        // Σ w = 1
        let mut sum_row = alloc::vec![rat::one(); atoms];
        sum_row.push(rat::zero());
        constraints.push(Constraint::new(sum_row, Relation::Eq, rat::one()));
        // t <= 1 keeps the relaxation bounded; valid since w(q) <= 1
        let mut t_row = alloc::vec![rat::zero(); atoms];
        t_row.push(rat::one());
        constraints.push(Constraint::new(t_row, Relation::Le, rat::one()));
        for e in &active {
            let mut row = alloc::vec![rat::zero(); nvars];
            for a in e.atoms() {
                row[a] = rat::one();
            }
            row[atoms] = -rat::one();
            constraints.push(Constraint::new(row, Relation::Ge, rat::zero()));
        }

        let mut objective = alloc::vec![rat::zero(); atoms];
        objective.push(rat::one());
        let outcome = simplex::maximize(&objective, &constraints);
        let LpOutcome::Optimal { objective: t, point } = outcome else {
            unreachable!("uniform weights are feasible and t is bounded by 1");
        };
        let weights = point[..atoms].to_vec();

        // separation: the query element with the least mass
        let worst = pool
            .iter()
            .map(|e| (mass(e, &weights), *e))
            .min_by(|a, b| a.0.cmp(&b.0))
            .expect("query is nonempty");
        if worst.0 >= t {
            return Ok(KelleyBound { value: t, weights });
        }
        debug_assert!(
            !active.iter().any(|e| core::ptr::eq(*e, worst.1)),
            "separation must return a new constraint"
        );
        active.push(worst.1);
    }
}

#[derive(Debug, Clone)]
pub struct SandwichResult {
    pub upper: UpperBound,
    pub lower: KelleyBound,
}

/// Both bounds on one query; `lower.value <= upper.value` always.
pub fn sandwich(
    query: &IntersectionQuery,
    budget: Option<u64>,
) -> Result<SandwichResult, IntError> {
    let upper = int_upper(query, budget)?;
    let lower = kelley_lower(query)?;
    debug_assert!(lower.value <= upper.value);
    Ok(SandwichResult { upper, lower })
}

/// All nonzero elements of measure at least `delta`.
pub fn threshold_set(algebra: &MeasuredAlgebra, delta: &Rat) -> Vec<Element> {
    let n = algebra.space().size();
    debug_assert!(n <= 20, "threshold enumeration is exponential in atoms");
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << n) {
        let mut bits = crate::bits::BitSet::empty(n);
        for a in 0..n {
            if mask & (1 << a) != 0 {
                bits.insert(a);
            }
        }
        let e = Element::from_bits(bits);
        if algebra.measure(&e).expect("same space") >= *delta {
            out.push(e);
        }
    }
    out
}
