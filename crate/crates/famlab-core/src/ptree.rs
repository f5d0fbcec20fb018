//! Finitely branching probability trees with exact rational edge weights.
//!
//! A tree assigns each full path the product of its edge probabilities;
//! random variables are functions of the node reached at a fixed level.
//! Expansion is lazy: nodes are materialized level by level through a
//! caller-supplied expander, which may fail (the failure is surfaced
//! verbatim). All expectations, variances, and conditional expectations
//! are exact; sampling draws paths with exactly the right distribution.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use rand_core::RngCore;

use crate::rat::{self, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Child probabilities must be positive and sum to one.
    BadProbabilities,
    NoSuchNode,
    /// A queried level is not fully materialized yet.
    NotMaterialized { level: usize },
    /// Expander-reported failure, passed through unchanged.
    Expand(String),
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::BadProbabilities => {
                write!(f, "child probabilities must be positive and sum to 1")
            }
            TreeError::NoSuchNode => write!(f, "no such node"),
            TreeError::NotMaterialized { level } => {
                write!(f, "level {level} is not materialized")
            }
            TreeError::Expand(msg) => write!(f, "expansion failed: {msg}"),
        }
    }
}

struct Node<L, P> {
    payload: P,
    children: Vec<(L, Rat)>,
    expanded: bool,
}

/// A lazily built probability tree. `L` labels edges, `P` is per-node data.
pub struct ProbTree<L: Ord + Clone, P> {
    nodes: BTreeMap<Vec<L>, Node<L, P>>,
    /// Deepest level at which every node either is expanded or is a leaf.
    frontier: usize,
}

impl<L: Ord + Clone, P> ProbTree<L, P> {
    pub fn new(root_payload: P) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(
            Vec::new(),
            Node {
                payload: root_payload,
                children: Vec::new(),
                expanded: false,
            },
        );
        Self { nodes, frontier: 0 }
    }

    /// Expands every unexpanded node at depth `< depth`. The expander maps
    /// `(path, payload)` to children `(label, probability, payload)`; an
    /// empty list makes the node a leaf.
    pub fn materialize<F>(&mut self, depth: usize, mut expand: F) -> Result<(), TreeError>
    where
        F: FnMut(&[L], &P) -> Result<Vec<(L, Rat, P)>, TreeError>,
    {
        for level in 0..depth {
            let pending: Vec<Vec<L>> = self
                .nodes
                .iter()
                .filter(|(path, node)| path.len() == level && !node.expanded)
                .map(|(path, _)| path.clone())
                .collect();
            for path in pending {
                let children = {
                    let node = self.nodes.get(&path).expect("pending node exists");
                    expand(&path, &node.payload)?
                };
                self.insert_children(&path, children)?;
            }
            self.frontier = self.frontier.max(level + 1);
        }
        Ok(())
    }

    fn insert_children(
        &mut self,
        path: &[L],
        children: Vec<(L, Rat, P)>,
    ) -> Result<(), TreeError> {
        if !children.is_empty() {
            if children.iter().any(|(_, p, _)| !p.is_positive()) {
                return Err(TreeError::BadProbabilities);
            }
            let total: Rat = children.iter().map(|(_, p, _)| p.clone()).sum();
            if !total.is_one() {
                return Err(TreeError::BadProbabilities);
            }
        }
        let mut edge_list = Vec::with_capacity(children.len());
        for (label, prob, payload) in children {
            let mut child_path = path.to_vec();
            child_path.push(label.clone());
            if self
                .nodes
                .insert(
                    child_path,
                    Node {
                        payload,
                        children: Vec::new(),
                        expanded: false,
                    },
                )
                .is_some()
            {
                return Err(TreeError::BadProbabilities);
            }
            edge_list.push((label, prob));
        }
        let node = self.nodes.get_mut(path).expect("parent exists");
        node.children = edge_list;
        node.expanded = true;
        Ok(())
    }

    pub fn frontier(&self) -> usize {
        self.frontier
    }

    pub fn payload(&self, path: &[L]) -> Result<&P, TreeError> {
        self.nodes
            .get(path)
            .map(|n| &n.payload)
            .ok_or(TreeError::NoSuchNode)
    }

    pub fn children(&self, path: &[L]) -> Result<&[(L, Rat)], TreeError> {
        self.nodes
            .get(path)
            .map(|n| n.children.as_slice())
            .ok_or(TreeError::NoSuchNode)
    }

    /// Whether `path` is a leaf: expanded with no children.
    pub fn is_leaf(&self, path: &[L]) -> Result<bool, TreeError> {
        self.nodes
            .get(path)
            .map(|n| n.expanded && n.children.is_empty())
            .ok_or(TreeError::NoSuchNode)
    }

    /// Product of edge probabilities along `path`.
    pub fn path_probability(&self, path: &[L]) -> Result<Rat, TreeError> {
        let mut prob = rat::one();
        for i in 0..path.len() {
            let node = self.nodes.get(&path[..i]).ok_or(TreeError::NoSuchNode)?;
            let (_, p) = node
                .children
                .iter()
                .find(|(l, _)| *l == path[i])
                .ok_or(TreeError::NoSuchNode)?;
            prob *= p;
        }
        // confirm the endpoint exists
        self.nodes.get(path).ok_or(TreeError::NoSuchNode)?;
        Ok(prob)
    }

    fn require_level(&self, level: usize) -> Result<(), TreeError> {
        if level > self.frontier {
            return Err(TreeError::NotMaterialized { level });
        }
        Ok(())
    }

    /// All node paths at a materialized level. Leaves above the level do
    /// not reappear: the level event consists of paths of exact length.
    pub fn level_paths(&self, level: usize) -> Result<Vec<&Vec<L>>, TreeError> {
        self.require_level(level)?;
        Ok(self
            .nodes
            .keys()
            .filter(|path| path.len() == level)
            .collect())
    }

    /// Total probability of the nodes at `level` satisfying `pred`.
    pub fn level_measure<F>(&self, level: usize, mut pred: F) -> Result<Rat, TreeError>
    where
        F: FnMut(&[L], &P) -> bool,
    {
        self.require_level(level)?;
        let mut total = rat::zero();
        for (path, node) in self.nodes.iter().filter(|(p, _)| p.len() == level) {
            if pred(path, &node.payload) {
                total += self.path_probability(path)?;
            }
        }
        Ok(total)
    }

    /// `E[X]` for a level random variable `X = value(path, payload)`.
    pub fn expectation<F>(&self, level: usize, mut value: F) -> Result<Rat, TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
    {
        self.require_level(level)?;
        let mut total = rat::zero();
        for (path, node) in self.nodes.iter().filter(|(p, _)| p.len() == level) {
            total += self.path_probability(path)? * value(path, &node.payload);
        }
        Ok(total)
    }

    /// `E[X | the walk passes through `anchor`]`, for `X` at `level >=
    /// anchor.len()`: descendant probabilities renormalized by the anchor.
    pub fn relative_expectation<F>(
        &self,
        anchor: &[L],
        level: usize,
        mut value: F,
    ) -> Result<Rat, TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
    {
        self.require_level(level)?;
        let anchor_prob = self.path_probability(anchor)?;
        if anchor_prob.is_zero() {
            return Err(TreeError::BadProbabilities);
        }
        let mut total = rat::zero();
        for (path, node) in self.nodes.iter().filter(|(p, _)| p.len() == level) {
            if path.len() >= anchor.len() && path[..anchor.len()] == *anchor {
                total += self.path_probability(path)? * value(path, &node.payload);
            }
        }
        Ok(total / anchor_prob)
    }

    /// Both sides of the tower identity
    /// `E[X] = Σ_ρ Pr(ρ)·E[X|ρ]` over nodes `ρ` at `cond_level`;
    /// returns `(direct, towered)`, which must coincide.
    pub fn tower_check<F>(
        &self,
        cond_level: usize,
        level: usize,
        mut value: F,
    ) -> Result<(Rat, Rat), TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
    {
        let direct = self.expectation(level, &mut value)?;
        self.require_level(cond_level)?;
        let anchors: Vec<Vec<L>> = self
            .nodes
            .keys()
            .filter(|p| p.len() == cond_level)
            .cloned()
            .collect();
        let mut towered = rat::zero();
        for anchor in &anchors {
            let p = self.path_probability(anchor)?;
            towered += p * self.relative_expectation(anchor, level, &mut value)?;
        }
        Ok((direct, towered))
    }

    /// `(E[X], Var[X])` for a level random variable.
    pub fn moments<F>(&self, level: usize, mut value: F) -> Result<(Rat, Rat), TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
    {
        let mean = self.expectation(level, &mut value)?;
        let second = self.expectation(level, |path, payload| {
            let v = value(path, payload);
            &v * &v
        })?;
        let var = second - &mean * &mean;
        Ok((mean, var))
    }

    /// `Cov[X, Y]` for two random variables at the same level.
    pub fn covariance<F, G>(
        &self,
        level: usize,
        mut x: F,
        mut y: G,
    ) -> Result<Rat, TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
        G: FnMut(&[L], &P) -> Rat,
    {
        let ex = self.expectation(level, &mut x)?;
        let ey = self.expectation(level, &mut y)?;
        let exy = self.expectation(level, |path, payload| x(path, payload) * y(path, payload))?;
        Ok(exy - ex * ey)
    }

    /// Compares `Pr(|X − E[X]| ≥ t)` with the Chebyshev bound `Var/t²`.
    pub fn chebyshev_audit<F>(
        &self,
        level: usize,
        mut value: F,
        t: &Rat,
    ) -> Result<ChebyshevReport, TreeError>
    where
        F: FnMut(&[L], &P) -> Rat,
    {
        if !t.is_positive() {
            return Err(TreeError::BadProbabilities);
        }
        let (mean, var) = self.moments(level, &mut value)?;
        let tail = self.level_measure(level, |path, payload| {
            rat::abs(&(value(path, payload) - &mean)) >= *t
        })?;
        let bound = var.clone() / (t * t);
        Ok(ChebyshevReport {
            mean,
            variance: var,
            threshold: t.clone(),
            tail_probability: tail,
            bound,
        })
    }

    /// Samples a path of length `level` with the exact tree distribution.
    pub fn sample_path<R: RngCore>(
        &self,
        level: usize,
        rng: &mut R,
    ) -> Result<Vec<L>, TreeError> {
        self.require_level(level)?;
        let mut path: Vec<L> = Vec::with_capacity(level);
        for _ in 0..level {
            let node = self.nodes.get(&path).ok_or(TreeError::NoSuchNode)?;
            path.push(draw_child(&node.children, rng)?);
        }
        Ok(path)
    }

    /// Samples a path of length `level`, lazily expanding unexpanded nodes
    /// along the way. Only the visited nodes are materialized, so this
    /// scales to trees whose full levels would be astronomically large.
    pub fn sample_and_expand<F, R>(
        &mut self,
        level: usize,
        rng: &mut R,
        mut expand: F,
    ) -> Result<Vec<L>, TreeError>
    where
        F: FnMut(&[L], &P) -> Result<Vec<(L, Rat, P)>, TreeError>,
        R: RngCore,
    {
        let mut path: Vec<L> = Vec::with_capacity(level);
        for _ in 0..level {
            let expanded = self
                .nodes
                .get(path.as_slice())
                .ok_or(TreeError::NoSuchNode)?
                .expanded;
            if !expanded {
                let children = {
                    let node = self.nodes.get(path.as_slice()).expect("node exists");
                    expand(&path, &node.payload)?
                };
                self.insert_children(&path, children)?;
            }
            let node = self.nodes.get(path.as_slice()).expect("node exists");
            path.push(draw_child(&node.children, rng)?);
        }
        Ok(path)
    }
}

/// Exact categorical draw over `(label, probability)` pairs.
fn draw_child<L: Clone, R: RngCore>(
    children: &[(L, Rat)],
    rng: &mut R,
) -> Result<L, TreeError> {
    if children.is_empty() {
        return Err(TreeError::NoSuchNode);
    }
    // common denominator, then an exact uniform draw below it
    let mut denom = BigUint::one();
    for (_, p) in children {
        denom = num_integer::lcm(denom, p.denom().magnitude().clone());
    }
    let draw = uniform_below(rng, &denom);
    let mut cursor = BigUint::zero();
    for (label, p) in children {
        let weight = (p * Rat::from_integer(denom.clone().into()))
            .to_integer()
            .magnitude()
            .clone();
        cursor += weight;
        if draw < cursor {
            return Ok(label.clone());
        }
    }
    unreachable!("weights sum to the denominator")
}

/// Uniform draw from `{0, …, n−1}` via rejection on `n.bits()` random bits.
fn uniform_below<R: RngCore>(rng: &mut R, n: &BigUint) -> BigUint {
    debug_assert!(!n.is_zero());
    if n.is_one() {
        return BigUint::zero();
    }
    let bits = n.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let excess = (nbytes as u64) * 8 - bits;
    loop {
        let mut buf = alloc::vec![0u8; nbytes];
        rng.fill_bytes(&mut buf);
        buf[0] >>= excess; // big-endian: trim to exactly `bits` bits
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < *n {
            return candidate;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChebyshevReport {
    pub mean: Rat,
    pub variance: Rat,
    pub threshold: Rat,
    pub tail_probability: Rat,
    pub bound: Rat,
}

impl ChebyshevReport {
    pub fn holds(&self) -> bool {
        self.tail_probability <= self.bound
    }
}
