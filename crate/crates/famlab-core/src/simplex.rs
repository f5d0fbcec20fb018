//! Dense two-phase simplex over exact rationals.
//!
//! Solves `max c·x  s.t.  A x {<=,=,>=} b,  x >= 0`. Bland's smallest-index
//! rule is used for both the entering and leaving choices, so the method
//! terminates on degenerate problems. Everything is exact; there are no
//! tolerances anywhere.

use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::rat::{self, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<Rat>,
    pub relation: Relation,
    pub rhs: Rat,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rat>, relation: Relation, rhs: Rat) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { objective: Rat, point: Vec<Rat> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// m rows; each has `ncols` variable coefficients plus the rhs.
    rows: Vec<Vec<Rat>>,
    /// Reduced-cost row; its rhs cell holds minus the objective value.
    obj: Vec<Rat>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col].recip();
        for v in self.rows[row].iter_mut() {
            *v *= &inv;
        }
        for r in 0..self.rows.len() {
            if r == row || self.rows[r][col].is_zero() {
                continue;
            }
            let factor = self.rows[r][col].clone();
            for c in 0..=self.ncols {
                let delta = &factor * &self.rows[row][c];
                self.rows[r][c] -= delta;
            }
        }
        if !self.obj[col].is_zero() {
            let factor = self.obj[col].clone();
            for c in 0..=self.ncols {
                let delta = &factor * &self.rows[row][c];
                self.obj[c] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex to optimality on the current objective row.
    /// Returns false on unboundedness.
    fn solve(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            // Bland: smallest-index improving column
            let entering = (0..self.ncols)
                .find(|&j| allowed(j) && self.obj[j].is_positive());
            let Some(col) = entering else { return true };
            // ratio test, ties broken by smallest basis index
            let mut best: Option<(usize, Rat)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[r][self.ncols] / a;
                let better = match &best {
                    None => true,
                    Some((br, bratio)) => {
                        ratio < *bratio || (ratio == *bratio && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((row, _)) = best else { return false };
            self.pivot(row, col);
        }
    }

    fn objective_value(&self) -> Rat {
        -self.obj[self.ncols].clone()
    }

    /// Prices the basic columns out of the objective row.
    fn price_out(&mut self, costs: &[Rat]) {
        self.obj = costs.to_vec();
        self.obj.push(rat::zero());
        for r in 0..self.rows.len() {
            let c = costs[self.basis[r]].clone();
            if c.is_zero() {
                continue;
            }
            for j in 0..=self.ncols {
                let delta = &c * &self.rows[r][j];
                self.obj[j] -= delta;
            }
        }
    }
}

/// Maximizes `objective · x` over `x >= 0` subject to `constraints`.
pub fn maximize(objective: &[Rat], constraints: &[Constraint]) -> LpOutcome {
    let n = objective.len();
    let m = constraints.len();

    // Normalize so every rhs is nonnegative, then count auxiliaries.
    let mut rels = Vec::with_capacity(m);
    let mut body: Vec<(Vec<Rat>, Rat)> = Vec::with_capacity(m);
    for c in constraints {
        debug_assert_eq!(c.coeffs.len(), n);
        if c.rhs.is_negative() {
            let coeffs: Vec<Rat> = c.coeffs.iter().map(|v| -v).collect();
            let rel = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
                Relation::Ge => Relation::Le,
            };
            rels.push(rel);
            body.push((coeffs, -c.rhs.clone()));
        } else {
            rels.push(c.relation);
            body.push((c.coeffs.clone(), c.rhs.clone()));
        }
    }
    let n_slack = rels
        .iter()
        .filter(|r| matches!(r, Relation::Le | Relation::Ge))
        .count();
    let n_art = rels
        .iter()
        .filter(|r| matches!(r, Relation::Eq | Relation::Ge))
        .count();
    let ncols = n + n_slack + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let art_start = n + n_slack;
    for (i, (coeffs, rhs)) in body.into_iter().enumerate() {
        let mut row = alloc::vec![rat::zero(); ncols + 1];
        row[..n].clone_from_slice(&coeffs);
        row[ncols] = rhs;
        match rels[i] {
            Relation::Le => {
                row[slack_at] = rat::one();
                basis.push(slack_at);
                slack_at += 1;
            }
            Relation::Ge => {
                row[slack_at] = -rat::one();
                slack_at += 1;
                row[art_at] = rat::one();
                basis.push(art_at);
                art_at += 1;
            }
            Relation::Eq => {
                row[art_at] = rat::one();
                basis.push(art_at);
                art_at += 1;
            }
        }
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        ncols,
    };

    // Phase 1: drive the artificials to zero.
    if n_art > 0 {
        let mut costs = alloc::vec![rat::zero(); ncols];
        for c in costs.iter_mut().skip(art_start) {
            *c = -rat::one();
        }
        t.price_out(&costs);
        let ok = t.solve(&|_| true);
        debug_assert!(ok, "phase 1 is bounded by construction");
        if t.objective_value().is_negative() {
            return LpOutcome::Infeasible;
        }
        // pivot lingering zero-valued artificials out of the basis
        for r in 0..t.rows.len() {
            if t.basis[r] >= art_start {
                if let Some(col) = (0..art_start).find(|&j| !t.rows[r][j].is_zero()) {
                    t.pivot(r, col);
                }
                // an all-zero row is a redundant constraint; leave it
            }
        }
    }

    // Phase 2: the real objective, artificial columns locked out.
    let mut costs = alloc::vec![rat::zero(); ncols];
    costs[..n].clone_from_slice(objective);
    t.price_out(&costs);
    if !t.solve(&|j| j < art_start) {
        return LpOutcome::Unbounded;
    }

    let mut point = alloc::vec![rat::zero(); n];
    for r in 0..t.rows.len() {
        if t.basis[r] < n {
            point[t.basis[r]] = t.rows[r][ncols].clone();
        }
    }
    LpOutcome::Optimal {
        objective: t.objective_value(),
        point,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;
    use alloc::vec;

    fn le(coeffs: Vec<Rat>, rhs: Rat) -> Constraint {
        Constraint::new(coeffs, Relation::Le, rhs)
    }

    #[test]
    fn simple_maximization() {
        // max 3x + 2y, x + y <= 4, x <= 2 → x=2, y=2, obj=10
        let out = maximize(
            &[frac(3, 1), frac(2, 1)],
            &[
                le(vec![frac(1, 1), frac(1, 1)], frac(4, 1)),
                le(vec![frac(1, 1), frac(0, 1)], frac(2, 1)),
            ],
        );
        assert_eq!(
            out,
            LpOutcome::Optimal {
                objective: frac(10, 1),
                point: vec![frac(2, 1), frac(2, 1)],
            }
        );
    }

    #[test]
    fn equality_and_ge_constraints() {
        // max t  s.t.  w1 + w2 = 1, w1 >= t, w2 >= t  (vars: w1 w2 t)
        // optimum t = 1/2
        let out = maximize(
            &[frac(0, 1), frac(0, 1), frac(1, 1)],
            &[
                Constraint::new(
                    vec![frac(1, 1), frac(1, 1), frac(0, 1)],
                    Relation::Eq,
                    frac(1, 1),
                ),
                Constraint::new(
                    vec![frac(1, 1), frac(0, 1), frac(-1, 1)],
                    Relation::Ge,
                    frac(0, 1),
                ),
                Constraint::new(
                    vec![frac(0, 1), frac(1, 1), frac(-1, 1)],
                    Relation::Ge,
                    frac(0, 1),
                ),
            ],
        );
        match out {
            LpOutcome::Optimal { objective, point } => {
                assert_eq!(objective, frac(1, 2));
                assert_eq!(point[0], frac(1, 2));
                assert_eq!(point[1], frac(1, 2));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn infeasible_detected() {
        let out = maximize(
            &[frac(1, 1)],
            &[
                le(vec![frac(1, 1)], frac(1, 1)),
                Constraint::new(vec![frac(1, 1)], Relation::Ge, frac(2, 1)),
            ],
        );
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let out = maximize(
            &[frac(1, 1), frac(0, 1)],
            &[Constraint::new(
                vec![frac(0, 1), frac(1, 1)],
                Relation::Le,
                frac(1, 1),
            )],
        );
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_normalization() {
        // x <= 3 expressed as -x >= -3
        let out = maximize(
            &[frac(1, 1)],
            &[Constraint::new(vec![frac(-1, 1)], Relation::Ge, frac(-3, 1))],
        );
        assert_eq!(
            out,
            LpOutcome::Optimal {
                objective: frac(3, 1),
                point: vec![frac(3, 1)],
            }
        );
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic Beale-style degeneracy exercise
        let out = maximize(
            &[frac(3, 4), frac(-150, 1), frac(1, 50), frac(-6, 1)],
            &[
                le(
                    vec![frac(1, 4), frac(-60, 1), frac(-1, 25), frac(9, 1)],
                    frac(0, 1),
                ),
                le(
                    vec![frac(1, 2), frac(-90, 1), frac(-1, 50), frac(3, 1)],
                    frac(0, 1),
                ),
                le(
                    vec![frac(0, 1), frac(0, 1), frac(1, 1), frac(0, 1)],
                    frac(1, 1),
                ),
            ],
        );
        match out {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, frac(1, 20)),
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}
