//! Dense two-phase primal simplex over exact rationals.
//!
//! Minimal by design: all variables are non-negative, constraints carry an
//! explicit relation, and Bland's pivot rule guarantees termination. This
//! backs the payment-minimizing contract LP and serves as the reference
//! oracle for the structured knapsack LP solver.

use crate::error::Error;
use crate::rational::{Rational, DEFAULT_MAGNITUDE_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpConstraint {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

/// Linear program over non-negative variables.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub maximize: bool,
    pub objective: Vec<Rational>,
    pub constraints: Vec<LpConstraint>,
    pub magnitude_bits: u64,
}

impl LpProblem {
    pub fn new(maximize: bool, objective: Vec<Rational>) -> Self {
        LpProblem {
            maximize,
            objective,
            constraints: Vec::new(),
            magnitude_bits: DEFAULT_MAGNITUDE_BITS,
        }
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.objective.len(), "coefficient arity");
        self.constraints.push(LpConstraint { coeffs, rel, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome; `value` and `assignment` are meaningful only when the
/// status is [`LpStatus::Optimal`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: Rational,
    pub assignment: Vec<Rational>,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, n: usize) -> Self {
        LpSolution {
            status,
            value: Rational::zero(),
            assignment: vec![Rational::zero(); n],
        }
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    basis: Vec<usize>,
    n_structural: usize,
    first_artificial: usize,
    cap: u64,
}

impl Tableau {
    fn n_cols(&self) -> usize {
        self.cost.len()
    }

    fn check_magnitude(&self) -> Result<(), Error> {
        for row in self.rows.iter() {
            for v in row {
                v.ensure_magnitude(self.cap)?;
            }
        }
        for v in self.rhs.iter().chain(self.cost.iter()) {
            v.ensure_magnitude(self.cap)?;
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col].clone();
        debug_assert!(!piv.is_zero());
        let inv = piv.recip().expect("non-zero pivot");
        for v in self.rows[row].iter_mut() {
            *v = &*v * &inv;
        }
        self.rhs[row] = &self.rhs[row] * &inv;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col].clone();
            if factor.is_zero() {
                continue;
            }
            for c in 0..self.n_cols() {
                let delta = &self.rows[row][c] * &factor;
                self.rows[r][c] = &self.rows[r][c] - &delta;
            }
            self.rhs[r] = &self.rhs[r] - &(&self.rhs[row] * &factor);
        }
        let factor = self.cost[col].clone();
        if !factor.is_zero() {
            for c in 0..self.n_cols() {
                let delta = &self.rows[row][c] * &factor;
                self.cost[c] = &self.cost[c] - &delta;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations with Bland's rule until optimality or an
    /// unbounded ray. Columns in `banned` never enter.
    fn optimize(&mut self, banned_from: usize) -> Result<LpStatus, Error> {
        loop {
            self.check_magnitude()?;
            let entering = (0..banned_from.min(self.n_cols()))
                .find(|&j| self.cost[j].is_negative());
            let Some(col) = entering else {
                return Ok(LpStatus::Optimal);
            };
            // Ratio test; ties resolved toward the smallest basic index.
            let mut best: Option<(Rational, usize, usize)> = None;
            for r in 0..self.rows.len() {
                if self.rows[r][col].is_positive() {
                    let ratio = &self.rhs[r] / &self.rows[r][col];
                    let key = (ratio, self.basis[r], r);
                    best = match best {
                        None => Some(key),
                        Some(cur) => {
                            if (key.0.clone(), key.1) < (cur.0.clone(), cur.1) {
                                Some(key)
                            } else {
                                Some(cur)
                            }
                        }
                    };
                }
            }
            match best {
                Some((_, _, row)) => self.pivot(row, col),
                None => return Ok(LpStatus::Unbounded),
            }
        }
    }
}

/// Exact primal simplex. Returns the optimal value and one optimal vertex,
/// or the infeasible/unbounded status.
pub fn solve_lp_exact(p: &LpProblem) -> Result<LpSolution, Error> {
    let n = p.n_vars();
    let m = p.constraints.len();

    // Normalize rows to non-negative right-hand sides.
    let mut norm: Vec<(Vec<Rational>, Relation, Rational)> = Vec::with_capacity(m);
    for c in &p.constraints {
        if c.rhs.is_negative() {
            let coeffs = c.coeffs.iter().map(|v| -v).collect();
            let rel = match c.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            norm.push((coeffs, rel, -&c.rhs));
        } else {
            norm.push((c.coeffs.clone(), c.rel, c.rhs.clone()));
        }
    }

    let n_slack = norm
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let n_artificial = norm
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Le)
        .count();
    let first_artificial = n + n_slack;
    let n_cols = n + n_slack + n_artificial;

    let mut rows = vec![vec![Rational::zero(); n_cols]; m];
    let mut rhs = vec![Rational::zero(); m];
    let mut basis = vec![0usize; m];
    let mut slack_at = n;
    let mut art_at = first_artificial;
    for (i, (coeffs, rel, b)) in norm.into_iter().enumerate() {
        rows[i][..n].clone_from_slice(&coeffs);
        rhs[i] = b;
        match rel {
            Relation::Le => {
                rows[i][slack_at] = Rational::one();
                basis[i] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                rows[i][slack_at] = -Rational::one();
                slack_at += 1;
                rows[i][art_at] = Rational::one();
                basis[i] = art_at;
                art_at += 1;
            }
            Relation::Eq => {
                rows[i][art_at] = Rational::one();
                basis[i] = art_at;
                art_at += 1;
            }
        }
    }

    let mut t = Tableau {
        rows,
        rhs,
        cost: Vec::new(),
        basis,
        n_structural: n,
        first_artificial,
        cap: p.magnitude_bits,
    };

    // Phase 1: minimize the artificial mass.
    if n_artificial > 0 {
        let mut cost = vec![Rational::zero(); n_cols];
        for entry in cost.iter_mut().skip(first_artificial) {
            *entry = Rational::one();
        }
        t.cost = cost;
        for r in 0..m {
            if t.basis[r] >= first_artificial {
                for c in 0..n_cols {
                    t.cost[c] = &t.cost[c] - &t.rows[r][c];
                }
            }
        }
        let status = t.optimize(n_cols)?;
        debug_assert_eq!(status, LpStatus::Optimal, "phase 1 is bounded");
        let art_mass: Rational = (0..m)
            .filter(|&r| t.basis[r] >= first_artificial)
            .map(|r| t.rhs[r].clone())
            .sum();
        if !art_mass.is_zero() {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n));
        }
        // Pivot lingering zero-level artificials out of the basis.
        for r in 0..m {
            if t.basis[r] >= first_artificial {
                if let Some(col) = (0..first_artificial).find(|&c| !t.rows[r][c].is_zero()) {
                    t.pivot(r, col);
                }
                // A fully zero row is redundant; leaving the artificial basic
                // at level zero is harmless since it can never re-enter.
            }
        }
    }

    // Phase 2: original objective in minimization form.
    let min_obj: Vec<Rational> = if p.maximize {
        p.objective.iter().map(|v| -v).collect()
    } else {
        p.objective.clone()
    };
    let mut cost = vec![Rational::zero(); n_cols];
    cost[..n].clone_from_slice(&min_obj);
    t.cost = cost;
    for r in 0..m {
        let bj = t.basis[r];
        if bj < n && !min_obj[bj].is_zero() {
            let factor = min_obj[bj].clone();
            for c in 0..n_cols {
                let delta = &t.rows[r][c] * &factor;
                t.cost[c] = &t.cost[c] - &delta;
            }
        }
    }
    let status = t.optimize(t.first_artificial)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, n));
    }

    let mut assignment = vec![Rational::zero(); n];
    for r in 0..m {
        if t.basis[r] < n {
            assignment[t.basis[r]] = t.rhs[r].clone();
        }
    }
    let value: Rational = p
        .objective
        .iter()
        .zip(&assignment)
        .map(|(c, x)| c * x)
        .sum();
    let _ = t.n_structural;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        assignment,
    })
}
