//! Dense linear programming: problem container, two-phase simplex, and
//! multiplier/variable range analysis over optimal faces.
//!
//! All problems are minimizations. Row multipliers follow the Lagrangian sign
//! convention `c + A^T lambda - mu_lo + mu_hi = 0`, so a `<=` row has
//! `lambda >= 0`, a `>=` row has `lambda <= 0`, and an equality row is free.

mod ranges;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ranges::{dual_range, variable_range, Interval};
pub use simplex::solve_lp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `min objective^T x` subject to `rows[i] . x (relation) rhs[i]` and
/// `lower <= x <= upper`. Variables created by [`LinearProgram::new`] are free.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(coeffs);
        self.relations.push(relation);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn with_nonnegative_vars(mut self) -> Self {
        self.lower.iter_mut().for_each(|l| *l = 0.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "{} variables but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.relations.len() != self.rows.len() || self.rhs.len() != self.rows.len() {
            return Err(Error::Dimension(
                "row, relation and rhs counts differ".into(),
            ));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) || !self.rhs[i].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has a non-finite entry"
                )));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite objective coefficient".into(),
            ));
        }
        for j in 0..n {
            if self.lower[j].is_nan()
                || self.upper[j].is_nan()
                || self.lower[j] == f64::INFINITY
                || self.upper[j] == f64::NEG_INFINITY
            {
                return Err(Error::InvalidParameter(format!(
                    "variable {j} has invalid bounds"
                )));
            }
        }
        Ok(())
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        dot(&self.rows[row], x)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// One multiplier per row; empty unless optimal.
    pub duals: Vec<f64>,
    /// `+inf` when infeasible, `-inf` when unbounded.
    pub objective: f64,
    /// Rows holding with equality at `x`.
    pub active: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn infeasible(iterations: usize) -> Self {
        Self {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            duals: Vec::new(),
            objective: f64::INFINITY,
            active: Vec::new(),
            iterations,
        }
    }

    pub fn unbounded(iterations: usize) -> Self {
        Self {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            duals: Vec::new(),
            objective: f64::NEG_INFINITY,
            active: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Residuals of the optimality conditions at this solution. Bound
    /// multipliers are recovered from the reduced costs `c + A^T lambda`.
    pub fn residuals(&self, lp: &LinearProgram) -> Residuals {
        let n = lp.num_vars();
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        let mut comp: f64 = 0.0;
        let mut dual_obj = 0.0;
        let mut reduced = lp.objective.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            let lam = self.duals[i];
            let act = dot(row, &self.x);
            let slack = lp.rhs[i] - act;
            match lp.relations[i] {
                Relation::Le => {
                    primal = primal.max(-slack);
                    dual = dual.max(-lam);
                }
                Relation::Ge => {
                    primal = primal.max(slack);
                    dual = dual.max(lam);
                }
                Relation::Eq => primal = primal.max(slack.abs()),
            }
            comp = comp.max((lam * slack).abs());
            dual_obj -= lam * lp.rhs[i];
            for j in 0..n {
                reduced[j] += row[j] * lam;
            }
        }
        for j in 0..n {
            let (lo, hi, xj, d) = (lp.lower[j], lp.upper[j], self.x[j], reduced[j]);
            primal = primal.max(lo - xj).max(xj - hi);
            if d > 0.0 {
                if lo.is_finite() {
                    dual_obj += d * lo;
                    comp = comp.max((d * (xj - lo)).abs());
                } else {
                    dual = dual.max(d);
                }
            } else if d < 0.0 {
                if hi.is_finite() {
                    dual_obj += d * hi;
                    comp = comp.max((d * (hi - xj)).abs());
                } else {
                    dual = dual.max(-d);
                }
            }
        }
        let primal_obj = lp.objective_value(&self.x);
        Residuals {
            primal_infeasibility: primal.max(0.0),
            dual_infeasibility: dual.max(0.0),
            complementarity: comp,
            primal_objective: primal_obj,
            dual_objective: dual_obj,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl Residuals {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap() / (1.0 + self.primal_objective.abs())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
