//! Ranges of a row multiplier or of a primal variable over the optimal face.
//!
//! Both are computed with two auxiliary LPs (minimize, then maximize the
//! quantity of interest) rather than from the final basis, so they see the
//! whole face and not just the vertex the simplex stopped at.

use serde::{Deserialize, Serialize};

use super::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation};
use crate::error::{Error, Result};
use crate::settings::SimplexOptions;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// True when the width exceeds `tol`.
    pub fn is_multiple(&self, tol: f64) -> bool {
        self.width() > tol
    }
}

fn face_tolerance(z: f64) -> f64 {
    1e-9 * (1.0 + z.abs())
}

fn require_optimal(solution: &LpSolution) -> Result<()> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::InvalidParameter(
            "range analysis needs an optimal solution".into(),
        ));
    }
    Ok(())
}

fn min_max(aux: &mut LinearProgram, target: usize, opts: &SimplexOptions) -> Result<Interval> {
    aux.objective.iter_mut().for_each(|c| *c = 0.0);
    aux.objective[target] = 1.0;
    let lo = solve_lp(aux, opts)?;
    aux.objective[target] = -1.0;
    let hi = solve_lp(aux, opts)?;
    let bound = |s: &LpSolution, sign: f64| match s.status {
        LpStatus::Optimal => Ok(s.x[target]),
        LpStatus::Unbounded => Ok(sign * f64::INFINITY),
        LpStatus::Infeasible => Err(Error::InvalidParameter(
            "optimal face is empty; solution was not optimal within tolerance".into(),
        )),
    };
    Ok(Interval {
        lo: bound(&lo, -1.0)?,
        hi: bound(&hi, 1.0)?,
    })
}

/// Range of the multiplier of `row` over all optimal dual solutions.
///
/// The auxiliary problem lives in `(lambda, mu_lo, mu_hi)` space: dual
/// feasibility `c + A^T lambda - mu_lo + mu_hi = 0` with the sign
/// restrictions of each row, plus the strong-duality row
/// `-b^T lambda + lo^T mu_lo - hi^T mu_hi >= z*`.
pub fn dual_range(
    lp: &LinearProgram,
    solution: &LpSolution,
    row: usize,
    opts: &SimplexOptions,
) -> Result<Interval> {
    require_optimal(solution)?;
    if row >= lp.num_rows() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    let m = lp.num_rows();
    let n = lp.num_vars();
    let lo_vars: Vec<usize> = (0..n).filter(|&j| lp.lower[j].is_finite()).collect();
    let hi_vars: Vec<usize> = (0..n).filter(|&j| lp.upper[j].is_finite()).collect();
    let nv = m + lo_vars.len() + hi_vars.len();

    let mut aux = LinearProgram::new(vec![0.0; nv]);
    for (i, rel) in lp.relations.iter().enumerate() {
        match rel {
            Relation::Le => aux.set_bounds(i, 0.0, f64::INFINITY),
            Relation::Ge => aux.set_bounds(i, f64::NEG_INFINITY, 0.0),
            Relation::Eq => {}
        }
    }
    for k in m..nv {
        aux.set_bounds(k, 0.0, f64::INFINITY);
    }
    for j in 0..n {
        let mut coeffs = vec![0.0; nv];
        for i in 0..m {
            coeffs[i] = lp.rows[i][j];
        }
        if let Some(k) = lo_vars.iter().position(|&v| v == j) {
            coeffs[m + k] = -1.0;
        }
        if let Some(k) = hi_vars.iter().position(|&v| v == j) {
            coeffs[m + lo_vars.len() + k] = 1.0;
        }
        aux.add_row(coeffs, Relation::Eq, -lp.objective[j]);
    }
    let mut strong = vec![0.0; nv];
    for i in 0..m {
        strong[i] = -lp.rhs[i];
    }
    for (k, &j) in lo_vars.iter().enumerate() {
        strong[m + k] = lp.lower[j];
    }
    for (k, &j) in hi_vars.iter().enumerate() {
        strong[m + lo_vars.len() + k] = -lp.upper[j];
    }
    let z = solution.objective;
    aux.add_row(strong, Relation::Ge, z - face_tolerance(z));
    min_max(&mut aux, row, opts)
}

/// Range of primal variable `var` over the optimal face
/// `{x feasible : c^T x <= z*}`.
pub fn variable_range(
    lp: &LinearProgram,
    solution: &LpSolution,
    var: usize,
    opts: &SimplexOptions,
) -> Result<Interval> {
    require_optimal(solution)?;
    if var >= lp.num_vars() {
        return Err(Error::Dimension(format!("variable {var} out of range")));
    }
    let mut aux = lp.clone();
    let z = solution.objective;
    aux.add_row(lp.objective.clone(), Relation::Le, z + face_tolerance(z));
    min_max(&mut aux, var, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SimplexOptions {
        SimplexOptions::default()
    }

    #[test]
    fn duplicated_row_splits_its_multiplier() {
        // min -x s.t. x <= 1 twice: lambda_1 + lambda_2 = 1.
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        let r = dual_range(&lp, &sol, 0, &opts()).unwrap();
        assert!(r.lo.abs() < 1e-9 && (r.hi - 1.0).abs() < 1e-9);
        assert!(r.is_multiple(1e-6));
    }

    #[test]
    fn nondegenerate_multiplier_is_a_singleton() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![-1.0], Relation::Le, 0.0);
        lp.add_row(vec![-0.01], Relation::Le, -1.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        let r = dual_range(&lp, &sol, 1, &opts()).unwrap();
        assert!((r.lo - 100.0).abs() < 1e-6 && (r.hi - 100.0).abs() < 1e-6);
        assert!(!r.is_multiple(1e-6));
    }

    #[test]
    fn follower_at_x_equal_one_has_a_segment_of_multipliers() {
        // min y s.t. -y <= 0, -0.01 y <= 0: lambda_1 + 0.01 lambda_2 = 1.
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![-1.0], Relation::Le, 0.0);
        lp.add_row(vec![-0.01], Relation::Le, 0.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        let r1 = dual_range(&lp, &sol, 0, &opts()).unwrap();
        let r2 = dual_range(&lp, &sol, 1, &opts()).unwrap();
        assert!(r1.lo.abs() < 1e-9 && (r1.hi - 1.0).abs() < 1e-9);
        assert!(r2.lo.abs() < 1e-7 && (r2.hi - 100.0).abs() < 1e-6);
    }

    #[test]
    fn bound_multipliers_enter_the_dual_face() {
        // min -x with x <= 1 as a bound and as a row: the row multiplier can be
        // anything in [0, 1], the rest carried by the bound.
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.set_bounds(0, 0.0, 1.0);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        let r = dual_range(&lp, &sol, 0, &opts()).unwrap();
        // The strong-duality row is relaxed by 1e-9 (1 + |z|).
        assert!(r.lo.abs() < 1e-8 && (r.hi - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn variable_range_on_a_flat_objective() {
        // min y over 0 <= x <= 3, y >= 0: x is free to move on the face.
        let mut lp = LinearProgram::new(vec![0.0, 1.0]);
        lp.set_bounds(0, 0.0, 3.0);
        lp.add_row(vec![0.0, -1.0], Relation::Le, 0.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        let r = variable_range(&lp, &sol, 0, &opts()).unwrap();
        assert_eq!((r.lo, r.hi), (0.0, 3.0));
        let r = variable_range(&lp, &sol, 1, &opts()).unwrap();
        // Width is at most the face tolerance 1e-9 (1 + |z|).
        assert!(r.width() <= 2e-9, "{r:?}");
    }

    #[test]
    fn requires_an_optimal_solution() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_row(vec![1.0], Relation::Ge, 0.0);
        let sol = solve_lp(&lp, &opts()).unwrap();
        assert!(dual_range(&lp, &sol, 0, &opts()).is_err());
    }
}
