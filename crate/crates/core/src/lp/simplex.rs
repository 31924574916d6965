//! Two-phase tableau simplex on a dense standard-form copy of the problem.
//!
//! Bounds are removed by substitution (`x = lo + x'`, `x = hi - x'`, or
//! `x = x+ - x-` for free variables); a finite box adds one `<=` row. Every
//! standard-form row owns a unit column (its slack or its artificial), whose
//! final reduced cost yields the row multiplier.

use log::trace;

use super::{dot, LinearProgram, LpSolution, LpStatus, Relation};
use crate::error::{Error, Result};
use crate::settings::SimplexOptions;

/// Solves `lp` to optimality, infeasibility or unboundedness. Output is a
/// deterministic function of the input bits and `opts`.
pub fn solve_lp(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    for j in 0..lp.num_vars() {
        if lp.lower[j] > lp.upper[j] {
            return Ok(LpSolution::infeasible(0));
        }
    }
    let std = StandardForm::build(lp);
    let mut tab = Tableau::new(&std);
    let mut iterations = 0usize;

    if std.num_artificial > 0 {
        let mut phase1_cost = vec![0.0; tab.cols];
        for c in std.artificial_start..tab.cols {
            phase1_cost[c] = 1.0;
        }
        let allowed = vec![true; tab.cols];
        tab.run(&phase1_cost, &allowed, opts, &mut iterations, 1)?;
        let infeas = -tab.obj[tab.cols];
        let scale = 1.0 + std.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if infeas > opts.tol_feas * scale {
            trace!("phase 1 ends with infeasibility {infeas:e}");
            return Ok(LpSolution::infeasible(iterations));
        }
        tab.drive_out_artificials(std.artificial_start, opts)?;
    }

    let mut cost = vec![0.0; tab.cols];
    cost[..std.structural].copy_from_slice(&std.cost);
    let allowed: Vec<bool> = (0..tab.cols).map(|c| c < std.artificial_start).collect();
    if tab.run(&cost, &allowed, opts, &mut iterations, 2)? == PhaseEnd::Unbounded {
        return Ok(LpSolution::unbounded(iterations));
    }

    let mut xs = vec![0.0; tab.cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        xs[b] = tab.rhs(i).max(0.0);
    }
    let mut x = std.shift.clone();
    for (col, &(orig, sign)) in std.col_map.iter().enumerate() {
        x[orig] += sign * xs[col];
    }

    let mut duals = Vec::with_capacity(lp.num_rows());
    for i in 0..lp.num_rows() {
        let y = -tab.obj[std.unit_col[i]] * std.flip[i];
        let mut lam = -y;
        // Sign noise inside tolerance is snapped to the feasible side.
        match lp.relations[i] {
            Relation::Le if lam < 0.0 && lam > -opts.tol_feas => lam = 0.0,
            Relation::Ge if lam > 0.0 && lam < opts.tol_feas => lam = 0.0,
            _ => {}
        }
        duals.push(lam + 0.0);
    }

    let active = (0..lp.num_rows())
        .filter(|&i| {
            lp.relations[i] == Relation::Eq
                || (dot(&lp.rows[i], &x) - lp.rhs[i]).abs()
                    <= opts.tol_feas * (1.0 + lp.rhs[i].abs())
        })
        .collect();
    let objective = lp.objective_value(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        duals,
        objective,
        active,
        iterations,
    })
}

struct StandardForm {
    /// Number of structural (substituted) columns.
    structural: usize,
    cost: Vec<f64>,
    /// Structural column -> (original variable, sign).
    col_map: Vec<(usize, f64)>,
    shift: Vec<f64>,
    /// Row coefficients over structural columns, after sign flip.
    rows: Vec<Vec<f64>>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
    /// -1 where the row was negated to make its rhs nonnegative.
    flip: Vec<f64>,
    /// Column holding the unit vector of each row (slack or artificial).
    unit_col: Vec<usize>,
    /// Column index of the logical (slack/surplus) column of each row, if any.
    logical_col: Vec<Option<usize>>,
    artificial_start: usize,
    num_artificial: usize,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut col_map = Vec::new();
        let mut shift = vec![0.0; n];
        let mut boxes = Vec::new();
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            match (lo.is_finite(), hi.is_finite()) {
                (true, hi_finite) => {
                    shift[j] = lo;
                    col_map.push((j, 1.0));
                    if hi_finite {
                        boxes.push((col_map.len() - 1, hi - lo));
                    }
                }
                (false, true) => {
                    shift[j] = hi;
                    col_map.push((j, -1.0));
                }
                (false, false) => {
                    col_map.push((j, 1.0));
                    col_map.push((j, -1.0));
                }
            }
        }
        let structural = col_map.len();
        let cost = col_map.iter().map(|&(j, s)| s * lp.objective[j]).collect();

        let mut rows = Vec::new();
        let mut relations = Vec::new();
        let mut rhs = Vec::new();
        for (i, row) in lp.rows.iter().enumerate() {
            let coeffs: Vec<f64> = col_map.iter().map(|&(j, s)| s * row[j]).collect();
            rows.push(coeffs);
            relations.push(lp.relations[i]);
            rhs.push(lp.rhs[i] - dot(row, &shift));
        }
        for &(col, width) in &boxes {
            let mut coeffs = vec![0.0; structural];
            coeffs[col] = 1.0;
            rows.push(coeffs);
            relations.push(Relation::Le);
            rhs.push(width);
        }

        let mut flip = vec![1.0; rows.len()];
        for i in 0..rows.len() {
            if rhs[i] < 0.0 {
                flip[i] = -1.0;
                rhs[i] = -rhs[i];
                rows[i].iter_mut().for_each(|v| *v = -*v);
                relations[i] = match relations[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let mut next = structural;
        let mut logical_col = vec![None; rows.len()];
        for (i, rel) in relations.iter().enumerate() {
            if *rel != Relation::Eq {
                logical_col[i] = Some(next);
                next += 1;
            }
        }
        let artificial_start = next;
        let mut unit_col = vec![0; rows.len()];
        for (i, rel) in relations.iter().enumerate() {
            if *rel == Relation::Le {
                unit_col[i] = logical_col[i].unwrap();
            } else {
                unit_col[i] = next;
                next += 1;
            }
        }
        Self {
            structural,
            cost,
            col_map,
            shift,
            rows,
            relations,
            rhs,
            flip,
            unit_col,
            logical_col,
            artificial_start,
            num_artificial: next - artificial_start,
        }
    }

    fn total_cols(&self) -> usize {
        self.artificial_start + self.num_artificial
    }
}

#[derive(Debug, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major, `cols + 1` entries per row; the last is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs followed by minus the objective value.
    obj: Vec<f64>,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let rows = std.rows.len();
        let cols = std.total_cols();
        let width = cols + 1;
        let mut t = vec![0.0; rows * width];
        for i in 0..rows {
            let r = &mut t[i * width..(i + 1) * width];
            r[..std.structural].copy_from_slice(&std.rows[i]);
            if let Some(c) = std.logical_col[i] {
                r[c] = if std.relations[i] == Relation::Ge {
                    -1.0
                } else {
                    1.0
                };
            }
            r[std.unit_col[i]] = 1.0;
            r[cols] = std.rhs[i];
        }
        Self {
            rows,
            cols,
            t,
            basis: std.unit_col.clone(),
            obj: vec![0.0; cols + 1],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn price(&mut self, cost: &[f64]) {
        let width = self.cols + 1;
        self.obj[..self.cols].copy_from_slice(cost);
        self.obj[self.cols] = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let r = &self.t[i * width..(i + 1) * width];
                for j in 0..width {
                    self.obj[j] -= cb * r[j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let width = self.cols + 1;
        let p = self.at(r, e);
        for v in &mut self.t[r * width..(r + 1) * width] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * width..(r + 1) * width].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * width + e];
            if f != 0.0 {
                let row = &mut self.t[i * width..(i + 1) * width];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn run(
        &mut self,
        cost: &[f64],
        allowed: &[bool],
        opts: &SimplexOptions,
        iterations: &mut usize,
        phase: u8,
    ) -> Result<PhaseEnd> {
        self.price(cost);
        let mut in_basis = vec![false; self.cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let mut phase_pivots = 0usize;
        loop {
            let bland = phase_pivots >= opts.dantzig_pivots;
            let rc_tol = opts.pivot_eps;
            let mut entering = None;
            let mut best = -rc_tol;
            for j in 0..self.cols {
                if !allowed[j] || in_basis[j] {
                    continue;
                }
                let d = self.obj[j];
                if bland {
                    if d < -rc_tol {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let leaving = if bland {
                self.ratio_test_bland(e, opts)
            } else {
                self.ratio_test_harris(e, opts)
            };
            let Some((r, a)) = leaving else {
                trace!("phase {phase}: column {e} is an unbounded ray");
                return Ok(PhaseEnd::Unbounded);
            };

            *iterations += 1;
            phase_pivots += 1;
            if *iterations > opts.iteration_limit {
                return Err(Error::IterationLimit {
                    limit: opts.iteration_limit,
                });
            }
            trace!(
                "phase {phase} iter {}: enter {e} leave {} pivot {a:e} obj {:e} rule {}",
                *iterations,
                self.basis[r],
                -self.obj[self.cols],
                if bland { "bland" } else { "dantzig" }
            );
            in_basis[self.basis[r]] = false;
            in_basis[e] = true;
            self.pivot(r, e);
            self.clean_rhs(opts);
            self.check_rhs(a)?;
        }
    }

    /// Textbook minimum ratio; ties go to the lowest basic column, which
    /// together with lowest-index entering gives Bland's rule.
    fn ratio_test_bland(&self, e: usize, opts: &SimplexOptions) -> Option<(usize, f64)> {
        let mut leaving: Option<(usize, f64, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, e);
            if a <= opts.pivot_eps {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            let better = match leaving {
                None => true,
                Some((li, lr, _)) => {
                    let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                    if tie {
                        self.basis[i] < self.basis[li]
                    } else {
                        ratio < lr
                    }
                }
            };
            if better {
                leaving = Some((i, ratio, a));
            }
        }
        leaving.map(|(r, _, a)| (r, a))
    }

    /// Harris' two-pass test: bound the step with rhs relaxed by `tol_feas`,
    /// then take the largest pivot among rows within that bound.
    fn ratio_test_harris(&self, e: usize, opts: &SimplexOptions) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let a = self.at(i, e);
            if a > opts.pivot_eps {
                bound = bound.min((self.rhs(i).max(0.0) + opts.tol_feas) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, e);
            if a > opts.pivot_eps
                && self.rhs(i).max(0.0) / a <= bound
                && leaving.is_none_or(|(_, la)| a > la)
            {
                leaving = Some((i, a));
            }
        }
        leaving
    }

    /// Snaps slightly negative basic values (rounding noise, or the small
    /// overshoot the Harris test allows) back to zero.
    fn clean_rhs(&mut self, opts: &SimplexOptions) {
        let width = self.cols + 1;
        for i in 0..self.rows {
            let v = &mut self.t[i * width + self.cols];
            if *v < 0.0 && *v >= -opts.tol_feas {
                *v = 0.0;
            }
        }
    }

    fn check_rhs(&self, pivot: f64) -> Result<()> {
        let scale = (0..self.rows).fold(1.0f64, |m, i| m.max(self.rhs(i).abs()));
        if (0..self.rows).any(|i| self.rhs(i) < -1e-6 * scale) {
            return Err(Error::NumericalBreakdown { pivot });
        }
        Ok(())
    }

    /// Pivots basic artificials (at zero level) out of the basis. Rows whose
    /// non-artificial entries all vanish are redundant and keep their
    /// artificial, which then never moves.
    fn drive_out_artificials(
        &mut self,
        artificial_start: usize,
        opts: &SimplexOptions,
    ) -> Result<()> {
        for r in 0..self.rows {
            if self.basis[r] < artificial_start {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..artificial_start {
                let a = self.at(r, j).abs();
                if a > opts.pivot_eps && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, a)) = best {
                trace!("drive out artificial {} with column {j}", self.basis[r]);
                // Phase 1 left this artificial at zero within tolerance; make
                // it exactly zero so a negative pivot cannot amplify the rest.
                let width = self.cols + 1;
                self.t[r * width + self.cols] = 0.0;
                self.pivot(r, j);
                self.check_rhs(a)?;
            }
        }
        Ok(())
    }
}
