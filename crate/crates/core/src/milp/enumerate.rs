use rayon::prelude::*;

use super::{DualMultiplicity, MilpSolution, MilpStatus, PatternRow, PatternTable};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, variable_range, LpStatus};
use crate::reform::{pattern_from_index, MilpProblem};
use crate::settings::Settings;

/// Solves the LP of every binary pattern (big-M rows kept, binaries fixed)
/// and returns the best one together with the full table.
///
/// Patterns are evaluated in parallel and merged by index. Among optimal
/// rows within `1e-9 (1 + |z|)` of the best objective, the lowest index wins.
pub fn enumerate_patterns(milp: &MilpProblem, settings: &Settings) -> Result<MilpSolution> {
    let j = milp.num_binary;
    if j > settings.enumeration_cap {
        return Err(Error::EnumerationCap {
            j,
            cap: settings.enumeration_cap,
        });
    }
    let rows: Vec<PatternRow> = (0..1usize << j)
        .into_par_iter()
        .map(|idx| solve_pattern(milp, idx, settings))
        .collect::<Result<_>>()?;

    let table = PatternTable {
        n: milp.kkt.layout.n,
        m: milp.kkt.layout.m,
        j,
        rows,
    };
    let nodes = table.rows.len();
    if table.rows.iter().any(|r| r.status == LpStatus::Unbounded) {
        let mut sol = MilpSolution::empty(MilpStatus::Unbounded, nodes);
        sol.table = Some(table);
        return Ok(sol);
    }
    let best = best_row(&table.rows);
    let Some(best) = best else {
        let mut sol = MilpSolution::empty(MilpStatus::Infeasible, nodes);
        sol.table = Some(table);
        return Ok(sol);
    };
    let row = &table.rows[best];
    Ok(MilpSolution {
        status: MilpStatus::Optimal,
        x: row.x.clone(),
        y: row.y.clone(),
        lambda: row.lambda.clone(),
        u: row.u.clone(),
        objective: row.objective,
        z: row.z,
        nodes,
        best_bound: row.objective,
        incumbent_trace: vec![row.objective],
        table: Some(table),
    })
}

/// Index of the best optimal row; ties go to the lowest index.
pub(crate) fn best_row(rows: &[PatternRow]) -> Option<usize> {
    let best = rows
        .iter()
        .filter(|r| r.status == LpStatus::Optimal)
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-9 * (1.0 + best.abs());
    rows.iter()
        .position(|r| r.status == LpStatus::Optimal && r.objective <= best + tol)
}

fn solve_pattern(milp: &MilpProblem, idx: usize, settings: &Settings) -> Result<PatternRow> {
    let layout = milp.kkt.layout;
    let u = pattern_from_index(idx, milp.num_binary);
    let lp = milp.fixed(&u);
    let sol = solve_lp(&lp, &settings.lp)?;
    let mut row = PatternRow {
        case: idx + 1,
        u,
        status: sol.status,
        x: Vec::new(),
        y: Vec::new(),
        lambda: Vec::new(),
        z: f64::NAN,
        objective: sol.objective,
        lambda_ranges: Vec::new(),
        multiplicity: None,
    };
    if sol.status != LpStatus::Optimal {
        return Ok(row);
    }
    let (x, y, lambda) = layout.split(&sol.x);
    row.x = x.to_vec();
    row.y = y.to_vec();
    row.lambda = lambda.to_vec();
    row.z = milp.kkt.source.upper_to_declared(sol.objective);
    row.lambda_ranges = (0..layout.j)
        .map(|jj| variable_range(&lp, &sol, layout.lambda(jj), &settings.lp))
        .collect::<Result<_>>()?;
    row.multiplicity = Some(
        if row
            .lambda_ranges
            .iter()
            .any(|r| r.is_multiple(settings.multiple_width))
        {
            DualMultiplicity::Multiple
        } else {
            DualMultiplicity::Singleton
        },
    );
    Ok(row)
}
