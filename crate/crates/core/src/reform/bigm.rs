//! Fortuny-Amat linearization of the complementarity pairs.

use serde::{Deserialize, Serialize};

use super::{KktSystem, VarLayout};
use crate::error::{Error, Result};
use crate::lp::{dot, LinearProgram, Relation};

/// Per-row bounds on lower-level slacks (`mp`) and multipliers (`md`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigMConfig {
    pub mp: Vec<f64>,
    pub md: Vec<f64>,
}

impl BigMConfig {
    pub fn new(mp: Vec<f64>, md: Vec<f64>) -> Result<Self> {
        if mp.len() != md.len() {
            return Err(Error::InvalidBigM(format!(
                "{} primal bounds but {} dual bounds",
                mp.len(),
                md.len()
            )));
        }
        for (name, v) in [("MP", &mp), ("MD", &md)] {
            if let Some((j, bad)) = v
                .iter()
                .enumerate()
                .find(|(_, x)| !(x.is_finite() && **x > 0.0))
            {
                return Err(Error::InvalidBigM(format!(
                    "{name}[{j}] = {bad} must be positive and finite"
                )));
            }
        }
        Ok(Self { mp, md })
    }

    pub fn uniform(j: usize, mp: f64, md: f64) -> Result<Self> {
        Self::new(vec![mp; j], vec![md; j])
    }

    pub fn len(&self) -> usize {
        self.mp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mp.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    Upper,
    LowerPrimal,
    Stationarity,
    DualNonneg,
    DualBigM,
    PrimalBigM,
}

/// A row over `(x, y, lambda, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpRow {
    pub name: String,
    pub family: RowFamily,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Mixed-binary program with continuous `(x, y, lambda)` followed by the
/// binaries `u`. Rows come in the order upper, lower primal, stationarity,
/// dual sign, `lambda_j <= u_j MD_j`, `t_j - r_j^T x - s_j^T y <= (1 - u_j) MP_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub kkt: KktSystem,
    pub config: BigMConfig,
    pub num_continuous: usize,
    pub num_binary: usize,
    /// Minimize-sense objective over all variables.
    pub objective: Vec<f64>,
    pub rows: Vec<MilpRow>,
}

/// Builds the big-M MILP. Fails when `cfg` has the wrong length or a
/// nonpositive / non-finite entry.
pub fn bigm_reformulate(kkt: &KktSystem, cfg: &BigMConfig) -> Result<MilpProblem> {
    let cfg = BigMConfig::new(cfg.mp.clone(), cfg.md.clone())?;
    let VarLayout { j, .. } = kkt.layout;
    if cfg.len() != j {
        return Err(Error::InvalidBigM(format!(
            "configuration has {} entries, instance has J = {j}",
            cfg.len()
        )));
    }
    let nc = kkt.layout.len();
    let width = nc + j;
    let widen = |c: &[f64]| {
        let mut v = c.to_vec();
        v.resize(width, 0.0);
        v
    };
    let mut rows = Vec::with_capacity(kkt.upper_rows.len() + 4 * j + kkt.stationarity.len());
    for (i, r) in kkt.upper_rows.iter().enumerate() {
        rows.push(MilpRow {
            name: format!("upper_{}", i + 1),
            family: RowFamily::Upper,
            coeffs: widen(&r.coeffs),
            relation: r.relation,
            rhs: r.rhs,
        });
    }
    for (jj, r) in kkt.lower_rows.iter().enumerate() {
        rows.push(MilpRow {
            name: format!("lower_{}", jj + 1),
            family: RowFamily::LowerPrimal,
            coeffs: widen(&r.coeffs),
            relation: r.relation,
            rhs: r.rhs,
        });
    }
    for (k, r) in kkt.stationarity.iter().enumerate() {
        rows.push(MilpRow {
            name: format!("stationarity_{}", k + 1),
            family: RowFamily::Stationarity,
            coeffs: widen(&r.coeffs),
            relation: r.relation,
            rhs: r.rhs,
        });
    }
    for (jj, r) in kkt.dual_nonneg.iter().enumerate() {
        rows.push(MilpRow {
            name: format!("dual_sign_{}", jj + 1),
            family: RowFamily::DualNonneg,
            coeffs: widen(&r.coeffs),
            relation: r.relation,
            rhs: r.rhs,
        });
    }
    for jj in 0..j {
        let mut coeffs = vec![0.0; width];
        coeffs[kkt.layout.lambda(jj)] = 1.0;
        coeffs[nc + jj] = -cfg.md[jj];
        rows.push(MilpRow {
            name: format!("dual_bigm_{}", jj + 1),
            family: RowFamily::DualBigM,
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
    }
    for (jj, r) in kkt.lower_rows.iter().enumerate() {
        let mut coeffs: Vec<f64> = r.coeffs.iter().map(|v| -v).collect();
        coeffs.resize(width, 0.0);
        coeffs[nc + jj] = cfg.mp[jj];
        rows.push(MilpRow {
            name: format!("primal_bigm_{}", jj + 1),
            family: RowFamily::PrimalBigM,
            coeffs,
            relation: Relation::Le,
            rhs: cfg.mp[jj] - r.rhs,
        });
    }
    Ok(MilpProblem {
        kkt: kkt.clone(),
        config: cfg,
        num_continuous: nc,
        num_binary: j,
        objective: widen(&kkt.objective),
        rows,
    })
}

impl MilpProblem {
    pub fn num_vars(&self) -> usize {
        self.num_continuous + self.num_binary
    }

    pub fn binary_var(&self, j: usize) -> usize {
        self.num_continuous + j
    }

    /// LP relaxation with `u_j` restricted to `[u_lower[j], u_upper[j]]`.
    pub fn relaxation(&self, u_lower: &[f64], u_upper: &[f64]) -> LinearProgram {
        let mut lp = LinearProgram::new(self.objective.clone());
        for r in &self.rows {
            lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
        }
        for j in 0..self.num_binary {
            lp.set_bounds(self.binary_var(j), u_lower[j], u_upper[j]);
        }
        lp
    }

    /// The LP with every binary fixed by `pattern`.
    pub fn fixed(&self, pattern: &[bool]) -> LinearProgram {
        let u: Vec<f64> = pattern.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        self.relaxation(&u, &u)
    }

    /// `u_j = 1` exactly when `lambda_j > tol`; a zero multiplier maps to 0.
    pub fn induced_pattern(&self, continuous: &[f64], tol: f64) -> Vec<bool> {
        (0..self.num_binary)
            .map(|j| continuous[self.kkt.layout.lambda(j)] > tol)
            .collect()
    }

    /// Largest row violation at the full point `(x, y, lambda, u)`.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        self.rows.iter().fold(0.0f64, |acc, r| {
            let act = dot(&r.coeffs, point) - r.rhs;
            acc.max(match r.relation {
                Relation::Le => act,
                Relation::Ge => -act,
                Relation::Eq => act.abs(),
            })
        })
    }

    pub fn is_feasible(&self, continuous: &[f64], pattern: &[bool], tol: f64) -> bool {
        let mut point = continuous.to_vec();
        point.extend(pattern.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        self.max_violation(&point) <= tol
    }

    pub fn family_count(&self, family: RowFamily) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }
}
