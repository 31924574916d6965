//! Single-level reformulations of a linear bilevel instance.
//!
//! [`KktSystem`] replaces the follower by its optimality conditions and is
//! kept symbolic: rows plus a list of complementarity pairs. Both the exact
//! pattern LPs used by the oracle and the big-M MILP are derived from it.

mod bigm;
mod lp_format;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::{dot, solve_lp, LinearProgram, LpSolution, Relation};
use crate::model::{
    normalize_sense, validate_with, LbpInstance, NormalizedInstance, ValidateOptions,
};
use crate::settings::SimplexOptions;

pub use bigm::{bigm_reformulate, BigMConfig, MilpProblem, MilpRow, RowFamily};
pub use lp_format::write_lp_format;

/// Column positions of `(x, y, lambda)` in the continuous variable vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarLayout {
    pub n: usize,
    pub m: usize,
    pub j: usize,
}

impl VarLayout {
    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn y(&self, k: usize) -> usize {
        self.n + k
    }

    pub fn lambda(&self, j: usize) -> usize {
        self.n + self.m + j
    }

    pub fn len(&self) -> usize {
        self.n + self.m + self.j
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split<'a>(&self, v: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (x, rest) = v.split_at(self.n);
        let (y, rest) = rest.split_at(self.m);
        (x, y, &rest[..self.j])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Multiplier `dual_var` is complementary to the slack of lower row `lower_row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComplementarityPair {
    pub dual_var: usize,
    pub lower_row: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktSystem {
    pub source: NormalizedInstance,
    pub layout: VarLayout,
    /// Upper objective over `(x, y, lambda)`, minimize sense.
    pub objective: Vec<f64>,
    pub upper_rows: Vec<LinearRow>,
    pub lower_rows: Vec<LinearRow>,
    /// `sum_j s_jk lambda_j = -q_k`, one per follower variable.
    pub stationarity: Vec<LinearRow>,
    /// `-lambda_j <= 0`.
    pub dual_nonneg: Vec<LinearRow>,
    pub pairs: Vec<ComplementarityPair>,
    pub warnings: Vec<String>,
}

pub fn kkt_reformulate(instance: &LbpInstance) -> Result<KktSystem> {
    kkt_reformulate_with(instance, ValidateOptions::default())
}

/// Builds the KKT system. With `allow_coupled`, nonzero `d` is carried into the
/// upper rows and a warning is recorded.
pub fn kkt_reformulate_with(instance: &LbpInstance, opts: ValidateOptions) -> Result<KktSystem> {
    let report = validate_with(instance, opts).into_result()?;
    let source = normalize_sense(instance);
    let inst = &source.instance;
    let layout = VarLayout {
        n: inst.n,
        m: inst.m,
        j: inst.j(),
    };
    let width = layout.len();

    let mut objective = vec![0.0; width];
    objective[..layout.n].copy_from_slice(&inst.a);
    objective[layout.n..layout.n + layout.m].copy_from_slice(&inst.b);

    let xy_row = |x: &[f64], y: &[f64], rel: Relation, rhs: f64| {
        let mut coeffs = vec![0.0; width];
        coeffs[..layout.n].copy_from_slice(x);
        coeffs[layout.n..layout.n + layout.m].copy_from_slice(y);
        LinearRow {
            coeffs,
            relation: rel,
            rhs,
        }
    };
    let upper_rows = (0..inst.k())
        .map(|i| xy_row(&inst.c[i], &inst.d[i], Relation::Le, inst.e[i]))
        .collect();
    let lower_rows = (0..layout.j)
        .map(|j| xy_row(&inst.r[j], &inst.s[j], Relation::Le, inst.t[j]))
        .collect();
    let stationarity = (0..layout.m)
        .map(|k| {
            let mut coeffs = vec![0.0; width];
            for j in 0..layout.j {
                coeffs[layout.lambda(j)] = inst.s[j][k];
            }
            LinearRow {
                coeffs,
                relation: Relation::Eq,
                rhs: -inst.q[k],
            }
        })
        .collect();
    let dual_nonneg = (0..layout.j)
        .map(|j| {
            let mut coeffs = vec![0.0; width];
            coeffs[layout.lambda(j)] = -1.0;
            LinearRow {
                coeffs,
                relation: Relation::Le,
                rhs: 0.0,
            }
        })
        .collect();
    let pairs = (0..layout.j)
        .map(|j| ComplementarityPair {
            dual_var: layout.lambda(j),
            lower_row: j,
        })
        .collect();
    Ok(KktSystem {
        source,
        layout,
        objective,
        upper_rows,
        lower_rows,
        stationarity,
        dual_nonneg,
        pairs,
        warnings: report.warnings,
    })
}

/// Largest violations of each block of the KKT conditions at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub upper: f64,
    pub lower: f64,
    pub stationarity: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.upper
            .max(self.lower)
            .max(self.stationarity)
            .max(self.dual_sign)
            .max(self.complementarity)
    }
}

impl KktSystem {
    pub fn num_lower_rows(&self) -> usize {
        self.layout.j
    }

    pub fn instance(&self) -> &LbpInstance {
        &self.source.instance
    }

    /// Slack `t_j - r_j^T x - s_j^T y` of lower row `j` at a full variable vector.
    pub fn lower_slack(&self, j: usize, v: &[f64]) -> f64 {
        let row = &self.lower_rows[j];
        row.rhs - dot(&row.coeffs, v)
    }

    pub fn residuals(&self, v: &[f64]) -> KktResiduals {
        let viol = |rows: &[LinearRow]| {
            rows.iter().fold(0.0f64, |acc, r| {
                let act = dot(&r.coeffs, v) - r.rhs;
                acc.max(match r.relation {
                    Relation::Le => act,
                    Relation::Ge => -act,
                    Relation::Eq => act.abs(),
                })
            })
        };
        let complementarity = self.pairs.iter().fold(0.0f64, |acc, p| {
            acc.max((v[p.dual_var] * self.lower_slack(p.lower_row, v)).abs())
        });
        KktResiduals {
            upper: viol(&self.upper_rows).max(0.0),
            lower: viol(&self.lower_rows).max(0.0),
            stationarity: viol(&self.stationarity),
            dual_sign: viol(&self.dual_nonneg).max(0.0),
            complementarity,
        }
    }

    /// The LP obtained by resolving every complementarity pair with `pattern`:
    /// `true` makes lower row `j` an equality and keeps `lambda_j >= 0`; `false`
    /// fixes `lambda_j = 0` and keeps the row as `<=`. With `boxes`, the
    /// bounds `slack_j <= MP_j` and `lambda_j <= MD_j` are appended.
    pub fn pattern_lp(&self, pattern: &[bool], boxes: Option<&BigMConfig>) -> LinearProgram {
        assert_eq!(pattern.len(), self.layout.j, "pattern length must equal J");
        let mut lp = LinearProgram::new(self.objective.clone());
        for r in &self.upper_rows {
            lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
        }
        for (j, r) in self.lower_rows.iter().enumerate() {
            let rel = if pattern[j] {
                Relation::Eq
            } else {
                Relation::Le
            };
            lp.add_row(r.coeffs.clone(), rel, r.rhs);
        }
        for r in &self.stationarity {
            lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
        }
        for (j, r) in self.dual_nonneg.iter().enumerate() {
            if pattern[j] {
                lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
            } else {
                lp.add_row(r.coeffs.clone(), Relation::Eq, 0.0);
            }
        }
        if let Some(cfg) = boxes {
            for (j, r) in self.lower_rows.iter().enumerate() {
                let neg: Vec<f64> = r.coeffs.iter().map(|v| -v).collect();
                lp.add_row(neg, Relation::Le, cfg.mp[j] - r.rhs);
            }
            for j in 0..self.layout.j {
                let mut coeffs = vec![0.0; self.layout.len()];
                coeffs[self.layout.lambda(j)] = 1.0;
                lp.add_row(coeffs, Relation::Le, cfg.md[j]);
            }
        }
        lp
    }
}

/// Solves the pattern LP of `pattern` (see [`KktSystem::pattern_lp`]). The
/// primal vector is laid out as `(x, y, lambda)`; the objective is in the
/// normalized (minimize) sense.
pub fn solve_lp_fixed_pattern(
    kkt: &KktSystem,
    pattern: &[bool],
    boxes: Option<&BigMConfig>,
    opts: &SimplexOptions,
) -> Result<LpSolution> {
    if pattern.len() != kkt.layout.j {
        return Err(crate::error::Error::Dimension(format!(
            "pattern has length {}, expected {}",
            pattern.len(),
            kkt.layout.j
        )));
    }
    solve_lp(&kkt.pattern_lp(pattern, boxes), opts)
}

/// Pattern bits of pattern index `idx`, `u_1` being the most significant bit.
pub fn pattern_from_index(idx: usize, j: usize) -> Vec<bool> {
    (0..j).map(|b| (idx >> (j - 1 - b)) & 1 == 1).collect()
}

pub fn pattern_index(pattern: &[bool]) -> usize {
    pattern
        .iter()
        .fold(0, |acc, &b| (acc << 1) | usize::from(b))
}
