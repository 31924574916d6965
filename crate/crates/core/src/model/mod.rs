//! Linear bilevel instances.
//!
//! ```text
//! min_x  a^T x + b^T y
//! s.t.   c_i^T x + d_i^T y <= e_i                 (i = 1..K)
//!        y solves  min_y  p^T x + q^T y
//!                  s.t.   r_j^T x + s_j^T y <= t_j  (j = 1..J, multiplier lambda_j)
//! ```
//!
//! Either level may be declared as a maximization; [`normalize_sense`] turns
//! both into minimizations and remembers how to map objective values back.
//! Variable bounds are ordinary upper-level rows.

pub mod catalog;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::dot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "min")]
    Minimize,
    #[serde(rename = "max")]
    Maximize,
}

impl Sense {
    /// Factor mapping an objective in this sense to a minimization objective.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }

    pub fn opposite(self) -> Sense {
        match self {
            Sense::Minimize => Sense::Maximize,
            Sense::Maximize => Sense::Minimize,
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        })
    }
}

/// Coefficients of a linear bilevel problem. Field names follow the JSON
/// instance schema (`C`, `R`, `S` are upper-case there).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbpInstance {
    pub name: String,
    pub upper_sense: Sense,
    pub lower_sense: Sense,
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    /// Coupling of upper rows to `y`; absent in a file means all zero.
    #[serde(default)]
    pub d: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl LbpInstance {
    /// Number of upper-level rows.
    pub fn k(&self) -> usize {
        self.e.len()
    }

    /// Number of lower-level rows.
    pub fn j(&self) -> usize {
        self.t.len()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut inst: LbpInstance = serde_json::from_str(text)?;
        if inst.d.is_empty() {
            inst.d = vec![vec![0.0; inst.m]; inst.c.len()];
        }
        Ok(inst)
    }

    /// Canonical JSON text (pretty-printed, `d` always present).
    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// `a^T x + b^T y` in the declared sense.
    pub fn upper_objective(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.a, x) + dot(&self.b, y)
    }

    /// `p^T x + q^T y` in the declared sense.
    pub fn lower_objective(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.p, x) + dot(&self.q, y)
    }

    /// `e_i - c_i^T x - d_i^T y`.
    pub fn upper_slack(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        self.e[i] - dot(&self.c[i], x) - dot(&self.d[i], y)
    }

    /// `t_j - r_j^T x - s_j^T y`.
    pub fn lower_slack(&self, j: usize, x: &[f64], y: &[f64]) -> f64 {
        self.t[j] - dot(&self.r[j], x) - dot(&self.s[j], y)
    }

    pub fn has_coupled_upper_rows(&self) -> bool {
        self.d.iter().flatten().any(|&v| v != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Issue {
    Dimension(String),
    NonFinite(String),
    CoupledUpperConstraint { row: usize },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Dimension(s) => write!(f, "dimension error: {s}"),
            Issue::NonFinite(s) => write!(f, "non-finite coefficient: {s}"),
            Issue::CoupledUpperConstraint { row } => {
                write!(f, "coupled upper constraint: row {row} has nonzero d")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Accept nonzero `d`; only the optimistic KKT pipeline is meaningful then.
    pub allow_coupled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<String>,
    pub k: usize,
    pub j: usize,
    pub coupled: bool,
}

impl ValidationReport {
    pub fn usable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.usable() {
            Ok(self)
        } else {
            let msg = self
                .errors
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidInstance(msg))
        }
    }
}

pub fn validate(instance: &LbpInstance) -> ValidationReport {
    validate_with(instance, ValidateOptions::default())
}

pub fn validate_with(inst: &LbpInstance, opts: ValidateOptions) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let (n, m, k, j) = (inst.n, inst.m, inst.e.len(), inst.t.len());

    let mut vec_len = |name: &str, v: &[f64], want: usize| {
        if v.len() != want {
            errors.push(Issue::Dimension(format!(
                "{name} has length {}, expected {want}",
                v.len()
            )));
        }
    };
    vec_len("a", &inst.a, n);
    vec_len("b", &inst.b, m);
    vec_len("p", &inst.p, n);
    vec_len("q", &inst.q, m);

    let mut matrix = |name: &str, rows: &[Vec<f64>], want_rows: usize, want_cols: usize| {
        if rows.len() != want_rows {
            errors.push(Issue::Dimension(format!(
                "{name} has {} rows, expected {want_rows}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != want_cols {
                errors.push(Issue::Dimension(format!(
                    "{name} row {i} has length {}, expected {want_cols}",
                    row.len()
                )));
            }
        }
    };
    matrix("C", &inst.c, k, n);
    matrix("d", &inst.d, k, m);
    matrix("R", &inst.r, j, n);
    matrix("S", &inst.s, j, m);

    let named: [(&str, Vec<&f64>); 10] = [
        ("a", inst.a.iter().collect()),
        ("b", inst.b.iter().collect()),
        ("C", inst.c.iter().flatten().collect()),
        ("d", inst.d.iter().flatten().collect()),
        ("e", inst.e.iter().collect()),
        ("p", inst.p.iter().collect()),
        ("q", inst.q.iter().collect()),
        ("R", inst.r.iter().flatten().collect()),
        ("S", inst.s.iter().flatten().collect()),
        ("t", inst.t.iter().collect()),
    ];
    for (name, values) in &named {
        if values.iter().any(|v| !v.is_finite()) {
            errors.push(Issue::NonFinite(format!(
                "{name} contains a non-finite value"
            )));
        }
    }

    let coupled = inst.has_coupled_upper_rows();
    for (i, row) in inst.d.iter().enumerate() {
        if row.iter().any(|&v| v != 0.0) {
            if opts.allow_coupled {
                warnings.push(format!(
                    "coupled upper constraint in row {i}: equivalence of the reformulations is not guaranteed"
                ));
            } else {
                errors.push(Issue::CoupledUpperConstraint { row: i });
            }
        }
    }
    ValidationReport {
        errors,
        warnings,
        k,
        j,
        coupled,
    }
}

/// An instance with both levels minimizing, plus the declared senses needed
/// to report objective values as the user wrote them.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedInstance {
    pub instance: LbpInstance,
    pub declared_upper: Sense,
    pub declared_lower: Sense,
}

impl NormalizedInstance {
    pub fn upper_to_declared(&self, z: f64) -> f64 {
        self.declared_upper.sign() * z
    }

    pub fn lower_to_declared(&self, z: f64) -> f64 {
        self.declared_lower.sign() * z
    }

    /// The instance as originally declared.
    pub fn declared(&self) -> LbpInstance {
        let mut inst = self.instance.clone();
        if self.declared_upper == Sense::Maximize {
            inst.a
                .iter_mut()
                .chain(inst.b.iter_mut())
                .for_each(|v| *v = -*v);
        }
        if self.declared_lower == Sense::Maximize {
            inst.p
                .iter_mut()
                .chain(inst.q.iter_mut())
                .for_each(|v| *v = -*v);
        }
        inst.upper_sense = self.declared_upper;
        inst.lower_sense = self.declared_lower;
        inst
    }
}

/// Negates the objective of every maximizing level.
pub fn normalize_sense(instance: &LbpInstance) -> NormalizedInstance {
    let mut inst = instance.clone();
    let (upper, lower) = (inst.upper_sense, inst.lower_sense);
    if upper == Sense::Maximize {
        inst.a
            .iter_mut()
            .chain(inst.b.iter_mut())
            .for_each(|v| *v = -*v);
        inst.upper_sense = Sense::Minimize;
    }
    if lower == Sense::Maximize {
        inst.p
            .iter_mut()
            .chain(inst.q.iter_mut())
            .for_each(|v| *v = -*v);
        inst.lower_sense = Sense::Minimize;
    }
    NormalizedInstance {
        instance: inst,
        declared_upper: upper,
        declared_lower: lower,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    Infeasible,
    Unbounded,
    AcceptedUnverified,
}

impl fmt::Display for SolutionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionStatus::Optimal => "optimal",
            SolutionStatus::Infeasible => "infeasible",
            SolutionStatus::Unbounded => "unbounded",
            SolutionStatus::AcceptedUnverified => "accepted_unverified",
        })
    }
}

/// A bilevel point with its lower-level multipliers. Objective values are
/// in the declared senses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilevelSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z_upper: f64,
    pub z_lower: f64,
    pub status: SolutionStatus,
}

impl BilevelSolution {
    pub fn without_point(status: SolutionStatus) -> Self {
        let z = match status {
            SolutionStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            x: Vec::new(),
            y: Vec::new(),
            lambda: Vec::new(),
            z_upper: z,
            z_lower: f64::NAN,
            status,
        }
    }

    /// Builds a solution at `(x, y)` with objectives evaluated on `instance`.
    pub fn at(
        instance: &LbpInstance,
        x: Vec<f64>,
        y: Vec<f64>,
        lambda: Vec<f64>,
        status: SolutionStatus,
    ) -> Self {
        let z_upper = instance.upper_objective(&x, &y);
        let z_lower = instance.lower_objective(&x, &y);
        Self {
            x,
            y,
            lambda,
            z_upper,
            z_lower,
            status,
        }
    }
}
