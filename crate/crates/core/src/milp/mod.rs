//! Solvers for the big-M MILP: depth-first branch-and-bound on the binaries,
//! and exhaustive enumeration of all `2^J` binary patterns.

mod bnb;
mod enumerate;
mod table;

use serde::{Deserialize, Serialize};

use crate::lp::{Interval, LpStatus};

pub use bnb::solve_milp_bnb;
pub use enumerate::enumerate_patterns;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Whether the multipliers of an optimal pattern LP are unique.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMultiplicity {
    Singleton,
    Multiple,
}

/// One binary pattern and the LP it induces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    /// 1-based position in lexicographic pattern order.
    pub case: usize,
    pub u: Vec<bool>,
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Upper objective in the declared sense.
    pub z: f64,
    /// Minimize-sense objective.
    pub objective: f64,
    /// Range of each multiplier over the optimal face; empty unless optimal.
    pub lambda_ranges: Vec<Interval>,
    pub multiplicity: Option<DualMultiplicity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub n: usize,
    pub m: usize,
    pub j: usize,
    pub rows: Vec<PatternRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub u: Vec<bool>,
    /// Minimize-sense objective.
    pub objective: f64,
    /// Upper objective in the declared sense.
    pub z: f64,
    /// LP relaxations solved (branch-and-bound) or patterns solved (enumeration).
    pub nodes: usize,
    /// Lower bound on the minimize-sense optimum proven by the search.
    pub best_bound: f64,
    /// Minimize-sense objective of each successive incumbent.
    pub incumbent_trace: Vec<f64>,
    pub table: Option<PatternTable>,
}

impl MilpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }

    pub(crate) fn empty(status: MilpStatus, nodes: usize) -> Self {
        let objective = match status {
            MilpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self {
            status,
            x: Vec::new(),
            y: Vec::new(),
            lambda: Vec::new(),
            u: Vec::new(),
            objective,
            z: f64::NAN,
            nodes,
            best_bound: objective,
            incumbent_trace: Vec::new(),
            table: None,
        }
    }

    /// Concatenated `(x, y, lambda)`.
    pub fn continuous(&self) -> Vec<f64> {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.lambda)
            .copied()
            .collect()
    }
}
