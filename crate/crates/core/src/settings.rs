//! Numerical tolerances and limits shared by every solver in the crate.

use serde::{Deserialize, Serialize};

/// Knobs for the dense simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Primal and dual feasibility tolerance.
    pub tol_feas: f64,
    /// Complementary slackness tolerance.
    pub tol_comp: f64,
    /// Relative primal/dual objective gap tolerance.
    pub tol_gap: f64,
    /// Entries smaller than this are never used as pivots.
    pub pivot_eps: f64,
    pub iteration_limit: usize,
    /// Dantzig pivots allowed per phase before switching to Bland's rule.
    pub dantzig_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_comp: 1e-7,
            tol_gap: 1e-6,
            pivot_eps: 1e-9,
            iteration_limit: 10_000,
            dantzig_pivots: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub lp: SimplexOptions,
    /// A relaxed binary within this distance of 0 or 1 counts as integral.
    pub int_tol: f64,
    pub node_limit: usize,
    /// Largest J for which the 2^J pattern LPs are enumerated.
    pub enumeration_cap: usize,
    /// Range width above which a multiplier is reported as non-unique.
    pub multiple_width: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            lp: SimplexOptions::default(),
            int_tol: 1e-6,
            node_limit: 1_000_000,
            enumeration_cap: 20,
            multiple_width: 1e-6,
        }
    }
}

impl Settings {
    /// Defaults overridden by `LBP_TOL_FEAS`, `LBP_TOL_COMP`, `LBP_TOL_GAP`,
    /// `LBP_PIVOT_EPS` and `LBP_ITERATION_LIMIT` when set and parseable.
    pub fn from_env() -> Self {
        fn var<T: std::str::FromStr>(name: &str) -> Option<T> {
            std::env::var(name).ok().and_then(|v| v.trim().parse().ok())
        }
        let mut s = Settings::default();
        if let Some(v) = var("LBP_TOL_FEAS") {
            s.lp.tol_feas = v;
        }
        if let Some(v) = var("LBP_TOL_COMP") {
            s.lp.tol_comp = v;
        }
        if let Some(v) = var("LBP_TOL_GAP") {
            s.lp.tol_gap = v;
        }
        if let Some(v) = var("LBP_PIVOT_EPS") {
            s.lp.pivot_eps = v;
        }
        if let Some(v) = var("LBP_ITERATION_LIMIT") {
            s.lp.iteration_limit = v;
        }
        s
    }
}
