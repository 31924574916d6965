//! Bound-free global solution of a bilevel instance and certification of
//! candidate points against it.
//!
//! The oracle enumerates every complementarity pattern of the KKT system and
//! solves the induced LP without any big-M constants, so the only way it can
//! miss the optimum is through the `J <= cap` restriction.

use std::fmt;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::model::{validate_with, BilevelSolution, LbpInstance, SolutionStatus, ValidateOptions};
use crate::reform::{
    kkt_reformulate, pattern_from_index, solve_lp_fixed_pattern, BigMConfig, KktSystem,
};
use crate::settings::Settings;

/// Outcome of one pattern LP without big-M boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternOutcome {
    pub u: Vec<bool>,
    pub status: LpStatus,
    /// Upper objective in the declared sense; NaN unless optimal.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub solution: BilevelSolution,
    /// Winning pattern, when the instance has an optimum.
    pub pattern: Option<Vec<bool>>,
    /// Every pattern whose objective ties with the winner's.
    pub ties: Vec<Vec<bool>>,
    pub trace: Vec<PatternOutcome>,
    /// Largest `|lambda_j|` over all optimal pattern solutions.
    pub max_abs_lambda: Vec<f64>,
    /// Largest slack of lower row `j` over all optimal pattern solutions.
    pub max_slack: Vec<f64>,
}

impl OracleResult {
    /// Big-M constants `factor * max(observed, 1)` from the observed maxima.
    pub fn bigm_seed(&self, factor: f64) -> Result<BigMConfig> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "seed factor must be positive, got {factor}"
            )));
        }
        let scale = |v: &Vec<f64>| v.iter().map(|&o| factor * o.max(1.0)).collect();
        BigMConfig::new(scale(&self.max_slack), scale(&self.max_abs_lambda))
    }

    pub fn z(&self) -> f64 {
        self.solution.z_upper
    }
}

/// Solves the bilevel instance globally by enumerating all `2^J` patterns.
///
/// Any unbounded pattern LP makes the whole problem unbounded; if no pattern
/// LP is feasible the problem is infeasible. Ties go to the lowest pattern
/// index.
pub fn solve_global_oracle(instance: &LbpInstance, settings: &Settings) -> Result<OracleResult> {
    let kkt = kkt_reformulate(instance)?;
    solve_global_oracle_kkt(&kkt, settings)
}

/// [`solve_global_oracle`] on an already-built KKT system.
pub fn solve_global_oracle_kkt(kkt: &KktSystem, settings: &Settings) -> Result<OracleResult> {
    let j = kkt.layout.j;
    if j > settings.enumeration_cap {
        return Err(Error::EnumerationCap {
            j,
            cap: settings.enumeration_cap,
        });
    }
    let solutions = (0..1usize << j)
        .into_par_iter()
        .map(|idx| {
            let u = pattern_from_index(idx, j);
            solve_lp_fixed_pattern(kkt, &u, None, &settings.lp).map(|s| (u, s))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut max_abs_lambda = vec![0.0f64; j];
    let mut max_slack = vec![0.0f64; j];
    let mut trace = Vec::with_capacity(solutions.len());
    for (u, sol) in &solutions {
        let z = if sol.is_optimal() {
            for jj in 0..j {
                max_abs_lambda[jj] = max_abs_lambda[jj].max(sol.x[kkt.layout.lambda(jj)].abs());
                max_slack[jj] = max_slack[jj].max(kkt.lower_slack(jj, &sol.x));
            }
            kkt.source.upper_to_declared(sol.objective)
        } else {
            f64::NAN
        };
        trace.push(PatternOutcome {
            u: u.clone(),
            status: sol.status,
            z,
        });
    }

    let mut result = OracleResult {
        solution: BilevelSolution::without_point(SolutionStatus::Infeasible),
        pattern: None,
        ties: Vec::new(),
        trace,
        max_abs_lambda,
        max_slack,
    };
    if solutions
        .iter()
        .any(|(_, s)| s.status == LpStatus::Unbounded)
    {
        result.solution = BilevelSolution::without_point(SolutionStatus::Unbounded);
        return Ok(result);
    }
    let best = solutions
        .iter()
        .filter(|(_, s)| s.is_optimal())
        .map(|(_, s)| s.objective)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Ok(result);
    }
    let tol = 1e-9 * (1.0 + best.abs());
    let tied: Vec<usize> = (0..solutions.len())
        .filter(|&i| solutions[i].1.is_optimal() && solutions[i].1.objective <= best + tol)
        .collect();
    let (u, sol) = &solutions[tied[0]];
    let (x, y, lambda) = kkt.layout.split(&sol.x);
    debug!(
        "oracle optimum {best:e} at pattern {u:?}, {} tie(s)",
        tied.len()
    );
    result.solution = BilevelSolution::at(
        &kkt.source.declared(),
        x.to_vec(),
        y.to_vec(),
        lambda.to_vec(),
        SolutionStatus::Optimal,
    );
    result.pattern = Some(u.clone());
    result.ties = tied.iter().map(|&i| solutions[i].0.clone()).collect();
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Largest violation of an upper constraint at `(x, y)`.
    pub upper_violation: f64,
    /// Largest violation of a lower constraint at `(x, y)`.
    pub lower_violation: f64,
    /// Status of the follower's LP at fixed `x`.
    pub follower_status: LpStatus,
    /// Follower's optimal response at `x`, if any.
    pub follower_y: Vec<f64>,
    /// Follower optimum at `x`, in the declared sense.
    pub follower_z: f64,
    /// `q^T y - q^T y_opt` in the minimize sense; non-negative when `y` is feasible.
    pub lower_gap: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

/// Checks that `(x, y)` is bilevel feasible: upper and lower constraints hold
/// within `tol`, and `y` is optimal for the follower at `x` within
/// `tol * (1 + |follower optimum|)`.
pub fn verify_bilevel_feasible(
    instance: &LbpInstance,
    x: &[f64],
    y: &[f64],
    tol: f64,
    settings: &Settings,
) -> Result<VerifyReport> {
    validate_with(
        instance,
        ValidateOptions {
            allow_coupled: true,
        },
    )
    .into_result()?;
    if x.len() != instance.n || y.len() != instance.m {
        return Err(Error::Dimension(format!(
            "point has dimensions ({}, {}), instance expects ({}, {})",
            x.len(),
            y.len(),
            instance.n,
            instance.m
        )));
    }
    let upper_violation = (0..instance.k())
        .map(|i| -instance.upper_slack(i, x, y))
        .fold(0.0f64, f64::max);
    let lower_violation = (0..instance.j())
        .map(|j| -instance.lower_slack(j, x, y))
        .fold(0.0f64, f64::max);

    let sign = instance.lower_sense.sign();
    let mut follower = LinearProgram::new(instance.q.iter().map(|v| sign * v).collect());
    for j in 0..instance.j() {
        let rx: f64 = instance.r[j].iter().zip(x).map(|(a, b)| a * b).sum();
        follower.add_row(instance.s[j].clone(), Relation::Le, instance.t[j] - rx);
    }
    let sol = solve_lp(&follower, &settings.lp)?;

    let mut report = VerifyReport {
        upper_violation,
        lower_violation,
        follower_status: sol.status,
        follower_y: Vec::new(),
        follower_z: f64::NAN,
        lower_gap: f64::NAN,
        feasible: false,
        reason: None,
    };
    match sol.status {
        LpStatus::Infeasible => {
            report.reason = Some("x infeasible for follower".into());
            return Ok(report);
        }
        LpStatus::Unbounded => {
            report.reason = Some("follower unbounded at x".into());
            return Ok(report);
        }
        LpStatus::Optimal => {}
    }
    let opt = sol.objective;
    let own: f64 = instance.q.iter().zip(y).map(|(a, b)| sign * a * b).sum();
    report.lower_gap = own - opt;
    report.follower_z = instance.lower_objective(x, &sol.x);
    report.follower_y = sol.x;

    report.reason = if upper_violation > tol {
        Some(format!("upper constraints violated by {upper_violation:e}"))
    } else if lower_violation > tol {
        Some(format!("lower constraints violated by {lower_violation:e}"))
    } else if report.lower_gap > tol * (1.0 + opt.abs()) {
        Some(format!(
            "y is not follower-optimal (gap {:e})",
            report.lower_gap
        ))
    } else {
        None
    };
    report.feasible = report.reason.is_none();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Certificate {
    Global,
    /// Bilevel feasible but worse than the oracle by `gap` (declared sense, > 0).
    Suboptimal {
        gap: f64,
    },
    Infeasible {
        reason: String,
    },
}

impl Certificate {
    pub fn is_global(&self) -> bool {
        matches!(self, Certificate::Global)
    }

    /// Suboptimal or infeasible.
    pub fn is_failure(&self) -> bool {
        !self.is_global()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Global => f.write_str("global"),
            Certificate::Suboptimal { gap } => {
                write!(f, "suboptimal (gap {})", crate::fmt::fmt_num(*gap))
            }
            Certificate::Infeasible { reason } => write!(f, "infeasible ({reason})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub certificate: Certificate,
    pub verify: Option<VerifyReport>,
    pub candidate_z: f64,
    pub oracle_z: f64,
}

/// Verifies `candidate` and compares it against a fresh oracle solve.
pub fn certify_candidate(
    instance: &LbpInstance,
    candidate: &BilevelSolution,
    settings: &Settings,
) -> Result<Certification> {
    let oracle = solve_global_oracle(instance, settings)?;
    certify_with_oracle(instance, candidate, &oracle, settings)
}

/// Like [`certify_candidate`] with a precomputed oracle result.
pub fn certify_with_oracle(
    instance: &LbpInstance,
    candidate: &BilevelSolution,
    oracle: &OracleResult,
    settings: &Settings,
) -> Result<Certification> {
    let oracle_z = oracle.z();
    let mut cert = Certification {
        certificate: Certificate::Infeasible {
            reason: "no candidate point".into(),
        },
        verify: None,
        candidate_z: candidate.z_upper,
        oracle_z,
    };
    if candidate.x.len() != instance.n || candidate.y.len() != instance.m {
        return Ok(cert);
    }
    let report = verify_bilevel_feasible(
        instance,
        &candidate.x,
        &candidate.y,
        settings.lp.tol_gap,
        settings,
    )?;
    let z = instance.upper_objective(&candidate.x, &candidate.y);
    cert.candidate_z = z;
    if let Some(reason) = report.reason.clone() {
        cert.certificate = Certificate::Infeasible { reason };
        cert.verify = Some(report);
        return Ok(cert);
    }
    cert.verify = Some(report);
    cert.certificate = match oracle.solution.status {
        SolutionStatus::Unbounded => Certificate::Suboptimal { gap: f64::INFINITY },
        SolutionStatus::Optimal => {
            // Positive when the candidate is worse than the oracle.
            let gap = instance.upper_sense.sign() * (z - oracle_z);
            if gap > settings.lp.tol_gap * (1.0 + oracle_z.abs()) {
                Certificate::Suboptimal { gap }
            } else {
                if gap < -settings.lp.tol_gap * (1.0 + oracle_z.abs()) {
                    warn!("candidate z={z} beats oracle z={oracle_z}");
                }
                Certificate::Global
            }
        }
        _ => {
            warn!("oracle found no optimum but the candidate verified feasible");
            Certificate::Global
        }
    };
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::{builtin_counterexample, decoupled_example};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn counterexample_global_optimum() {
        let res = solve_global_oracle(&builtin_counterexample(), &Settings::default()).unwrap();
        let s = &res.solution;
        assert_eq!(s.status, SolutionStatus::Optimal);
        assert!(close(s.z_upper, 102.0) && close(s.x[0], 2.0) && close(s.y[0], 100.0));
        assert!(close(s.lambda[0], 0.0) && close(s.lambda[1], 100.0));
        assert_eq!(res.pattern, Some(vec![false, true]));
        assert_eq!(res.ties.len(), 1);
        assert_eq!(res.trace[0].status, LpStatus::Infeasible);
        assert!(res.max_abs_lambda[1] >= 100.0 - 1e-6);
        assert!(res.max_slack[0] >= 100.0 - 1e-6);
    }

    #[test]
    fn rescaled_row_rescales_its_multiplier() {
        let mut inst = builtin_counterexample();
        inst.r[1] = vec![100.0];
        inst.s[1] = vec![-1.0];
        inst.t[1] = 100.0;
        let res = solve_global_oracle(&inst, &Settings::default()).unwrap();
        let s = &res.solution;
        assert!(close(s.z_upper, 102.0) && close(s.x[0], 2.0) && close(s.y[0], 100.0));
        assert!(close(s.lambda[1], 1.0));
    }

    #[test]
    fn decoupled_levels() {
        let res = solve_global_oracle(&decoupled_example(), &Settings::default()).unwrap();
        let s = &res.solution;
        assert!(close(s.x[0], 0.0) && close(s.y[0], 0.0) && close(s.z_upper, 0.0));
    }

    #[test]
    fn winner_is_bilevel_feasible() {
        let inst = builtin_counterexample();
        let res = solve_global_oracle(&inst, &Settings::default()).unwrap();
        let rep = verify_bilevel_feasible(
            &inst,
            &res.solution.x,
            &res.solution.y,
            1e-6,
            &Settings::default(),
        )
        .unwrap();
        assert!(rep.feasible, "{rep:?}");
    }

    #[test]
    fn verify_examples() {
        let inst = builtin_counterexample();
        let st = Settings::default();
        let opt = verify_bilevel_feasible(&inst, &[2.0], &[100.0], 1e-6, &st).unwrap();
        assert!(opt.feasible && opt.lower_gap.abs() < 1e-9);
        let low = verify_bilevel_feasible(&inst, &[1.0], &[0.0], 1e-6, &st).unwrap();
        assert!(low.feasible);
        assert!(close(inst.upper_objective(&[1.0], &[0.0]), 1.0));
        let bad = verify_bilevel_feasible(&inst, &[2.0], &[50.0], 1e-6, &st).unwrap();
        assert!(!bad.feasible);
        assert!(close(bad.lower_violation, 0.5));
    }

    #[test]
    fn follower_infeasible_x_is_reported() {
        // y >= 0 and y <= x - 1 leave no room for x = 0.
        let mut inst = decoupled_example();
        inst.r.push(vec![-1.0]);
        inst.s.push(vec![1.0]);
        inst.t.push(-1.0);
        let rep =
            verify_bilevel_feasible(&inst, &[0.0], &[0.0], 1e-6, &Settings::default()).unwrap();
        assert!(!rep.feasible);
        assert_eq!(rep.reason.as_deref(), Some("x infeasible for follower"));
    }

    #[test]
    fn certificates() {
        let inst = builtin_counterexample();
        let st = Settings::default();
        let at = |x: f64, y: f64| {
            BilevelSolution::at(
                &inst,
                vec![x],
                vec![y],
                vec![],
                SolutionStatus::AcceptedUnverified,
            )
        };
        let sub = certify_candidate(&inst, &at(1.0, 0.0), &st).unwrap();
        match sub.certificate {
            Certificate::Suboptimal { gap } => assert!(close(gap, 101.0)),
            other => panic!("{other:?}"),
        }
        assert!(certify_candidate(&inst, &at(2.0, 100.0), &st)
            .unwrap()
            .certificate
            .is_global());
        assert!(matches!(
            certify_candidate(&inst, &at(2.0, 50.0), &st)
                .unwrap()
                .certificate,
            Certificate::Infeasible { .. }
        ));
    }

    #[test]
    fn minimize_sense_gap_is_positive() {
        let inst = decoupled_example();
        let cand = BilevelSolution::at(
            &inst,
            vec![1.0],
            vec![0.0],
            vec![],
            SolutionStatus::AcceptedUnverified,
        );
        match certify_candidate(&inst, &cand, &Settings::default())
            .unwrap()
            .certificate
        {
            Certificate::Suboptimal { gap } => assert!(close(gap, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_from_observed_maxima() {
        let res = solve_global_oracle(&builtin_counterexample(), &Settings::default()).unwrap();
        let cfg = res.bigm_seed(10.0).unwrap();
        assert!(cfg.md[1] >= 1000.0 - 1e-5);
        assert!(cfg.mp.iter().chain(&cfg.md).all(|&v| v >= 10.0));
        assert!(res.bigm_seed(0.0).is_err());
    }
}
