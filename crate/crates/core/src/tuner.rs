//! Big-M selection: the trial-and-error loop that grows any bound found
//! binding at the MILP optimum, and a local-search estimator that derives the
//! bounds from a locally optimal KKT point instead.

use std::collections::HashMap;
use std::io::Write;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_num;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::milp::{solve_milp_bnb, MilpStatus};
use crate::model::{BilevelSolution, LbpInstance, SolutionStatus};
use crate::oracle::{certify_candidate, Certification};
use crate::reform::{
    bigm_reformulate, kkt_reformulate, solve_lp_fixed_pattern, BigMConfig, KktSystem,
};
use crate::settings::Settings;

pub const DEFAULT_GROWTH: f64 = 10.0;
pub const DEFAULT_MAX_ITER: usize = 50;

fn tol_bind(bound: f64) -> f64 {
    1e-6 * (1.0 + bound.abs())
}

/// What an iteration of the loop decided.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TuneRule {
    /// Slack of these (0-based) rows reached `MP` while `u = 0`.
    IncreaseMp {
        indices: Vec<usize>,
    },
    /// Multipliers of these rows reached `MD` while `u = 1`.
    IncreaseMd {
        indices: Vec<usize>,
    },
    Accepted,
    /// The MILP had no optimum; the loop stopped.
    Stopped,
}

impl TuneRule {
    pub fn label(&self) -> &'static str {
        match self {
            TuneRule::IncreaseMp { .. } => "step3",
            TuneRule::IncreaseMd { .. } => "step4",
            TuneRule::Accepted => "accepted",
            TuneRule::Stopped => "stopped",
        }
    }

    pub fn indices(&self) -> &[usize] {
        match self {
            TuneRule::IncreaseMp { indices } | TuneRule::IncreaseMd { indices } => indices,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneIteration {
    /// 1-based.
    pub iter: usize,
    pub config: BigMConfig,
    pub status: MilpStatus,
    pub z: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub u: Vec<bool>,
    pub nodes: usize,
    pub rule: TuneRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneOutcome {
    Accepted,
    MilpInfeasible,
    MilpUnbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub growth: f64,
    pub max_iter: usize,
    pub iterations: Vec<TuneIteration>,
    pub outcome: TuneOutcome,
    /// Accepted point; `accepted_unverified` unless certified global.
    pub solution: Option<BilevelSolution>,
    pub certification: Option<Certification>,
}

impl TuneReport {
    pub fn final_config(&self) -> Option<&BigMConfig> {
        self.iterations.last().map(|it| &it.config)
    }

    /// Iteration trace as CSV: `iter, jprime, rule, MP..., MD..., z`.
    /// Indices in `jprime` are 1-based and separated by `;`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let j = self.iterations.first().map_or(0, |it| it.config.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "jprime".into(), "rule".into()];
        header.extend((1..=j).map(|k| format!("MP{k}")));
        header.extend((1..=j).map(|k| format!("MD{k}")));
        header.push("z".into());
        w.write_record(&header)?;
        for it in &self.iterations {
            let jprime: Vec<String> = it
                .rule
                .indices()
                .iter()
                .map(|k| (k + 1).to_string())
                .collect();
            let mut rec = vec![
                it.iter.to_string(),
                jprime.join(";"),
                it.rule.label().into(),
            ];
            rec.extend(
                it.config
                    .mp
                    .iter()
                    .chain(&it.config.md)
                    .map(|v| fmt_num(*v)),
            );
            rec.push(if it.status == MilpStatus::Optimal {
                fmt_num(it.z)
            } else {
                String::new()
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn trace_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_trace_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// The trial-and-error loop: solve the MILP; if some row with `u_j = 0` has
/// slack at `MP_j`, grow those `MP_j`; otherwise, if some row with `u_j = 1`
/// has its multiplier at `MD_j`, grow those `MD_j`; otherwise accept.
///
/// Acceptance says nothing about bilevel optimality; with `certify` the
/// accepted point is checked against the oracle.
pub fn tune_trial_and_error(
    instance: &LbpInstance,
    cfg0: &BigMConfig,
    growth: f64,
    max_iter: usize,
    certify: bool,
    settings: &Settings,
) -> Result<TuneReport> {
    if !(growth.is_finite() && growth > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "growth must exceed 1, got {growth}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    let kkt = kkt_reformulate(instance)?;
    if cfg0.len() != kkt.layout.j {
        return Err(Error::Dimension(format!(
            "big-M config has {} entries, instance has {} lower rows",
            cfg0.len(),
            kkt.layout.j
        )));
    }
    // Re-validates positivity.
    let mut cfg = BigMConfig::new(cfg0.mp.clone(), cfg0.md.clone())?;
    let mut report = TuneReport {
        growth,
        max_iter,
        iterations: Vec::new(),
        outcome: TuneOutcome::IterationLimit,
        solution: None,
        certification: None,
    };

    for iter in 1..=max_iter {
        let milp = bigm_reformulate(&kkt, &cfg)?;
        let sol = solve_milp_bnb(&milp, settings)?;
        let rule = match sol.status {
            MilpStatus::Infeasible | MilpStatus::Unbounded => TuneRule::Stopped,
            MilpStatus::Optimal => {
                let v = sol.continuous();
                let step3: Vec<usize> = (0..kkt.layout.j)
                    .filter(|&j| {
                        !sol.u[j] && kkt.lower_slack(j, &v) >= cfg.mp[j] - tol_bind(cfg.mp[j])
                    })
                    .collect();
                let step4: Vec<usize> = (0..kkt.layout.j)
                    .filter(|&j| sol.u[j] && sol.lambda[j] >= cfg.md[j] - tol_bind(cfg.md[j]))
                    .collect();
                if !step3.is_empty() {
                    TuneRule::IncreaseMp { indices: step3 }
                } else if !step4.is_empty() {
                    TuneRule::IncreaseMd { indices: step4 }
                } else {
                    TuneRule::Accepted
                }
            }
        };
        debug!("tune iter {iter}: z={} rule={:?}", sol.z, rule);
        report.iterations.push(TuneIteration {
            iter,
            config: cfg.clone(),
            status: sol.status,
            z: sol.z,
            x: sol.x.clone(),
            y: sol.y.clone(),
            lambda: sol.lambda.clone(),
            u: sol.u.clone(),
            nodes: sol.nodes,
            rule: rule.clone(),
        });
        match rule {
            TuneRule::Stopped => {
                report.outcome = if sol.status == MilpStatus::Unbounded {
                    TuneOutcome::MilpUnbounded
                } else {
                    TuneOutcome::MilpInfeasible
                };
                return Ok(report);
            }
            TuneRule::Accepted => {
                report.outcome = TuneOutcome::Accepted;
                let mut accepted = BilevelSolution::at(
                    instance,
                    sol.x.clone(),
                    sol.y.clone(),
                    sol.lambda.clone(),
                    SolutionStatus::AcceptedUnverified,
                );
                if certify {
                    let cert = certify_candidate(instance, &accepted, settings)?;
                    if cert.certificate.is_global() {
                        accepted.status = SolutionStatus::Optimal;
                    }
                    report.certification = Some(cert);
                }
                info!("accepted z={} after {iter} iteration(s)", accepted.z_upper);
                report.solution = Some(accepted);
                return Ok(report);
            }
            TuneRule::IncreaseMp { ref indices } => {
                indices.iter().for_each(|&j| cfg.mp[j] *= growth)
            }
            TuneRule::IncreaseMd { ref indices } => {
                indices.iter().for_each(|&j| cfg.md[j] *= growth)
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub config: BigMConfig,
    pub solution: BilevelSolution,
    pub start_pattern: Vec<bool>,
    /// Patterns accepted by the search, starting pattern first.
    pub path: Vec<Vec<bool>>,
    /// Pattern LPs solved.
    pub lp_solves: usize,
}

impl LocalEstimate {
    pub fn pattern(&self) -> &[bool] {
        self.path.last().expect("path holds at least the start")
    }
}

/// Big-M constants from a locally optimal point of the KKT system.
///
/// Start patterns are tried in order until one has a feasible pattern LP:
/// the follower's response to the leader optimizing alone (`min a^T x` over
/// the upper rows), then its response at the high-point relaxation optimum,
/// then all zeros. A response induces `u_j = 1` where the follower multiplier
/// is positive. From the start, single-bit flips are tried, moving to the
/// best strictly improving neighbour until none improves. At the final point,
/// `MP_j = kappa * max(slack_j, 1)` and `MD_j = kappa * max(|lambda_j|, 1)`.
pub fn estimate_bigm_local(
    instance: &LbpInstance,
    kappa: f64,
    settings: &Settings,
) -> Result<LocalEstimate> {
    if !(kappa.is_finite() && kappa >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be at least 1, got {kappa}"
        )));
    }
    let kkt = kkt_reformulate(instance)?;
    let j = kkt.layout.j;

    let mut cache: HashMap<Vec<bool>, (f64, Vec<f64>)> = HashMap::new();
    let mut evaluate = |u: &[bool]| -> Result<(f64, Vec<f64>)> {
        if let Some(hit) = cache.get(u) {
            return Ok(hit.clone());
        }
        let sol = solve_lp_fixed_pattern(&kkt, u, None, &settings.lp)?;
        let value = match sol.status {
            LpStatus::Optimal => (sol.objective, sol.x),
            LpStatus::Infeasible => (f64::INFINITY, Vec::new()),
            LpStatus::Unbounded => {
                return Err(Error::InvalidInstance(format!(
                    "pattern {u:?} has an unbounded LP"
                )))
            }
        };
        cache.insert(u.to_vec(), value.clone());
        Ok(value)
    };

    let mut found = None;
    for cand in start_candidates(&kkt, settings)? {
        let (o, p) = evaluate(&cand)?;
        if o.is_finite() {
            found = Some((cand, o, p));
            break;
        }
        debug!("start pattern {cand:?} is infeasible");
    }
    let Some((start, mut obj, mut point)) = found else {
        return Err(Error::NoFeasibleStart(
            "every start pattern is infeasible".into(),
        ));
    };
    let mut current = start.clone();
    let mut path = vec![current.clone()];
    loop {
        let mut best: Option<(Vec<bool>, f64, Vec<f64>)> = None;
        for k in 0..j {
            let mut cand = current.clone();
            cand[k] = !cand[k];
            let (o, p) = evaluate(&cand)?;
            if o.is_finite() && best.as_ref().is_none_or(|(_, bo, _)| o < *bo) {
                best = Some((cand, o, p));
            }
        }
        match best {
            Some((cand, o, p)) if o < obj - 1e-9 * (1.0 + obj.abs()) => {
                current = cand;
                obj = o;
                point = p;
                path.push(current.clone());
            }
            _ => break,
        }
    }

    let mp = (0..j)
        .map(|k| kappa * kkt.lower_slack(k, &point).max(1.0))
        .collect();
    let md = (0..j)
        .map(|k| kappa * point[kkt.layout.lambda(k)].abs().max(1.0))
        .collect();
    let (x, y, lambda) = kkt.layout.split(&point);
    let solution = BilevelSolution::at(
        instance,
        x.to_vec(),
        y.to_vec(),
        lambda.to_vec(),
        SolutionStatus::AcceptedUnverified,
    );
    Ok(LocalEstimate {
        config: BigMConfig::new(mp, md)?,
        solution,
        start_pattern: start,
        path,
        lp_solves: cache.len(),
    })
}

fn start_candidates(kkt: &KktSystem, settings: &Settings) -> Result<Vec<Vec<bool>>> {
    let inst = kkt.instance();
    let (n, m) = (inst.n, inst.m);
    let mut starts = Vec::new();

    let mut leader = LinearProgram::new(inst.a.clone());
    for i in 0..inst.k() {
        leader.add_row(inst.c[i].clone(), Relation::Le, inst.e[i]);
    }
    let lead = solve_lp(&leader, &settings.lp)?;
    if lead.is_optimal() {
        starts.extend(follower_pattern(kkt, &lead.x, settings)?);
    } else {
        debug!("leader-only LP is {:?}", lead.status);
    }

    let mut obj = inst.a.clone();
    obj.extend(&inst.b);
    let mut hpr = LinearProgram::new(obj);
    for i in 0..inst.k() {
        let mut row = inst.c[i].clone();
        row.extend(&inst.d[i]);
        hpr.add_row(row, Relation::Le, inst.e[i]);
    }
    for jj in 0..inst.j() {
        let mut row = inst.r[jj].clone();
        row.extend(&inst.s[jj]);
        hpr.add_row(row, Relation::Le, inst.t[jj]);
    }
    let hp = solve_lp(&hpr, &settings.lp)?;
    if hp.is_optimal() {
        starts.extend(follower_pattern(kkt, &hp.x[..n], settings)?);
    } else if hp.status == LpStatus::Unbounded {
        // Any feasible point will do; drop the objective.
        hpr.objective = vec![0.0; n + m];
        let feas = solve_lp(&hpr, &settings.lp)?;
        if feas.is_optimal() {
            starts.extend(follower_pattern(kkt, &feas.x[..n], settings)?);
        }
    }
    starts.push(vec![false; kkt.layout.j]);
    starts.dedup();
    Ok(starts)
}

/// Pattern `lambda_j > tol` of the follower's response at `x`, if it has one.
fn follower_pattern(kkt: &KktSystem, x: &[f64], settings: &Settings) -> Result<Option<Vec<bool>>> {
    let inst = kkt.instance();
    let mut follower = LinearProgram::new(inst.q.clone());
    for jj in 0..inst.j() {
        let rx: f64 = inst.r[jj].iter().zip(x).map(|(a, b)| a * b).sum();
        follower.add_row(inst.s[jj].clone(), Relation::Le, inst.t[jj] - rx);
    }
    let fol = solve_lp(&follower, &settings.lp)?;
    if !fol.is_optimal() {
        debug!("follower LP at {x:?} is {:?}", fol.status);
        return Ok(None);
    }
    Ok(Some(
        fol.duals
            .iter()
            .map(|&l| l > settings.lp.tol_feas)
            .collect(),
    ))
}
