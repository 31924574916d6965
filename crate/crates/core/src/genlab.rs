//! Random instance generation with controllable multiplier spread, and the
//! batch experiment comparing big-M tuning against the oracle.

use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_num;
use crate::lp::{solve_lp, LinearProgram, Relation};
use crate::milp::solve_milp_bnb;
use crate::model::{validate, BilevelSolution, LbpInstance, Sense, SolutionStatus};
use crate::oracle::{certify_with_oracle, solve_global_oracle, Certificate, OracleResult};
use crate::reform::{bigm_reformulate, kkt_reformulate, BigMConfig};
use crate::settings::Settings;
use crate::tuner::{estimate_bigm_local, tune_trial_and_error, TuneOutcome};

/// How the generator guarantees a feasible point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityMode {
    /// Raise right-hand sides until a sampled anchor `(x0, y0)` is feasible.
    Anchor,
    /// Draw every right-hand side from `[J, 2J]` so the origin is feasible.
    Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// Random upper rows on `x`, on top of the `2n` box rows `0 <= x <= x_box`.
    pub k: usize,
    pub j: usize,
    /// Matrix entries are drawn from `[-coef_range, coef_range]`.
    pub coef_range: f64,
    /// Lower row `j` is scaled by `10^(sigma * (2 v_j - 1))` with the `v_j`
    /// spread evenly over `[0, 1]` in random order, so factors range over
    /// `10^-sigma ..= 10^sigma`.
    pub sigma: f64,
    pub x_box: f64,
    pub feasibility: FeasibilityMode,
    pub retries: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 2,
            m: 2,
            k: 2,
            j: 4,
            coef_range: 1.0,
            sigma: 0.0,
            x_box: 10.0,
            feasibility: FeasibilityMode::Anchor,
            retries: 20,
        }
    }
}

impl GenConfig {
    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive");
        }
        if !(self.coef_range.is_finite() && self.coef_range > 0.0) {
            return bad("coef_range must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad("sigma must be non-negative");
        }
        if !(self.x_box.is_finite() && self.x_box > 0.0) {
            return bad("x_box must be positive");
        }
        if self.retries == 0 {
            return bad("retries must be at least 1");
        }
        Ok(())
    }
}

/// Instance 0 of the stream defined by `cfg.seed`.
pub fn generate_random(cfg: &GenConfig) -> Result<LbpInstance> {
    generate_indexed(cfg, 0)
}

/// Instance `index` of the stream defined by `cfg.seed`. Each index has its
/// own RNG stream, so instances do not depend on generation order.
///
/// The follower objective is `q = -S^T lambda0` for a random `lambda0 > 0`,
/// which keeps the follower bounded whenever it is feasible and `S` has full
/// column rank (generic when `J >= m`).
pub fn generate_indexed(cfg: &GenConfig, index: u64) -> Result<LbpInstance> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    for attempt in 0..cfg.retries {
        let inst = draw(cfg, index, &mut rng);
        if follower_solvable_somewhere(&inst)? {
            return Ok(inst);
        }
        debug!(
            "seed {} index {index}: attempt {attempt} rejected",
            cfg.seed
        );
    }
    Err(Error::GenerationRetries {
        retries: cfg.retries,
    })
}

fn draw(cfg: &GenConfig, index: u64, rng: &mut ChaCha8Rng) -> LbpInstance {
    let (n, m, j) = (cfg.n, cfg.m, cfg.j);
    let w = cfg.coef_range;
    let mut uni = |rng: &mut ChaCha8Rng| rng.gen_range(-w..=w);
    let vec_of = |len: usize, rng: &mut ChaCha8Rng, f: &mut dyn FnMut(&mut ChaCha8Rng) -> f64| {
        (0..len).map(|_| f(rng)).collect::<Vec<f64>>()
    };

    let a = vec_of(n, rng, &mut uni);
    let b = vec_of(m, rng, &mut uni);
    let p = vec_of(n, rng, &mut uni);
    let mut r: Vec<Vec<f64>> = (0..j).map(|_| vec_of(n, rng, &mut uni)).collect();
    let mut s: Vec<Vec<f64>> = (0..j).map(|_| vec_of(m, rng, &mut uni)).collect();
    let extra: Vec<Vec<f64>> = (0..cfg.k).map(|_| vec_of(n, rng, &mut uni)).collect();

    let lambda0: Vec<f64> = (0..j).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let mut q: Vec<f64> = (0..m)
        .map(|k| -(0..j).map(|jj| s[jj][k] * lambda0[jj]).sum::<f64>())
        .collect();
    let qmax = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if qmax > w {
        q.iter_mut().for_each(|v| *v *= w / qmax);
    }

    let (mut t, mut e_extra): (Vec<f64>, Vec<f64>) = match cfg.feasibility {
        FeasibilityMode::Origin => {
            let lo = j.max(1) as f64;
            (
                (0..j).map(|_| rng.gen_range(lo..=2.0 * lo)).collect(),
                (0..cfg.k).map(|_| rng.gen_range(lo..=2.0 * lo)).collect(),
            )
        }
        FeasibilityMode::Anchor => (vec_of(j, rng, &mut uni), vec_of(cfg.k, rng, &mut uni)),
    };
    if cfg.feasibility == FeasibilityMode::Anchor {
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=cfg.x_box)).collect();
        let y0: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(-cfg.x_box..=cfg.x_box))
            .collect();
        for jj in 0..j {
            let act = dot(&r[jj], &x0) + dot(&s[jj], &y0);
            t[jj] = t[jj].max(act);
        }
        for (i, row) in extra.iter().enumerate() {
            e_extra[i] = e_extra[i].max(dot(row, &x0));
        }
    }

    // Row scaling does not change the feasible set but divides the row's
    // multiplier by the same factor. The v_j are a shuffled grid over [0, 1]
    // with a little jitter, so any two rows differ by about
    // 2 sigma / (J - 1) decades or more.
    let mut grid: Vec<usize> = (0..j).collect();
    grid.shuffle(rng);
    for jj in 0..j {
        let jitter = rng.gen_range(-0.1..=0.1);
        let v = if j > 1 {
            grid[jj] as f64 / (j - 1) as f64
        } else {
            0.5
        };
        let v = (v + jitter / j as f64).clamp(0.0, 1.0);
        let f = 10f64.powf(cfg.sigma * (2.0 * v - 1.0));
        r[jj]
            .iter_mut()
            .chain(s[jj].iter_mut())
            .for_each(|c| *c *= f);
        t[jj] *= f;
    }

    let mut c = Vec::with_capacity(2 * n + cfg.k);
    let mut e = Vec::with_capacity(2 * n + cfg.k);
    for i in 0..n {
        let mut lo = vec![0.0; n];
        lo[i] = -1.0;
        let mut hi = vec![0.0; n];
        hi[i] = 1.0;
        c.push(lo);
        e.push(0.0);
        c.push(hi);
        e.push(cfg.x_box);
    }
    c.extend(extra);
    e.extend(e_extra);
    let kk = c.len();
    LbpInstance {
        name: format!("rand-s{}-i{index}", cfg.seed),
        upper_sense: Sense::Minimize,
        lower_sense: Sense::Minimize,
        n,
        m,
        a,
        b,
        c,
        d: vec![vec![0.0; m]; kk],
        e,
        p,
        q,
        r,
        s,
        t,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// True when the upper region is nonempty and the follower has an optimum at
/// some `x` in it.
fn follower_solvable_somewhere(inst: &LbpInstance) -> Result<bool> {
    if !validate(inst).usable() {
        return Ok(false);
    }
    // Find an x where the follower is feasible: the high-point problem with a
    // zero objective.
    let (n, m) = (inst.n, inst.m);
    let mut hp = LinearProgram::new(vec![0.0; n + m]);
    for i in 0..inst.k() {
        let mut row = inst.c[i].clone();
        row.extend(&inst.d[i]);
        hp.add_row(row, Relation::Le, inst.e[i]);
    }
    for jj in 0..inst.j() {
        let mut row = inst.r[jj].clone();
        row.extend(&inst.s[jj]);
        hp.add_row(row, Relation::Le, inst.t[jj]);
    }
    let opts = Settings::default().lp;
    let hp = solve_lp(&hp, &opts)?;
    if !hp.is_optimal() {
        return Ok(false);
    }
    let x = &hp.x[..n];
    let mut follower = LinearProgram::new(inst.q.clone());
    for jj in 0..inst.j() {
        follower.add_row(
            inst.s[jj].clone(),
            Relation::Le,
            inst.t[jj] - dot(&inst.r[jj], x),
        );
    }
    let _ = m;
    Ok(solve_lp(&follower, &opts)?.is_optimal())
}

/// Writes instances `0..count` as `<dir>/instance_<index>.json`, indices
/// zero-padded to a common width.
pub fn write_instances(dir: &Path, cfg: &GenConfig, count: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let width = count.saturating_sub(1).to_string().len().max(4);
    (0..count)
        .map(|i| {
            let inst = generate_indexed(cfg, i as u64)?;
            let path = dir.join(format!("instance_{i:0width$}.json"));
            inst.write_json(&path)?;
            Ok(path)
        })
        .collect()
}

/// Initial big-M constants and tuning parameters for a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPolicy {
    /// Broadcast to every lower row.
    pub mp0: f64,
    pub md0: f64,
    pub growth: f64,
    pub max_iter: usize,
    pub kappa: f64,
}

impl Default for BenchPolicy {
    fn default() -> Self {
        Self {
            mp0: 100.0,
            md0: 100.0,
            growth: crate::tuner::DEFAULT_GROWTH,
            max_iter: crate::tuner::DEFAULT_MAX_ITER,
            kappa: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub index: usize,
    pub name: String,
    pub oracle_z: f64,
    pub tuner_outcome: Option<TuneOutcome>,
    pub tuner_z: f64,
    pub tuner_iterations: usize,
    /// Verdict on the tuner's result; a tuner that stops without accepting
    /// is judged infeasible.
    pub certificate: Option<Certificate>,
    pub estimator_z: f64,
    pub estimator_certificate: Option<Certificate>,
    pub error: Option<String>,
}

impl BenchRecord {
    fn blank(index: usize, name: &str) -> Self {
        Self {
            index,
            name: name.to_string(),
            oracle_z: f64::NAN,
            tuner_outcome: None,
            tuner_z: f64::NAN,
            tuner_iterations: 0,
            certificate: None,
            estimator_z: f64::NAN,
            estimator_certificate: None,
            error: None,
        }
    }

    pub fn tuner_failed(&self) -> bool {
        self.certificate
            .as_ref()
            .is_some_and(Certificate::is_failure)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub records: Vec<BenchRecord>,
    /// Records with a tuner certificate.
    pub judged: usize,
    pub failures: usize,
    /// `failures / judged`; NaN when nothing was judged.
    pub failure_rate: f64,
    pub estimator_failures: usize,
    pub estimator_failure_rate: f64,
    pub errors: usize,
}

impl BenchResult {
    pub fn from_records(records: Vec<BenchRecord>) -> Self {
        let judged = records.iter().filter(|r| r.certificate.is_some()).count();
        let failures = records.iter().filter(|r| r.tuner_failed()).count();
        let est_judged = records
            .iter()
            .filter(|r| r.estimator_certificate.is_some())
            .count();
        let estimator_failures = records
            .iter()
            .filter(|r| {
                r.estimator_certificate
                    .as_ref()
                    .is_some_and(Certificate::is_failure)
            })
            .count();
        let rate = |num: usize, den: usize| {
            if den == 0 {
                f64::NAN
            } else {
                num as f64 / den as f64
            }
        };
        let errors = records.iter().filter(|r| r.error.is_some()).count();
        Self {
            judged,
            failures,
            failure_rate: rate(failures, judged),
            estimator_failures,
            estimator_failure_rate: rate(estimator_failures, est_judged),
            errors,
            records,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "name",
            "oracle_z",
            "tuner_outcome",
            "tuner_z",
            "tuner_iterations",
            "certificate",
            "gap",
            "estimator_z",
            "estimator_certificate",
            "error",
        ])?;
        let verdict = |c: &Option<Certificate>| match c {
            None => String::new(),
            Some(Certificate::Global) => "global".into(),
            Some(Certificate::Suboptimal { .. }) => "suboptimal".into(),
            Some(Certificate::Infeasible { .. }) => "infeasible".into(),
        };
        for r in &self.records {
            let gap = match &r.certificate {
                Some(Certificate::Suboptimal { gap }) => fmt_num(*gap),
                _ => String::new(),
            };
            let outcome = r
                .tuner_outcome
                .map(|o| {
                    serde_json::to_value(o)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default()
                })
                .unwrap_or_default();
            w.write_record([
                r.index.to_string(),
                r.name.clone(),
                num_cell(r.oracle_z),
                outcome,
                num_cell(r.tuner_z),
                r.tuner_iterations.to_string(),
                verdict(&r.certificate),
                gap,
                num_cell(r.estimator_z),
                verdict(&r.estimator_certificate),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn summary_text(&self) -> String {
        let rate = |r: f64| {
            if r.is_nan() {
                "n/a".to_string()
            } else {
                format!("{:.4}", r)
            }
        };
        format!(
            "instances: {}\njudged: {}\ntuner failures: {} (rate {})\nestimator failures: {} (rate {})\nerrors: {}\n",
            self.records.len(),
            self.judged,
            self.failures,
            rate(self.failure_rate),
            self.estimator_failures,
            rate(self.estimator_failure_rate),
            self.errors,
        )
    }
}

fn num_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt_num(v)
    }
}

/// Generates `count` instances from `gen` and benchmarks each one.
/// Per-instance failures are recorded and the run continues.
pub fn run_benchmark(
    gen: &GenConfig,
    count: usize,
    policy: &BenchPolicy,
    settings: &Settings,
) -> Result<BenchResult> {
    gen.check()?;
    let records = (0..count)
        .into_par_iter()
        .map(|i| match generate_indexed(gen, i as u64) {
            Ok(inst) => bench_instance(i, &inst, policy, settings),
            Err(err) => {
                let mut rec = BenchRecord::blank(i, &format!("rand-s{}-i{i}", gen.seed));
                rec.error = Some(format!("generation: {err}"));
                rec
            }
        })
        .collect();
    Ok(BenchResult::from_records(records))
}

/// Benchmarks a given list of instances.
pub fn run_benchmark_on(
    instances: &[LbpInstance],
    policy: &BenchPolicy,
    settings: &Settings,
) -> BenchResult {
    let records = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| bench_instance(i, inst, policy, settings))
        .collect();
    BenchResult::from_records(records)
}

fn bench_instance(
    index: usize,
    inst: &LbpInstance,
    policy: &BenchPolicy,
    settings: &Settings,
) -> BenchRecord {
    let mut rec = BenchRecord::blank(index, &inst.name);
    if let Err(err) = fill_record(&mut rec, inst, policy, settings) {
        warn!("{}: {err}", inst.name);
        rec.error = Some(err.to_string());
    }
    rec
}

fn fill_record(
    rec: &mut BenchRecord,
    inst: &LbpInstance,
    policy: &BenchPolicy,
    settings: &Settings,
) -> Result<()> {
    let oracle = solve_global_oracle(inst, settings)?;
    match oracle.solution.status {
        SolutionStatus::Optimal => rec.oracle_z = oracle.z(),
        other => return Err(Error::InvalidInstance(format!("oracle reports {other}"))),
    }

    let j = inst.j();
    let cfg0 = BigMConfig::uniform(j, policy.mp0, policy.md0)?;
    let tune = tune_trial_and_error(inst, &cfg0, policy.growth, policy.max_iter, false, settings)?;
    rec.tuner_outcome = Some(tune.outcome);
    rec.tuner_iterations = tune.iterations.len();
    rec.certificate = Some(match &tune.solution {
        Some(sol) => {
            rec.tuner_z = sol.z_upper;
            certify_with_oracle(inst, sol, &oracle, settings)?.certificate
        }
        None => Certificate::Infeasible {
            reason: format!("tuner stopped without accepting ({:?})", tune.outcome),
        },
    });

    let est = estimate_bigm_local(inst, policy.kappa, settings)?;
    let (z, cert) = milp_with_config(inst, &est.config, &oracle, settings)?;
    rec.estimator_z = z;
    rec.estimator_certificate = Some(cert);
    Ok(())
}

/// Solves the big-M MILP with `cfg` and certifies its point against `oracle`.
pub fn milp_with_config(
    inst: &LbpInstance,
    cfg: &BigMConfig,
    oracle: &OracleResult,
    settings: &Settings,
) -> Result<(f64, Certificate)> {
    let kkt = kkt_reformulate(inst)?;
    let sol = solve_milp_bnb(&bigm_reformulate(&kkt, cfg)?, settings)?;
    if !sol.is_optimal() {
        let reason = format!("big-M MILP is {:?}", sol.status);
        return Ok((f64::NAN, Certificate::Infeasible { reason }));
    }
    let cand = BilevelSolution::at(
        inst,
        sol.x,
        sol.y,
        sol.lambda,
        SolutionStatus::AcceptedUnverified,
    );
    let cert = certify_with_oracle(inst, &cand, oracle, settings)?;
    Ok((sol.z, cert.certificate))
}
