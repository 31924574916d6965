//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.
//! Exits non-zero if any criterion fails.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use lbp_core::genlab::{
    generate_indexed, milp_with_config, run_benchmark, run_benchmark_on, BenchPolicy, GenConfig,
};
use lbp_core::lp::{dual_range, solve_lp, LinearProgram, LpStatus, Relation};
use lbp_core::milp::{
    enumerate_patterns, solve_milp_bnb, DualMultiplicity, MilpSolution, PatternRow,
};
use lbp_core::model::catalog::{builtin_counterexample, counterexample_family};
use lbp_core::model::SolutionStatus;
use lbp_core::oracle::{solve_global_oracle, Certificate};
use lbp_core::reform::{bigm_reformulate, kkt_reformulate, BigMConfig};
use lbp_core::tuner::{estimate_bigm_local, tune_trial_and_error, TuneOutcome};
use lbp_core::{Result, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    /// Every reported number, printed exactly, for the determinism check.
    fingerprint: String,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6
}

fn milp_for(mp: f64, md: f64) -> Result<lbp_core::reform::MilpProblem> {
    let kkt = kkt_reformulate(&builtin_counterexample())?;
    bigm_reformulate(&kkt, &BigMConfig::uniform(2, mp, md)?)
}

fn row(sol: &MilpSolution, u: [bool; 2]) -> &PatternRow {
    let table = sol.table.as_ref().expect("enumeration keeps its table");
    table
        .rows
        .iter()
        .find(|r| r.u == u)
        .expect("every pattern has a row")
}

fn fp_row(fp: &mut String, r: &PatternRow) {
    let _ = write!(
        fp,
        "{:?}{:?}{:?}{:?}{:?}{:?};",
        r.u, r.status, r.x, r.y, r.lambda, r.lambda_ranges
    );
}

fn c1() -> Result<Outcome> {
    let t = Instant::now();
    let res = solve_global_oracle(&builtin_counterexample(), &Settings::default())?;
    let elapsed = t.elapsed();
    let s = &res.solution;
    let pass = s.status == SolutionStatus::Optimal
        && close(s.z_upper, 102.0)
        && close(s.x[0], 2.0)
        && close(s.y[0], 100.0)
        && close(s.lambda[0], 0.0)
        && close(s.lambda[1], 100.0)
        && elapsed < Duration::from_secs(1);
    Ok(Outcome {
        pass,
        detail: format!(
            "z={} x={:?} y={:?} lambda={:?} in {elapsed:.2?}",
            s.z_upper, s.x, s.y, s.lambda
        ),
        fingerprint: format!("{:?}{:?}{:?}{:?}", s.z_upper, s.x, s.y, s.lambda),
    })
}

fn c2() -> Result<Outcome> {
    let sol = enumerate_patterns(&milp_for(200.0, 200.0)?, &Settings::default())?;
    // Table cases by u: 1 = (0,1), 2 = (1,1), 3 = (1,0), 4 = (0,0).
    let (r1, r2, r3, r4) = (
        row(&sol, [false, true]),
        row(&sol, [true, true]),
        row(&sol, [true, false]),
        row(&sol, [false, false]),
    );
    let pass = r1.status == LpStatus::Optimal
        && close(r1.z, 102.0)
        && r2.status == LpStatus::Optimal
        && close(r2.z, 1.0)
        && r2.multiplicity == Some(DualMultiplicity::Multiple)
        && r3.status == LpStatus::Optimal
        && close(r3.z, 1.0)
        && r3.multiplicity == Some(DualMultiplicity::Singleton)
        && close(r3.lambda[0], 1.0)
        && close(r3.lambda[1], 0.0)
        && r4.status == LpStatus::Infeasible;
    let mut fp = String::new();
    for r in [r1, r2, r3, r4] {
        fp_row(&mut fp, r);
    }
    Ok(Outcome {
        pass,
        detail: format!(
            "case1 z={} | case2 z={} {:?} | case3 z={} lambda={:?} | case4 {:?}",
            r1.z, r2.z, r2.multiplicity, r3.z, r3.lambda, r4.status
        ),
        fingerprint: fp,
    })
}

fn c3() -> Result<Outcome> {
    let milp = milp_for(200.0, 50.0)?;
    let st = Settings::default();
    let sol = enumerate_patterns(&milp, &st)?;
    let bnb = solve_milp_bnb(&milp, &st)?;
    let (r1, r2, r3, r4) = (
        row(&sol, [false, true]),
        row(&sol, [true, true]),
        row(&sol, [true, false]),
        row(&sol, [false, false]),
    );
    let pass = r1.status == LpStatus::Infeasible
        && r4.status == LpStatus::Infeasible
        && close(r2.z, 1.0)
        && close(r3.z, 1.0)
        && bnb.is_optimal()
        && close(bnb.z, 1.0);
    let mut fp = String::new();
    for r in [r1, r2, r3, r4] {
        fp_row(&mut fp, r);
    }
    let _ = write!(fp, "{:?}{:?}{:?}", bnb.z, bnb.u, bnb.nodes);
    Ok(Outcome {
        pass,
        detail: format!(
            "case1 {:?} | case2 z={} | case3 z={} | case4 {:?} | B&B z={} u={:?}",
            r1.status, r2.z, r3.z, r4.status, bnb.z, bnb.u
        ),
        fingerprint: fp,
    })
}

fn tune_counterexample(md: f64) -> Result<lbp_core::tuner::TuneReport> {
    let cfg = BigMConfig::new(vec![200.0, 200.0], vec![md, md])?;
    tune_trial_and_error(
        &builtin_counterexample(),
        &cfg,
        10.0,
        50,
        true,
        &Settings::default(),
    )
}

fn c4() -> Result<Outcome> {
    let rep = tune_counterexample(50.0)?;
    let cert = rep.certification.as_ref().map(|c| c.certificate.clone());
    let gap = match cert {
        Some(Certificate::Suboptimal { gap }) => gap,
        _ => f64::NAN,
    };
    let pass = rep.outcome == TuneOutcome::Accepted
        && rep.iterations.len() == 1
        && close(rep.iterations[0].z, 1.0)
        && close(gap, 101.0);
    Ok(Outcome {
        pass,
        detail: format!(
            "{:?} after {} iteration(s), z={}, certificate {:?}",
            rep.outcome,
            rep.iterations.len(),
            rep.iterations[0].z,
            cert
        ),
        fingerprint: rep.trace_csv_string()? + &format!("{gap:?}"),
    })
}

fn c5() -> Result<Outcome> {
    let rep = tune_counterexample(200.0)?;
    let sol = rep.solution.as_ref();
    let z = sol.map_or(f64::NAN, |s| s.z_upper);
    let global = rep
        .certification
        .as_ref()
        .is_some_and(|c| c.certificate.is_global());
    Ok(Outcome {
        pass: rep.outcome == TuneOutcome::Accepted && close(z, 102.0) && global,
        detail: format!("{:?}, z={z}, global={global}", rep.outcome),
        fingerprint: rep.trace_csv_string()?,
    })
}

fn c6() -> Result<Outcome> {
    let inst = builtin_counterexample();
    let st = Settings::default();
    let est = estimate_bigm_local(&inst, 10.0, &st)?;
    let kkt = kkt_reformulate(&inst)?;
    let sol = solve_milp_bnb(&bigm_reformulate(&kkt, &est.config)?, &st)?;
    Ok(Outcome {
        pass: est.config.md[1] >= 100.0 && sol.is_optimal() && close(sol.z, 102.0),
        detail: format!(
            "MP={:?} MD={:?}, B&B z={}",
            est.config.mp, est.config.md, sol.z
        ),
        fingerprint: format!("{:?}{:?}{:?}", est.config, sol.z, sol.u),
    })
}

fn c7() -> Result<Outcome> {
    let t = Instant::now();
    let st = Settings::default();
    let (mut total, mut matched) = (0usize, 0usize);
    let mut fp = String::new();
    let mut misses = Vec::new();
    for i in 0..240u64 {
        let n = 1 + (i % 4) as usize;
        let m = 1 + ((i / 4) % 4) as usize;
        let j = m + (i / 16) as usize % (7 - m);
        let sigma = if i % 2 == 0 { 0.0 } else { 2.0 };
        let gen = GenConfig {
            seed: 7_000 + i,
            n,
            m,
            j,
            sigma,
            ..GenConfig::default()
        };
        let inst = generate_indexed(&gen, 0)?;
        let oracle = solve_global_oracle(&inst, &st)?;
        total += 1;
        if oracle.solution.status != SolutionStatus::Optimal {
            misses.push(format!("#{i}: oracle {}", oracle.solution.status));
            continue;
        }
        let (z, _) = milp_with_config(&inst, &oracle.bigm_seed(10.0)?, &oracle, &st)?;
        let _ = write!(fp, "{:?}/{:?};", oracle.z(), z);
        if (z - oracle.z()).abs() <= 1e-6 * (1.0 + oracle.z().abs()) {
            matched += 1;
        } else {
            misses.push(format!("#{i}: milp {z} vs oracle {}", oracle.z()));
        }
    }
    let elapsed = t.elapsed();
    Ok(Outcome {
        pass: total >= 200 && matched == total && elapsed < Duration::from_secs(60),
        detail: format!(
            "{matched}/{total} matched in {elapsed:.2?} {}",
            misses.join(", ")
        ),
        fingerprint: fp,
    })
}

fn c8() -> Result<Outcome> {
    let st = Settings::default();
    let naive = BenchPolicy::default();
    let family: Vec<_> = [0.01, 0.001]
        .iter()
        .map(|&e| counterexample_family(e))
        .collect();
    let fam = run_benchmark_on(&family, &naive, &st);
    let mut member_lines = Vec::new();
    let mut all_fail = true;
    for r in &fam.records {
        let accepted_suboptimal = r.tuner_outcome == Some(TuneOutcome::Accepted)
            && matches!(r.certificate, Some(Certificate::Suboptimal { .. }));
        all_fail &= accepted_suboptimal;
        let verdict = r
            .certificate
            .as_ref()
            .map_or("none".to_string(), |c| c.to_string());
        member_lines.push(format!(
            "{}: accepted z={} after {} iteration(s), oracle z={}, {verdict}",
            r.name, r.tuner_z, r.tuner_iterations, r.oracle_z
        ));
    }
    let gen = GenConfig {
        seed: 1,
        sigma: 2.0,
        ..GenConfig::default()
    };
    let bench = run_benchmark(&gen, 100, &naive, &st)?;
    let accepted_suboptimal = bench
        .records
        .iter()
        .filter(|r| {
            r.tuner_outcome == Some(TuneOutcome::Accepted)
                && matches!(r.certificate, Some(Certificate::Suboptimal { .. }))
        })
        .count();
    Ok(Outcome {
        pass: all_fail && bench.failure_rate > 0.0,
        detail: format!(
            "family [{}] | random sigma=2: failure rate {} ({} accepted-but-suboptimal of {})",
            member_lines.join("; "),
            bench.failure_rate,
            accepted_suboptimal,
            bench.records.len()
        ),
        fingerprint: fam.to_csv_string()? + &bench.to_csv_string()?,
    })
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=6);
    let coeff = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            f64::from(rng.gen_range(-4i32..=4))
        } else {
            rng.gen_range(-5.0..5.0)
        }
    };
    let mut lp = LinearProgram::new((0..n).map(|_| coeff(rng)).collect());
    for _ in 0..m {
        let row = (0..n).map(|_| coeff(rng)).collect();
        let rel = match rng.gen_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = coeff(rng);
        lp.add_row(row, rel, rhs);
    }
    for j in 0..n {
        let (lo, hi) = match rng.gen_range(0..4) {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, f64::INFINITY),
            2 => (0.0, rng.gen_range(0.5..5.0)),
            _ => (-rng.gen_range(0.0..3.0), rng.gen_range(0.5..5.0)),
        };
        lp.set_bounds(j, lo, hi);
    }
    lp
}

fn c9() -> Result<Outcome> {
    let opts = Settings::default().lp;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut optimal, mut kkt_ok, mut scaled, mut scaled_ok) = (0, 0, 0, 0);
    let mut fp = String::new();
    for _ in 0..600 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, &opts)?;
        let _ = write!(fp, "{:?}{:?};", sol.status, sol.objective);
        if sol.status != LpStatus::Optimal {
            continue;
        }
        optimal += 1;
        let res = sol.residuals(&lp);
        if res.gap() <= 1e-6 * (1.0 + sol.objective.abs()) && res.complementarity <= 1e-6 {
            kkt_ok += 1;
        }
        let row = rng.gen_range(0..lp.num_rows());
        let alpha = rng.gen_range(0.1..10.0);
        if dual_range(&lp, &sol, row, &opts)?.is_multiple(1e-6) {
            continue;
        }
        let mut other = lp.clone();
        other.rows[row].iter_mut().for_each(|c| *c *= alpha);
        other.rhs[row] *= alpha;
        let s2 = solve_lp(&other, &opts)?;
        scaled += 1;
        if s2.is_optimal()
            && (s2.duals[row] * alpha - sol.duals[row]).abs() <= 1e-6 * (1.0 + sol.duals[row].abs())
        {
            scaled_ok += 1;
        }
    }
    Ok(Outcome {
        pass: optimal > 0 && kkt_ok == optimal && scaled_ok == scaled,
        detail: format!(
            "600 LPs, {optimal} optimal, {kkt_ok} within gap/complementarity tolerance, \
             dual scaling {scaled_ok}/{scaled} non-degenerate rows"
        ),
        fingerprint: fp,
    })
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 9] = [
    ("counterexample global optimum", c1),
    ("pattern table at MP = MD = 200", c2),
    ("pattern table at MP = 200, MD = 50", c3),
    ("trial-and-error accepts a suboptimal point", c4),
    ("trial-and-error success path", c5),
    ("local estimator remedy", c6),
    ("oracle-seeded MILP matches oracle", c7),
    ("naive big-M failures exist", c8),
    ("LP strong duality and scaling", c9),
];

fn run_all() -> Vec<(bool, String, String)> {
    CRITERIA
        .iter()
        .map(|(_, f)| match f() {
            Ok(o) => (o.pass, o.detail, o.fingerprint),
            Err(e) => (false, format!("error: {e}"), String::new()),
        })
        .collect()
}

fn main() {
    let first = run_all();
    let second = run_all();
    let mut failed = 0;
    for (k, ((name, _), (pass, detail, _))) in CRITERIA.iter().zip(&first).enumerate() {
        println!(
            "criterion {:>2} {} {name}: {detail}",
            k + 1,
            if *pass { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!pass);
    }
    let diverged: Vec<usize> = (0..first.len())
        .filter(|&k| first[k].2 != second[k].2)
        .map(|k| k + 1)
        .collect();
    let det = diverged.is_empty();
    println!(
        "criterion 10 {} determinism: {}",
        if det { "PASS" } else { "FAIL" },
        if det {
            "all numbers bit-identical across two runs".to_string()
        } else {
            format!("criteria {diverged:?} differ")
        }
    );
    failed += usize::from(!det);
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
