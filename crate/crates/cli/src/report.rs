//! The run report written by `solve` and `tune`, as JSON and as text.

use std::fmt::Write;

use lbp_core::fmt::fmt_num;
use lbp_core::milp::{MilpSolution, PatternTable};
use lbp_core::model::BilevelSolution;
use lbp_core::oracle::{Certification, OracleResult};
use lbp_core::reform::BigMConfig;
use lbp_core::tuner::TuneReport;
use serde::Serialize;

use crate::input::InstanceInfo;

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub instance: InstanceInfo,
    pub method: String,
    pub config: Option<BigMConfig>,
    pub solution: Option<BilevelSolution>,
    /// MILP result without its pattern table, which is reported separately.
    pub milp: Option<MilpSolution>,
    pub oracle: Option<OracleResult>,
    pub tune: Option<TuneReport>,
    pub certification: Option<Certification>,
    pub table: Option<PatternTable>,
    pub exit_code: u8,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(instance: InstanceInfo, method: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            instance,
            method: method.to_string(),
            config: None,
            solution: None,
            milp: None,
            oracle: None,
            tune: None,
            certification: None,
            table: None,
            exit_code: 0,
            timing: Timing { wall_ms: 0.0 },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self, width_tol: f64) -> String {
        let mut out = String::new();
        let i = &self.instance;
        writeln!(
            out,
            "instance     {} ({}, sha256 {})",
            i.name,
            i.source,
            &i.sha256[..16]
        )
        .unwrap();
        writeln!(out, "method       {}", self.method).unwrap();
        if let Some(cfg) = &self.config {
            writeln!(out, "MP           {}", join(&cfg.mp)).unwrap();
            writeln!(out, "MD           {}", join(&cfg.md)).unwrap();
        }
        if let Some(tune) = &self.tune {
            writeln!(out, "iterations   {}", tune.iterations.len()).unwrap();
            for it in &tune.iterations {
                let z = if it.status == lbp_core::milp::MilpStatus::Optimal {
                    fmt_num(it.z)
                } else {
                    format!("{:?}", it.status).to_lowercase()
                };
                let rows: Vec<String> = it
                    .rule
                    .indices()
                    .iter()
                    .map(|k| (k + 1).to_string())
                    .collect();
                let line = format!(
                    "  iter {:>3}  z={:<12} {:<9} {}",
                    it.iter,
                    z,
                    it.rule.label(),
                    if rows.is_empty() {
                        String::new()
                    } else {
                        format!("rows {}", rows.join(","))
                    }
                );
                writeln!(out, "{}", line.trim_end()).unwrap();
            }
            writeln!(
                out,
                "outcome      {}",
                snake(&format!("{:?}", tune.outcome))
            )
            .unwrap();
        }
        if let Some(table) = &self.table {
            out.push('\n');
            out.push_str(&table.to_text(width_tol));
            out.push('\n');
        }
        if let Some(sol) = &self.solution {
            writeln!(out, "status       {}", sol.status).unwrap();
            if !sol.x.is_empty() {
                writeln!(out, "z            {}", fmt_num(sol.z_upper)).unwrap();
                writeln!(out, "x            {}", join(&sol.x)).unwrap();
                writeln!(out, "y            {}", join(&sol.y)).unwrap();
                writeln!(out, "lambda       {}", join(&sol.lambda)).unwrap();
                writeln!(out, "lower z      {}", fmt_num(sol.z_lower)).unwrap();
            }
        }
        if let Some(milp) = &self.milp {
            if !milp.u.is_empty() {
                let u: Vec<String> = milp.u.iter().map(|&b| u8::from(b).to_string()).collect();
                writeln!(out, "u            {}", u.join(" ")).unwrap();
            }
            writeln!(out, "nodes        {}", milp.nodes).unwrap();
        }
        if let Some(oracle) = &self.oracle {
            if let Some(u) = &oracle.pattern {
                let u: Vec<String> = u.iter().map(|&b| u8::from(b).to_string()).collect();
                writeln!(out, "u            {}", u.join(" ")).unwrap();
            }
            if oracle.ties.len() > 1 {
                writeln!(out, "tied         {} patterns", oracle.ties.len()).unwrap();
            }
        }
        if let Some(cert) = &self.certification {
            writeln!(out, "certificate  {}", cert.certificate).unwrap();
            writeln!(out, "oracle z     {}", fmt_num(cert.oracle_z)).unwrap();
        }
        out
    }
}

pub fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

fn snake(camel: &str) -> String {
    let mut s = String::new();
    for (i, c) in camel.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            s.push('_');
        }
        s.push(c.to_ascii_lowercase());
    }
    s
}
