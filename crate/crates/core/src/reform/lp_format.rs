//! Export of a [`MilpProblem`] in the CPLEX LP text format, so external MILP
//! solvers can cross-check results.

use std::fmt::Write;

use super::MilpProblem;
use crate::fmt::fmt_num;
use crate::lp::Relation;
use crate::model::Sense;

fn var_names(milp: &MilpProblem) -> Vec<String> {
    let l = milp.kkt.layout;
    (0..l.n)
        .map(|i| format!("x{}", i + 1))
        .chain((0..l.m).map(|k| format!("y{}", k + 1)))
        .chain((0..l.j).map(|j| format!("lambda{}", j + 1)))
        .chain((0..milp.num_binary).map(|j| format!("u{}", j + 1)))
        .collect()
}

fn write_terms(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut first = true;
    for (c, name) in coeffs.iter().zip(names) {
        if *c == 0.0 {
            continue;
        }
        let sign = if *c < 0.0 { "-" } else { "+" };
        if first {
            if *c < 0.0 {
                out.push_str(" -");
            }
        } else {
            write!(out, " {sign}").unwrap();
        }
        write!(out, " {} {}", fmt_num(c.abs()), name).unwrap();
        first = false;
    }
    if first {
        write!(out, " 0 {}", names[0]).unwrap();
    }
}

/// Renders the MILP with the upper objective in its declared sense and all
/// coefficients at 15 significant digits.
pub fn write_lp_format(milp: &MilpProblem) -> String {
    let names = var_names(milp);
    let declared = milp.kkt.source.declared_upper;
    let mut out = String::new();
    writeln!(out, "\\ Problem name: {}", milp.kkt.instance().name).unwrap();
    writeln!(
        out,
        "\\ Big-M reformulation, MP = [{}], MD = [{}]",
        milp.config
            .mp
            .iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(", "),
        milp.config
            .md
            .iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(", ")
    )
    .unwrap();
    out.push('\n');
    out.push_str(match declared {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    let obj: Vec<f64> = milp
        .objective
        .iter()
        .map(|c| declared.sign() * c + 0.0)
        .collect();
    out.push_str(" obj:");
    write_terms(&mut out, &obj, &names);
    out.push('\n');

    out.push_str("Subject To\n");
    for row in &milp.rows {
        write!(out, " {}:", row.name).unwrap();
        write_terms(&mut out, &row.coeffs, &names);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        writeln!(out, " {rel} {}", fmt_num(row.rhs)).unwrap();
    }

    out.push_str("Bounds\n");
    for name in &names[..milp.num_continuous] {
        writeln!(out, " {name} free").unwrap();
    }
    for name in &names[milp.num_continuous..] {
        writeln!(out, " 0 <= {name} <= 1").unwrap();
    }
    if milp.num_binary > 0 {
        out.push_str("Binary\n");
        writeln!(out, " {}", names[milp.num_continuous..].join(" ")).unwrap();
    }
    out.push_str("End\n");
    out
}
