//! Rendering of pattern tables as CSV and as aligned text.

use std::io::Write;

use super::{DualMultiplicity, PatternRow, PatternTable};
use crate::error::Result;
use crate::fmt::fmt_num;
use crate::lp::LpStatus;

impl PatternRow {
    /// `optimal`, `multiple` (optimal with non-unique multipliers),
    /// `infeasible` or `unbounded`.
    pub fn status_label(&self) -> &'static str {
        match (self.status, self.multiplicity) {
            (LpStatus::Optimal, Some(DualMultiplicity::Multiple)) => "multiple",
            (LpStatus::Optimal, _) => "optimal",
            (LpStatus::Infeasible, _) => "infeasible",
            (LpStatus::Unbounded, _) => "unbounded",
        }
    }

    fn cells(&self, width_tol: f64) -> Vec<String> {
        let mut cells = vec![self.case.to_string()];
        cells.extend(self.u.iter().map(|&b| u8::from(b).to_string()));
        if self.status != LpStatus::Optimal {
            return cells;
        }
        cells.extend(self.x.iter().chain(&self.y).map(|v| fmt_num(*v)));
        for (v, range) in self.lambda.iter().zip(&self.lambda_ranges) {
            if range.is_multiple(width_tol) {
                cells.push("Multiple".into());
            } else {
                cells.push(fmt_num(*v));
            }
        }
        cells.push(fmt_num(self.z));
        cells
    }
}

impl PatternTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["case".to_string()];
        h.extend((1..=self.j).map(|k| format!("u{k}")));
        h.extend((1..=self.n).map(|k| format!("x{k}")));
        h.extend((1..=self.m).map(|k| format!("y{k}")));
        h.extend((1..=self.j).map(|k| format!("lambda{k}")));
        h.push("z".into());
        h.push("status".into());
        h
    }

    /// One CSV row per pattern; value cells are empty for infeasible or
    /// unbounded patterns, and `Multiple` for non-unique multipliers.
    pub fn write_csv<W: Write>(&self, out: W, width_tol: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = self.header();
        w.write_record(&header)?;
        for row in &self.rows {
            let mut cells = row.cells(width_tol);
            cells.resize(header.len() - 1, String::new());
            cells.push(row.status_label().into());
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, width_tol: f64) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, width_tol)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Fixed-width table in the layout `case | u | x | y | lambda | z`.
    pub fn to_text(&self, width_tol: f64) -> String {
        let mut header = self.header();
        header.pop();
        let lines: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = r.cells(width_tol);
                if r.status != LpStatus::Optimal {
                    let label = if r.status == LpStatus::Infeasible {
                        "Infeasible"
                    } else {
                        "Unbounded"
                    };
                    cells.push(label.into());
                    cells.resize(header.len(), String::new());
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                lines
                    .iter()
                    .map(|l| l[c].len())
                    .chain(std::iter::once(header[c].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = render(&header);
        out.push('\n');
        for l in &lines {
            out.push_str(&render(l));
            out.push('\n');
        }
        out
    }
}
