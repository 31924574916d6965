use log::debug;

use super::{MilpSolution, MilpStatus};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpSolution, LpStatus};
use crate::reform::MilpProblem;
use crate::settings::Settings;

struct Incumbent {
    objective: f64,
    point: Vec<f64>,
    pattern: Vec<bool>,
}

struct Search<'a> {
    milp: &'a MilpProblem,
    settings: &'a Settings,
    nodes: usize,
    incumbent: Option<Incumbent>,
    trace: Vec<f64>,
    best_pruned: f64,
    unbounded: bool,
}

/// Branch-and-bound over the binaries of `milp`.
///
/// Branches on the most fractional binary (lowest index on ties), evaluates
/// both children and dives into the one with the better bound first, the
/// `u = 0` child on ties. Integral relaxations are re-solved with the
/// binaries fixed so the reported point satisfies the big-M rows exactly.
pub fn solve_milp_bnb(milp: &MilpProblem, settings: &Settings) -> Result<MilpSolution> {
    let j = milp.num_binary;
    let mut search = Search {
        milp,
        settings,
        nodes: 0,
        incumbent: None,
        trace: Vec::new(),
        best_pruned: f64::INFINITY,
        unbounded: false,
    };
    let lo = vec![0.0; j];
    let hi = vec![1.0; j];
    let root = search.solve_node(&lo, &hi)?;
    search.explore(lo, hi, root)?;

    if search.unbounded {
        return Ok(MilpSolution::empty(MilpStatus::Unbounded, search.nodes));
    }
    let Some(inc) = search.incumbent else {
        return Ok(MilpSolution::empty(MilpStatus::Infeasible, search.nodes));
    };
    let layout = milp.kkt.layout;
    let (x, y, lambda) = layout.split(&inc.point);
    Ok(MilpSolution {
        status: MilpStatus::Optimal,
        x: x.to_vec(),
        y: y.to_vec(),
        lambda: lambda.to_vec(),
        u: inc.pattern,
        objective: inc.objective,
        z: milp.kkt.source.upper_to_declared(inc.objective),
        nodes: search.nodes,
        best_bound: search.best_pruned.min(inc.objective),
        incumbent_trace: search.trace,
        table: None,
    })
}

impl Search<'_> {
    fn solve_node(&mut self, lo: &[f64], hi: &[f64]) -> Result<LpSolution> {
        self.nodes += 1;
        if self.nodes > self.settings.node_limit {
            return Err(Error::NodeLimit {
                limit: self.settings.node_limit,
            });
        }
        solve_lp(&self.milp.relaxation(lo, hi), &self.settings.lp)
    }

    fn prune_tol(&self, z: f64) -> f64 {
        1e-9 * (1.0 + z.abs())
    }

    fn dominated(&mut self, bound: f64) -> bool {
        match &self.incumbent {
            Some(inc) if bound >= inc.objective - self.prune_tol(inc.objective) => {
                self.best_pruned = self.best_pruned.min(bound);
                true
            }
            _ => false,
        }
    }

    fn explore(&mut self, lo: Vec<f64>, hi: Vec<f64>, sol: LpSolution) -> Result<()> {
        if self.unbounded {
            return Ok(());
        }
        let nc = self.milp.num_continuous;
        let free: Vec<usize> = (0..self.milp.num_binary)
            .filter(|&k| lo[k] < hi[k])
            .collect();
        let branch_var = match sol.status {
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Unbounded => {
                // The ray lives in the continuous variables, so any integral
                // completion below this node is unbounded too, if one exists.
                match free.first() {
                    None => {
                        self.unbounded = true;
                        return Ok(());
                    }
                    Some(&k) => k,
                }
            }
            LpStatus::Optimal => {
                if self.dominated(sol.objective) {
                    return Ok(());
                }
                let tol = self.settings.int_tol;
                let mut best: Option<(usize, f64)> = None;
                for &k in &free {
                    let v = sol.x[nc + k];
                    let frac = (v - v.round()).abs();
                    if frac > tol && best.is_none_or(|(_, f)| frac > f) {
                        best = Some((k, frac));
                    }
                }
                match best {
                    Some((k, _)) => k,
                    None => {
                        let pattern: Vec<bool> = (0..self.milp.num_binary)
                            .map(|k| sol.x[nc + k] > 0.5)
                            .collect();
                        match self.accept_integral(&pattern)? {
                            true => return Ok(()),
                            // Rounded pattern turned out infeasible; keep branching.
                            false => match free.first() {
                                Some(&k) => k,
                                None => return Ok(()),
                            },
                        }
                    }
                }
            }
        };

        let mut children = Vec::with_capacity(2);
        for val in [0.0, 1.0] {
            let (mut clo, mut chi) = (lo.clone(), hi.clone());
            clo[branch_var] = val;
            chi[branch_var] = val;
            let s = self.solve_node(&clo, &chi)?;
            children.push((clo, chi, s));
        }
        if children[1].2.objective < children[0].2.objective {
            children.swap(0, 1);
        }
        for (clo, chi, s) in children {
            self.explore(clo, chi, s)?;
        }
        Ok(())
    }

    /// Re-solves with binaries fixed to `pattern`; returns false if that LP is
    /// infeasible.
    fn accept_integral(&mut self, pattern: &[bool]) -> Result<bool> {
        let sol = solve_lp(&self.milp.fixed(pattern), &self.settings.lp)?;
        match sol.status {
            LpStatus::Infeasible => Ok(false),
            LpStatus::Unbounded => {
                self.unbounded = true;
                Ok(true)
            }
            LpStatus::Optimal => {
                if !self.dominated(sol.objective) {
                    debug!("incumbent {:e} at pattern {:?}", sol.objective, pattern);
                    self.trace.push(sol.objective);
                    let nc = self.milp.num_continuous;
                    self.incumbent = Some(Incumbent {
                        objective: sol.objective,
                        point: sol.x[..nc].to_vec(),
                        pattern: pattern.to_vec(),
                    });
                }
                Ok(true)
            }
        }
    }
}
