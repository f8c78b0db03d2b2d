//! Convergence studies under time-step or grid refinement.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io_cli::config::RunConfig;
use crate::io_cli::output::num;
use crate::io_cli::run::Simulation;
use crate::scheme::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementAxis {
    Time,
    Space,
}

impl std::str::FromStr for RefinementAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(RefinementAxis::Time),
            "space" => Ok(RefinementAxis::Space),
            _ => Err(Error::Config(format!("refinement axis must be time or space, got {s:?}"))),
        }
    }
}

/// Consecutive-level difference norms and observed orders.
///
/// `diffs[v][i]` is the discrete L2 norm of the difference between levels `i`
/// and `i + 1` for variable `v`; `orders[v][i]` compares `diffs[v][i]` with
/// `diffs[v][i + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementTable {
    pub axis: RefinementAxis,
    pub levels: Vec<f64>,
    pub variables: Vec<&'static str>,
    pub diffs: Vec<Vec<f64>>,
    pub orders: Vec<Vec<f64>>,
}

impl RefinementTable {
    pub fn order(&self, var: &str) -> Option<&[f64]> {
        self.variables.iter().position(|v| *v == var).map(|k| self.orders[k].as_slice())
    }

    /// One row per consecutive pair: `level_coarse, level_fine`, then a
    /// difference and an order column per variable (order blank on the first row).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coarse,fine");
        for v in &self.variables {
            let _ = write!(s, ",diff_{v},order_{v}");
        }
        s.push('\n');
        for i in 0..self.levels.len() - 1 {
            let _ = write!(s, "{},{}", self.levels[i], self.levels[i + 1]);
            for k in 0..self.variables.len() {
                let p = if i == 0 { String::new() } else { format!("{:.4}", self.orders[k][i - 1]) };
                let _ = write!(s, ",{},{p}", num(self.diffs[k][i]));
            }
            s.push('\n');
        }
        s
    }
}

fn horizon(cfg: &RunConfig) -> f64 {
    cfg.time.t_end.unwrap_or(cfg.time.dt * cfg.steps() as f64)
}

fn final_state(cfg: &RunConfig) -> Result<(Grid, State)> {
    let mut sim = Simulation::from_config(cfg)?;
    for _ in 0..cfg.steps() {
        sim.step()?;
    }
    Ok((*sim.grid(), sim.state().clone()))
}

fn variables(s: &State, hydro: bool) -> Vec<(&'static str, Field)> {
    let mut v = vec![("rho1", s.rho1.clone()), ("rho2", s.rho2.clone())];
    if hydro {
        v.push(("u", s.u.clone()));
        v.push(("v", s.v.clone()));
    }
    v
}

/// Runs the configuration once per level and compares consecutive levels.
///
/// Time levels are time steps, strictly decreasing, run to the configured
/// horizon on the configured grid. Space levels are cell counts along x, each
/// twice the previous; `ny` scales with `nx` and the fine solution is
/// restricted onto the coarse grid by cell or face averaging.
pub fn refinement_study(cfg: &RunConfig, axis: RefinementAxis, levels: &[f64]) -> Result<RefinementTable> {
    cfg.validate()?;
    if levels.len() < 3 {
        return Err(Error::Config(format!("refinement needs at least 3 levels, got {}", levels.len())));
    }
    let t_end = horizon(cfg);
    let mut runs: Vec<(Grid, State)> = Vec::with_capacity(levels.len());
    for (i, &lv) in levels.iter().enumerate() {
        let mut c = cfg.clone();
        match axis {
            RefinementAxis::Time => {
                if !(lv > 0.0) || (i > 0 && lv >= levels[i - 1]) {
                    return Err(Error::Config("time levels must be positive and strictly decreasing".into()));
                }
                let steps = (t_end / lv).round();
                if ((steps * lv - t_end) / t_end).abs() > 1e-9 {
                    return Err(Error::Config(format!("time step {lv} does not divide the horizon {t_end}")));
                }
                c.time.dt = lv;
                c.time.t_end = None;
                c.time.steps = Some(steps as usize);
            }
            RefinementAxis::Space => {
                if lv.fract() != 0.0 || lv < 2.0 || (i > 0 && lv != 2.0 * levels[i - 1]) {
                    return Err(Error::Config("space levels must be integers, each twice the previous".into()));
                }
                let nx = lv as usize;
                let ny = nx * cfg.grid.ny;
                if !ny.is_multiple_of(cfg.grid.nx) {
                    return Err(Error::Config(format!("nx = {nx} does not keep the aspect ratio of the grid")));
                }
                c.grid.nx = nx;
                c.grid.ny = ny / cfg.grid.nx;
            }
        }
        runs.push(final_state(&c)?);
    }
    let hydro = cfg.model.hydro;
    let mut names: Vec<&'static str> = variables(&runs[0].1, hydro).into_iter().map(|(n, _)| n).collect();
    let mut diffs = vec![Vec::new(); names.len()];
    for pair in runs.windows(2) {
        let (gc, sc) = &pair[0];
        let (gf, sf) = &pair[1];
        let coarse = variables(sc, hydro);
        let fine = variables(sf, hydro);
        for (k, ((_, a), (_, b))) in coarse.iter().zip(&fine).enumerate() {
            let b = match axis {
                RefinementAxis::Time => b.clone(),
                RefinementAxis::Space => gc.restrict_from(gf, b)?,
            };
            diffs[k].push(gc.norm(&a.sub(&b))?);
        }
    }
    if hydro {
        // the velocity vector, measured as one variable
        let combined = diffs[2].iter().zip(&diffs[3]).map(|(u, v)| u.hypot(*v)).collect();
        diffs.push(combined);
        names.push("velocity");
    }
    let ratio = |i: usize| match axis {
        RefinementAxis::Time => levels[i] / levels[i + 1],
        RefinementAxis::Space => levels[i + 1] / levels[i],
    };
    let orders = diffs.iter().map(|d| (1..d.len()).map(|i| (d[i - 1] / d[i]).ln() / ratio(i).ln()).collect()).collect();
    Ok(RefinementTable { axis, levels: levels.to_vec(), variables: names, diffs, orders })
}
