//! File formats: CSV snapshots, legacy VTK, diagnostics tables and failure records.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Location};
use crate::scheme::State;

/// Index ranges written for a location: cells without ghosts, edges including
/// the wall edges, all vertices.
fn written(grid: &Grid, loc: Location) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
    match loc {
        Location::Cell => (1..=grid.nx, 1..=grid.ny),
        Location::EdgeEw => (0..=grid.nx, 1..=grid.ny),
        Location::EdgeNs => (1..=grid.nx, 0..=grid.ny),
        Location::Vertex => (0..=grid.nx, 0..=grid.ny),
    }
}

/// Full-precision scientific notation; re-parses to the same double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_text(grid: &Grid, name: &str, f: &Field, t: f64) -> String {
    let (ir, jr) = written(grid, f.loc());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# field={name} Nx={} Ny={} hx={} hy={} t={}",
        ir.clone().count(),
        jr.clone().count(),
        num(grid.hx()),
        num(grid.hy()),
        num(t)
    );
    for j in jr {
        let row: Vec<String> = ir.clone().map(|i| num(f.get(i, j))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, grid: &Grid, name: &str, f: &Field, t: f64) -> Result<()> {
    fs::write(path, csv_text(grid, name, f, t)).map_err(|e| Error::io(path, e))
}

/// Reads a CSV snapshot back into a field of the given location; returns the
/// field (ghosts zero) and the time stamp.
pub fn read_csv(path: &Path, grid: &Grid, loc: Location) -> Result<(Field, f64)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, grid, loc).map_err(|msg| Error::Format { path: path.to_path_buf(), msg })
}

fn parse_csv(text: &str, grid: &Grid, loc: Location) -> std::result::Result<(Field, f64), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let header = header.strip_prefix('#').ok_or("missing header line")?;
    let mut t = None;
    let mut dims = (None, None);
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad header entry {kv:?}"))?;
        match k {
            "t" => t = Some(v.parse::<f64>().map_err(|e| format!("bad time {v:?}: {e}"))?),
            "Nx" => dims.0 = v.parse::<usize>().ok(),
            "Ny" => dims.1 = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (ir, jr) = written(grid, loc);
    let want = (ir.clone().count(), jr.clone().count());
    if dims != (Some(want.0), Some(want.1)) {
        return Err(format!("header dimensions {dims:?} do not match {want:?}"));
    }
    let mut f = grid.zeros(loc);
    let mut rows = 0;
    for (j, line) in jr.clone().zip(lines.by_ref()) {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != want.0 {
            return Err(format!("row {rows} has {} values, expected {}", vals.len(), want.0));
        }
        for (i, v) in ir.clone().zip(vals) {
            f.set(i, j, v.trim().parse::<f64>().map_err(|e| format!("bad value {v:?}: {e}"))?);
        }
        rows += 1;
    }
    if rows != want.1 || lines.any(|l| !l.trim().is_empty()) {
        return Err(format!("expected {} rows", want.1));
    }
    Ok((f, t.ok_or("header has no time")?))
}

/// Legacy structured-points VTK text with cell data: the cell fields and the
/// velocity averaged to cell centres.
pub fn vtk_text(grid: &Grid, s: &State) -> String {
    let mut out = String::new();
    let n = grid.nx * grid.ny;
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "binmix t={}", num(s.t));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", grid.nx + 1, grid.ny + 1);
    let _ = writeln!(out, "ORIGIN {} {} 0", num(grid.x0), num(grid.y0));
    let _ = writeln!(out, "SPACING {} {} 1", num(grid.hx()), num(grid.hy()));
    let _ = writeln!(out, "CELL_DATA {n}");
    for (name, f) in [("rho1", &s.rho1), ("rho2", &s.rho2), ("q", &s.q)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for j in 1..=grid.ny {
            for i in 1..=grid.nx {
                let _ = writeln!(out, "{}", num(f.get(i, j)));
            }
        }
    }
    let uc = grid.avg_x(&s.u);
    let vc = grid.avg_y(&s.v);
    let _ = writeln!(out, "VECTORS velocity double");
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let _ = writeln!(out, "{} {} 0", num(uc.get(i, j)), num(vc.get(i, j)));
        }
    }
    out
}

pub fn snapshot_fields(s: &State) -> [(&'static str, &Field); 5] {
    [("rho1", &s.rho1), ("rho2", &s.rho2), ("u", &s.u), ("v", &s.v), ("q", &s.q)]
}

/// Writes every field of a state as CSV into `dir`.
pub fn write_state_csv(dir: &Path, grid: &Grid, s: &State) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, f) in snapshot_fields(s) {
        write_csv(&dir.join(format!("{name}.csv")), grid, name, f, s.t)?;
    }
    Ok(())
}

pub fn write_vtk(path: &Path, grid: &Grid, s: &State) -> Result<()> {
    fs::write(path, vtk_text(grid, s)).map_err(|e| Error::io(path, e))
}

/// Per-step table writer that flushes on every row so a crash leaves a valid prefix.
pub struct Table {
    path: PathBuf,
    w: BufWriter<fs::File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut t = Table { path: path.to_path_buf(), w: BufWriter::new(file) };
        t.line(&header.join(","))?;
        Ok(t)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").and_then(|_| self.w.flush()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        self.line(&cells.join(","))
    }
}

pub const DIAGNOSTICS_HEADER: [&str; 7] = ["step", "time", "energy", "mass1", "mass2", "iterations", "residual"];

pub const DISSIPATION_HEADER: [&str; 9] =
    ["step", "time", "kinetic", "bulk", "gradient", "shear", "volumetric", "mixing", "identity_residual"];

/// Parses a numeric CSV table with one header line.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().ok_or_else(|| fmt("empty table".into()))?.split(',').map(str::to_owned).collect();
    let mut rows = Vec::new();
    for l in lines.filter(|l| !l.trim().is_empty()) {
        let row = l
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| fmt(format!("bad value {v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(fmt(format!("row has {} values, header has {}", row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Machine-readable record of an aborted run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub kind: String,
    pub exit_code: i32,
    /// last completed step
    pub step: usize,
    pub time: f64,
    pub message: String,
    pub checkpoint: String,
}

impl FailureRecord {
    pub fn new(err: &Error, last: &State, checkpoint: &str) -> Self {
        let kind = match err {
            Error::Positivity { .. } | Error::Domain(_) => "positivity",
            Error::NonConvergence { .. } | Error::Factorisation(_) => "non-convergence",
            Error::Io { .. } | Error::Format { .. } => "io",
            _ => "config",
        };
        FailureRecord {
            kind: kind.into(),
            exit_code: err.exit_code(),
            step: last.step,
            time: last.t,
            message: err.to_string(),
            checkpoint: checkpoint.into(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_two_by_two_body() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let f = g.constant(Location::Cell, 1.0);
        let text = csv_text(&g, "rho1", &f, 0.0);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# field=rho1 Nx=2 Ny=2 "));
        assert_eq!(lines.next(), Some("1.0000000000000000e0,1.0000000000000000e0"));
        assert_eq!(lines.next(), Some("1.0000000000000000e0,1.0000000000000000e0"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let g = Grid::new(5, 3, 1.0, 2.0).unwrap();
        for loc in [Location::Cell, Location::EdgeEw, Location::EdgeNs, Location::Vertex] {
            let f = g.sample(loc, |x, y| (x * 7.3).sin() / 3.0 + y.exp() * 1e-17);
            let text = csv_text(&g, "f", &f, 0.1 + 0.2);
            let (back, t) = parse_csv(&text, &g, loc).unwrap();
            assert_eq!(t, 0.1 + 0.2);
            let (ir, jr) = written(&g, loc);
            for j in jr {
                for i in ir.clone() {
                    assert_eq!(back.get(i, j).to_bits(), f.get(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn wrong_dimensions_are_a_format_error() {
        let g = Grid::new(4, 4, 1.0, 1.0).unwrap();
        let f = g.constant(Location::Cell, 1.0);
        let text = csv_text(&g, "f", &f, 0.0);
        let g2 = Grid::new(5, 4, 1.0, 1.0).unwrap();
        assert!(parse_csv(&text, &g2, Location::Cell).is_err());
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(parse_csv(&truncated, &g, Location::Cell).is_err());
    }
}
