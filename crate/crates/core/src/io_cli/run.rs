//! The time-stepping driver and the `run` command.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{self, Dissipation, EnergyParts};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io_cli::config::{RunConfig, SnapshotFormat};
use crate::io_cli::output::{self, num, FailureRecord, Table, DIAGNOSTICS_HEADER, DISSIPATION_HEADER};
use crate::io_cli::presets::make_initial;
use crate::scheme::{ModelParams, PreconditionerKind, State, Stepper};
use crate::solver::GmresConfig;

/// Everything recorded about one completed step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyParts,
    pub masses: [f64; 2],
    pub iterations: usize,
    pub residual: f64,
    pub dissipation: Dissipation,
    /// `E^{n+1} - E^n + dt * (shear + volumetric + mixing)`
    pub identity_residual: f64,
}

/// A running simulation: the two most recent states and the stepper.
pub struct Simulation {
    stepper: Stepper,
    now: State,
    prev: State,
    energy: EnergyParts,
    /// time and step of the initial state; times are `t0 + steps * dt`
    origin: (f64, usize),
}

impl Simulation {
    pub fn new(
        grid: Grid,
        params: ModelParams,
        dt: f64,
        gmres: GmresConfig,
        preconditioner: PreconditionerKind,
        initial: State,
    ) -> Result<Self> {
        let mut initial = initial;
        if !params.hydro {
            initial.u = grid.zeros(crate::grid::Location::EdgeEw);
            initial.v = grid.zeros(crate::grid::Location::EdgeNs);
        }
        let energy = analysis::discrete_energy(&grid, &initial, &params)?;
        let stepper = Stepper::new(grid, params, dt, gmres, preconditioner)?;
        let origin = (initial.t, initial.step);
        Ok(Simulation { stepper, prev: initial.clone(), now: initial, energy, origin })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let params = cfg.model_params()?;
        let initial = make_initial(&cfg.init, &grid, &params.energy)?;
        Simulation::new(grid, params, cfg.time.dt, cfg.solver.gmres(), cfg.solver.preconditioner, initial)
    }

    pub fn grid(&self) -> &Grid {
        &self.stepper.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.stepper.params
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    pub fn state(&self) -> &State {
        &self.now
    }

    pub fn energy(&self) -> EnergyParts {
        self.energy
    }

    pub fn preconditioner_builds(&self) -> usize {
        self.stepper.preconditioner_builds()
    }

    /// Advances one step. The first step uses the initial state for both
    /// extrapolation levels. On error the current state is left unchanged.
    pub fn step(&mut self) -> Result<StepRecord> {
        let mut out = self.stepper.step(&self.now, &self.prev)?;
        out.state.t = self.origin.0 + (out.state.step - self.origin.1) as f64 * self.stepper.dt;
        let grid = self.stepper.grid;
        let params = &self.stepper.params;
        let energy = analysis::discrete_energy(&grid, &out.state, params)?;
        let dissipation = analysis::dissipation(&grid, params, &out.coeffs, &out.half)?;
        let masses = analysis::masses(&grid, &out.state)?;
        let identity_residual = energy.total() - self.energy.total() + self.stepper.dt * dissipation.total();
        let rec = StepRecord {
            step: out.state.step,
            time: out.state.t,
            energy,
            masses,
            iterations: out.solve.iterations,
            residual: out.solve.residual,
            dissipation,
            identity_residual,
        };
        self.prev = std::mem::replace(&mut self.now, out.state);
        self.energy = energy;
        Ok(rec)
    }
}

/// Summary of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub time: f64,
    pub energy: [f64; 2],
    pub masses: [[f64; 2]; 2],
    pub median_iterations: usize,
    pub preconditioner_builds: usize,
    pub out_dir: PathBuf,
}

/// Exclusive ownership of an output directory for the life of the value.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".binmix.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Io {
                path,
                source: std::io::Error::new(e.kind(), "output directory is locked by another run"),
            }),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_snapshot(out: &Path, grid: &Grid, s: &State, format: SnapshotFormat) -> Result<()> {
    let stem = format!("step_{:07}", s.step);
    let snaps = out.join("snapshots");
    if format != SnapshotFormat::None {
        fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
    }
    if matches!(format, SnapshotFormat::Csv | SnapshotFormat::Both) {
        output::write_state_csv(&snaps.join(&stem), grid, s)?;
    }
    if matches!(format, SnapshotFormat::Vtk | SnapshotFormat::Both) {
        output::write_vtk(&snaps.join(format!("{stem}.vtk")), grid, s)?;
    }
    Ok(())
}

/// Runs a configuration to completion, writing into `out` (or the configured
/// directory). Writes `config.toml`, `diagnostics.csv`, `dissipation.csv` and
/// snapshots; on a solver or positivity abort also `checkpoint/` and `failure.toml`.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let _lock = DirLock::acquire(&out_dir)?;
    let cfg_path = out_dir.join("config.toml");
    fs::write(&cfg_path, cfg.to_text()?).map_err(|e| Error::io(&cfg_path, e))?;

    let mut sim = Simulation::from_config(cfg)?;
    let grid = *sim.grid();
    let fmt = cfg.output.format;
    let every = cfg.output.snapshot_interval;
    let mut diag = Table::create(&out_dir.join("diagnostics.csv"), &DIAGNOSTICS_HEADER)?;
    let mut diss = Table::create(&out_dir.join("dissipation.csv"), &DISSIPATION_HEADER)?;
    let e0 = sim.energy();
    let m0 = analysis::masses(&grid, sim.state())?;
    diss.row(&[
        sim.state().step.to_string(),
        num(sim.state().t),
        num(e0.kinetic),
        num(e0.bulk),
        num(e0.gradient),
        num(0.0),
        num(0.0),
        num(0.0),
        num(0.0),
    ])?;
    write_snapshot(&out_dir, &grid, sim.state(), fmt)?;

    let steps = cfg.steps();
    let mut iterations = Vec::with_capacity(steps);
    for _ in 0..steps {
        let rec = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                let ck = out_dir.join("checkpoint");
                output::write_state_csv(&ck, &grid, sim.state())?;
                FailureRecord::new(&e, sim.state(), "checkpoint").write(&out_dir.join("failure.toml"))?;
                return Err(e);
            }
        };
        iterations.push(rec.iterations);
        diag.row(&[
            rec.step.to_string(),
            num(rec.time),
            num(rec.energy.total()),
            num(rec.masses[0]),
            num(rec.masses[1]),
            rec.iterations.to_string(),
            num(rec.residual),
        ])?;
        let d = rec.dissipation;
        diss.row(&[
            rec.step.to_string(),
            num(rec.time),
            num(rec.energy.kinetic),
            num(rec.energy.bulk),
            num(rec.energy.gradient),
            num(d.shear),
            num(d.volumetric),
            num(d.mixing),
            num(rec.identity_residual),
        ])?;
        if rec.step % every == 0 || rec.step == steps {
            write_snapshot(&out_dir, &grid, sim.state(), fmt)?;
        }
    }
    iterations.sort_unstable();
    let s = sim.state();
    Ok(RunSummary {
        steps,
        time: s.t,
        energy: [e0.total(), sim.energy().total()],
        masses: [m0, analysis::masses(&grid, s)?],
        median_iterations: iterations.get(iterations.len() / 2).copied().unwrap_or(0),
        preconditioner_builds: sim.preconditioner_builds(),
        out_dir,
    })
}
