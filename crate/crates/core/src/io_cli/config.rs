//! Run configuration: a sectioned `key = value` text file (TOML grammar).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{BulkEnergy, Component, EnergyModel, PengRobinson};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scheme::{Extrapolation, ModelParams, PreconditionerKind};
use crate::solver::GmresConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// reserved; no preset draws random numbers
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub energy: EnergyConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<FullScale>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    /// end time; the step count is `round(t_end / dt)`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaUnits {
    /// coefficients of mass-density gradients
    Mass,
    /// coefficients of molar-density gradients, converted with the molar masses
    Molar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mobility: f64,
    /// shear Reynolds numbers of the two components
    pub re_s: [f64; 2],
    /// volumetric Reynolds numbers
    pub re_v: [f64; 2],
    /// `[k11, k12, k22]`
    pub kappa: [f64; 3],
    #[serde(default = "default_kappa_units")]
    pub kappa_units: KappaUnits,
    #[serde(default = "yes")]
    pub hydro: bool,
    #[serde(default = "default_floor")]
    pub rho_floor: f64,
    #[serde(default = "default_extrapolation")]
    pub extrapolation: Extrapolation,
}

fn default_kappa_units() -> KappaUnits {
    KappaUnits::Mass
}
fn yes() -> bool {
    true
}
fn default_floor() -> f64 {
    1e-10
}
fn default_extrapolation() -> Extrapolation {
    Extrapolation::SecondOrder
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnergyConfig {
    DoubleWell {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
    },
    FloryHuggins {
        kbt_over_m: f64,
        n1: f64,
        n2: f64,
        chi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
        /// mass-density box `[[lo1, hi1], [lo2, hi2]]` sampled for the automatic shift
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift_box: Option<[[f64; 2]; 2]>,
    },
    PengRobinson {
        r_gas: f64,
        temperature: f64,
        components: [Component; 2],
        #[serde(default)]
        k12: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
        /// molar-density box `[[lo1, hi1], [lo2, hi2]]` sampled for the automatic shift
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift_box: Option<[[f64; 2]; 2]>,
    },
}

fn default_eps() -> f64 {
    1e-6
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisName {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitConfig {
    /// `rho_{1,2} = base_{1,2} +- amplitude cos(k pi s)` along one axis, at rest
    Accuracy {
        #[serde(default = "half_half")]
        base: [f64; 2],
        #[serde(default = "acc_amp")]
        amplitude: f64,
        #[serde(default = "acc_k")]
        k_over_pi: f64,
        #[serde(default = "axis_x")]
        axis: AxisName,
    },
    FhPerturb {
        #[serde(default = "half_half")]
        base: [f64; 2],
        #[serde(default = "fh_amp")]
        amplitude: f64,
        #[serde(default = "fh_k")]
        k_over_pi: f64,
        #[serde(default = "axis_y")]
        axis: AxisName,
    },
    /// star-shaped liquid droplet `r <= r1 + r2 cos(lobes * theta)` in gas;
    /// densities are molar
    PrDroplet {
        #[serde(default = "one")]
        r1: f64,
        #[serde(default = "pt2")]
        r2: f64,
        #[serde(default = "eight")]
        lobes: f64,
        #[serde(default = "pr_liquid")]
        liquid: [f64; 2],
        #[serde(default = "pr_gas")]
        gas: [f64; 2],
    },
    /// CSV snapshots `rho1.csv`, `rho2.csv` and optionally `u.csv`, `v.csv`
    FromFile { path: PathBuf },
}

fn half_half() -> [f64; 2] {
    [0.5, 0.5]
}
fn acc_amp() -> f64 {
    0.01
}
fn acc_k() -> f64 {
    2.0
}
fn fh_amp() -> f64 {
    0.005
}
fn fh_k() -> f64 {
    10.0
}
fn axis_x() -> AxisName {
    AxisName::X
}
fn axis_y() -> AxisName {
    AxisName::Y
}
fn one() -> f64 {
    1.0
}
fn pt2() -> f64 {
    0.2
}
fn eight() -> f64 {
    8.0
}
fn pr_liquid() -> [f64; 2] {
    [3.8146, 3.5132]
}
fn pr_gas() -> [f64; 2] {
    [0.0265, 7.1339]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub restart: usize,
    pub max_iter: usize,
    pub rtol: f64,
    pub atol: f64,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GmresConfig::default();
        SolverConfig {
            restart: g.restart,
            max_iter: g.max_iter,
            rtol: g.rtol,
            atol: g.atol,
            preconditioner: PreconditionerKind::Frozen,
        }
    }
}

impl SolverConfig {
    pub fn gmres(&self) -> GmresConfig {
        GmresConfig { restart: self.restart, max_iter: self.max_iter, rtol: self.rtol, atol: self.atol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Vtk,
    Both,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_interval: usize,
    pub format: SnapshotFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), snapshot_interval: 100, format: SnapshotFormat::Csv }
    }
}

/// Overrides applied by `--full-scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullScale {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative input paths are taken relative to the config file
        if let InitConfig::FromFile { path: p } = &mut cfg.init {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.time.t_end.is_some() == self.time.steps.is_some() {
            return cfg_err("[time] needs exactly one of t_end and steps".into());
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return cfg_err(format!("[time] dt must be positive, got {}", self.time.dt));
        }
        if let Some(t) = self.time.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return cfg_err(format!("[time] t_end must be positive, got {t}"));
            }
        }
        if self.time.steps == Some(0) {
            return cfg_err("[time] steps must be at least 1".into());
        }
        if self.output.snapshot_interval == 0 {
            return cfg_err("[output] snapshot_interval must be at least 1".into());
        }
        if self.model.re_s.iter().chain(&self.model.re_v).any(|r| !(*r > 0.0)) {
            return cfg_err("[model] Reynolds numbers must be positive".into());
        }
        self.grid()?;
        self.model_params()?;
        self.solver.gmres().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny, g.lx, g.ly).map(|gr| gr.with_origin(g.x0, g.y0)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn steps(&self) -> usize {
        match (self.time.steps, self.time.t_end) {
            (Some(n), _) => n,
            (None, Some(t)) => ((t / self.time.dt).round() as usize).max(1),
            (None, None) => 1,
        }
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        let wrap = |e: Error| Error::Config(format!("[energy] {e}"));
        match &self.energy {
            EnergyConfig::DoubleWell { shift } => EnergyModel::new(BulkEnergy::DoubleWell, shift.unwrap_or(1.0)),
            EnergyConfig::FloryHuggins { kbt_over_m, n1, n2, chi, shift, shift_box } => {
                let bulk = BulkEnergy::FloryHuggins { kbt_over_m: *kbt_over_m, n1: *n1, n2: *n2, chi: *chi };
                match (shift, shift_box) {
                    (Some(a), _) => EnergyModel::new(bulk, *a),
                    (None, b) => {
                        let b = b.unwrap_or([[0.01, 1.0], [0.01, 1.0]]);
                        EnergyModel::with_auto_shift(bulk, [b[0][0], b[1][0]], [b[0][1], b[1][1]])
                    }
                }
            }
            EnergyConfig::PengRobinson { r_gas, temperature, components, k12, eps, shift, shift_box } => {
                let pr = PengRobinson {
                    r_gas: *r_gas,
                    temperature: *temperature,
                    components: *components,
                    k12: *k12,
                    eps: *eps,
                };
                let bulk = BulkEnergy::PengRobinson(pr);
                match (shift, shift_box) {
                    (Some(a), _) => EnergyModel::new(bulk, *a),
                    (None, b) => {
                        let b = b.unwrap_or([[0.0, 4.2], [0.0, 7.5]]);
                        let m = [components[0].molar_mass, components[1].molar_mass];
                        EnergyModel::with_auto_shift(
                            bulk,
                            [b[0][0] * m[0], b[1][0] * m[1]],
                            [b[0][1] * m[0], b[1][1] * m[1]],
                        )
                    }
                }
            }
        }
        .map_err(wrap)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let energy = self.energy_model()?;
        let m = &self.model;
        let kappa = match m.kappa_units {
            KappaUnits::Mass => m.kappa,
            KappaUnits::Molar => crate::energy::kappa_molar_to_mass(m.kappa, energy.molar_masses()),
        };
        let p = ModelParams {
            mobility: m.mobility,
            inv_re_s: [1.0 / m.re_s[0], 1.0 / m.re_s[1]],
            inv_re_v: [1.0 / m.re_v[0], 1.0 / m.re_v[1]],
            kappa,
            energy,
            hydro: m.hydro,
            rho_floor: m.rho_floor,
            extrapolation: m.extrapolation,
        };
        p.validate().map_err(|e| Error::Config(format!("[model] {e}")))?;
        Ok(p)
    }

    /// Applies the `[full_scale]` overrides, if any.
    pub fn full_scale(mut self) -> Self {
        if let Some(fs) = self.full_scale.clone() {
            if let Some(n) = fs.nx {
                self.grid.nx = n;
            }
            if let Some(n) = fs.ny {
                self.grid.ny = n;
            }
            if let Some(dt) = fs.dt {
                self.time.dt = dt;
            }
            if let Some(t) = fs.t_end {
                self.time.t_end = Some(t);
                self.time.steps = None;
            }
        }
        self
    }
}
