//! Command-line surface of the `binmix` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{dispersion_roots, DispersionSetup};
use crate::energy::BulkEnergy;
use crate::error::{Error, Result};
use crate::io_cli::config::{InitConfig, RunConfig};
use crate::io_cli::nondim::{nondimensionalize, CharacteristicScales, PhysicalParams};
use crate::io_cli::output::num;
use crate::io_cli::refine::{refinement_study, RefinementAxis};
use crate::io_cli::run::run;

#[derive(Debug, Parser)]
#[command(name = "binmix", version, about = "Binary compressible fluid mixture simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// output directory, overriding the config
        #[arg(long)]
        out: Option<PathBuf>,
        /// freeze the velocity at zero
        #[arg(long)]
        no_hydro: bool,
        /// apply the config's [full_scale] overrides
        #[arg(long)]
        full_scale: bool,
    },
    /// Convergence study; prints a CSV table.
    Refine {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: RefinementAxis,
        /// time steps (time) or cell counts along x (space)
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        levels: Vec<f64>,
    },
    /// Linear growth rates around the config's base state; prints a CSV table.
    Dispersion {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kmin: f64,
        #[arg(long)]
        kmax: f64,
        #[arg(long)]
        samples: usize,
    },
    /// Converts physical parameters to dimensionless ones; prints TOML.
    Nondim {
        #[arg(long)]
        scales: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Tangent-plane-subtracted Peng-Robinson energy on a molar density box; prints CSV.
    Eqcontour {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: usize,
    },
}

impl clap::ValueEnum for RefinementAxis {
    fn value_variants<'a>() -> &'a [Self] {
        &[RefinementAxis::Time, RefinementAxis::Space]
    }
    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            RefinementAxis::Time => "time",
            RefinementAxis::Space => "space",
        }))
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Base densities of a uniform-plus-perturbation preset.
fn base_state(cfg: &RunConfig) -> Result<[f64; 2]> {
    match &cfg.init {
        InitConfig::Accuracy { base, .. } | InitConfig::FhPerturb { base, .. } => Ok(*base),
        _ => Err(Error::Config("dispersion needs an accuracy or fh-perturb initial state".into())),
    }
}

pub fn dispersion_table(cfg: &RunConfig, kmin: f64, kmax: f64, samples: usize) -> Result<String> {
    if !(kmin >= 0.0 && kmax > kmin && kmax.is_finite()) || samples < 2 {
        return Err(Error::Config("need 0 <= kmin < kmax and at least 2 samples".into()));
    }
    let params = cfg.model_params()?;
    let setup = DispersionSetup::from_params(&params, base_state(cfg)?)?;
    let mut s = String::from("k,max_real,factor,re1,im1,re2,im2,re3,im3\n");
    for i in 0..samples {
        let k = kmin + (kmax - kmin) * i as f64 / (samples - 1) as f64;
        let r = dispersion_roots(&setup, k)?;
        let _ = write!(s, "{},{},{}", num(k), num(r.max_real()), num(r.factor));
        for z in r.cubic {
            let _ = write!(s, ",{},{}", num(z.re), num(z.im));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn eqcontour_table(cfg: &RunConfig, n: usize) -> Result<String> {
    use crate::io_cli::config::EnergyConfig;
    if n < 2 {
        return Err(Error::Config("eqcontour grid needs at least 2 points".into()));
    }
    let params = cfg.model_params()?;
    let BulkEnergy::PengRobinson(pr) = params.energy.bulk else {
        return Err(Error::Config("eqcontour needs a peng-robinson energy".into()));
    };
    let b = match &cfg.energy {
        EnergyConfig::PengRobinson { shift_box: Some(b), .. } => *b,
        _ => [[0.0, 4.2], [0.0, 7.5]],
    };
    let (liquid, gas) = match &cfg.init {
        InitConfig::PrDroplet { liquid, gas, .. } => (*liquid, *gas),
        _ => ([3.8146, 3.5132], [0.0265, 7.1339]),
    };
    let (_, gas) = pr.coexistence(liquid, gas)?;
    let mu0 = pr.mu_molar(gas)?;
    let mut s = String::from("n1,n2,h_m\n");
    for j in 0..n {
        let n2 = b[1][0] + (b[1][1] - b[1][0]) * (j as f64 + 0.5) / n as f64;
        for i in 0..n {
            let n1 = b[0][0] + (b[0][1] - b[0][0]) * (i as f64 + 0.5) / n as f64;
            let h = pr.modified_h([n1, n2], mu0).unwrap_or(f64::NAN);
            let _ = writeln!(s, "{},{},{}", num(n1), num(n2), num(h));
        }
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, no_hydro, full_scale } => {
            let mut cfg = RunConfig::load(&config)?;
            if full_scale {
                cfg = cfg.full_scale();
            }
            if no_hydro {
                cfg.model.hydro = false;
            }
            let s = run(&cfg, out.as_deref())?;
            println!(
                "steps={} t={} energy {} -> {} median_iterations={} preconditioner_builds={} out={}",
                s.steps,
                s.time,
                s.energy[0],
                s.energy[1],
                s.median_iterations,
                s.preconditioner_builds,
                s.out_dir.display()
            );
        }
        Command::Refine { config, axis, levels } => {
            let cfg = RunConfig::load(&config)?;
            print!("{}", refinement_study(&cfg, axis, &levels)?.to_csv());
        }
        Command::Dispersion { config, kmin, kmax, samples } => {
            let cfg = RunConfig::load(&config)?;
            print!("{}", dispersion_table(&cfg, kmin, kmax, samples)?);
        }
        Command::Nondim { scales, params } => {
            let s: CharacteristicScales = read_toml(&scales)?;
            let p: PhysicalParams = read_toml(&params)?;
            let d = nondimensionalize(&s, &p)?;
            print!("{}", toml::to_string(&d).map_err(|e| Error::Config(e.to_string()))?);
        }
        Command::Eqcontour { config, grid } => {
            let cfg = RunConfig::load(&config)?;
            print!("{}", eqcontour_table(&cfg, grid)?);
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("binmix: {e}");
            e.exit_code()
        }
    }
}
