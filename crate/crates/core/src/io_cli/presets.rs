//! Initial conditions.

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{Grid, Location};
use crate::io_cli::config::{AxisName, InitConfig};
use crate::io_cli::output;
use crate::scheme::State;

/// Builds the time-zero state of a preset. Densities are sampled at cell
/// centres, velocities start at rest unless read from file.
pub fn make_initial(init: &InitConfig, grid: &Grid, energy: &EnergyModel) -> Result<State> {
    let cell = Location::Cell;
    let (rho1, rho2) = match init {
        InitConfig::Accuracy { base, amplitude, k_over_pi, axis }
        | InitConfig::FhPerturb { base, amplitude, k_over_pi, axis } => {
            let k = k_over_pi * std::f64::consts::PI;
            let wave = |x: f64, y: f64| match axis {
                AxisName::X => (k * x).cos(),
                AxisName::Y => (k * y).cos(),
            };
            (
                grid.sample(cell, |x, y| base[0] + amplitude * wave(x, y)),
                grid.sample(cell, |x, y| base[1] - amplitude * wave(x, y)),
            )
        }
        InitConfig::PrDroplet { r1, r2, lobes, liquid, gas } => {
            let liquid = energy.to_mass(*liquid);
            let gas = energy.to_mass(*gas);
            let inside = |x: f64, y: f64| {
                let r = r1 + r2 * (lobes * x.atan2(y)).cos();
                x * x + y * y <= r * r
            };
            let pick = |c: usize| move |x: f64, y: f64| if inside(x, y) { liquid[c] } else { gas[c] };
            (grid.sample(cell, pick(0)), grid.sample(cell, pick(1)))
        }
        InitConfig::FromFile { path } => return from_dir(path, grid, energy),
    };
    admissible(grid, &rho1, &rho2, energy)?;
    State::at_rest(grid, rho1, rho2, energy)
}

fn admissible(grid: &Grid, rho1: &crate::grid::Field, rho2: &crate::grid::Field, energy: &EnergyModel) -> Result<()> {
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let r = [rho1.get(i, j), rho2.get(i, j)];
            if !(r[0] >= 0.0 && r[1] >= 0.0 && r[0] + r[1] > 0.0) {
                return Err(Error::Config(format!("initial densities {r:?} at cell ({i}, {j}) are inadmissible")));
            }
            energy.eq_vars(r).map_err(|e| Error::Config(format!("initial densities {r:?} at cell ({i}, {j}): {e}")))?;
        }
    }
    Ok(())
}

fn from_dir(dir: &std::path::Path, grid: &Grid, energy: &EnergyModel) -> Result<State> {
    let load = |name: &str, loc: Location| -> Result<crate::grid::Field> {
        let (f, _) = output::read_csv(&dir.join(format!("{name}.csv")), grid, loc)?;
        Ok(f)
    };
    let rho1 = load("rho1", Location::Cell)?;
    let rho2 = load("rho2", Location::Cell)?;
    admissible(grid, &rho1, &rho2, energy)?;
    let u_path = dir.join("u.csv");
    let (u, v) = if u_path.exists() {
        (load("u", Location::EdgeEw)?, load("v", Location::EdgeNs)?)
    } else {
        (grid.zeros(Location::EdgeEw), grid.zeros(Location::EdgeNs))
    };
    State::new(grid, rho1, rho2, u, v, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{BulkEnergy, Component, PengRobinson};

    fn dw() -> EnergyModel {
        EnergyModel::new(BulkEnergy::DoubleWell, 1.0).unwrap()
    }

    #[test]
    fn accuracy_preset_near_left_wall() {
        let g = Grid::new(64, 8, 1.0, 1.0).unwrap();
        let init = InitConfig::Accuracy { base: [0.5, 0.5], amplitude: 0.01, k_over_pi: 2.0, axis: AxisName::X };
        let s = make_initial(&init, &g, &dw()).unwrap();
        let x = g.x_of(Location::Cell, 1);
        let expect = 0.5 + 0.01 * (2.0 * std::f64::consts::PI * x).cos();
        assert_eq!(s.rho1.get(1, 3), expect);
        assert!((s.rho1.get(1, 3) - 0.51).abs() < 1e-4);
        assert!((s.rho2.get(1, 3) - 0.49).abs() < 1e-4);
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.v.max_abs(), 0.0);
    }

    #[test]
    fn fh_perturbation_keeps_total_density() {
        let g = Grid::new(16, 32, 1.0, 1.0).unwrap();
        let energy =
            EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 1.0, chi: 2.5 }, 2.0).unwrap();
        let init = InitConfig::FhPerturb { base: [0.5, 0.5], amplitude: 0.005, k_over_pi: 10.0, axis: AxisName::Y };
        let s = make_initial(&init, &g, &energy).unwrap();
        for j in 1..=g.ny {
            for i in 1..=g.nx {
                assert!((s.rho1.get(i, j) + s.rho2.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn droplet_interior_is_liquid() {
        let pr = PengRobinson {
            r_gas: 1.4566,
            temperature: 1.2088,
            components: [
                Component { tc: 2.2626, pc: 1.3495, omega: 0.4884, molar_mass: 8.8688 },
                Component { tc: 0.6980, pc: 2.9513, omega: 0.01142, molar_mass: 1.0 },
            ],
            k12: 0.0,
            eps: 1e-6,
        };
        let energy = EnergyModel::new(BulkEnergy::PengRobinson(pr), 50.0).unwrap();
        let g = Grid::new(32, 32, 4.0, 4.0).unwrap().with_origin(-2.0, -2.0);
        let init =
            InitConfig::PrDroplet { r1: 1.0, r2: 0.2, lobes: 8.0, liquid: [3.8146, 3.5132], gas: [0.0265, 7.1339] };
        let s = make_initial(&init, &g, &energy).unwrap();
        let centre = energy.to_molar([s.rho1.get(16, 16), s.rho2.get(16, 16)]);
        assert!((centre[0] - 3.8146).abs() < 1e-12);
        let corner = energy.to_molar([s.rho1.get(1, 1), s.rho2.get(1, 1)]);
        assert!((corner[1] - 7.1339).abs() < 1e-12);
    }

    #[test]
    fn negative_density_is_rejected() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let init = InitConfig::Accuracy { base: [0.005, 0.5], amplitude: 0.01, k_over_pi: 2.0, axis: AxisName::X };
        assert!(matches!(make_initial(&init, &g, &dw()), Err(Error::Config(_))));
    }
}
