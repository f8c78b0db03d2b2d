//! Diagnostics: discrete energy and its dissipation, masses, the linear
//! dispersion relation, growth-rate fitting and droplet shape measures.

use nalgebra::{Complex, Matrix3};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Location};
use crate::scheme::{Coeffs, HalfStep, ModelParams, State};

pub fn masses(grid: &Grid, s: &State) -> Result<[f64; 2]> {
    Ok([grid.integral(&s.rho1)?, grid.integral(&s.rho2)?])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts {
    /// `[u, u]/2 + [v, v]/2`
    pub kinetic: f64,
    /// `(q, q) - (A, 1)`
    pub bulk: f64,
    /// gradient (entropic) part
    pub gradient: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.bulk + self.gradient
    }
}

/// Discrete total energy of a state, split into its parts.
pub fn discrete_energy(grid: &Grid, s: &State, params: &ModelParams) -> Result<EnergyParts> {
    let g = grid;
    let kinetic = 0.5 * (g.inner(&s.u, &s.u)? + g.inner(&s.v, &s.v)?);
    let bulk = g.inner(&s.q, &s.q)? - params.energy.shift * g.lx * g.ly;
    let [k11, k12, k22] = params.kappa;
    let gradient = 0.5 * k11 * g.grad_inner(&s.rho1, &s.rho1)?
        + 0.5 * k22 * g.grad_inner(&s.rho2, &s.rho2)?
        + k12 * g.grad_inner(&s.rho1, &s.rho2)?;
    Ok(EnergyParts { kinetic, bulk, gradient })
}

/// The three non-negative dissipation rates of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dissipation {
    pub shear: f64,
    pub volumetric: f64,
    pub mixing: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.shear + self.volumetric + self.mixing
    }
}

/// Dissipation rates evaluated at the half step; `E^{n+1} - E^n = -dt * total`
/// holds up to the linear-solver residual.
pub fn dissipation(grid: &Grid, params: &ModelParams, coeffs: &Coeffs, half: &HalfStep) -> Result<Dissipation> {
    let g = grid;
    let dmu = half.mu1.sub(&half.mu2);
    let mixing = params.mobility * g.grad_inner(&dmu, &dmu)?;
    if !params.hydro {
        return Ok(Dissipation { shear: 0.0, volumetric: 0.0, mixing });
    }
    let uu = g.avg_x(&coeffs.w).mul(&half.u);
    let vv = g.avg_y(&coeffs.w).mul(&half.v);
    let d11 = g.diff_x(&uu);
    let d22 = g.diff_y(&vv);
    let s = g.diff_y(&uu).add(&g.diff_x(&vv));
    let res_v = g.avg_x(&g.avg_y(&coeffs.res));
    let shear = 2.0 * g.inner(&coeffs.res.mul(&d11), &d11)?
        + 2.0 * g.inner(&coeffs.res.mul(&d22), &d22)?
        + g.inner(&res_v.mul(&s), &s)?;
    let tr = d11.add(&d22);
    let volumetric = g.inner(&coeffs.rev.mul(&tr), &tr)?;
    Ok(Dissipation { shear, volumetric, mixing })
}

/// Constant base state and material constants entering the linear analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionSetup {
    pub rho0: [f64; 2],
    /// Hessian of the bulk energy at `rho0`
    pub hessian: [[f64; 2]; 2],
    pub kappa: [f64; 3],
    pub mobility: f64,
    /// shear viscosity at the base state
    pub eta_s: f64,
    /// volumetric viscosity at the base state
    pub eta_v: f64,
}

impl DispersionSetup {
    pub fn from_params(params: &ModelParams, rho0: [f64; 2]) -> Result<Self> {
        let r = rho0[0] + rho0[1];
        if !(rho0[0] > 0.0 && rho0[1] > 0.0) {
            return Err(Error::InvalidParameter(format!("base densities must be positive, got {rho0:?}")));
        }
        let phi = [rho0[0] / r, rho0[1] / r];
        Ok(DispersionSetup {
            rho0,
            hessian: params.energy.hessian(rho0)?,
            kappa: params.kappa,
            mobility: params.mobility,
            eta_s: phi[0] * params.inv_re_s[0] + phi[1] * params.inv_re_s[1],
            eta_v: phi[0] * params.inv_re_v[0] + phi[1] * params.inv_re_v[1],
        })
    }

    fn b(&self, k: f64) -> [[f64; 2]; 2] {
        let [k11, k12, k22] = self.kappa;
        let c = self.hessian;
        let k2 = k * k;
        [[c[0][0] + k11 * k2, c[0][1] + k12 * k2], [c[1][0] + k12 * k2, c[1][1] + k22 * k2]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionRoots {
    /// transverse viscous mode `-(eta_s / rho) k^2`
    pub factor: f64,
    pub cubic: [Complex<f64>; 3],
}

impl DispersionRoots {
    pub fn max_real(&self) -> f64 {
        self.cubic.iter().fold(self.factor, |m, z| m.max(z.re))
    }
}

/// Roots of the linear dispersion relation for a one-dimensional mode of
/// wavenumber `k`: one analytic factor root and the three roots of
/// `rho a^3 + c2 a^2 + c1 a + c0`, found as companion-matrix eigenvalues.
pub fn dispersion_roots(setup: &DispersionSetup, k: f64) -> Result<DispersionRoots> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidParameter(format!("wavenumber must be finite and non-negative, got {k}")));
    }
    let p = setup.rho0;
    let rho = p[0] + p[1];
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("base density must be positive, got {rho}")));
    }
    let m = setup.mobility;
    let eta = 2.0 * setup.eta_s + setup.eta_v;
    let c = setup.hessian;
    let [k11, k12, k22] = setup.kappa;
    let b = setup.b(k);
    let k2 = k * k;
    let s = b[0][0] + b[1][1] - 2.0 * b[0][1];
    let pcp = p[0] * p[0] * c[0][0] + 2.0 * p[0] * p[1] * c[0][1] + p[1] * p[1] * c[1][1];
    let pkp = p[0] * p[0] * k11 + 2.0 * p[0] * p[1] * k12 + p[1] * p[1] * k22;
    let det_b = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let c2 = k2 * (eta + rho * m * s);
    let c1 = k2 * (pcp + pkp * k2) + eta * m * s * k2 * k2;
    let c0 = k2 * k2 * m * rho * rho * det_b;
    let factor = -setup.eta_s / rho * k2;
    if c2 == 0.0 && c1 == 0.0 && c0 == 0.0 {
        return Ok(DispersionRoots { factor, cubic: [Complex::new(0.0, 0.0); 3] });
    }
    let comp = Matrix3::new(-c2 / rho, -c1 / rho, -c0 / rho, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let ev = comp
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Domain(format!("companion eigenvalues did not converge at k = {k}")))?
        .complex_eigenvalues();
    let mut cubic = [ev[0], ev[1], ev[2]];
    cubic.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(DispersionRoots { factor, cubic })
}

/// Growth rate of the exchange mode `(1, -1)` when the velocity is frozen at zero.
pub fn dispersion_no_hydro(setup: &DispersionSetup, k: f64) -> f64 {
    let b = setup.b(k);
    -setup.mobility * k * k * (b[0][0] + b[1][1] - 2.0 * b[0][1])
}

/// Centred discrete norm `||f - mean(f)||` of a cell field.
pub fn perturbation_amplitude(grid: &Grid, f: &Field) -> Result<f64> {
    let mean = grid.integral(f)? / (grid.lx * grid.ly);
    let d = f.map(|x| x - mean);
    grid.norm(&d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFit {
    pub rate: f64,
    /// root-mean-square residual of the log-linear fit
    pub residual: f64,
}

/// Least-squares slope of `ln(amplitude)` against time over `window`.
pub fn growth_rate_fit(series: &[(f64, f64)], window: std::ops::Range<usize>) -> Result<GrowthFit> {
    let pts = series
        .get(window.clone())
        .ok_or_else(|| Error::InvalidParameter(format!("window {window:?} exceeds series of {}", series.len())))?;
    if pts.len() < 3 {
        return Err(Error::InvalidParameter("growth fit needs at least 3 points".into()));
    }
    if pts.iter().any(|&(_, a)| !(a > 0.0)) {
        return Err(Error::InvalidParameter("growth fit needs positive amplitudes".into()));
    }
    let n = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y.ln()));
    let (mt, ml) = (st / n, sl / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, y) in pts {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (y.ln() - ml);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("growth fit needs distinct times".into()));
    }
    let rate = sxy / sxx;
    let ss: f64 = pts.iter().map(|&(t, y)| (y.ln() - ml - rate * (t - mt)).powi(2)).sum();
    Ok(GrowthFit { rate, residual: (ss / n).sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeMetrics {
    pub area: f64,
    pub perimeter: f64,
    /// `P^2 / (4 pi A)`, equal to one for a disc
    pub isoperimetric: f64,
}

/// Area and perimeter of the region where `f` is near `inside`, measured on
/// the indicator `clamp((f - outside) / (inside - outside), 0, 1)`; the
/// perimeter is its total variation.
pub fn shape_metrics(grid: &Grid, f: &Field, inside: f64, outside: f64) -> Result<ShapeMetrics> {
    if f.loc() != Location::Cell {
        return Err(Error::LocationMismatch { expected: Location::Cell, found: f.loc() });
    }
    let mut ind = f.map(|x| ((x - outside) / (inside - outside)).clamp(0.0, 1.0));
    grid.apply_neumann(&mut ind)?;
    let area = grid.integral(&ind)?;
    let gx = grid.avg_x(&grid.diff_x(&ind));
    let gy = grid.avg_y(&grid.diff_y(&ind));
    let mut perimeter = 0.0;
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            perimeter += gx.get(i, j).hypot(gy.get(i, j));
        }
    }
    perimeter *= grid.cell_area();
    if !(area > 0.0) {
        return Err(Error::InvalidParameter("indicator region is empty".into()));
    }
    Ok(ShapeMetrics { area, perimeter, isoperimetric: perimeter * perimeter / (4.0 * std::f64::consts::PI * area) })
}

/// Values of a cell field along the grid row closest to height `y`, as `(x, value)`.
pub fn row_profile(grid: &Grid, f: &Field, y: f64) -> Vec<(f64, f64)> {
    let j = (((y - grid.y0) / grid.hy() + 0.5).round() as isize).clamp(1, grid.ny as isize) as usize;
    (1..=grid.nx).map(|i| (grid.x_of(Location::Cell, i), f.get(i, j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{BulkEnergy, EnergyModel};
    use crate::scheme::Extrapolation;

    fn fh_params() -> ModelParams {
        ModelParams {
            mobility: 1e-3,
            inv_re_s: [0.01, 0.01],
            inv_re_v: [1.0 / 300.0, 1.0 / 300.0],
            kappa: [4e-4, 0.0, 4e-4],
            energy: EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 1.0, chi: 2.5 }, 1.0)
                .unwrap(),
            hydro: true,
            rho_floor: 1e-10,
            extrapolation: Extrapolation::SecondOrder,
        }
    }

    #[test]
    fn zero_wavenumber_gives_zero_roots() {
        let s = DispersionSetup::from_params(&fh_params(), [0.5, 0.5]).unwrap();
        let r = dispersion_roots(&s, 0.0).unwrap();
        assert_eq!(r.factor, 0.0);
        assert!(r.cubic.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn flory_huggins_growth_rate_at_k_10pi() {
        let s = DispersionSetup::from_params(&fh_params(), [0.5, 0.5]).unwrap();
        let k = 10.0 * std::f64::consts::PI;
        let a = dispersion_roots(&s, k).unwrap().max_real();
        // exchange mode decouples: rate M k^2 (1 - 2 kappa k^2)
        let expect = 1e-3 * k * k * (1.0 - 8e-4 * k * k);
        assert!((a - expect).abs() < 1e-9, "{a} vs {expect}");
        assert!((a - 0.2077).abs() < 0.03 * 0.2077);
        assert!((dispersion_no_hydro(&s, k) - expect).abs() < 1e-12);
    }

    #[test]
    fn factor_root_is_analytic() {
        let s = DispersionSetup::from_params(&fh_params(), [0.5, 0.5]).unwrap();
        let r = dispersion_roots(&s, 3.0).unwrap();
        assert_eq!(r.factor, -0.01 * 9.0);
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, 2.0 * (0.3 * i as f64 * 0.1).exp())).collect();
        let fit = growth_rate_fit(&series, 0..50).unwrap();
        assert!((fit.rate - 0.3).abs() < 1e-10);
    }

    #[test]
    fn fit_rejects_short_or_nonpositive_windows() {
        let series = vec![(0.0, 1.0), (1.0, 2.0), (2.0, -1.0)];
        assert!(growth_rate_fit(&series, 0..2).is_err());
        assert!(growth_rate_fit(&series, 0..3).is_err());
        assert!(growth_rate_fit(&series, 0..9).is_err());
    }

    #[test]
    fn disc_has_isoperimetric_ratio_near_one() {
        let g = Grid::new(128, 128, 4.0, 4.0).unwrap().with_origin(-2.0, -2.0);
        let f = g.sample(Location::Cell, |x, y| if x * x + y * y <= 1.0 { 1.0 } else { 0.0 });
        let m = shape_metrics(&g, &f, 1.0, 0.0).unwrap();
        assert!((m.area - std::f64::consts::PI).abs() < 0.02);
        // total variation of a staircase overestimates the circumference slightly
        assert!(m.isoperimetric > 0.95 && m.isoperimetric < 1.15, "{}", m.isoperimetric);
    }
}
