#![allow(dead_code)]

use binmix::energy::{BulkEnergy, EnergyModel};
use binmix::grid::{Field, Grid, Location};
use binmix::scheme::{Block, Extrapolation, ModelParams, StepSystem};
use binmix::solver::LinearOperator;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_field(g: &Grid, loc: Location, rng: &mut ChaCha8Rng) -> Field {
    let mut f = g.zeros(loc);
    for v in f.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    f
}

/// Zeroes the boundary ring of a vertex field.
pub fn zero_vertex_boundary(g: &Grid, f: &mut Field) {
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            if i == 0 || j == 0 || i == g.nx || j == g.ny {
                f.set(i, j, 0.0);
            }
        }
    }
}

// Direct-summation versions of the grid inner products. Each averages the
// integrand over the two (or four) storage points surrounding a cell and sums
// over cells, which is the definition; the library uses boundary weights.

pub fn cell_sum(g: &Grid, a: &Field, b: &Field) -> f64 {
    let mut s = 0.0;
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            s += a.get(i, j) * b.get(i, j);
        }
    }
    s * g.hx() * g.hy()
}

pub fn ew_sum(g: &Grid, a: &Field, b: &Field) -> f64 {
    let mut s = 0.0;
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            s += 0.5 * (a.get(i - 1, j) * b.get(i - 1, j) + a.get(i, j) * b.get(i, j));
        }
    }
    s * g.hx() * g.hy()
}

pub fn ns_sum(g: &Grid, a: &Field, b: &Field) -> f64 {
    let mut s = 0.0;
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            s += 0.5 * (a.get(i, j - 1) * b.get(i, j - 1) + a.get(i, j) * b.get(i, j));
        }
    }
    s * g.hx() * g.hy()
}

pub fn vc_sum(g: &Grid, a: &Field, b: &Field) -> f64 {
    let mut s = 0.0;
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            let p = |i: usize, j: usize| a.get(i, j) * b.get(i, j);
            s += 0.25 * (p(i - 1, j - 1) + p(i, j - 1) + p(i - 1, j) + p(i, j));
        }
    }
    s * g.hx() * g.hy()
}

pub fn fh_params(hydro: bool) -> ModelParams {
    ModelParams {
        mobility: 1e-3,
        inv_re_s: [1.0 / 100.0; 2],
        inv_re_v: [1.0 / 300.0; 2],
        kappa: [4e-4, 0.0, 4e-4],
        energy: EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 1.0, chi: 2.5 }, 1.0)
            .unwrap(),
        hydro,
        rho_floor: 1e-10,
        extrapolation: Extrapolation::SecondOrder,
    }
}

/// Bulk energy gradients written out independently of the library.
#[derive(Clone, Copy, Debug)]
pub enum OracleEnergy {
    DoubleWell,
    FloryHuggins { c: f64, n1: f64, n2: f64, chi: f64 },
}

impl OracleEnergy {
    pub fn grad(&self, r1: f64, r2: f64) -> [f64; 2] {
        match *self {
            OracleEnergy::DoubleWell => {
                let d = |r: f64| 2.0 * r * (r - 1.0) * (2.0 * r - 1.0);
                [d(r1), d(r2)]
            }
            OracleEnergy::FloryHuggins { c, n1, n2, chi } => {
                let r = r1 + r2;
                let (p1, p2) = (r1 / r, r2 / r);
                [
                    c * (p1.ln() / n1 + p2 / n1 - p2 / n2 + chi * p2 * p2),
                    c * (p2.ln() / n2 + p1 / n2 - p1 / n1 + chi * p1 * p1),
                ]
            }
        }
    }
}

/// Physical parameters of the continuous model for the oracle.
#[derive(Clone, Copy, Debug)]
pub struct OracleModel {
    pub energy: OracleEnergy,
    pub rho0: [f64; 2],
    pub kappa: [f64; 3],
    pub mobility: f64,
    pub eta_s: f64,
    pub eta_v: f64,
}

const N: usize = 16;

/// Spectral derivative of a periodic sample over one wavelength `2 pi / k`.
fn deriv(f: &[f64; N], k: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for m in 1..N / 2 {
        let (mut c, mut s) = (0.0, 0.0);
        for (n, v) in f.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * (m * n) as f64 / N as f64;
            c += v * th.cos();
            s += v * th.sin();
        }
        c *= 2.0 / N as f64;
        s *= 2.0 / N as f64;
        // f ~ c cos(m k x) + s sin(m k x)
        let w = m as f64 * k;
        for (n, o) in out.iter_mut().enumerate() {
            let th = 2.0 * std::f64::consts::PI * (m * n) as f64 / N as f64;
            *o += w * (s * th.cos() - c * th.sin());
        }
    }
    out
}

fn map<F: Fn(usize) -> f64>(f: F) -> [f64; N] {
    std::array::from_fn(f)
}

/// Time derivative of `(rho1, rho2, vx, vy)` for fields varying along x only,
/// straight from the conservation laws of the continuous model.
fn rhs(m: &OracleModel, k: f64, s: &[[f64; N]; 4]) -> [[f64; N]; 4] {
    let [r1, r2, vx, vy] = s;
    let d = |f: &[f64; N]| deriv(f, k);
    let [k11, k12, k22] = m.kappa;
    let (l1, l2) = (d(&d(r1)), d(&d(r2)));
    let grad: [[f64; 2]; N] = std::array::from_fn(|n| m.energy.grad(r1[n], r2[n]));
    let mu1 = map(|n| grad[n][0] - k11 * l1[n] - k12 * l2[n]);
    let mu2 = map(|n| grad[n][1] - k12 * l1[n] - k22 * l2[n]);
    let dmu = map(|n| mu1[n] - mu2[n]);
    let diff_flux = d(&d(&dmu));
    let f1 = d(&map(|n| r1[n] * vx[n]));
    let f2 = d(&map(|n| r2[n] * vx[n]));
    let dr1 = map(|n| -f1[n] + m.mobility * diff_flux[n]);
    let dr2 = map(|n| -f2[n] - m.mobility * diff_flux[n]);
    let rho = map(|n| r1[n] + r2[n]);
    let drho = map(|n| dr1[n] + dr2[n]);
    let (dmu1, dmu2) = (d(&mu1), d(&mu2));
    let dvx = d(vx);
    let mom_x = {
        let adv = d(&map(|n| rho[n] * vx[n] * vx[n]));
        let visc = d(&map(|n| (2.0 * m.eta_s + m.eta_v) * dvx[n]));
        map(|n| -adv[n] + visc[n] - r1[n] * dmu1[n] - r2[n] * dmu2[n])
    };
    let mom_y = {
        let adv = d(&map(|n| rho[n] * vx[n] * vy[n]));
        let visc = d(&map(|n| m.eta_s * d(vy)[n]));
        map(|n| -adv[n] + visc[n])
    };
    // d(rho v)/dt = rho dv/dt + v drho/dt
    let ax = map(|n| (mom_x[n] - vx[n] * drho[n]) / rho[n]);
    let ay = map(|n| (mom_y[n] - vy[n] * drho[n]) / rho[n]);
    [dr1, dr2, ax, ay]
}

/// Largest real part of the growth rates of wavenumber `k`, from the
/// eigenvalues of a finite-difference Jacobian of the model's right-hand side
/// on the cosine and sine amplitudes of the four fields.
pub fn oracle_max_growth(m: &OracleModel, k: f64) -> f64 {
    let x = map(|n| 2.0 * std::f64::consts::PI * n as f64 / N as f64);
    let fields = |a: &[f64; 8]| -> [[f64; N]; 4] {
        let base = [m.rho0[0], m.rho0[1], 0.0, 0.0];
        std::array::from_fn(|c| map(|n| base[c] + a[2 * c] * x[n].cos() + a[2 * c + 1] * x[n].sin()))
    };
    let project = |f: &[[f64; N]; 4]| -> [f64; 8] {
        std::array::from_fn(|r| {
            let (c, sine) = (r / 2, r % 2 == 1);
            2.0 / N as f64 * (0..N).map(|n| f[c][n] * if sine { x[n].sin() } else { x[n].cos() }).sum::<f64>()
        })
    };
    let eps = 1e-6 * (m.rho0[0] + m.rho0[1]);
    let mut jac = DMatrix::<f64>::zeros(8, 8);
    for col in 0..8 {
        let mut ap = [0.0; 8];
        let mut am = [0.0; 8];
        ap[col] = eps;
        am[col] = -eps;
        let fp = project(&rhs(m, k, &fields(&ap)));
        let fm = project(&rhs(m, k, &fields(&am)));
        for row in 0..8 {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * eps);
        }
    }
    let schur = jac.try_schur(1e-14, 100_000).expect("oracle eigenvalues");
    schur.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Column-by-column dense matrix of the step operator.
pub fn dense(sys: &StepSystem) -> DMatrix<f64> {
    let n = sys.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        e.fill(0.0);
        e[col] = 1.0;
        sys.apply(&e, &mut y);
        a.set_column(col, &DVector::from_column_slice(&y));
    }
    a
}

/// `(A X, X)`: each row block paired with the unknown it is tested against in
/// the energy estimate.
pub fn energy_pairing(g: &Grid, sys: &StepSystem, x: &[f64]) -> f64 {
    let lay = *sys.layout();
    let mut y = vec![0.0; x.len()];
    sys.apply(x, &mut y);
    // rows are stored under the block of their test function: the first
    // continuity row under Mu1, the first chemical potential row under Rho1
    let mut s = 0.0;
    for b in Block::ALL {
        if lay.size(b) > 0 {
            s += g.inner(&lay.scatter(g, b, &y), &lay.scatter(g, b, x)).unwrap();
        }
    }
    s
}
