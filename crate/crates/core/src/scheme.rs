//! The linear, second-order, energy-stable time step.
//!
//! Each step solves one linear system for the half-step unknowns
//! `X = (mu1, mu2, u, v, q, rho1, rho2)`; full-step values follow from
//! `f^{n+1} = 2 X_f - f^n`. Velocities are the density-weighted variables
//! `u = sqrt(rho) * velocity`, stored on the staggered edges.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field, Grid, Location};
use crate::solver::{self, GmresConfig, Identity, LinearOperator, Preconditioner, SolveReport, SparseLu};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// `(3 f^n - f^{n-1}) / 2`
    SecondOrder,
    /// `f^n`; first order in time, kept for convergence-harness checks
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    /// sparse LU of the operator with domain-averaged coefficients and no convection
    Frozen,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub mobility: f64,
    /// `1 / Re_s,i`
    pub inv_re_s: [f64; 2],
    /// `1 / Re_v,i`
    pub inv_re_v: [f64; 2],
    /// gradient coefficients `(k11, k12, k22)` in mass-density form
    pub kappa: [f64; 3],
    pub energy: EnergyModel,
    pub hydro: bool,
    pub rho_floor: f64,
    pub extrapolation: Extrapolation,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.mobility >= 0.0 && self.mobility.is_finite()) {
            return bad("mobility must be non-negative");
        }
        if self.inv_re_s.iter().chain(&self.inv_re_v).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("viscosity coefficients 1/Re must be non-negative");
        }
        let [k11, k12, k22] = self.kappa;
        if !(k11 >= 0.0 && k22 >= 0.0 && k11 * k22 - k12 * k12 >= 0.0) {
            return bad("gradient coefficient matrix must be positive semi-definite");
        }
        if !(self.rho_floor >= 0.0) {
            return bad("density floor must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub rho1: Field,
    pub rho2: Field,
    pub u: Field,
    pub v: Field,
    pub q: Field,
    pub t: f64,
    pub step: usize,
}

impl State {
    /// Builds a consistent state: ghosts from the boundary conditions and
    /// `q = sqrt(h + A)` from the densities.
    pub fn new(grid: &Grid, rho1: Field, rho2: Field, u: Field, v: Field, energy: &EnergyModel) -> Result<Self> {
        for (f, loc) in
            [(&rho1, Location::Cell), (&rho2, Location::Cell), (&u, Location::EdgeEw), (&v, Location::EdgeNs)]
        {
            if f.loc() != loc {
                return Err(Error::LocationMismatch { expected: loc, found: f.loc() });
            }
        }
        let (mut rho1, mut rho2, mut u, mut v) = (rho1, rho2, u, v);
        grid.apply_neumann(&mut rho1)?;
        grid.apply_neumann(&mut rho2)?;
        grid.apply_velocity_bc(&mut u, &mut v)?;
        let mut q = grid.zeros(Location::Cell);
        for j in 1..=grid.ny {
            for i in 1..=grid.nx {
                q.set(i, j, energy.eq_vars([rho1.get(i, j), rho2.get(i, j)])?.q);
            }
        }
        grid.apply_neumann(&mut q)?;
        Ok(State { rho1, rho2, u, v, q, t: 0.0, step: 0 })
    }

    pub fn at_rest(grid: &Grid, rho1: Field, rho2: Field, energy: &EnergyModel) -> Result<Self> {
        State::new(grid, rho1, rho2, grid.zeros(Location::EdgeEw), grid.zeros(Location::EdgeNs), energy)
    }

    pub fn total_density(&self) -> Field {
        self.rho1.add(&self.rho2)
    }
}

/// Explicitly extrapolated coefficient fields, all with ghosts set.
#[derive(Clone, Debug, PartialEq)]
pub struct Coeffs {
    pub rho: [Field; 2],
    /// extrapolated `1 / sqrt(rho)`
    pub w: Field,
    /// extrapolated `dq / drho_i`
    pub dq: [Field; 2],
    pub ubar: Field,
    pub vbar: Field,
    /// mass-fraction weighted `1 / Re_s`
    pub res: Field,
    /// mass-fraction weighted `1 / Re_v`
    pub rev: Field,
}

pub fn extrapolate(grid: &Grid, params: &ModelParams, now: &State, prev: &State) -> Result<Coeffs> {
    let prev = match params.extrapolation {
        Extrapolation::SecondOrder => prev,
        Extrapolation::Frozen => now,
    };
    let ex = |a: f64, b: f64| 1.5 * a - 0.5 * b;
    let mut c = Coeffs {
        rho: [grid.zeros(Location::Cell), grid.zeros(Location::Cell)],
        w: grid.zeros(Location::Cell),
        dq: [grid.zeros(Location::Cell), grid.zeros(Location::Cell)],
        ubar: grid.zeros(Location::EdgeEw),
        vbar: grid.zeros(Location::EdgeNs),
        res: grid.zeros(Location::Cell),
        rev: grid.zeros(Location::Cell),
    };
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let a = [now.rho1.get(i, j), now.rho2.get(i, j)];
            let b = [prev.rho1.get(i, j), prev.rho2.get(i, j)];
            let (ra, rb) = (a[0] + a[1], b[0] + b[1]);
            if !(ra > 0.0 && rb > 0.0) {
                return Err(Error::Positivity { step: now.step, i, j, value: ra.min(rb) });
            }
            let (ea, eb) = (params.energy.eq_vars(a)?, params.energy.eq_vars(b)?);
            let r = [ex(a[0], b[0]), ex(a[1], b[1])];
            let w = ex(1.0 / ra.sqrt(), 1.0 / rb.sqrt());
            if !(r[0] + r[1] > 0.0 && w > 0.0) {
                return Err(Error::Positivity { step: now.step, i, j, value: r[0] + r[1] });
            }
            let phi = [ex(a[0] / ra, b[0] / rb), ex(a[1] / ra, b[1] / rb)];
            c.rho[0].set(i, j, r[0]);
            c.rho[1].set(i, j, r[1]);
            c.w.set(i, j, w);
            c.dq[0].set(i, j, ex(ea.dq[0], eb.dq[0]));
            c.dq[1].set(i, j, ex(ea.dq[1], eb.dq[1]));
            c.res.set(i, j, phi[0] * params.inv_re_s[0] + phi[1] * params.inv_re_s[1]);
            c.rev.set(i, j, phi[0] * params.inv_re_v[0] + phi[1] * params.inv_re_v[1]);
        }
    }
    let [r0, r1] = &mut c.rho;
    let [d0, d1] = &mut c.dq;
    for f in [r0, r1, &mut c.w, d0, d1, &mut c.res, &mut c.rev] {
        grid.apply_neumann(f)?;
    }
    c.ubar = now.u.scale(1.5);
    c.ubar.axpy(-0.5, &prev.u);
    c.vbar = now.v.scale(1.5);
    c.vbar.axpy(-0.5, &prev.v);
    grid.apply_velocity_bc(&mut c.ubar, &mut c.vbar)?;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Mu1,
    Mu2,
    U,
    V,
    Q,
    Rho1,
    Rho2,
}

impl Block {
    pub const ALL: [Block; 7] = [Block::Mu1, Block::Mu2, Block::U, Block::V, Block::Q, Block::Rho1, Block::Rho2];

    pub fn location(self) -> Location {
        match self {
            Block::U => Location::EdgeEw,
            Block::V => Location::EdgeNs,
            _ => Location::Cell,
        }
    }
}

/// Ordering of the unknown vector. Each block lists its degrees of freedom
/// row by row; velocity blocks are empty when hydrodynamics is off.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub ny: usize,
    pub hydro: bool,
}

impl Layout {
    /// `(width, height)` of the block's degree-of-freedom grid; storage index
    /// of its first entry is `(1, 1)` for every block.
    pub fn dims(&self, b: Block) -> (usize, usize) {
        match b {
            Block::U if self.hydro => (self.nx - 1, self.ny),
            Block::V if self.hydro => (self.nx, self.ny - 1),
            Block::U | Block::V => (0, 0),
            _ => (self.nx, self.ny),
        }
    }

    pub fn size(&self, b: Block) -> usize {
        let (w, h) = self.dims(b);
        w * h
    }

    pub fn offset(&self, b: Block) -> usize {
        Block::ALL.iter().take_while(|&&x| x != b).map(|&x| self.size(x)).sum()
    }

    pub fn len(&self) -> usize {
        Block::ALL.iter().map(|&b| self.size(b)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, b: Block, i: usize, j: usize) -> usize {
        let (w, _) = self.dims(b);
        self.offset(b) + (j - 1) * w + (i - 1)
    }

    /// Block and storage indices of vector entry `k`.
    pub fn coords(&self, k: usize) -> (Block, usize, usize) {
        let mut k = k;
        for b in Block::ALL {
            let s = self.size(b);
            if k < s {
                let (w, _) = self.dims(b);
                return (b, k % w + 1, k / w + 1);
            }
            k -= s;
        }
        panic!("index out of range for layout");
    }

    /// Copies a block into a fresh field; ghosts and boundary slots stay zero.
    pub fn scatter(&self, grid: &Grid, b: Block, x: &[f64]) -> Field {
        let mut f = grid.zeros(b.location());
        let (w, h) = self.dims(b);
        let off = self.offset(b);
        let sx = f.shape().0;
        let data = f.data_mut();
        for j in 0..h {
            data[(j + 1) * sx + 1..(j + 1) * sx + 1 + w].copy_from_slice(&x[off + j * w..off + (j + 1) * w]);
        }
        f
    }

    pub fn gather(&self, b: Block, f: &Field, y: &mut [f64]) {
        let (w, h) = self.dims(b);
        let off = self.offset(b);
        let sx = f.shape().0;
        let data = f.data();
        for j in 0..h {
            y[off + j * w..off + (j + 1) * w].copy_from_slice(&data[(j + 1) * sx + 1..(j + 1) * sx + 1 + w]);
        }
    }
}

/// The step operator with its coefficients evaluated once per step.
pub struct StepSystem {
    grid: Grid,
    dt: f64,
    mobility: f64,
    kappa: [f64; 3],
    layout: Layout,
    coeffs: Coeffs,
    wx: Field,
    wy: Field,
    cx: [Field; 2],
    cy: [Field; 2],
    res_v: Field,
    ubar_v: Field,
    vbar_v: Field,
}

impl StepSystem {
    pub fn new(grid: &Grid, params: &ModelParams, dt: f64, coeffs: Coeffs) -> Self {
        let g = grid;
        let c1 = coeffs.rho[0].mul(&coeffs.w);
        let c2 = coeffs.rho[1].mul(&coeffs.w);
        StepSystem {
            grid: *grid,
            dt,
            mobility: params.mobility,
            kappa: params.kappa,
            layout: Layout { nx: grid.nx, ny: grid.ny, hydro: params.hydro },
            wx: g.avg_x(&coeffs.w),
            wy: g.avg_y(&coeffs.w),
            cx: [g.avg_x(&c1), g.avg_x(&c2)],
            cy: [g.avg_y(&c1), g.avg_y(&c2)],
            res_v: g.avg_x(&g.avg_y(&coeffs.res)),
            ubar_v: g.avg_y(&coeffs.ubar),
            vbar_v: g.avg_x(&coeffs.vbar),
            coeffs,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Right-hand side built from the level-`n` state.
    pub fn rhs(&self, now: &State) -> Vec<f64> {
        let (dt, lay) = (self.dt, &self.layout);
        let mut b = vec![0.0; lay.len()];
        lay.gather(Block::Mu1, &now.rho1.scale(2.0 / dt), &mut b);
        lay.gather(Block::Mu2, &now.rho2.scale(2.0 / dt), &mut b);
        if lay.hydro {
            lay.gather(Block::U, &now.u.scale(2.0 / dt), &mut b);
            lay.gather(Block::V, &now.v.scale(2.0 / dt), &mut b);
        }
        let mut r5 = now.q.scale(4.0 / dt);
        r5.axpy(-4.0 / dt, &self.coeffs.dq[0].mul(&now.rho1));
        r5.axpy(-4.0 / dt, &self.coeffs.dq[1].mul(&now.rho2));
        lay.gather(Block::Q, &r5, &mut b);
        b
    }

    /// Packs a state into an unknown vector; chemical potentials are zero.
    pub fn pack(&self, s: &State) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; lay.len()];
        if lay.hydro {
            lay.gather(Block::U, &s.u, &mut x);
            lay.gather(Block::V, &s.v, &mut x);
        }
        lay.gather(Block::Q, &s.q, &mut x);
        lay.gather(Block::Rho1, &s.rho1, &mut x);
        lay.gather(Block::Rho2, &s.rho2, &mut x);
        x
    }

    /// Unpacks `X` into fields with boundary ghosts applied.
    pub fn unpack(&self, x: &[f64]) -> HalfStep {
        let (g, lay) = (&self.grid, &self.layout);
        let cell = |b| {
            let mut f = lay.scatter(g, b, x);
            g.apply_neumann(&mut f).expect("cell block");
            f
        };
        let (mut u, mut v) = (lay.scatter(g, Block::U, x), lay.scatter(g, Block::V, x));
        g.apply_velocity_bc(&mut u, &mut v).expect("velocity blocks");
        HalfStep {
            mu1: cell(Block::Mu1),
            mu2: cell(Block::Mu2),
            u,
            v,
            q: cell(Block::Q),
            rho1: cell(Block::Rho1),
            rho2: cell(Block::Rho2),
        }
    }

    /// `(conv_u, conv_v)`: skew-symmetric convection of the weighted velocity.
    pub fn convection(&self, u: &Field, v: &Field) -> (Field, Field) {
        let g = &self.grid;
        let c = &self.coeffs;
        let (uu, vv) = (self.wx.mul(u), self.wy.mul(v));
        let mut cu = c.ubar.mul(&g.diff_x(&c.w.mul(&g.avg_x(u))));
        cu = cu.add(&g.avg_x(&c.w.mul(&g.diff_x(&c.ubar.mul(u)))));
        cu = cu.add(&g.avg_y(&self.vbar_v.mul(&g.diff_y(&uu))));
        cu = cu.add(&self.wx.mul(&g.diff_y(&g.avg_y(u).mul(&self.vbar_v))));
        let mut cv = g.avg_x(&self.ubar_v.mul(&g.diff_x(&vv)));
        cv = cv.add(&self.wy.mul(&g.diff_x(&self.ubar_v.mul(&g.avg_x(v)))));
        cv = cv.add(&c.vbar.mul(&g.diff_y(&c.w.mul(&g.avg_y(v)))));
        cv = cv.add(&g.avg_y(&c.w.mul(&g.diff_y(&c.vbar.mul(v)))));
        (cu.scale(0.5), cv.scale(0.5))
    }

    /// `(visc_u, visc_v)`: the viscous force, entering the momentum rows with a minus sign.
    pub fn viscous(&self, u: &Field, v: &Field) -> (Field, Field) {
        let g = &self.grid;
        let c = &self.coeffs;
        let (uu, vv) = (self.wx.mul(u), self.wy.mul(v));
        let dxu = g.diff_x(&uu);
        let dyv = g.diff_y(&vv);
        let shear = self.res_v.mul(&g.diff_y(&uu).add(&g.diff_x(&vv)));
        let bulk = c.rev.mul(&dxu.add(&dyv));
        let mut fu = g.diff_x(&c.res.mul(&dxu)).scale(2.0);
        fu = fu.add(&g.diff_y(&shear)).add(&g.diff_x(&bulk));
        let mut fv = g.diff_y(&c.res.mul(&dyv)).scale(2.0);
        fv = fv.add(&g.diff_x(&shear)).add(&g.diff_y(&bulk));
        (self.wx.mul(&fu), self.wy.mul(&fv))
    }

    fn apply_fields(&self, h: &HalfStep, y: &mut [f64]) {
        let (g, dt, lay, c) = (&self.grid, self.dt, &self.layout, &self.coeffs);
        let m = self.mobility;
        let [k11, k12, k22] = self.kappa;
        let lap = |f: &Field| g.laplacian(f).expect("cell field");
        let lap_dmu = lap(&h.mu1.sub(&h.mu2));
        let (lap1, lap2) = (lap(&h.rho1), lap(&h.rho2));

        let mut row1 = h.rho1.scale(2.0 / dt);
        row1.axpy(-m, &lap_dmu);
        let mut row2 = h.rho2.scale(2.0 / dt);
        row2.axpy(m, &lap_dmu);

        let mut row5 = h.q.scale(4.0 / dt);
        row5.axpy(-4.0 / dt, &c.dq[0].mul(&h.rho1));
        row5.axpy(-4.0 / dt, &c.dq[1].mul(&h.rho2));

        let mut row6 = h.mu1.scale(-2.0 / dt);
        row6.axpy(4.0 / dt, &c.dq[0].mul(&h.q));
        row6.axpy(-2.0 / dt * k11, &lap1);
        row6.axpy(-2.0 / dt * k12, &lap2);
        let mut row7 = h.mu2.scale(-2.0 / dt);
        row7.axpy(4.0 / dt, &c.dq[1].mul(&h.q));
        row7.axpy(-2.0 / dt * k12, &lap1);
        row7.axpy(-2.0 / dt * k22, &lap2);

        if lay.hydro {
            for (row, k) in [(&mut row1, 0), (&mut row2, 1)] {
                row.axpy(1.0, &g.diff_x(&self.cx[k].mul(&h.u)));
                row.axpy(1.0, &g.diff_y(&self.cy[k].mul(&h.v)));
            }
            let (conv_u, conv_v) = self.convection(&h.u, &h.v);
            let (visc_u, visc_v) = self.viscous(&h.u, &h.v);
            let mut row3 = h.u.scale(2.0 / dt).add(&conv_u).sub(&visc_u);
            let mut row4 = h.v.scale(2.0 / dt).add(&conv_v).sub(&visc_v);
            for (mu, k) in [(&h.mu1, 0), (&h.mu2, 1)] {
                row3.axpy(1.0, &self.cx[k].mul(&g.diff_x(mu)));
                row4.axpy(1.0, &self.cy[k].mul(&g.diff_y(mu)));
            }
            lay.gather(Block::U, &row3, y);
            lay.gather(Block::V, &row4, y);
        }
        lay.gather(Block::Mu1, &row1, y);
        lay.gather(Block::Mu2, &row2, y);
        lay.gather(Block::Q, &row5, y);
        lay.gather(Block::Rho1, &row6, y);
        lay.gather(Block::Rho2, &row7, y);
    }

    /// Operator with every coefficient replaced by its interior mean and the
    /// advecting velocity set to zero.
    pub fn surrogate(&self, params: &ModelParams) -> (StepSystem, SurrogateKey) {
        let g = &self.grid;
        let c = &self.coeffs;
        let fields = [&c.rho[0], &c.rho[1], &c.w, &c.dq[0], &c.dq[1], &c.res, &c.rev];
        let mut means = [0.0; 7];
        let mut scales = [0.0; 7];
        let area = g.lx * g.ly;
        for (k, f) in fields.iter().enumerate() {
            means[k] = g.integral(f).expect("cell field") / area;
            scales[k] = (g.inner(f, f).expect("cell field") / area).sqrt();
        }
        let k = |v: f64| g.constant(Location::Cell, v);
        let frozen = Coeffs {
            rho: [k(means[0]), k(means[1])],
            w: k(means[2]),
            dq: [k(means[3]), k(means[4])],
            ubar: g.zeros(Location::EdgeEw),
            vbar: g.zeros(Location::EdgeNs),
            res: k(means[5]),
            rev: k(means[6]),
        };
        let key = SurrogateKey { nx: g.nx, ny: g.ny, hydro: self.layout.hydro, dt: self.dt, means, scales };
        (StepSystem::new(g, params, self.dt, frozen), key)
    }

    /// Sparse entries of the operator, recovered by applying it to sums of
    /// well-separated unit vectors. Valid because every column couples only
    /// to rows within two storage slots of it.
    pub fn assemble(&self) -> Vec<(usize, usize, f64)> {
        const P: usize = 5;
        let lay = &self.layout;
        let n = lay.len();
        let mut entries = Vec::new();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for b in Block::ALL {
            let (w, h) = lay.dims(b);
            if w * h == 0 {
                continue;
            }
            for ci in 0..P {
                for cj in 0..P {
                    x.fill(0.0);
                    let mut any = false;
                    for j in (1 + cj..=h).step_by(P) {
                        for i in (1 + ci..=w).step_by(P) {
                            x[lay.index(b, i, j)] = 1.0;
                            any = true;
                        }
                    }
                    if !any {
                        continue;
                    }
                    self.apply(&x, &mut y);
                    for (row, &val) in y.iter().enumerate() {
                        if val == 0.0 {
                            continue;
                        }
                        let (_, ir, jr) = lay.coords(row);
                        let owner = |r: usize, c: usize| -> usize {
                            let r = r as isize - 1 - c as isize;
                            let m = (r as f64 / P as f64).round() as isize;
                            (c as isize + m * P as isize + 1).max(1) as usize
                        };
                        let (ic, jc) = (owner(ir, ci).min(w), owner(jr, cj).min(h));
                        entries.push((row, lay.index(b, ic, jc), val));
                    }
                }
            }
        }
        entries
    }
}

impl LinearOperator for StepSystem {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let h = self.unpack(x);
        self.apply_fields(&h, y);
    }
}

/// Summary of the coefficients a frozen preconditioner was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateKey {
    nx: usize,
    ny: usize,
    hydro: bool,
    dt: f64,
    means: [f64; 7],
    scales: [f64; 7],
}

impl SurrogateKey {
    /// True when any mean coefficient moved by more than 10% of its size.
    pub fn drifted(&self, other: &SurrogateKey) -> bool {
        if (self.nx, self.ny, self.hydro) != (other.nx, other.ny, other.hydro) || self.dt != other.dt {
            return true;
        }
        (0..7).any(|k| {
            let size = self.means[k].abs().max(self.scales[k]).max(1e-300);
            (other.means[k] - self.means[k]).abs() > 0.1 * size
        })
    }
}

/// Cached sparse LU of the frozen-coefficient surrogate.
#[derive(Default)]
pub struct FrozenPreconditioner {
    key: Option<SurrogateKey>,
    lu: Option<SparseLu>,
    pub builds: usize,
}

impl FrozenPreconditioner {
    pub fn prepare(&mut self, system: &StepSystem, params: &ModelParams) -> Result<&SparseLu> {
        let (sur, key) = system.surrogate(params);
        let stale = match &self.key {
            Some(k) => k.drifted(&key),
            None => true,
        };
        if stale || self.lu.is_none() {
            let entries = sur.assemble();
            self.lu = Some(SparseLu::factor(sur.layout.len(), &entries)?);
            self.key = Some(key);
            self.builds += 1;
        }
        Ok(self.lu.as_ref().expect("factor built above"))
    }
}

/// Half-step values `X` unpacked into fields.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfStep {
    pub mu1: Field,
    pub mu2: Field,
    pub u: Field,
    pub v: Field,
    pub q: Field,
    pub rho1: Field,
    pub rho2: Field,
}

pub struct StepOutcome {
    pub state: State,
    pub half: HalfStep,
    pub coeffs: Coeffs,
    pub solve: SolveReport,
}

/// Discrete strain of the physical velocity `w u`: `(D11, D22)` at cells and
/// `D12` at vertices.
pub fn discrete_strain(grid: &Grid, coeffs: &Coeffs, u: &Field, v: &Field) -> (Field, Field, Field) {
    let uu = grid.avg_x(&coeffs.w).mul(u);
    let vv = grid.avg_y(&coeffs.w).mul(v);
    let d12 = grid.diff_y(&uu).add(&grid.diff_x(&vv)).scale(0.5);
    (grid.diff_x(&uu), grid.diff_y(&vv), d12)
}

/// Advances states by one step; owns the preconditioner cache.
pub struct Stepper {
    pub grid: Grid,
    pub params: ModelParams,
    pub dt: f64,
    pub gmres: GmresConfig,
    pub preconditioner: PreconditionerKind,
    cache: FrozenPreconditioner,
    last_mu: Option<(Field, Field)>,
}

impl Stepper {
    pub fn new(
        grid: Grid,
        params: ModelParams,
        dt: f64,
        gmres: GmresConfig,
        preconditioner: PreconditionerKind,
    ) -> Result<Self> {
        params.validate()?;
        gmres.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Ok(Stepper { grid, params, dt, gmres, preconditioner, cache: FrozenPreconditioner::default(), last_mu: None })
    }

    pub fn preconditioner_builds(&self) -> usize {
        self.cache.builds
    }

    /// One step from `now`, with `prev` the level `n - 1` state (pass `now`
    /// again on the first step).
    pub fn step(&mut self, now: &State, prev: &State) -> Result<StepOutcome> {
        let g = self.grid;
        let dt = self.dt;
        let coeffs = extrapolate(&g, &self.params, now, prev)?;
        let sys = StepSystem::new(&g, &self.params, dt, coeffs);
        let lay = *sys.layout();
        let b = sys.rhs(now);
        let mut x = sys.pack(now);
        if let Some((m1, m2)) = &self.last_mu {
            lay.gather(Block::Mu1, m1, &mut x);
            lay.gather(Block::Mu2, m2, &mut x);
        }
        let report = match self.preconditioner {
            PreconditionerKind::Frozen => {
                let pc = self.cache.prepare(&sys, &self.params)?;
                solver::gmres(&sys, pc as &dyn Preconditioner, &b, &mut x, &self.gmres)
            }
            PreconditionerKind::None => solver::gmres(&sys, &Identity, &b, &mut x, &self.gmres),
        };
        if !report.converged {
            return Err(Error::NonConvergence { iterations: report.iterations, residual: report.residual });
        }
        // exact discrete mass balance: the row sums of the continuity rows vanish
        // for the exact solution, so remove the Krylov error in that direction
        for (blk, old) in [(Block::Rho1, &now.rho1), (Block::Rho2, &now.rho2)] {
            let r = lay.offset(blk)..lay.offset(blk) + lay.size(blk);
            let cells = (1..=g.ny).flat_map(|j| (1..=g.nx).map(move |i| (i, j)));
            let target = compensated_sum(cells.map(|(i, j)| old.get(i, j)));
            let have = compensated_sum(x[r.clone()].iter().copied());
            let shift = (target - have) / r.len() as f64;
            for v in &mut x[r] {
                *v += shift;
            }
        }
        let mut ax = vec![0.0; b.len()];
        sys.apply(&x, &mut ax);
        let rn: f64 = solver::norm(&ax.iter().zip(&b).map(|(a, c)| c - a).collect::<Vec<_>>());
        let bn = solver::norm(&b);
        let solve = SolveReport { residual: if bn > 0.0 { rn / bn } else { rn }, ..report };

        let half = sys.unpack(&x);
        let full = |h: &Field, old: &Field| {
            let mut f = h.scale(2.0);
            f.axpy(-1.0, old);
            f
        };
        let mut rho1 = full(&half.rho1, &now.rho1);
        let mut rho2 = full(&half.rho2, &now.rho2);
        let mut q = full(&half.q, &now.q);
        let mut u = full(&half.u, &now.u);
        let mut v = full(&half.v, &now.v);
        g.apply_neumann(&mut rho1)?;
        g.apply_neumann(&mut rho2)?;
        g.apply_neumann(&mut q)?;
        g.apply_velocity_bc(&mut u, &mut v)?;
        let next_step = now.step + 1;
        for j in 1..=g.ny {
            for i in 1..=g.nx {
                let r = rho1.get(i, j) + rho2.get(i, j);
                if !(r > self.params.rho_floor) {
                    return Err(Error::Positivity { step: next_step, i, j, value: r });
                }
            }
        }
        self.last_mu = Some((half.mu1.clone(), half.mu2.clone()));
        let state = State { rho1, rho2, u, v, q, t: now.t + dt, step: next_step };
        let coeffs = sys.coeffs;
        Ok(StepOutcome { state, half, coeffs, solve })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::BulkEnergy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(hydro: bool) -> ModelParams {
        ModelParams {
            mobility: 1e-2,
            inv_re_s: [0.5, 0.3],
            inv_re_v: [0.2, 0.7],
            kappa: [1e-3, 2e-4, 5e-4],
            energy: EnergyModel::new(BulkEnergy::DoubleWell, 1.0).unwrap(),
            hydro,
            rho_floor: 1e-10,
            extrapolation: Extrapolation::SecondOrder,
        }
    }

    fn random_state(g: &Grid, rng: &mut ChaCha8Rng, p: &ModelParams) -> State {
        let mut f = |loc, base: f64, amp: f64| {
            let mut x = g.zeros(loc);
            for v in x.data_mut() {
                *v = base + amp * rng.gen_range(-1.0..1.0);
            }
            x
        };
        let (r1, r2) = (f(Location::Cell, 0.5, 0.2), f(Location::Cell, 0.6, 0.2));
        let (u, v) = (f(Location::EdgeEw, 0.0, 0.3), f(Location::EdgeNs, 0.0, 0.3));
        State::new(g, r1, r2, u, v, &p.energy).unwrap()
    }

    fn system(nx: usize, ny: usize, hydro: bool, seed: u64) -> (Grid, ModelParams, StepSystem, ChaCha8Rng) {
        let g = Grid::new(nx, ny, 1.0, 1.3).unwrap();
        let p = params(hydro);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_state(&g, &mut rng, &p);
        let b = random_state(&g, &mut rng, &p);
        let c = extrapolate(&g, &p, &a, &b).unwrap();
        let sys = StepSystem::new(&g, &p, 0.01, c);
        (g, p, sys, rng)
    }

    #[test]
    fn layout_round_trips_indices() {
        let lay = Layout { nx: 5, ny: 4, hydro: true };
        assert_eq!(lay.len(), 5 * 20 + 4 * 4 + 5 * 3);
        for k in 0..lay.len() {
            let (b, i, j) = lay.coords(k);
            assert_eq!(lay.index(b, i, j), k);
        }
        let dry = Layout { hydro: false, ..lay };
        assert_eq!(dry.len(), 100);
    }

    #[test]
    fn probed_matrix_matches_matrix_free_operator() {
        for hydro in [true, false] {
            let (_, _, sys, mut rng) = system(9, 7, hydro, 3);
            let entries = sys.assemble();
            let n = sys.dim();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; n];
            sys.apply(&x, &mut y);
            let mut z = vec![0.0; n];
            for &(r, c, v) in &entries {
                z[r] += v * x[c];
            }
            let err = y.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9 * solver::norm(&y), "hydro={hydro}: {err}");
        }
    }

    #[test]
    fn convection_is_skew() {
        let (g, _, sys, mut rng) = system(12, 10, true, 7);
        let mut u = g.zeros(Location::EdgeEw);
        let mut v = g.zeros(Location::EdgeNs);
        for x in u.data_mut().iter_mut().chain(v.data_mut()) {
            *x = rng.gen_range(-1.0..1.0);
        }
        g.apply_velocity_bc(&mut u, &mut v).unwrap();
        let (cu, cv) = sys.convection(&u, &v);
        let s = g.inner(&cu, &u).unwrap() + g.inner(&cv, &v).unwrap();
        let scale = g.norm(&cu).unwrap() * g.norm(&u).unwrap();
        assert!(s.abs() < 1e-12 * scale.max(1.0), "{s}");
    }

    #[test]
    fn frozen_surrogate_equals_operator_for_uniform_state() {
        let g = Grid::new(6, 6, 1.0, 1.0).unwrap();
        let p = params(true);
        let s =
            State::at_rest(&g, g.constant(Location::Cell, 0.4), g.constant(Location::Cell, 0.7), &p.energy).unwrap();
        let c = extrapolate(&g, &p, &s, &s).unwrap();
        let sys = StepSystem::new(&g, &p, 0.01, c);
        let (sur, _) = sys.surrogate(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mut y1, mut y2) = (vec![0.0; x.len()], vec![0.0; x.len()]);
        sys.apply(&x, &mut y1);
        sur.apply(&x, &mut y2);
        let err = y1.iter().zip(&y2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12 * solver::norm(&y1));
    }
}
