//! Restarted GMRES with right preconditioning, and a sparse LU wrapper used
//! as the preconditioner.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    /// `z = P^{-1} r`
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { restart: 30, max_iter: 200, rtol: 1e-10, atol: 1e-13 }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter("GMRES restart and max_iter must be positive".into()));
        }
        if !(self.rtol >= 0.0 && self.atol >= 0.0) || (self.rtol == 0.0 && self.atol == 0.0) {
            return Err(Error::InvalidParameter("GMRES tolerances must be non-negative and not both zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate (absolute if `b = 0`)
    pub residual: f64,
    pub converged: bool,
}

/// Sequential dot product; the fixed summation order keeps runs reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn gmres(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> SolveReport {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return SolveReport { iterations: 0, residual: 0.0, converged: true };
    }
    let tol = (cfg.rtol * bnorm).max(cfg.atol);
    let m = cfg.restart;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn, mut g) = (vec![0.0; m], vec![0.0; m], vec![0.0; m + 1]);
    let mut iterations = 0;
    let mut rnorm = residual(op, b, x, &mut r);

    while rnorm > tol && iterations < cfg.max_iter {
        basis.clear();
        zs.clear();
        g.fill(0.0);
        g[0] = rnorm;
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut k = 0;
        while k < m && iterations < cfg.max_iter {
            let mut z = vec![0.0; n];
            pc.apply(&basis[k], &mut z);
            op.apply(&z, &mut w);
            zs.push(z);
            iterations += 1;
            for (i, vi) in basis.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / d;
                sn[k] = h[k + 1][k] / d;
            }
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if g[k].abs() <= tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&zs) {
            for (xj, zj) in x.iter_mut().zip(zi) {
                *xj += yi * zj;
            }
        }
        let prev = rnorm;
        rnorm = residual(op, b, x, &mut r);
        if k == 0 || (rnorm >= prev && rnorm > tol) {
            // stagnation: no further progress is possible with this preconditioner
            break;
        }
    }
    SolveReport { iterations, residual: rnorm / bnorm, converged: rnorm <= tol }
}

/// Sparse LU factorisation with partial pivoting, applied as `P^{-1}`.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    /// Factors the `n x n` matrix given by `(row, col, value)` triplets;
    /// duplicates are summed.
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let trips: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Factorisation(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Factorisation(format!("{e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

impl Preconditioner for SparseLu {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        let mat = faer::MatMut::from_column_major_slice_mut(z, self.n, 1);
        self.lu.solve_in_place(mat);
    }
}
