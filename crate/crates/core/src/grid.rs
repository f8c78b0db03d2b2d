//! Staggered MAC grid: storage, averaging and difference operators, boundary
//! ghosts and the weighted discrete inner products.
//!
//! Cell `(i, j)` has centre `((i - 1/2) hx, (j - 1/2) hy)` for `i in 0..=nx+1`,
//! ghosts included. East-west edge slot `i` sits at `x = i hx` (the edge
//! `i + 1/2` in half-integer notation shifted by one), north-south slot `j`
//! at `y = j hy`, vertices at `(i hx, j hy)`.
//!
//! In each direction a location is either centred (`nx + 2` slots) or on
//! faces (`nx + 1` slots). Averaging or differencing along an axis always maps
//! to the dual arrangement along that axis, so `avg_x` of a cell field is the
//! edge average `A_x` and `avg_x` of an east-west edge field is the contracting
//! `a_x`. Face-to-centre results leave the ghost slots at zero.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Cell,
    EdgeEw,
    EdgeNs,
    Vertex,
}

impl Location {
    fn x_centred(self) -> bool {
        matches!(self, Location::Cell | Location::EdgeNs)
    }

    fn y_centred(self) -> bool {
        matches!(self, Location::Cell | Location::EdgeEw)
    }

    fn from_centring(xc: bool, yc: bool) -> Self {
        match (xc, yc) {
            (true, true) => Location::Cell,
            (false, true) => Location::EdgeEw,
            (true, false) => Location::EdgeNs,
            (false, false) => Location::Vertex,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2x2 cells, got {nx}x{ny}")));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("domain lengths must be positive, got {lx} x {ly}")));
        }
        Ok(Grid { nx, ny, lx, ly, x0: 0.0, y0: 0.0 })
    }

    pub fn with_origin(mut self, x0: f64, y0: f64) -> Self {
        self.x0 = x0;
        self.y0 = y0;
        self
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn extent(&self, loc: Location) -> (usize, usize) {
        let sx = if loc.x_centred() { self.nx + 2 } else { self.nx + 1 };
        let sy = if loc.y_centred() { self.ny + 2 } else { self.ny + 1 };
        (sx, sy)
    }

    /// Physical x coordinate of storage slot `i` for the given location.
    pub fn x_of(&self, loc: Location, i: usize) -> f64 {
        if loc.x_centred() {
            self.x0 + (i as f64 - 0.5) * self.hx()
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    pub fn y_of(&self, loc: Location, j: usize) -> f64 {
        if loc.y_centred() {
            self.y0 + (j as f64 - 0.5) * self.hy()
        } else {
            self.y0 + j as f64 * self.hy()
        }
    }

    pub fn zeros(&self, loc: Location) -> Field {
        let (sx, sy) = self.extent(loc);
        Field { loc, sx, sy, data: vec![0.0; sx * sy] }
    }

    pub fn constant(&self, loc: Location, value: f64) -> Field {
        let mut f = self.zeros(loc);
        f.data.fill(value);
        f
    }

    /// Samples `f(x, y)` at every storage slot, ghosts included.
    pub fn sample(&self, loc: Location, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut out = self.zeros(loc);
        for j in 0..out.sy {
            let y = self.y_of(loc, j);
            for i in 0..out.sx {
                out.data[j * out.sx + i] = f(self.x_of(loc, i), y);
            }
        }
        out
    }

    /// Builds a field from raw row-major storage.
    pub fn field_from_vec(&self, loc: Location, data: Vec<f64>) -> Result<Field> {
        let (sx, sy) = self.extent(loc);
        if data.len() != sx * sy {
            return Err(Error::ShapeMismatch(format!(
                "{loc:?} field on {}x{} grid needs {} values, got {}",
                self.nx,
                self.ny,
                sx * sy,
                data.len()
            )));
        }
        Ok(Field { loc, sx, sy, data })
    }

    /// Index ranges of the degrees of freedom of a location: cells interior,
    /// velocities on interior edges, vertices everywhere.
    pub fn interior(&self, loc: Location) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        match loc {
            Location::Cell => (1..=self.nx, 1..=self.ny),
            Location::EdgeEw => (1..=self.nx - 1, 1..=self.ny),
            Location::EdgeNs => (1..=self.nx, 1..=self.ny - 1),
            Location::Vertex => (0..=self.nx, 0..=self.ny),
        }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if (f.sx, f.sy) != self.extent(f.loc) {
            return Err(Error::ShapeMismatch(format!(
                "{:?} field of extent {}x{} does not belong to a {}x{} grid",
                f.loc, f.sx, f.sy, self.nx, self.ny
            )));
        }
        Ok(())
    }

    fn same(&self, a: &Field, b: &Field) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a.loc != b.loc {
            return Err(Error::LocationMismatch { expected: a.loc, found: b.loc });
        }
        Ok(())
    }

    fn stencil(&self, f: &Field, axis: Axis, diff: bool) -> Result<Field> {
        self.check(f)?;
        let (xc, yc) = (f.loc.x_centred(), f.loc.y_centred());
        let (loc, centred, h) = match axis {
            Axis::X => (Location::from_centring(!xc, yc), xc, self.hx()),
            Axis::Y => (Location::from_centring(xc, !yc), yc, self.hy()),
        };
        let mut out = self.zeros(loc);
        let (c0, c1) = if diff { (-1.0 / h, 1.0 / h) } else { (0.5, 0.5) };
        let (sx, osx) = (f.sx, out.sx);
        match (axis, centred) {
            // centres -> faces: out[k] = in[k] (+) in[k + 1]
            (Axis::X, true) => {
                for j in 0..out.sy {
                    for i in 0..osx {
                        out.data[j * osx + i] = c0 * f.data[j * sx + i] + c1 * f.data[j * sx + i + 1];
                    }
                }
            }
            // faces -> centres: out[k] = in[k - 1] (+) in[k], ghosts zero
            (Axis::X, false) => {
                for j in 0..out.sy {
                    for i in 1..osx - 1 {
                        out.data[j * osx + i] = c0 * f.data[j * sx + i - 1] + c1 * f.data[j * sx + i];
                    }
                }
            }
            (Axis::Y, true) => {
                for j in 0..out.sy {
                    for i in 0..osx {
                        out.data[j * osx + i] = c0 * f.data[j * sx + i] + c1 * f.data[(j + 1) * sx + i];
                    }
                }
            }
            (Axis::Y, false) => {
                for j in 1..out.sy - 1 {
                    for i in 0..osx {
                        out.data[j * osx + i] = c0 * f.data[(j - 1) * sx + i] + c1 * f.data[j * sx + i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Two-point average along `axis` onto the dual location.
    pub fn avg(&self, axis: Axis, f: &Field) -> Result<Field> {
        self.stencil(f, axis, false)
    }

    /// Two-point difference along `axis` onto the dual location.
    pub fn diff(&self, axis: Axis, f: &Field) -> Result<Field> {
        self.stencil(f, axis, true)
    }

    pub fn avg_x(&self, f: &Field) -> Field {
        self.avg(Axis::X, f).expect("field from this grid")
    }

    pub fn avg_y(&self, f: &Field) -> Field {
        self.avg(Axis::Y, f).expect("field from this grid")
    }

    pub fn diff_x(&self, f: &Field) -> Field {
        self.diff(Axis::X, f).expect("field from this grid")
    }

    pub fn diff_y(&self, f: &Field) -> Field {
        self.diff(Axis::Y, f).expect("field from this grid")
    }

    /// Five-point Laplacian. Cell fields use `d_x D_x + d_y D_y`, east-west
    /// edges `D_x d_x + d_y D_y`, north-south edges `d_x D_x + D_y d_y`.
    /// Only the degrees of freedom (see [`Grid::interior`]) are meaningful.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        if f.loc == Location::Vertex {
            return Err(Error::LocationMismatch { expected: Location::Cell, found: Location::Vertex });
        }
        let sx = f.sx;
        let (ihx2, ihy2) = (1.0 / (self.hx() * self.hx()), 1.0 / (self.hy() * self.hy()));
        let mut out = self.zeros(f.loc);
        let (ir, jr) = self.interior(f.loc);
        for j in jr {
            for i in ir.clone() {
                let k = j * sx + i;
                let c = f.data[k];
                out.data[k] = (f.data[k - 1] - 2.0 * c + f.data[k + 1]) * ihx2
                    + (f.data[k - sx] - 2.0 * c + f.data[k + sx]) * ihy2;
            }
        }
        Ok(out)
    }

    /// Homogeneous Neumann ghosts for a cell field.
    pub fn apply_neumann(&self, f: &mut Field) -> Result<()> {
        self.check(f)?;
        if f.loc != Location::Cell {
            return Err(Error::LocationMismatch { expected: Location::Cell, found: f.loc });
        }
        let (nx, ny, sx) = (self.nx, self.ny, f.sx);
        for j in 1..=ny {
            f.data[j * sx] = f.data[j * sx + 1];
            f.data[j * sx + nx + 1] = f.data[j * sx + nx];
        }
        for i in 0..=nx + 1 {
            f.data[i] = f.data[sx + i];
            f.data[(ny + 1) * sx + i] = f.data[ny * sx + i];
        }
        Ok(())
    }

    /// No-slip walls: zero normal velocity on the boundary edges and odd
    /// reflection of the tangential component into the ghost row or column.
    pub fn apply_velocity_bc(&self, u: &mut Field, v: &mut Field) -> Result<()> {
        self.check(u)?;
        self.check(v)?;
        if u.loc != Location::EdgeEw {
            return Err(Error::LocationMismatch { expected: Location::EdgeEw, found: u.loc });
        }
        if v.loc != Location::EdgeNs {
            return Err(Error::LocationMismatch { expected: Location::EdgeNs, found: v.loc });
        }
        let (nx, ny) = (self.nx, self.ny);
        let sx = u.sx;
        for j in 0..=ny + 1 {
            u.data[j * sx] = 0.0;
            u.data[j * sx + nx] = 0.0;
        }
        for i in 0..=nx {
            u.data[i] = -u.data[sx + i];
            u.data[(ny + 1) * sx + i] = -u.data[ny * sx + i];
        }
        let sx = v.sx;
        for i in 0..=nx + 1 {
            v.data[i] = 0.0;
            v.data[ny * sx + i] = 0.0;
        }
        for j in 0..=ny {
            v.data[j * sx] = -v.data[j * sx + 1];
            v.data[j * sx + nx + 1] = -v.data[j * sx + nx];
        }
        Ok(())
    }

    /// Weighted discrete inner product matching the location: interior cells;
    /// edges with half weight on boundary edges; vertices with half weight on
    /// boundary edges and a quarter at corners. All scaled by `hx hy`.
    pub fn inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.same(a, b)?;
        let (nx, ny, sx) = (self.nx, self.ny, a.sx);
        let w = |k: usize, n: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
        let mut s = 0.0;
        match a.loc {
            Location::Cell => {
                for j in 1..=ny {
                    for i in 1..=nx {
                        s += a.data[j * sx + i] * b.data[j * sx + i];
                    }
                }
            }
            Location::EdgeEw => {
                for j in 1..=ny {
                    for i in 0..=nx {
                        s += w(i, nx) * a.data[j * sx + i] * b.data[j * sx + i];
                    }
                }
            }
            Location::EdgeNs => {
                for j in 0..=ny {
                    let wj = w(j, ny);
                    for i in 1..=nx {
                        s += wj * a.data[j * sx + i] * b.data[j * sx + i];
                    }
                }
            }
            Location::Vertex => {
                for j in 0..=ny {
                    let wj = w(j, ny);
                    for i in 0..=nx {
                        s += wj * w(i, nx) * a.data[j * sx + i] * b.data[j * sx + i];
                    }
                }
            }
        }
        Ok(s * self.cell_area())
    }

    pub fn norm(&self, a: &Field) -> Result<f64> {
        Ok(self.inner(a, a)?.sqrt())
    }

    /// Integral of a cell field over the interior, `(phi, 1)`.
    pub fn integral(&self, a: &Field) -> Result<f64> {
        self.check(a)?;
        if a.loc != Location::Cell {
            return Err(Error::LocationMismatch { expected: Location::Cell, found: a.loc });
        }
        let it = (1..=self.ny).flat_map(|j| (1..=self.nx).map(move |i| (i, j)));
        Ok(compensated_sum(it.map(|(i, j)| a.data[j * a.sx + i])) * self.cell_area())
    }

    /// Discrete gradient inner product `[D_x phi, D_x psi] + [D_y phi, D_y psi]`
    /// of two cell fields (ghosts must already be set).
    pub fn grad_inner(&self, phi: &Field, psi: &Field) -> Result<f64> {
        self.same(phi, psi)?;
        if phi.loc != Location::Cell {
            return Err(Error::LocationMismatch { expected: Location::Cell, found: phi.loc });
        }
        let (dxa, dxb) = (self.diff_x(phi), self.diff_x(psi));
        let (dya, dyb) = (self.diff_y(phi), self.diff_y(psi));
        Ok(self.inner(&dxa, &dxb)? + self.inner(&dya, &dyb)?)
    }

    /// Restriction of a field on the grid twice as fine in both directions to
    /// this grid: cell averages for cells, face averages for edges.
    pub fn restrict_from(&self, fine_grid: &Grid, fine: &Field) -> Result<Field> {
        fine_grid.check(fine)?;
        if fine_grid.nx != 2 * self.nx || fine_grid.ny != 2 * self.ny {
            return Err(Error::ShapeMismatch(format!(
                "restriction needs a {}x{} fine grid, got {}x{}",
                2 * self.nx,
                2 * self.ny,
                fine_grid.nx,
                fine_grid.ny
            )));
        }
        let mut out = self.zeros(fine.loc);
        let (ir, jr) = match fine.loc {
            Location::Cell => (1..=self.nx, 1..=self.ny),
            Location::EdgeEw => (0..=self.nx, 1..=self.ny),
            Location::EdgeNs => (1..=self.nx, 0..=self.ny),
            Location::Vertex => (0..=self.nx, 0..=self.ny),
        };
        let fx = fine.sx;
        for j in jr {
            for i in ir.clone() {
                let v = match fine.loc {
                    Location::Cell => {
                        let (a, b) = (2 * i - 1, 2 * j - 1);
                        0.25 * (fine.data[b * fx + a]
                            + fine.data[b * fx + a + 1]
                            + fine.data[(b + 1) * fx + a]
                            + fine.data[(b + 1) * fx + a + 1])
                    }
                    Location::EdgeEw => {
                        let (a, b) = (2 * i, 2 * j - 1);
                        0.5 * (fine.data[b * fx + a] + fine.data[(b + 1) * fx + a])
                    }
                    Location::EdgeNs => {
                        let (a, b) = (2 * i - 1, 2 * j);
                        0.5 * (fine.data[b * fx + a] + fine.data[b * fx + a + 1])
                    }
                    Location::Vertex => fine.data[2 * j * fx + 2 * i],
                };
                out.data[j * out.sx + i] = v;
            }
        }
        Ok(out)
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// A grid function at one staggered location, ghosts included.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    loc: Location,
    sx: usize,
    sy: usize,
    data: Vec<f64>,
}

impl Field {
    #[inline]
    pub fn loc(&self) -> Location {
        self.loc
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.sx, self.sy)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.sx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.sx + i] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { loc: self.loc, sx: self.sx, sy: self.sy, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Pointwise combination of two fields at the same location.
    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.loc, other.loc, "pointwise op on different locations");
        assert_eq!(self.data.len(), other.data.len());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Field { loc: self.loc, sx: self.sx, sy: self.sy, data }
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|a| a * s)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Field) {
        assert_eq!(self.loc, other.loc, "axpy on different locations");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}
