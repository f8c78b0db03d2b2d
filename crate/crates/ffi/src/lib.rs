//! C ABI over the `binmix` simulation driver.
//!
//! Handles are opaque; every fallible call returns a [`BinmixStatus`] and
//! leaves a message retrievable with [`binmix_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use binmix::grid::{Field, Location};
use binmix::io_cli::run::{Simulation, StepRecord};
use binmix::io_cli::RunConfig;
use binmix::Error;

/// Status codes; the non-zero values from 2 to 5 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinmixStatus {
    Ok = 0,
    /// null pointer, invalid UTF-8 or a buffer of the wrong length
    InvalidArgument = 1,
    Config = 2,
    NonConvergence = 3,
    Positivity = 4,
    Io = 5,
    /// a Rust panic was caught at the boundary
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinmixField {
    Rho1 = 0,
    Rho2 = 1,
    /// x velocity on vertical edges
    U = 2,
    /// y velocity on horizontal edges
    V = 3,
    Q = 4,
}

/// Diagnostics of the most recent step (all zero except energy and masses before the first step).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BinmixDiagnostics {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub iterations: u64,
    pub residual: f64,
    pub shear: f64,
    pub volumetric: f64,
    pub mixing: f64,
    pub identity_residual: f64,
}

/// Opaque simulation handle.
pub struct BinmixSimulation {
    sim: Simulation,
    last: BinmixDiagnostics,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> BinmixStatus {
    match err.exit_code() {
        2 => BinmixStatus::Config,
        3 => BinmixStatus::NonConvergence,
        4 => BinmixStatus::Positivity,
        5 => BinmixStatus::Io,
        _ => BinmixStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (BinmixStatus, String)>) -> BinmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BinmixStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BinmixStatus::Internal
        }
    }
}

fn lift(e: Error) -> (BinmixStatus, String) {
    (status_of(&e), e.to_string())
}

fn invalid(msg: &str) -> (BinmixStatus, String) {
    (BinmixStatus::InvalidArgument, msg.to_owned())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, (BinmixStatus, String)> {
    if p.is_null() {
        return Err(invalid("null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string argument is not UTF-8"))
}

fn diagnostics_of(rec: &StepRecord) -> BinmixDiagnostics {
    BinmixDiagnostics {
        step: rec.step as u64,
        time: rec.time,
        energy: rec.energy.total(),
        kinetic: rec.energy.kinetic,
        mass1: rec.masses[0],
        mass2: rec.masses[1],
        iterations: rec.iterations as u64,
        residual: rec.residual,
        shear: rec.dissipation.shear,
        volumetric: rec.dissipation.volumetric,
        mixing: rec.dissipation.mixing,
        identity_residual: rec.identity_residual,
    }
}

fn create(cfg: RunConfig, out: *mut *mut BinmixSimulation) -> Result<(), (BinmixStatus, String)> {
    let sim = Simulation::from_config(&cfg).map_err(lift)?;
    let m = binmix::analysis::masses(sim.grid(), sim.state()).map_err(lift)?;
    let e = sim.energy();
    let last = BinmixDiagnostics {
        step: sim.state().step as u64,
        time: sim.state().t,
        energy: e.total(),
        kinetic: e.kinetic,
        mass1: m[0],
        mass2: m[1],
        ..Default::default()
    };
    let handle = Box::new(BinmixSimulation { sim, last });
    // SAFETY: `out` was checked to be non-null by the callers.
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Creates a simulation from a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer; on success
/// `*out` owns a handle to be released with [`binmix_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_from_file(
    path: *const c_char,
    out: *mut *mut BinmixSimulation,
) -> BinmixStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("null output pointer"));
        }
        let path = str_arg(path)?;
        let cfg = RunConfig::load(Path::new(path)).map_err(lift)?;
        create(cfg, out)
    })
}

/// Creates a simulation from configuration text.
///
/// # Safety
/// As [`binmix_simulation_from_file`].
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_from_text(
    text: *const c_char,
    out: *mut *mut BinmixSimulation,
) -> BinmixStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("null output pointer"));
        }
        let cfg = RunConfig::parse(str_arg(text)?).map_err(lift)?;
        create(cfg, out)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_free(sim: *mut BinmixSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` time steps. On failure the state is that of the last
/// completed step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_step(sim: *mut BinmixSimulation, steps: u64) -> BinmixStatus {
    guard(|| {
        let h = sim.as_mut().ok_or_else(|| invalid("null handle"))?;
        for _ in 0..steps {
            let rec = h.sim.step().map_err(lift)?;
            h.last = diagnostics_of(&rec);
        }
        Ok(())
    })
}

/// Copies the diagnostics of the most recent step.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_diagnostics(
    sim: *const BinmixSimulation,
    out: *mut BinmixDiagnostics,
) -> BinmixStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| invalid("null handle"))?;
        let out = out.as_mut().ok_or_else(|| invalid("null output pointer"))?;
        *out = h.last;
        Ok(())
    })
}

fn field_of(h: &BinmixSimulation, f: BinmixField) -> &Field {
    let s = h.sim.state();
    match f {
        BinmixField::Rho1 => &s.rho1,
        BinmixField::Rho2 => &s.rho2,
        BinmixField::U => &s.u,
        BinmixField::V => &s.v,
        BinmixField::Q => &s.q,
    }
}

/// Storage range copied out for a field: cells without ghosts, edges
/// including wall edges.
fn copied_shape(h: &BinmixSimulation, f: BinmixField) -> (usize, usize, usize, usize) {
    let g = h.sim.grid();
    match field_of(h, f).loc() {
        Location::Cell => (1, 1, g.nx, g.ny),
        Location::EdgeEw => (0, 1, g.nx + 1, g.ny),
        Location::EdgeNs => (1, 0, g.nx, g.ny + 1),
        Location::Vertex => (0, 0, g.nx + 1, g.ny + 1),
    }
}

/// Reports the number of columns and rows [`binmix_simulation_copy_field`] writes.
///
/// # Safety
/// `sim` must be a live handle; `nx` and `ny` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_field_shape(
    sim: *const BinmixSimulation,
    field: BinmixField,
    nx: *mut usize,
    ny: *mut usize,
) -> BinmixStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| invalid("null handle"))?;
        if nx.is_null() || ny.is_null() {
            return Err(invalid("null output pointer"));
        }
        let (_, _, cx, cy) = copied_shape(h, field);
        *nx = cx;
        *ny = cy;
        Ok(())
    })
}

/// Copies a field row-major (x fastest) into `buf`, whose length must equal
/// the product reported by [`binmix_simulation_field_shape`].
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn binmix_simulation_copy_field(
    sim: *const BinmixSimulation,
    field: BinmixField,
    buf: *mut f64,
    len: usize,
) -> BinmixStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| invalid("null handle"))?;
        if buf.is_null() {
            return Err(invalid("null buffer"));
        }
        let (i0, j0, cx, cy) = copied_shape(h, field);
        if len != cx * cy {
            return Err(invalid(&format!("buffer holds {len} values, field needs {}", cx * cy)));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        let f = field_of(h, field);
        for j in 0..cy {
            for i in 0..cx {
                out[j * cx + i] = f.get(i0 + i, j0 + j);
            }
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len - 1` bytes. Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null (to query the length) or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn binmix_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
