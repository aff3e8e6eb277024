//! C ABI over the `hbl` core.
//!
//! Every function returns an [`HblStatus`]; on failure the message is
//! available from [`hbl_last_error`] on the same thread. Objects are opaque
//! handles released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hbl::assembly::{assemble_layers, DiscreteOperator};
use hbl::geometry::{ParamCurve, PanelMesh};
use hbl::krylov::{inverse_norm, operator_norm, mass_weighted, range_estimate, NormMetric};
use hbl::specfun::hankel_h1;
use hbl::studies::{compare_with_mie, solve_plane_wave, Discretization};
use hbl::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HblStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Capacity = 4,
    Singularity = 5,
    Precision = 6,
    Numerical = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HblGeometry {
    /// `a` is the radius.
    Circle = 0,
    /// `a`, `b` are the semi-axes.
    Ellipse = 1,
    Kite = 2,
    Segment = 3,
    Parabola = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HblOperatorKind {
    Slp = 0,
    Dlp = 1,
    Adlp = 2,
    /// `½M + D′ − iηS`.
    CfieDirect = 3,
    /// `½M + D − iηS`.
    CfieIndirect = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HblComplex {
    pub re: f64,
    pub im: f64,
}

/// Field-of-values summary in the mass-weighted metric.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HblRange {
    pub norm: f64,
    pub dist: f64,
    pub cos_beta: f64,
    pub beta: f64,
    pub gamma_beta: f64,
    pub contains_origin: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HblSolveResult {
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    /// NaN unless the mesh is a circle.
    pub mie_relative_error: f64,
}

/// Panel mesh handle.
pub struct HblMesh {
    mesh: PanelMesh,
}

/// Galerkin matrix handle.
pub struct HblOperator {
    op: DiscreteOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HblStatus {
    match e {
        Error::Domain(_) => HblStatus::Domain,
        Error::Capacity(_) => HblStatus::Capacity,
        Error::Singularity(_) | Error::NearSingular(_) => HblStatus::Singularity,
        Error::Precision(_) => HblStatus::Precision,
        Error::Numerical(_) | Error::Assembly { .. } => HblStatus::Numerical,
        Error::Unsupported(_) => HblStatus::Unsupported,
        Error::Config { .. } | Error::InvalidArgument(_) => HblStatus::InvalidArgument,
        Error::Io(_) | Error::Json(_) => HblStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (HblStatus, String)>) -> HblStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            HblStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside hbl");
            HblStatus::Panic
        }
    }
}

fn core(e: Error) -> (HblStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HblStatus, String) {
    (HblStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HblStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), (HblStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn curve(geometry: HblGeometry, a: f64, b: f64) -> Result<ParamCurve, Error> {
    Ok(match geometry {
        HblGeometry::Circle => ParamCurve::circle(a)?,
        HblGeometry::Ellipse => ParamCurve::ellipse(a, b)?,
        HblGeometry::Kite => ParamCurve::kite(),
        HblGeometry::Segment => ParamCurve::segment(),
        HblGeometry::Parabola => ParamCurve::parabola(),
    })
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hbl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hbl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Mesh with exactly `dof` equal-arc-length panels.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_mesh_new(
    geometry: HblGeometry,
    a: f64,
    b: f64,
    dof: usize,
    out: *mut *mut HblMesh,
) -> HblStatus {
    guard(|| {
        let mesh = PanelMesh::with_dof(curve(geometry, a, b).map_err(core)?, dof).map_err(core)?;
        write_out(out, Box::into_raw(Box::new(HblMesh { mesh })), "out")
    })
}

/// Mesh with `h ≤ 2π/(ppw·k)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_mesh_for_wavenumber(
    geometry: HblGeometry,
    a: f64,
    b: f64,
    k: f64,
    ppw: f64,
    out: *mut *mut HblMesh,
) -> HblStatus {
    guard(|| {
        let mesh = PanelMesh::build(curve(geometry, a, b).map_err(core)?, k, ppw).map_err(core)?;
        write_out(out, Box::into_raw(Box::new(HblMesh { mesh })), "out")
    })
}

/// Number of panels, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hbl_mesh_dof(mesh: *const HblMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.dof())
}

/// Panel arc length, or NaN for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hbl_mesh_h(mesh: *const HblMesh) -> f64 {
    mesh.as_ref().map_or(f64::NAN, |m| m.mesh.h())
}

/// # Safety
/// `mesh` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hbl_mesh_free(mesh: *mut HblMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Assembles one Galerkin matrix. `eta` is ignored for the layer operators.
///
/// # Safety
/// `mesh` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_assemble(
    mesh: *const HblMesh,
    kind: HblOperatorKind,
    k: f64,
    eta: f64,
    out: *mut *mut HblOperator,
) -> HblStatus {
    guard(|| {
        let mesh = &borrow(mesh, "mesh")?.mesh;
        let layers = assemble_layers(mesh, k).map_err(core)?;
        let op = match kind {
            HblOperatorKind::Slp => layers.slp_operator(),
            HblOperatorKind::Dlp => layers.dlp_operator(),
            HblOperatorKind::Adlp => layers.adlp_operator(),
            HblOperatorKind::CfieDirect => layers.combined_direct(eta),
            HblOperatorKind::CfieIndirect => layers.combined_indirect(eta),
        };
        write_out(out, Box::into_raw(Box::new(HblOperator { op })), "out")
    })
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_dof(op: *const HblOperator) -> usize {
    op.as_ref().map_or(0, |o| o.op.dof())
}

/// Copies the matrix row-major into `out`, which holds `len` entries.
///
/// # Safety
/// `op` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_copy_matrix(op: *const HblOperator, out: *mut HblComplex, len: usize) -> HblStatus {
    guard(|| {
        let m = &borrow(op, "operator")?.op.matrix;
        let data = m.as_slice();
        if len < data.len() {
            return Err((HblStatus::InvalidArgument, format!("buffer holds {len} entries, matrix has {}", data.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        for (i, v) in data.iter().enumerate() {
            out.add(i).write(HblComplex { re: v.re, im: v.im });
        }
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_free(op: *mut HblOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// `L²(Γ)` operator norm.
///
/// # Safety
/// `op` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_norm(op: *const HblOperator, out: *mut f64) -> HblStatus {
    guard(|| {
        let v = operator_norm(&borrow(op, "operator")?.op, NormMetric::L2).map_err(core)?;
        write_out(out, v, "out")
    })
}

/// `‖A⁻¹‖` in `L²(Γ)`.
///
/// # Safety
/// `op` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_inverse_norm(op: *const HblOperator, out: *mut f64) -> HblStatus {
    guard(|| {
        let v = inverse_norm(&borrow(op, "operator")?.op).map_err(core)?;
        write_out(out, v, "out")
    })
}

/// Distance of the numerical range from the origin.
///
/// # Safety
/// `op` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_operator_range(op: *const HblOperator, out: *mut HblRange) -> HblStatus {
    guard(|| {
        let r = range_estimate(&mass_weighted(&borrow(op, "operator")?.op)).map_err(core)?;
        let range = HblRange {
            norm: r.norm,
            dist: r.dist,
            cos_beta: r.cos_beta,
            beta: r.beta,
            gamma_beta: r.gamma_beta,
            contains_origin: r.contains_origin,
        };
        write_out(out, range, "out")
    })
}

/// Solves the direct CFIE for the plane wave along `(1, 0)` with GMRES.
/// `maxit = 0` means the number of unknowns. `density` may be null;
/// otherwise it receives `dof` coefficients.
///
/// # Safety
/// `mesh` must be a live handle, `out` valid for writes and `density` null or
/// valid for `dof` writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_solve_plane_wave(
    mesh: *const HblMesh,
    k: f64,
    eta: f64,
    tol: f64,
    maxit: usize,
    out: *mut HblSolveResult,
    density: *mut HblComplex,
) -> HblStatus {
    guard(|| {
        let mesh = borrow(mesh, "mesh")?.mesh.clone();
        if eta == 0.0 {
            return Err((HblStatus::InvalidArgument, "η = 0 does not give an invertible system".into()));
        }
        let layers = assemble_layers(&mesh, k).map_err(core)?;
        let disc = Discretization { mesh, layers };
        let sol = solve_plane_wave(&disc, eta, tol, (maxit > 0).then_some(maxit)).map_err(core)?;
        let mie = match compare_with_mie(&disc.mesh, &sol.coefficients, k) {
            Ok(c) => c.relative,
            Err(Error::Unsupported(_)) => f64::NAN,
            Err(e) => return Err(core(e)),
        };
        let result = HblSolveResult {
            dof: sol.dof,
            iterations: sol.trace.iterations,
            converged: sol.trace.converged,
            final_residual: sol.trace.final_residual(),
            mie_relative_error: mie,
        };
        write_out(out, result, "out")?;
        if !density.is_null() {
            for (i, c) in sol.coefficients.iter().enumerate() {
                density.add(i).write(HblComplex { re: c.re, im: c.im });
            }
        }
        Ok(())
    })
}

/// `H_n^{(1)}(x)` and its derivative.
///
/// # Safety
/// `value` and `derivative` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_hankel_h1(n: i64, x: f64, value: *mut HblComplex, derivative: *mut HblComplex) -> HblStatus {
    guard(|| {
        let h = hankel_h1(n, x).map_err(core)?;
        write_out(value, HblComplex { re: h.value.re, im: h.value.im }, "value")?;
        write_out(derivative, HblComplex { re: h.derivative.re, im: h.derivative.im }, "derivative")
    })
}

/// Normal derivative of the total field on the sound-soft disc of radius
/// `a` for incidence along `(1, 0)`, at `count` polar angles.
///
/// # Safety
/// `thetas` must be valid for `count` reads and `out` for `count` writes.
#[no_mangle]
pub unsafe extern "C" fn hbl_mie_normal_derivative(
    k: f64,
    a: f64,
    thetas: *const f64,
    count: usize,
    out: *mut HblComplex,
) -> HblStatus {
    guard(|| {
        if count > 0 && (thetas.is_null() || out.is_null()) {
            return Err(null("thetas or out"));
        }
        let angles = if count == 0 { &[][..] } else { std::slice::from_raw_parts(thetas, count) };
        let v = hbl::analytic::mie_normal_derivative(k, a, angles).map_err(core)?;
        for (i, c) in v.iter().enumerate() {
            out.add(i).write(HblComplex { re: c.re, im: c.im });
        }
        Ok(())
    })
}
