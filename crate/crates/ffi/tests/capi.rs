use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hbl_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hbl_last_error()) }.to_string_lossy().into_owned()
}

fn circle_mesh(dof: usize) -> *mut HblMesh {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { hbl_mesh_new(HblGeometry::Circle, 1.0, 0.0, dof, &mut mesh) }, HblStatus::Ok);
    mesh
}

#[test]
fn mesh_lifecycle() {
    let mut mesh = ptr::null_mut();
    let s = unsafe { hbl_mesh_for_wavenumber(HblGeometry::Circle, 1.0, 0.0, 10.0, 10.0, &mut mesh) };
    assert_eq!(s, HblStatus::Ok);
    unsafe {
        assert_eq!(hbl_mesh_dof(mesh), 100);
        assert!((hbl_mesh_h(mesh) - 2.0 * std::f64::consts::PI / 100.0).abs() < 1e-14);
        hbl_mesh_free(mesh);
        hbl_mesh_free(ptr::null_mut());
        assert_eq!(hbl_mesh_dof(ptr::null()), 0);
    }
    assert!(unsafe { CStr::from_ptr(hbl_version()) }.to_str().unwrap().starts_with("0."));
}

#[test]
fn errors_map_to_status_codes() {
    let mut mesh = ptr::null_mut();
    let s = unsafe { hbl_mesh_new(HblGeometry::Circle, -1.0, 0.0, 10, &mut mesh) };
    assert_eq!(s, HblStatus::InvalidArgument);
    assert!(mesh.is_null());
    assert!(!last_error().is_empty());

    let s = unsafe { hbl_mesh_for_wavenumber(HblGeometry::Circle, 1.0, 0.0, 5000.0, 10.0, &mut mesh) };
    assert_eq!(s, HblStatus::Capacity);

    let s = unsafe { hbl_mesh_new(HblGeometry::Kite, 0.0, 0.0, 10, ptr::null_mut()) };
    assert_eq!(s, HblStatus::NullPointer);

    let mut op = ptr::null_mut();
    assert_eq!(unsafe { hbl_assemble(ptr::null(), HblOperatorKind::Slp, 1.0, 0.0, &mut op) }, HblStatus::NullPointer);

    let m = circle_mesh(20);
    let mut result = HblSolveResult::default();
    let s = unsafe { hbl_solve_plane_wave(m, 4.0, 0.0, 1e-5, 0, &mut result, ptr::null_mut()) };
    assert_eq!(s, HblStatus::InvalidArgument);
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { hbl_assemble(m, HblOperatorKind::Slp, 2.0, 0.0, &mut op) }, HblStatus::Ok);
    assert!(last_error().is_empty());
    let mut small = [HblComplex::default(); 3];
    assert_eq!(unsafe { hbl_operator_copy_matrix(op, small.as_mut_ptr(), 3) }, HblStatus::InvalidArgument);
    unsafe {
        hbl_operator_free(op);
        hbl_mesh_free(m);
    }
}

#[test]
fn operators_through_handles() {
    let m = circle_mesh(80);
    let (mut direct, mut indirect) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(hbl_assemble(m, HblOperatorKind::CfieDirect, 8.0, 8.0, &mut direct), HblStatus::Ok);
        assert_eq!(hbl_assemble(m, HblOperatorKind::CfieIndirect, 8.0, 8.0, &mut indirect), HblStatus::Ok);
        let n = hbl_operator_dof(direct);
        assert_eq!(n, 80);
        let mut a = vec![HblComplex::default(); n * n];
        let mut b = vec![HblComplex::default(); n * n];
        assert_eq!(hbl_operator_copy_matrix(direct, a.as_mut_ptr(), a.len()), HblStatus::Ok);
        assert_eq!(hbl_operator_copy_matrix(indirect, b.as_mut_ptr(), b.len()), HblStatus::Ok);
        // Indirect is the transpose of direct.
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (a[i * n + j], b[j * n + i]);
                assert!((x.re - y.re).abs() < 1e-12 && (x.im - y.im).abs() < 1e-12);
            }
        }
        let (mut norm, mut inv) = (0.0, 0.0);
        assert_eq!(hbl_operator_norm(direct, &mut norm), HblStatus::Ok);
        assert_eq!(hbl_operator_inverse_norm(direct, &mut inv), HblStatus::Ok);
        let mut range = HblRange::default();
        assert_eq!(hbl_operator_range(direct, &mut range), HblStatus::Ok);
        assert!(range.dist > 0.4 && range.dist <= norm * (1.0 + 1e-12));
        assert!(!range.contains_origin && range.gamma_beta < range.beta.sin());
        assert!(norm * inv >= 1.0);
        hbl_operator_free(direct);
        hbl_operator_free(indirect);
        hbl_mesh_free(m);
    }
}

#[test]
fn solve_matches_mie() {
    let m = circle_mesh(160);
    let mut result = HblSolveResult::default();
    let mut density = vec![HblComplex::default(); 160];
    let s = unsafe { hbl_solve_plane_wave(m, 16.0, 16.0, 1e-5, 0, &mut result, density.as_mut_ptr()) };
    assert_eq!(s, HblStatus::Ok, "{}", last_error());
    assert!(result.converged && result.dof == 160);
    assert!(result.mie_relative_error < 0.1);
    // Compare the middle of panel 0 with the exact density.
    let theta = std::f64::consts::PI / 160.0;
    let mut exact = HblComplex::default();
    assert_eq!(unsafe { hbl_mie_normal_derivative(16.0, 1.0, &theta, 1, &mut exact) }, HblStatus::Ok);
    let d = density[0];
    let err = ((d.re - exact.re).powi(2) + (d.im - exact.im).powi(2)).sqrt() / exact.re.hypot(exact.im);
    assert!(err < 0.2, "{err}");
    unsafe { hbl_mesh_free(m) };

    let mut kite = ptr::null_mut();
    unsafe { hbl_mesh_new(HblGeometry::Kite, 0.0, 0.0, 120, &mut kite) };
    let s = unsafe { hbl_solve_plane_wave(kite, 6.0, 6.0, 1e-5, 0, &mut result, ptr::null_mut()) };
    assert_eq!(s, HblStatus::Ok);
    assert!(result.mie_relative_error.is_nan() && result.converged);
    unsafe { hbl_mesh_free(kite) };
}

#[test]
fn hankel_wronskian() {
    let (mut h, mut dh) = (HblComplex::default(), HblComplex::default());
    assert_eq!(unsafe { hbl_hankel_h1(3, 5.0, &mut h, &mut dh) }, HblStatus::Ok);
    // J H′ − J′ H = 2i/(πx) with J = Re H.
    let w_re = h.re * dh.re - dh.re * h.re;
    let w_im = h.re * dh.im - dh.re * h.im;
    assert!(w_re.abs() < 1e-14);
    assert!((w_im - 2.0 / (5.0 * std::f64::consts::PI)).abs() < 1e-10);
    assert_eq!(unsafe { hbl_hankel_h1(0, -1.0, &mut h, &mut dh) }, HblStatus::Domain);
}

fn workspace_target() -> PathBuf {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("../../target"))
        .join("debug")
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/hbl.h");
    assert!(header.exists(), "header not generated");
    let lib = workspace_target().join("libhbl_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "hbl.h"
int main(void) {
    HblMesh *mesh = NULL;
    if (hbl_mesh_new(HBL_GEOMETRY_CIRCLE, 1.0, 0.0, 64, &mesh) != HBL_STATUS_OK) return 1;
    HblSolveResult r;
    if (hbl_solve_plane_wave(mesh, 6.0, 6.0, 1e-8, 0, &r, NULL) != HBL_STATUS_OK) return 2;
    HblMesh *bad = NULL;
    if (hbl_mesh_new(HBL_GEOMETRY_CIRCLE, -1.0, 0.0, 64, &bad) != HBL_STATUS_INVALID_ARGUMENT) return 3;
    printf("%zu %d %.6f\n", r.dof, r.converged, r.mie_relative_error);
    hbl_mesh_free(mesh);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("64 1 "), "{text}");
}
