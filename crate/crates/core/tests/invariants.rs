//! Property tests for structural invariants that hold for every input.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use hbl::analytic::{circle_mode_eigenvalue, MieSolution, ModeOperator};
use hbl::assembly::{assemble, combined_direct, combined_indirect, OperatorKind};
use hbl::config::{MeshRule, StudyConfig};
use hbl::geometry::{PanelMesh, ParamCurve};
use hbl::krylov::{gamma_beta, gmres, range_estimate};
use hbl::linalg::{dot, norm2, CMatrix};
use hbl::probes::{bump, probe_exponent_fit, ProbeGeometry, DEFAULT_M};
use hbl::specfun::{adlp_kernel_2d, dlp_kernel_2d, green_2d, hankel_h1};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

/// Deterministic pseudo-random complex entries in [-1, 1]².
fn lcg_matrix(n: usize, seed: u64, scale: f64) -> CMatrix {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let data = (0..n * n).map(|_| C64::new(next(), next()) * scale).collect();
    CMatrix::from_row_major(n, n, data).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn hankel_wronskian(n in 0i64..60, x in 0.05f64..150.0) {
        let h = hankel_h1(n, x).unwrap();
        // Im(conj(H) H′) = J Y′ − J′ Y = 2/(πx).
        let w = (h.value.conj() * h.derivative).im;
        prop_assert!((w * PI * x / 2.0 - 1.0).abs() < 1e-9, "{w}");
    }

    #[test]
    fn hankel_three_term_recurrence(n in 1i64..60, x in 0.5f64..150.0) {
        let (a, b, c) = (hankel_h1(n - 1, x).unwrap(), hankel_h1(n, x).unwrap(), hankel_h1(n + 1, x).unwrap());
        let lhs = a.value + c.value;
        let rhs = b.value * (2.0 * n as f64 / x);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (lhs.norm() + rhs.norm()));
    }

    #[test]
    fn kernels_are_dual(k in 0.5f64..80.0, x in prop::array::uniform2(-2.0f64..2.0), y in prop::array::uniform2(-2.0f64..2.0), t in 0.0f64..(2.0 * PI)) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-3);
        let n = [t.cos(), t.sin()];
        let d = dlp_kernel_2d(k, x, y, n).unwrap();
        let a = adlp_kernel_2d(k, y, x, n).unwrap();
        prop_assert!((d - a).norm() <= 1e-12 * d.norm().max(1e-300));
        // The double-layer kernel is ∂Φ/∂n_y with Φ = (i/4) H₀(kr).
        let s = 1e-6;
        let y2 = [y[0] + s * n[0], y[1] + s * n[1]];
        let r = |p: [f64; 2]| (x[0] - p[0]).hypot(x[1] - p[1]);
        let fd = (green_2d(k, r(y2)).unwrap() - green_2d(k, r(y)).unwrap()) / s;
        prop_assert!((fd - d).norm() <= 1e-4 * (1.0 + d.norm()) * (1.0 + k / r(y)));
    }

    #[test]
    fn circle_matrices_are_circulant(k in 1.0f64..12.0, dof in 16usize..48) {
        let mesh = PanelMesh::with_dof(ParamCurve::circle(1.0).unwrap(), dof).unwrap();
        for kind in [OperatorKind::Slp, OperatorKind::Dlp] {
            let a = assemble(kind, &mesh, k).unwrap().matrix;
            let scale = a.max_abs();
            for i in 0..dof {
                for j in 0..dof {
                    let e = a.row((i + 1) % dof)[(j + 1) % dof] - a.row(i)[j];
                    prop_assert!(e.norm() <= 1e-9 * scale, "{kind:?} ({i},{j}) {}", e.norm());
                }
            }
        }
    }

    #[test]
    fn indirect_is_transpose_of_direct(k in 1.0f64..10.0, eta_factor in -1.5f64..1.5, dof in 12usize..40) {
        let mesh = PanelMesh::with_dof(ParamCurve::kite(), dof).unwrap();
        let eta = eta_factor * k;
        let a = combined_direct(&mesh, k, eta).unwrap().matrix;
        let b = combined_indirect(&mesh, k, eta).unwrap().matrix.transpose();
        let mut d = a.clone();
        d.add_scaled(C64::new(-1.0, 0.0), &b);
        prop_assert!(d.max_abs() <= 1e-13 * a.max_abs());
    }

    #[test]
    fn gmres_residuals_never_increase(n in 4usize..40, seed in any::<u64>(), scale in 0.0f64..0.08) {
        let mut a = lcg_matrix(n, seed, scale);
        a.add_scaled(C64::new(1.0, 0.0), &CMatrix::identity(n));
        let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), 1.0)).collect();
        let t = gmres(|x, y| a.matvec(x, y), &b, 1e-10, n).unwrap();
        prop_assert!(t.converged);
        for w in t.residuals.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(t.true_residual < 1e-8);
    }

    #[test]
    fn rayleigh_quotients_respect_range(n in 4usize..30, seed in any::<u64>(), scale in 0.0f64..0.05) {
        let mut a = lcg_matrix(n, seed, scale);
        a.add_scaled(C64::new(0.5, 0.5), &CMatrix::identity(n));
        let r = range_estimate(&a).unwrap();
        prop_assert!(!r.contains_origin);
        prop_assert!(r.dist <= r.norm * (1.0 + 1e-10));
        prop_assert!(r.gamma_beta < r.sin_beta);
        for s in 0..8u64 {
            let v: Vec<C64> = lcg_matrix(n, seed ^ (s + 1), 1.0).row(0).to_vec();
            let nv = norm2(&v);
            let q = dot(&v, &a.apply(&v)) / (nv * nv);
            prop_assert!(q.norm() >= r.dist * (1.0 - 1e-6), "{} < {}", q.norm(), r.dist);
            prop_assert!(q.norm() <= r.norm * (1.0 + 1e-10));
        }
    }

    #[test]
    fn gamma_beta_below_sine(beta in 1e-6f64..(PI / 2.0 - 1e-9)) {
        prop_assert!(gamma_beta(beta) < beta.sin());
    }

    #[test]
    fn mie_density_is_symmetric(k in 0.5f64..60.0, theta in 0.0f64..PI) {
        let m = MieSolution::new(k, 1.0, 0.0).unwrap();
        let (a, b) = (m.normal_derivative(theta), m.normal_derivative(-theta));
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn mode_eigenvalues_even_in_n(k in 0.5f64..60.0, n in 0i64..80) {
        for which in [ModeOperator::Slp, ModeOperator::Dlp] {
            let a = circle_mode_eigenvalue(which, n, k, 1.0).unwrap();
            let b = circle_mode_eigenvalue(which, -n, k, 1.0).unwrap();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn bump_is_a_partition_profile(t in -3.0f64..3.0) {
        let b = bump(t);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert_eq!(b, bump(-t));
        if t.abs() <= 1.0 { prop_assert_eq!(b, 1.0); }
        if t.abs() >= 2.0 { prop_assert_eq!(b, 0.0); }
    }

    #[test]
    fn hk43_dof_grows_with_k(k in 8.0f64..100.0, dk in 0.5f64..20.0) {
        let cfg = StudyConfig::parse("study = qo\nmesh_rule = hk43\n").unwrap();
        let curve = ParamCurve::circle(1.0).unwrap();
        let a = cfg.dof_for(&curve, k, MeshRule::Hk43, 10.0).unwrap();
        let b = cfg.dof_for(&curve, k + dk, MeshRule::Hk43, 10.0).unwrap();
        prop_assert!(b >= a);
        // h k^{4/3} stays fixed up to rounding of the panel count.
        let c = |dof: usize, k: f64| 2.0 * PI / dof as f64 * k.powf(4.0 / 3.0);
        prop_assert!((c(a, k) / c(b, k + dk) - 1.0).abs() < 2.0 / a as f64 + 1e-12);
    }
}

#[test]
fn probe_exponents_insensitive_to_cutoff_width() {
    let ks = [32.0, 64.0, 128.0, 256.0];
    for g in [ProbeGeometry::Segment, ProbeGeometry::Parabola] {
        for derivative in [false, true] {
            let a = probe_exponent_fit(g, derivative, &ks, 0.05, DEFAULT_M).unwrap();
            let b = probe_exponent_fit(g, derivative, &ks, 0.1, DEFAULT_M).unwrap();
            assert!((a.fit.slope - b.fit.slope).abs() < 0.05, "{g:?} {derivative}: {} vs {}", a.fit.slope, b.fit.slope);
        }
    }
}
