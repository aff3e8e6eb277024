//! Oracle-consistency suite: the exactly-forced examples of every module plus
//! the Wronskian, circulant, duality, interior-null and mode-eigenvalue
//! invariants. Backs the `selftest` subcommand.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    circle_mode_eigenvalue, dtn_ratio, eta_sign_mode_comparison, mie_normal_derivative, slp_eigenvalue_closed_form,
    MieSolution, ModeOperator, ModeTable,
};
use crate::assembly::{
    assemble_layers, direct_rhs_density, exterior_field, plane_wave, rhs_indirect_planewave,
    tangential_derivative_matrix, DiscreteFunction, DiscreteOperator,
};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::geometry::{best_approx_error, ParamCurve, PanelMesh, QuadNode};
use crate::krylov::{
    gamma_beta, gmres, inverse_norm, iteration_predictors, operator_norm, range_estimate, NormMetric, RangeEstimate,
};
use crate::linalg::CMatrix;
use crate::probes::{apply_slp_probe, ProbeGeometry, QuasimodeProbe};
use crate::report::{format_float, StudyReport};
use crate::specfun::{adlp_kernel_2d, bessel_j, dlp_kernel_2d, green_2d, hankel_h1};
use crate::studies::{run_study_with, solve_plane_wave, LayerCache, INCIDENCE};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub elapsed_ms: u64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Outcome = Result<(bool, String)>;

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn run(&mut self, module: &str, name: &str, f: impl FnOnce() -> Outcome) {
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        self.checks.push(Check { module: module.into(), name: name.into(), passed, detail });
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn rel_matrix(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut d = a.clone();
    d.add_scaled(C64::new(-1.0, 0.0), b);
    d.frobenius() / b.frobenius()
}

fn circle(dof: usize) -> Result<PanelMesh> {
    PanelMesh::with_dof(ParamCurve::circle(1.0)?, dof)
}

fn midpoints(mesh: &PanelMesh) -> Vec<f64> {
    mesh.panels().iter().map(|p| 0.5 * (p.t0 + p.t1)).collect()
}

fn specfun_checks(s: &mut Suite) {
    s.run("specfun", "J_0 at 1e-12 equals 1", || {
        let v = bessel_j(0, 1e-12)?;
        Ok(((v - 1.0).abs() <= 1e-9, format!("{v}")))
    });
    s.run("specfun", "Wronskian at (3, 5) equals 2i/(5π)", || {
        let h = hankel_h1(3, 5.0)?;
        let w = h.value.re * h.derivative - h.derivative.re * h.value;
        let expect = 2.0 * I / (5.0 * PI);
        Ok(((w - expect).norm() <= 1e-10, format!("{w}")))
    });
    s.run("specfun", "H_{−n} = (−1)ⁿ H_n", || {
        let mut worst: f64 = 0.0;
        for n in 0..=12i64 {
            for x in [0.7, 3.0, 25.0] {
                let (p, m) = (hankel_h1(n, x)?, hankel_h1(-n, x)?);
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                worst = worst.max(rel(m.value, sign * p.value));
            }
        }
        Ok((worst <= 1e-14, format!("max relative deviation {worst:.2e}")))
    });
    s.run("specfun", "green_2d(2, 0.5) equals green_2d(1, 1)", || {
        let (a, b) = (green_2d(2.0, 0.5)?, green_2d(1.0, 1.0)?);
        Ok((a == b, format!("{a} vs {b}")))
    });
    s.run("specfun", "green_2d symmetric in x and y", || {
        let (x, y): ([f64; 2], [f64; 2]) = ([0.3, -1.2], [2.1, 0.4]);
        let a = green_2d(3.0, (x[0] - y[0]).hypot(x[1] - y[1]))?;
        let b = green_2d(3.0, (y[0] - x[0]).hypot(y[1] - x[1]))?;
        Ok((a == b, format!("{a}")))
    });
    s.run("specfun", "double-layer kernel vanishes for tangential x − y", || {
        let v = dlp_kernel_2d(4.0, [2.0, 1.0], [0.5, 1.0], [0.0, 1.0])?;
        Ok((v.norm() == 0.0, format!("{v}")))
    });
    s.run("specfun", "adjoint kernel is the double-layer kernel with x and y swapped", || {
        let configs = [
            (1.3, [0.2, 0.7], [-1.1, 0.4], [0.6, 0.8]),
            (7.0, [3.0, -2.0], [0.1, 0.1], [-1.0, 0.0]),
            (0.4, [-0.5, 2.5], [1.5, 1.0], [0.28, -0.96]),
        ];
        let worst = configs
            .iter()
            .map(|&(k, x, y, n)| Ok(rel(adlp_kernel_2d(k, x, y, n)?, dlp_kernel_2d(k, y, x, n)?)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((worst <= 1e-15, format!("max relative deviation {worst:.2e}")))
    });
    s.run("specfun", "adjoint kernel vanishes for tangential n_x", || {
        let v = adlp_kernel_2d(4.0, [2.0, 1.0], [0.5, 1.0], [0.0, 1.0])?;
        Ok((v.norm() == 0.0, format!("{v}")))
    });
    s.run("specfun", "Wronskian grid n ≤ 50, x ∈ {0.5, 1, 5, 20, 100}", || {
        let mut worst: f64 = 0.0;
        for x in [0.5, 1.0, 5.0, 20.0, 100.0] {
            for n in 0..=50 {
                let h = hankel_h1(n, x)?;
                let w = h.value.re * h.derivative - h.derivative.re * h.value;
                worst = worst.max((w - 2.0 * I / (PI * x)).norm());
            }
        }
        Ok((worst <= 1e-9, format!("max residual {worst:.2e}")))
    });
}

fn geometry_checks(s: &mut Suite) {
    s.run("geometry", "unit circle, k = 10, ppw = 10 has 100 panels of width 2π/100", || {
        let m = PanelMesh::build(ParamCurve::circle(1.0)?, 10.0, 10.0)?;
        Ok((m.dof() == 100 && (m.h() - 2.0 * PI / 100.0).abs() <= 1e-14, format!("dof {} h {}", m.dof(), m.h())))
    });
    s.run("geometry", "doubling k doubles the panel count", || {
        let c = ParamCurve::circle(1.0)?;
        let (a, b) = (PanelMesh::build(c, 13.0, 10.0)?.dof(), PanelMesh::build(c, 26.0, 10.0)?.dof());
        Ok((b == 2 * a, format!("{a} → {b}")))
    });
    s.run("geometry", "constants have zero best-approximation error", || {
        let e = best_approx_error(&PanelMesh::with_dof(ParamCurve::kite(), 40)?, |_| C64::new(2.0, -1.0));
        Ok((e <= 1e-13, format!("{e:.2e}")))
    });
    s.run("geometry", "halving h halves the best-approximation error", || {
        let f = |q: &QuadNode| C64::from_polar(1.0, q.t);
        let (a, b) = (best_approx_error(&circle(40)?, f), best_approx_error(&circle(80)?, f));
        let ratio = a / b;
        Ok(((1.9..=2.1).contains(&ratio), format!("ratio {ratio:.4}")))
    });
}

fn assembly_checks(s: &mut Suite) {
    let layers = PanelMesh::build(ParamCurve::kite(), 6.0, 10.0).and_then(|m| Ok((assemble_layers(&m, 6.0)?, m)));
    let (layers, mesh) = match layers {
        Ok(v) => v,
        Err(e) => {
            s.run("assembly", "kite assembly", || Err(e));
            return;
        }
    };
    s.run("assembly", "single-layer matrix is symmetric", || {
        let d = rel_matrix(&layers.slp, &layers.slp.transpose());
        Ok((d <= 1e-10, format!("{d:.2e}")))
    });
    s.run("assembly", "adjoint double layer is the transposed double layer", || {
        let d = rel_matrix(&layers.adlp_operator().matrix, &layers.dlp.transpose());
        Ok((d <= 1e-10, format!("{d:.2e}")))
    });
    s.run("assembly", "η = 0 gives ½M + D′ exactly", || {
        let mut expect = layers.adlp_operator().matrix;
        for (j, m) in mesh.mass().iter().enumerate() {
            expect[(j, j)] += 0.5 * m;
        }
        Ok((layers.combined_direct(0.0).matrix == expect, String::new()))
    });
    s.run("assembly", "indirect matrix is the transposed direct matrix", || {
        let d = rel_matrix(&layers.combined_indirect(6.0).matrix, &layers.combined_direct(6.0).matrix.transpose());
        Ok((d <= 1e-10, format!("{d:.2e}")))
    });
    s.run("assembly", "direct data vanishes where n is parallel to the incidence, η = k", || {
        let node = QuadNode { t: 0.0, point: [0.3, -0.2], normal: [1.0, 0.0], weight: 1.0 };
        let v = direct_rhs_density(10.0, 10.0, INCIDENCE, &node);
        Ok((v.norm() == 0.0, format!("{v}")))
    });
    s.run("assembly", "direct data has magnitude η where n is orthogonal to the incidence", || {
        let node = QuadNode { t: 0.0, point: [0.3, -0.2], normal: [0.0, 1.0], weight: 1.0 };
        let v = direct_rhs_density(10.0, 7.0, INCIDENCE, &node);
        Ok(((v.norm() - 7.0).abs() <= 1e-14, format!("{}", v.norm())))
    });
    s.run("assembly", "indirect data has unit magnitude and no zero coefficient", || {
        let m = circle(100)?;
        let unit = m
            .nodes(8)
            .iter()
            .flatten()
            .all(|q| ((-plane_wave(10.0, INCIDENCE, q.point)).norm() - 1.0).abs() <= 1e-14);
        let b = rhs_indirect_planewave(&m, 10.0, INCIDENCE)?;
        let nonzero = b.coefficients.iter().all(|c| c.norm() > 0.0);
        Ok((unit && nonzero, String::new()))
    });
    s.run("assembly", "stencil annihilates constants", || {
        let d = tangential_derivative_matrix(&circle(64)?)?;
        let worst = d.apply(&vec![C64::new(3.0, -1.0); 64]).iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok((worst <= 1e-12, format!("{worst:.2e}")))
    });
    s.run("assembly", "stencil maps sin to cos within h²", || {
        let m = circle(200)?;
        let d = tangential_derivative_matrix(&m)?;
        let mids = midpoints(&m);
        let sin: Vec<C64> = mids.iter().map(|t| C64::new(t.sin(), 0.0)).collect();
        let h = m.h();
        let worst = d.apply(&sin).iter().zip(&mids).map(|(v, t)| (v.re - t.cos()).abs()).fold(0.0, f64::max);
        Ok((worst <= h * h, format!("{worst:.2e} vs h² = {:.2e}", h * h)))
    });
    s.run("assembly", "stencil symbol on e^{ins} is i sin(nh)/h", || {
        let m = circle(128)?;
        let d = tangential_derivative_matrix(&m)?;
        let mids = midpoints(&m);
        let h = m.h();
        let mut worst: f64 = 0.0;
        for n in [1.0, 5.0, 31.0] {
            let mode: Vec<C64> = mids.iter().map(|t| C64::from_polar(1.0, n * t)).collect();
            let symbol = I * (n * h).sin() / h;
            for (v, u) in d.apply(&mode).iter().zip(&mode) {
                worst = worst.max((v - symbol * u).norm());
            }
        }
        Ok((worst <= 1e-10, format!("{worst:.2e}")))
    });
    s.run("assembly", "zero density reproduces the incident field", || {
        let m = circle(60)?;
        let zero = DiscreteFunction { coefficients: vec![C64::new(0.0, 0.0); 60], mesh_id: m.id() };
        let pts = [[2.0, 0.0], [-1.5, 1.5]];
        let u = exterior_field(&m, &zero, 4.0, &pts, Some([0.0, 1.0]))?;
        Ok((u.iter().zip(&pts).all(|(v, x)| *v == plane_wave(4.0, [0.0, 1.0], *x)), String::new()))
    });
    s.run("assembly", "doubling the density doubles the scattered field", || {
        let m = circle(60)?;
        let one: Vec<C64> = (0..60).map(|j| C64::new(1.0, 0.01 * j as f64)).collect();
        let two: Vec<C64> = one.iter().map(|c| 2.0 * c).collect();
        let pts = [[2.0, 0.3], [-1.5, 1.5]];
        let a = exterior_field(&m, &DiscreteFunction { coefficients: one, mesh_id: m.id() }, 4.0, &pts, None)?;
        let b = exterior_field(&m, &DiscreteFunction { coefficients: two, mesh_id: m.id() }, 4.0, &pts, None)?;
        let worst = a.iter().zip(&b).map(|(x, y)| (2.0 * x - y).norm()).fold(0.0, f64::max);
        Ok((worst <= 1e-12, format!("{worst:.2e}")))
    });
}

/// Eigenvalue of the circulant Galerkin matrix on the discrete mode `n`,
/// divided by the p = 0 projection factor `h sinc²(nh/2)`.
fn galerkin_mode_eigenvalue(matrix: &CMatrix, mesh: &PanelMesh, n: i64) -> C64 {
    let mids = midpoints(mesh);
    let h = mesh.h();
    let mu: C64 = matrix.row(0).iter().zip(&mids).map(|(a, t)| a * C64::from_polar(1.0, n as f64 * (t - mids[0]))).sum();
    let x = 0.5 * n as f64 * h;
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    mu / (h * sinc * sinc)
}

/// Worst deviation of the Galerkin mode eigenvalues from the exact ones over
/// `|n| ≤ k`, relative to their supremum.
fn circulant_deviation(k: f64, ppw: f64) -> Result<f64> {
    let mesh = PanelMesh::build(ParamCurve::circle(1.0)?, k, ppw)?;
    let layers = assemble_layers(&mesh, k)?;
    let table = ModeTable::build(k, 1.0, k)?;
    let sup = table.sup_abs(ModeOperator::Slp);
    let mut worst: f64 = 0.0;
    for n in -(k as i64)..=(k as i64) {
        let exact = table.row(n).ok_or_else(|| Error::Numerical(format!("mode {n} missing")))?.slp;
        worst = worst.max((galerkin_mode_eigenvalue(&layers.slp, &mesh, n) - exact).norm() / sup);
    }
    Ok(worst)
}

fn invariant_checks(s: &mut Suite) {
    s.run("invariants", "circulant consistency at ppw = 10 and its decrease at ppw = 20", || {
        let (a, b) = (circulant_deviation(16.0, 10.0)?, circulant_deviation(16.0, 20.0)?);
        Ok((a <= 1e-2 && b < a, format!("{a:.3e} → {b:.3e}")))
    });
    s.run("invariants", "D equals D′ on the circle", || {
        let layers = assemble_layers(&circle(80)?, 8.0)?;
        let d = rel_matrix(&layers.dlp, &layers.dlp.transpose());
        Ok((d <= 1e-10, format!("{d:.2e}")))
    });
    s.run("invariants", "interior field of the solved density vanishes", || {
        let cache = LayerCache::new();
        let disc = cache.get(&ParamCurve::circle(1.0)?, 100, 10.0)?;
        let sol = solve_plane_wave(&disc, 10.0, 1e-10, None)?;
        let density = DiscreteFunction { coefficients: sol.coefficients, mesh_id: disc.mesh.id() };
        let mut pts = vec![[0.0, 0.0]];
        pts.extend((0..8).map(|j| {
            let t = j as f64 * PI / 4.0;
            [0.5 * t.cos(), 0.5 * t.sin()]
        }));
        let u = exterior_field(&disc.mesh, &density, 10.0, &pts, Some(INCIDENCE))?;
        let worst = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok((worst <= 5e-2, format!("max |u| = {worst:.3e}")))
    });
    s.run("invariants", "mode eigenvalues match (iπa/2) J_n H_n", || {
        let mut worst: f64 = 0.0;
        for (n, k, a) in [(0, 1.0, 1.0), (3, 5.0, 1.0), (-7, 10.0, 0.7), (40, 30.0, 1.0)] {
            let got = circle_mode_eigenvalue(ModeOperator::Slp, n, k, a)?;
            worst = worst.max(rel(got, slp_eigenvalue_closed_form(n, k, a)?));
        }
        Ok((worst <= 1e-8, format!("{worst:.2e}")))
    });
    s.run("invariants", "glancing modes carry the largest single-layer eigenvalue at k = 100", || {
        let t = ModeTable::build(100.0, 1.0, 100.0)?;
        let arg = t.rows.iter().max_by(|a, b| a.slp.norm().total_cmp(&b.slp.norm())).map(|r| r.n.abs()).unwrap_or(0);
        let off = (arg as f64 - 100.0).abs();
        Ok((off <= 5.0 * 100f64.cbrt(), format!("argmax |n| = {arg}")))
    });
    s.run("invariants", "γ_β < sin β", || {
        let ok = [0.1, 0.5, 1.0, 1.4].iter().all(|b: &f64| gamma_beta(*b) < b.sin());
        Ok((ok, String::new()))
    });
}

fn analytic_checks(s: &mut Suite) {
    s.run("analytic", "Mie total field vanishes on the boundary", || {
        let mie = MieSolution::new(10.0, 1.0, 0.0)?;
        let mut worst: f64 = 0.0;
        for j in 0..24 {
            let t = j as f64 * PI / 12.0 + 0.1;
            worst = worst.max(mie.total_field([t.cos(), t.sin()])?.norm());
        }
        Ok((worst <= 1e-10, format!("{worst:.2e}")))
    });
    s.run("analytic", "Mie normal derivative is even in θ", || {
        let v = mie_normal_derivative(12.0, 1.0, &[0.4, -0.4, 2.9, -2.9])?;
        let worst = rel(v[0], v[1]).max(rel(v[2], v[3]));
        Ok((worst <= 1e-12, format!("{worst:.2e}")))
    });
    s.run("analytic", "λ_{−n} = λ_n", || {
        let mut worst: f64 = 0.0;
        for n in [1, 4, 9] {
            let (a, b) =
                (circle_mode_eigenvalue(ModeOperator::Slp, n, 8.0, 1.0)?, circle_mode_eigenvalue(ModeOperator::Slp, -n, 8.0, 1.0)?);
            worst = worst.max((a - b).norm());
        }
        Ok((worst <= 1e-15, format!("{worst:.2e}")))
    });
    s.run("analytic", "share at k = 10 is reported", || {
        let d = eta_sign_mode_comparison(10.0, 0.9)?;
        Ok(((0.0..=1.0).contains(&d.share), format!("share {}", d.share)))
    });
    s.run("analytic", "outgoing DtN symbol has nonnegative imaginary part", || {
        let mut ok = true;
        for k in [5.0, 50.0, 150.0] {
            for n in [0, 1, 10, 49, 100, 160, 205] {
                ok &= dtn_ratio(n, k)?.im >= 0.0;
            }
        }
        Ok((ok, String::new()))
    });
}

fn krylov_checks(s: &mut Suite) {
    let c = |re: f64, im: f64| C64::new(re, im);
    s.run("krylov", "GMRES on the identity stops after one step", || {
        let id = CMatrix::identity(5);
        let b: Vec<C64> = (0..5).map(|i| c(i as f64 + 1.0, -1.0)).collect();
        let t = gmres(|x, y| id.matvec(x, y), &b, 1e-12, 50)?;
        Ok((t.iterations == 1 && t.final_residual() == 0.0, format!("m = {}, residual {}", t.iterations, t.final_residual())))
    });
    s.run("krylov", "GMRES on diag(1, 2) converges by step 2", || {
        let d = CMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let t = gmres(|x, y| d.matvec(x, y), &[c(1.0, 0.0), c(1.0, 0.0)], 1e-12, 10)?;
        Ok((t.converged && t.iterations <= 2, format!("m = {}", t.iterations)))
    });
    let half = || circle(40).map(|m| DiscreteOperator::scaled_identity(&m, 0.5));
    s.run("krylov", "½M has L² norm ½", || {
        let v = operator_norm(&half()?, NormMetric::L2)?;
        Ok(((v - 0.5).abs() <= 1e-12, format!("{v}")))
    });
    s.run("krylov", "½M has inverse norm 2", || {
        let v = inverse_norm(&half()?)?;
        Ok(((v - 2.0).abs() <= 1e-12, format!("{v}")))
    });
    s.run("krylov", "zero operator has norm 0 and no inverse", || {
        let mut op = half()?;
        op.matrix = CMatrix::zeros(40, 40);
        let v = operator_norm(&op, NormMetric::L2)?;
        let singular = matches!(inverse_norm(&op), Err(Error::Singularity(_)));
        Ok((v == 0.0 && singular, format!("norm {v}")))
    });
    s.run("krylov", "diag(1, 2): dist 1, norm 2, cos β ½", || {
        let r = range_estimate(&CMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]))?;
        let ok = (r.dist - 1.0).abs() <= 1e-8 && (r.norm - 2.0).abs() <= 1e-12 && (r.cos_beta - 0.5).abs() <= 1e-8;
        Ok((ok, format!("{} {} {}", r.dist, r.norm, r.cos_beta)))
    });
    s.run("krylov", "iI has dist 1", || {
        let r = range_estimate(&CMatrix::diagonal(&[c(0.0, 1.0); 3]))?;
        Ok(((r.dist - 1.0).abs() <= 1e-8, format!("{}", r.dist)))
    });
    s.run("krylov", "β = 0 predicts one Elman step", || {
        let p = iteration_predictors(&RangeEstimate::from_parts(1.0, 1.0, 0.0, false), 1e-5)?;
        Ok((p.map(|p| p.m_elman) == Some(1), format!("{p:?}")))
    });
}

fn study_checks(s: &mut Suite, cache: &LayerCache) {
    s.run("probes", "scaling the density leaves the ratio unchanged", || {
        let p = QuasimodeProbe::new(ProbeGeometry::Segment, 32.0);
        let (a, b) = (apply_slp_probe(&p, false)?, apply_slp_probe(&QuasimodeProbe { amplitude: 2.0, ..p }, false)?);
        Ok(((a - b).abs() <= 1e-12 * a, format!("{a} vs {b}")))
    });
    s.run("studies", "quasi-optimality ratio ≥ 1 for every run", || {
        let r = run_study_with(&StudyConfig::parse("study = qo\nk_list = 8, 16")?, cache)?;
        let ratios: Vec<f64> = ["qo_ratio", "qo_ratio_refined", "qo_ratio_hk43"]
            .iter()
            .flat_map(|c| r.column(c).unwrap_or_default())
            .flatten()
            .collect();
        Ok((ratios.iter().all(|q| *q >= 1.0), format!("{ratios:.4?}")))
    });
    s.run("studies", "residual curve at k = 64 is nonincreasing", || {
        let disc = cache.get(&ParamCurve::circle(1.0)?, 640, 64.0)?;
        let t = solve_plane_wave(&disc, 64.0, 1e-5, None)?.trace;
        Ok((t.residuals.windows(2).all(|w| w[1] <= w[0]), format!("{} steps", t.iterations)))
    });
    s.run("studies", "η = ±k systems differ", || {
        let disc = cache.get(&ParamCurve::circle(1.0)?, 160, 16.0)?;
        let gap = rel_matrix(&disc.layers.combined_direct(16.0).matrix, &disc.layers.combined_direct(-16.0).matrix);
        Ok((gap > 0.0, format!("{gap:.3e}")))
    });
}

fn report_checks(s: &mut Suite, cache: &LayerCache) {
    let single = || StudyConfig::parse("study = dtn\nk = 50").and_then(|c| run_study_with(&c, cache));
    s.run("cli", "single-k table has exactly 2 lines", || {
        let r = &single()?;
        let n = r.table_csv().lines().count();
        Ok((n == 2, format!("{n} lines")))
    });
    s.run("cli", "report JSON round-trips bit-exactly", || {
        let r = &single()?;
        let back: StudyReport = serde_json::from_str(&serde_json::to_string_pretty(r)?)?;
        Ok((back == *r, String::new()))
    });
    s.run("cli", "CSV floats carry 17 significant digits", || {
        let v = 0.1 + 0.2;
        let text = format_float(v);
        let digits = text.split('e').next().unwrap_or("").chars().filter(char::is_ascii_digit).count();
        Ok((digits == 17 && text.parse::<f64>().ok() == Some(v), text))
    });
}

/// Runs the whole suite. Assembled matrices are shared through `cache`.
pub fn run_selftest(cache: &LayerCache) -> SelftestReport {
    let started = Instant::now();
    let mut s = Suite { checks: Vec::new() };
    specfun_checks(&mut s);
    geometry_checks(&mut s);
    assembly_checks(&mut s);
    analytic_checks(&mut s);
    krylov_checks(&mut s);
    invariant_checks(&mut s);
    study_checks(&mut s, cache);
    report_checks(&mut s, cache);
    SelftestReport { checks: s.checks, elapsed_ms: started.elapsed().as_millis() as u64 }
}
