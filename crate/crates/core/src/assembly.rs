//! Galerkin matrices of the layer operators on a [`PanelMesh`] and the
//! combined-field systems built from them.
//!
//! Entries are `(Op φ_j, φ_i)` for the panel indicator basis. Regular panel
//! pairs use tensor Gauss rules. Coincident panels are integrated in
//! `(u = s − σ, σ)` coordinates and touching panels after a Duffy split at the
//! shared vertex; in both cases the singular direction carries a rule graded
//! geometrically toward the singularity.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PanelMesh, Point, QuadNode};
use crate::linalg::CMatrix;
use crate::quadrature::{cached_gauss, corner_rule, singular_rule};
use crate::specfun::{hankel01, green_2d};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Gauss order in the smooth direction of the singular schemes.
const SMOOTH_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Slp,
    Dlp,
    Adlp,
    CfieDirect,
    CfieIndirect,
    ScaledIdentity,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Slp => "slp",
            OperatorKind::Dlp => "dlp",
            OperatorKind::Adlp => "adlp",
            OperatorKind::CfieDirect => "cfie_direct",
            OperatorKind::CfieIndirect => "cfie_indirect",
            OperatorKind::ScaledIdentity => "scaled_identity",
        }
    }
}

/// Galerkin matrix tagged with what it discretises.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CMatrix,
    pub kind: OperatorKind,
    pub k: f64,
    pub eta: Option<f64>,
    pub mesh_id: u64,
    /// Diagonal of the mass matrix.
    pub mass: Vec<f64>,
    pub h: f64,
}

impl DiscreteOperator {
    pub fn dof(&self) -> usize {
        self.mass.len()
    }

    /// `c·M`, the Galerkin matrix of `c·I`.
    pub fn scaled_identity(mesh: &PanelMesh, c: f64) -> Self {
        let mass = mesh.mass();
        let diag: Vec<C64> = mass.iter().map(|m| C64::new(c * m, 0.0)).collect();
        Self {
            matrix: CMatrix::diagonal(&diag),
            kind: OperatorKind::ScaledIdentity,
            k: 0.0,
            eta: None,
            mesh_id: mesh.id(),
            mass,
            h: mesh.h(),
        }
    }

    /// Writes `<stem>.bin` (row-major complex doubles, little endian, re then im)
    /// and `<stem>.json`.
    pub fn dump(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let mut bytes = Vec::with_capacity(16 * self.matrix.as_slice().len());
        for v in self.matrix.as_slice() {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        fs::write(&bin, bytes)?;
        let meta = MatrixMeta {
            kind: self.kind,
            k: self.k,
            eta: self.eta,
            dof: self.dof(),
            h: self.h,
            layout: "row-major complex128 little-endian".into(),
        };
        fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
        Ok((bin, json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub kind: OperatorKind,
    pub k: f64,
    pub eta: Option<f64>,
    pub dof: usize,
    pub h: f64,
    pub layout: String,
}

/// Reads a dump written by [`DiscreteOperator::dump`].
pub fn read_dump(stem: &Path) -> Result<(MatrixMeta, CMatrix)> {
    let meta: MatrixMeta = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = fs::read(stem.with_extension("bin"))?;
    let data: Vec<C64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    let matrix = CMatrix::from_row_major(meta.dof, meta.dof, data)?;
    Ok((meta, matrix))
}

/// Coefficient vector in the panel basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    pub coefficients: Vec<C64>,
    pub mesh_id: u64,
}

impl DiscreteFunction {
    /// `√(Σ m_j |c_j|²)`, the L²(Γ) norm when the coefficients are nodal values.
    pub fn l2_norm(&self, mass: &[f64]) -> f64 {
        self.coefficients.iter().zip(mass).map(|(c, m)| m * c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// SLP and DLP Galerkin matrices from one sweep over panel pairs.
#[derive(Debug, Clone)]
pub struct LayerMatrices {
    pub slp: CMatrix,
    pub dlp: CMatrix,
    pub k: f64,
    pub mesh_id: u64,
    pub mass: Vec<f64>,
    pub h: f64,
}

#[derive(Clone, Copy, Default)]
struct PairSums {
    slp: C64,
    dlp_ij: C64,
    dlp_ji: C64,
}

/// Kernels for `d = x − y`: `Φ`, `∂Φ/∂n_y` at (x, y), and `∂Φ/∂n_y` at (y, x).
#[inline]
fn kernels(k: f64, d: Point, n_x: Point, n_y: Point) -> (C64, C64, C64) {
    let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let (h0, h1) = hankel01(k * r);
    let f = I * (0.25 * k) * h1 / r;
    (I * 0.25 * h0, f * (d[0] * n_y[0] + d[1] * n_y[1]), -f * (d[0] * n_x[0] + d[1] * n_x[1]))
}

impl PairSums {
    #[inline]
    fn add(&mut self, w: f64, (s, dij, dji): (C64, C64, C64)) {
        self.slp += w * s;
        self.dlp_ij += w * dij;
        self.dlp_ji += w * dji;
    }
}

fn regular_pair(k: f64, xs: &[QuadNode], ys: &[QuadNode]) -> PairSums {
    let mut sums = PairSums::default();
    for x in xs {
        for y in ys {
            let d = [x.point[0] - y.point[0], x.point[1] - y.point[1]];
            sums.add(x.weight * y.weight, kernels(k, d, x.normal, y.normal));
        }
    }
    sums
}

fn self_pair(mesh: &PanelMesh, k: f64, i: usize) -> PairSums {
    let curve = mesh.curve();
    let panel = mesh.panels()[i];
    let (a, w) = (panel.t0, panel.param_width());
    let smooth = cached_gauss(SMOOTH_ORDER);
    let mut sums = PairSums::default();
    // Triangle s > σ; the other half follows by swapping target and source.
    for (u, wu) in singular_rule().iter() {
        let span = 1.0 - u;
        for (tau, wt) in smooth.iter() {
            let t_lo = a + w * span * tau;
            let t_hi = t_lo + w * u;
            let d = curve.chord(t_lo, w * u);
            let (n_hi, n_lo) = (curve.normal(t_hi), curve.normal(t_lo));
            let weight = wu * wt * span * w * w * curve.speed(t_hi) * curve.speed(t_lo);
            let (s, d_hi_lo, d_lo_hi) = kernels(k, d, n_hi, n_lo);
            sums.slp += 2.0 * weight * s;
            sums.dlp_ij += weight * (d_hi_lo + d_lo_hi);
        }
    }
    sums.dlp_ji = sums.dlp_ij;
    sums
}

/// Panels `i` (before the shared vertex) and `j` (after it).
fn touching_pair(mesh: &PanelMesh, k: f64, i: usize, j: usize) -> PairSums {
    let curve = mesh.curve();
    let (p, q) = (mesh.panels()[i], mesh.panels()[j]);
    let (wi, wj) = (p.param_width(), q.param_width());
    let smooth = cached_gauss(SMOOTH_ORDER);
    let mut sums = PairSums::default();
    for (rho, wr) in corner_rule().iter() {
        for (xi, wx) in smooth.iter() {
            for (s, sigma) in [(rho, rho * xi), (rho * xi, rho)] {
                let tx = p.t1 - wi * s;
                let ty = q.t0 + wj * sigma;
                let d = curve.chord(ty, -(wi * s + wj * sigma));
                let weight = wr * wx * rho * wi * wj * curve.speed(tx) * curve.speed(ty);
                sums.add(weight, kernels(k, d, curve.normal(tx), curve.normal(ty)));
            }
        }
    }
    sums
}

fn pair(mesh: &PanelMesh, k: f64, i: usize, j: usize) -> PairSums {
    let n = mesh.dof();
    if i == j {
        return self_pair(mesh, k, i);
    }
    if mesh.adjacent(i, j) {
        // Orient so the first panel ends at the shared vertex.
        let forward = j == i + 1 || (i == n - 1 && j == 0);
        return if forward {
            touching_pair(mesh, k, i, j)
        } else {
            let s = touching_pair(mesh, k, j, i);
            PairSums { slp: s.slp, dlp_ij: s.dlp_ji, dlp_ji: s.dlp_ij }
        };
    }
    if mesh.gap(i, j) < 2.0 * mesh.h() {
        regular_pair(k, mesh.near_nodes(i), mesh.near_nodes(j))
    } else {
        regular_pair(k, mesh.far_nodes(i), mesh.far_nodes(j))
    }
}

/// Assembles the SLP and DLP matrices together.
pub fn assemble_layers(mesh: &PanelMesh, k: f64) -> Result<LayerMatrices> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let n = mesh.dof();
    let mut slp = CMatrix::zeros(n, n);
    let mut dlp = CMatrix::zeros(n, n);
    let block = 32;
    for start in (0..n).step_by(block) {
        let rows: Vec<Vec<PairSums>> = (start..(start + block).min(n))
            .into_par_iter()
            .map(|i| (i..n).map(|j| pair(mesh, k, i, j)).collect())
            .collect();
        for (offset, row) in rows.into_iter().enumerate() {
            let i = start + offset;
            for (j, sums) in (i..n).zip(row) {
                if !(sums.slp.is_finite() && sums.dlp_ij.is_finite() && sums.dlp_ji.is_finite()) {
                    return Err(Error::Assembly {
                        row: i,
                        col: j,
                        reason: "non-finite quadrature sum".into(),
                    });
                }
                slp[(i, j)] = sums.slp;
                slp[(j, i)] = sums.slp;
                dlp[(i, j)] = sums.dlp_ij;
                dlp[(j, i)] = sums.dlp_ji;
            }
        }
    }
    Ok(LayerMatrices { slp, dlp, k, mesh_id: mesh.id(), mass: mesh.mass(), h: mesh.h() })
}

impl LayerMatrices {
    fn tag(&self, matrix: CMatrix, kind: OperatorKind, eta: Option<f64>) -> DiscreteOperator {
        DiscreteOperator {
            matrix,
            kind,
            k: self.k,
            eta,
            mesh_id: self.mesh_id,
            mass: self.mass.clone(),
            h: self.h,
        }
    }

    pub fn slp_operator(&self) -> DiscreteOperator {
        self.tag(self.slp.clone(), OperatorKind::Slp, None)
    }

    pub fn dlp_operator(&self) -> DiscreteOperator {
        self.tag(self.dlp.clone(), OperatorKind::Dlp, None)
    }

    /// `(D′φ_j, φ_i) = (φ_j, Dφ_i)`, so the adjoint double layer is the transpose.
    pub fn adlp_operator(&self) -> DiscreteOperator {
        self.tag(self.dlp.transpose(), OperatorKind::Adlp, None)
    }

    fn combined(&self, double_layer: &CMatrix, eta: f64) -> CMatrix {
        let mut m = double_layer.clone();
        m.add_scaled(-I * eta, &self.slp);
        for (j, mj) in self.mass.iter().enumerate() {
            m[(j, j)] += 0.5 * mj;
        }
        m
    }

    /// `½M + D′ − iηS`.
    pub fn combined_direct(&self, eta: f64) -> DiscreteOperator {
        let m = self.combined(&self.dlp.transpose(), eta);
        self.tag(m, OperatorKind::CfieDirect, Some(eta))
    }

    /// `½M + D − iηS`.
    pub fn combined_indirect(&self, eta: f64) -> DiscreteOperator {
        let m = self.combined(&self.dlp, eta);
        self.tag(m, OperatorKind::CfieIndirect, Some(eta))
    }
}

/// Single operator assembly.
pub fn assemble(kind: OperatorKind, mesh: &PanelMesh, k: f64) -> Result<DiscreteOperator> {
    let layers = assemble_layers(mesh, k)?;
    match kind {
        OperatorKind::Slp => Ok(layers.slp_operator()),
        OperatorKind::Dlp => Ok(layers.dlp_operator()),
        OperatorKind::Adlp => Ok(layers.adlp_operator()),
        other => Err(Error::InvalidArgument(format!(
            "`assemble` builds slp, dlp or adlp; use the combined constructors for {}",
            other.name()
        ))),
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("coupling parameter must be finite, got {eta}")));
    }
    Ok(())
}

pub fn combined_direct(mesh: &PanelMesh, k: f64, eta: f64) -> Result<DiscreteOperator> {
    check_eta(eta)?;
    Ok(assemble_layers(mesh, k)?.combined_direct(eta))
}

pub fn combined_indirect(mesh: &PanelMesh, k: f64, eta: f64) -> Result<DiscreteOperator> {
    check_eta(eta)?;
    Ok(assemble_layers(mesh, k)?.combined_indirect(eta))
}

fn unit_direction(direction: Point) -> Result<Point> {
    let n = direction[0].hypot(direction[1]);
    if !((n - 1.0).abs() < 1e-12) {
        return Err(Error::InvalidArgument(format!("incident direction must be a unit vector, |d| = {n}")));
    }
    Ok(direction)
}

/// `e^{ik⟨x, d⟩}`.
pub fn plane_wave(k: f64, direction: Point, x: Point) -> C64 {
    C64::from_polar(1.0, k * (x[0] * direction[0] + x[1] * direction[1]))
}

/// `f(x) = (ik⟨d, n(x)⟩ − iη) e^{ik⟨x, d⟩}`.
pub fn direct_rhs_density(k: f64, eta: f64, direction: Point, node: &QuadNode) -> C64 {
    let dn = direction[0] * node.normal[0] + direction[1] * node.normal[1];
    I * (k * dn - eta) * plane_wave(k, direction, node.point)
}

fn load_vector(mesh: &PanelMesh, f: impl Fn(&QuadNode) -> C64 + Sync) -> DiscreteFunction {
    let coefficients = (0..mesh.dof())
        .into_par_iter()
        .map(|p| mesh.near_nodes(p).iter().map(|q| q.weight * f(q)).sum())
        .collect();
    DiscreteFunction { coefficients, mesh_id: mesh.id() }
}

/// Load vector `((f, φ_i))_i` for the direct equation.
pub fn rhs_direct_planewave(mesh: &PanelMesh, k: f64, eta: f64, direction: Point) -> Result<DiscreteFunction> {
    let d = unit_direction(direction)?;
    Ok(load_vector(mesh, |q| direct_rhs_density(k, eta, d, q)))
}

/// Load vector `((−e^{ik⟨·,d⟩}, φ_i))_i` for the indirect equation.
pub fn rhs_indirect_planewave(mesh: &PanelMesh, k: f64, direction: Point) -> Result<DiscreteFunction> {
    let d = unit_direction(direction)?;
    Ok(load_vector(mesh, |q| -plane_wave(k, d, q.point)))
}

/// `‖f‖_{L²(Γ)}` by the near-field panel rule.
pub fn boundary_l2_norm(mesh: &PanelMesh, f: impl Fn(&QuadNode) -> C64) -> f64 {
    (0..mesh.dof())
        .flat_map(|p| mesh.near_nodes(p).iter())
        .map(|q| q.weight * f(q).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Central-difference arc-length derivative on a closed uniform mesh,
/// stored as triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialDerivative {
    pub dof: usize,
    pub h: f64,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TangentialDerivative {
    /// `(Dc)_j = (c_{j+1} − c_{j−1}) / (2h)`.
    pub fn apply(&self, c: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dof];
        for &(i, j, v) in &self.entries {
            out[i] += v * c[j];
        }
        out
    }
}

pub fn tangential_derivative_matrix(mesh: &PanelMesh) -> Result<TangentialDerivative> {
    if !mesh.curve().is_closed() {
        return Err(Error::Unsupported(format!(
            "the periodic difference stencil needs a closed curve, got {}",
            mesh.curve().name()
        )));
    }
    if mesh.shape_ratio() > 1.0 + 1e-8 {
        return Err(Error::Unsupported("the difference stencil needs a mesh uniform in arc length".into()));
    }
    let n = mesh.dof();
    let h = mesh.mass().iter().sum::<f64>() / n as f64;
    let c = 0.5 / h;
    let entries = (0..n).flat_map(|j| [(j, (j + 1) % n, c), (j, (j + n - 1) % n, -c)]).collect();
    Ok(TangentialDerivative { dof: n, h, entries })
}

/// `u^I(x) − ∫_Γ Φ_k(x, y) v(y) ds(y)` with `v` piecewise constant. Without an
/// incident wave only the single-layer potential `∫Φ v` is returned.
pub fn exterior_field(
    mesh: &PanelMesh,
    density: &DiscreteFunction,
    k: f64,
    points: &[Point],
    incident: Option<Point>,
) -> Result<Vec<C64>> {
    if density.coefficients.len() != mesh.dof() {
        return Err(Error::InvalidArgument(format!(
            "density has {} coefficients, mesh has {} panels",
            density.coefficients.len(),
            mesh.dof()
        )));
    }
    let incident = incident.map(unit_direction).transpose()?;
    points
        .par_iter()
        .map(|x| {
            let mut potential = C64::new(0.0, 0.0);
            for (p, c) in density.coefficients.iter().enumerate() {
                let mut panel = C64::new(0.0, 0.0);
                for q in mesh.near_nodes(p) {
                    let r = (x[0] - q.point[0]).hypot(x[1] - q.point[1]);
                    if r < mesh.h() {
                        return Err(Error::NearSingular(format!(
                            "point ({}, {}) lies within h = {} of the boundary",
                            x[0],
                            x[1],
                            mesh.h()
                        )));
                    }
                    panel += q.weight * green_2d(k, r)?;
                }
                potential += c * panel;
            }
            Ok(match incident {
                Some(d) => plane_wave(k, d, *x) - potential,
                None => potential,
            })
        })
        .collect()
}

/// Curvature-limited value of the double-layer kernel on the diagonal.
pub fn dlp_diagonal_limit(curvature: f64) -> f64 {
    -curvature / (4.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParamCurve;

    fn circle_mesh(dof: usize) -> PanelMesh {
        PanelMesh::with_dof(ParamCurve::circle(1.0).unwrap(), dof).unwrap()
    }

    fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        let mut d = a.clone();
        d.add_scaled(C64::new(-1.0, 0.0), b);
        d.frobenius() / a.frobenius()
    }

    /// Double-exponential rule on [0, L] for integrands with endpoint singularities.
    fn tanh_sinh(f: impl Fn(f64) -> C64, len: f64) -> C64 {
        let step = 1.0 / 64.0;
        let mut sum = C64::new(0.0, 0.0);
        for m in -400..=400 {
            let t = m as f64 * step;
            let s = 0.5 * PI * t.sinh();
            let x = 0.5 * len * (1.0 + s.tanh());
            let w = 0.5 * len * 0.5 * PI * t.cosh() / s.cosh().powi(2) * step;
            if x <= 1e-150 * len || x >= len || w < 1e-300 {
                continue;
            }
            sum += w * f(x);
        }
        sum
    }

    /// Power series for H0 at small arguments (independent of specfun).
    fn h0_series(x: f64) -> C64 {
        let q = 0.25 * x * x;
        let (mut term, mut j0, mut tail, mut harmonic) = (1.0, 1.0, 0.0, 0.0);
        for m in 1..60 {
            term *= -q / (m * m) as f64;
            harmonic += 1.0 / m as f64;
            j0 += term;
            tail -= harmonic * term;
        }
        let euler = 0.577_215_664_901_532_9;
        let y0 = 2.0 / PI * ((0.5 * x).ln() + euler) * j0 + 2.0 / PI * tail;
        C64::new(j0, y0)
    }

    #[test]
    fn slp_self_entry_matches_adaptive_oracle() {
        let (k, dof) = (5.0, 50);
        let layers = assemble_layers(&circle_mesh(dof), k).unwrap();
        let w = 2.0 * PI / dof as f64;
        // On the circle the kernel depends on |t − τ| only: ∫∫ g = 2∫_0^w (w − u) g(u) du.
        let g = |u: f64| I * 0.25 * h0_series(k * 2.0 * (0.5 * u).sin());
        let oracle = 2.0 * tanh_sinh(|u| (w - u) * g(u), w);
        let got = layers.slp[(0, 0)];
        assert!((got - oracle).norm() / oracle.norm() < 1e-8, "{got} vs {oracle}");
        // Touching panels: ∫_0^w∫_w^{2w} g(τ − t) = ∫_0^{2w} min(u, 2w − u) g(u) du.
        let oracle = tanh_sinh(|u| u.min(2.0 * w - u) * g(u), w) + tanh_sinh(|u| (w - u) * g(u + w), w);
        let got = layers.slp[(0, 1)];
        assert!((got - oracle).norm() / oracle.norm() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn kite_touching_pair_matches_nested_oracle() {
        let curve = ParamCurve::kite();
        let mesh = PanelMesh::with_dof(curve, 40).unwrap();
        let k = 7.0;
        let layers = assemble_layers(&mesh, k).unwrap();
        let (p, q) = (mesh.panels()[5], mesh.panels()[6]);
        // Nested double-exponential rules, both singular at the shared vertex.
        let entry = |which: usize| {
            tanh_sinh(
                |a| {
                    let tx = p.t1 - a;
                    tanh_sinh(
                        |b| {
                            let ty = q.t0 + b;
                            let d = curve.chord(ty, -(a + b));
                            let r = d[0].hypot(d[1]);
                            let (h0, h1) = hankel01(k * r);
                            let ny = curve.normal(ty);
                            let v = match which {
                                0 => I * 0.25 * h0,
                                _ => I * 0.25 * k * h1 * (d[0] * ny[0] + d[1] * ny[1]) / r,
                            };
                            v * curve.speed(tx) * curve.speed(ty)
                        },
                        q.param_width(),
                    )
                },
                p.param_width(),
            )
        };
        for (which, got) in [(0, layers.slp[(5, 6)]), (1, layers.dlp[(5, 6)])] {
            let oracle = entry(which);
            assert!((got - oracle).norm() / oracle.norm() < 1e-8, "kind {which}: {got} vs {oracle}");
        }
    }

    #[test]
    fn symmetry_and_duality() {
        let mesh = PanelMesh::build(ParamCurve::kite(), 6.0, 10.0).unwrap();
        let layers = assemble_layers(&mesh, 6.0).unwrap();
        assert!(rel_diff(&layers.slp, &layers.slp.transpose()) <= 1e-10);
        let adlp = layers.adlp_operator();
        assert!(rel_diff(&adlp.matrix, &layers.dlp.transpose()) <= 1e-10);
        let direct = layers.combined_direct(6.0);
        let indirect = layers.combined_indirect(6.0);
        assert!(rel_diff(&indirect.matrix, &direct.matrix.transpose()) <= 1e-10);

        let plain = layers.combined_direct(0.0);
        let mut expect = adlp.matrix.clone();
        for (j, m) in mesh.mass().iter().enumerate() {
            expect[(j, j)] += 0.5 * m;
        }
        assert_eq!(plain.matrix, expect);
    }

    #[test]
    fn circle_matrices_are_circulant_and_d_equals_adjoint() {
        let n = 64;
        let layers = assemble_layers(&circle_mesh(n), 8.0).unwrap();
        for m in [&layers.slp, &layers.dlp] {
            let scale = m.max_abs();
            for i in 0..n {
                for j in 0..n {
                    let d = (m[(i, j)] - m[(0, (j + n - i) % n)]).norm();
                    assert!(d <= 1e-10 * scale, "({i},{j})");
                }
            }
        }
        assert!(rel_diff(&layers.dlp, &layers.dlp.transpose()) <= 1e-10);
    }

    #[test]
    fn dlp_vanishes_on_segment() {
        let mesh = PanelMesh::with_dof(ParamCurve::segment(), 30).unwrap();
        let layers = assemble_layers(&mesh, 10.0).unwrap();
        assert!(layers.dlp.max_abs() < 1e-14);
        assert!(layers.slp.max_abs() > 0.0);
    }

    #[test]
    fn rhs_pointwise_examples() {
        let k = 10.0;
        let node = |normal: Point| QuadNode { t: 0.0, point: [0.3, -0.2], normal, weight: 1.0 };
        let along = direct_rhs_density(k, k, [1.0, 0.0], &node([1.0, 0.0]));
        assert!(along.norm() == 0.0);
        let across = direct_rhs_density(k, k, [1.0, 0.0], &node([0.0, 1.0]));
        assert!((across.norm() - k).abs() < 1e-14);
        assert!((across - (-I * k * plane_wave(k, [1.0, 0.0], [0.3, -0.2]))).norm() < 1e-14);
    }

    #[test]
    fn rhs_norms_match_trapezoid_oracle() {
        let (k, eta) = (10.0, 10.0);
        let mesh = PanelMesh::build(ParamCurve::circle(1.0).unwrap(), k, 10.0).unwrap();
        let d = [1.0, 0.0];
        // Periodic trapezoid rule: spectrally accurate on the circle.
        let fine = 4000;
        let oracle = |f: &dyn Fn(f64) -> C64| {
            ((0..fine).map(|i| f(2.0 * PI * i as f64 / fine as f64).norm_sqr()).sum::<f64>() * 2.0 * PI
                / fine as f64)
                .sqrt()
        };
        let f_direct = |t: f64| I * (k * t.cos() - eta) * C64::from_polar(1.0, k * t.cos());
        let got = boundary_l2_norm(&mesh, |q| direct_rhs_density(k, eta, d, q));
        let expect = oracle(&f_direct);
        assert!((got - expect).abs() <= 1e-8 * expect, "{got} vs {expect}");
        let got = boundary_l2_norm(&mesh, |q| -plane_wave(k, d, q.point));
        assert!((got - (2.0 * PI).sqrt()).abs() <= 1e-8);

        let b = rhs_indirect_planewave(&mesh, k, d).unwrap();
        for (c, m) in b.coefficients.iter().zip(mesh.mass()) {
            assert!(c.norm() <= m * (1.0 + 1e-12) && c.norm() > 0.0);
        }
        assert!(rhs_direct_planewave(&mesh, k, eta, [1.0, 1.0]).is_err());
    }

    #[test]
    fn stencil_examples() {
        let mesh = circle_mesh(200);
        let d = tangential_derivative_matrix(&mesh).unwrap();
        let zero = d.apply(&vec![C64::new(3.0, -1.0); 200]);
        assert!(zero.iter().all(|v| v.norm() < 1e-12));
        let mids: Vec<f64> = (0..200).map(|j| (j as f64 + 0.5) * 2.0 * PI / 200.0).collect();
        let sin: Vec<C64> = mids.iter().map(|s| C64::new(s.sin(), 0.0)).collect();
        let ds = d.apply(&sin);
        let h = 2.0 * PI / 200.0;
        for (v, s) in ds.iter().zip(&mids) {
            assert!((v.re - s.cos()).abs() <= h * h);
        }
        let n = 7.0;
        let mode: Vec<C64> = mids.iter().map(|s| C64::from_polar(1.0, n * s)).collect();
        let symbol = I * (n * h).sin() / h;
        for (v, m) in d.apply(&mode).iter().zip(&mode) {
            assert!((v - symbol * m).norm() < 1e-10);
        }
        let open = PanelMesh::with_dof(ParamCurve::parabola(), 20).unwrap();
        assert!(matches!(tangential_derivative_matrix(&open), Err(Error::Unsupported(_))));
    }

    #[test]
    fn field_examples() {
        let mesh = circle_mesh(60);
        let k = 4.0;
        let zero = DiscreteFunction { coefficients: vec![C64::new(0.0, 0.0); 60], mesh_id: mesh.id() };
        let pts = [[2.0, 0.0], [-1.5, 1.5]];
        let u = exterior_field(&mesh, &zero, k, &pts, Some([0.0, 1.0])).unwrap();
        for (v, x) in u.iter().zip(&pts) {
            assert_eq!(*v, plane_wave(k, [0.0, 1.0], *x));
        }
        let one = DiscreteFunction { coefficients: vec![C64::new(1.0, 0.5); 60], mesh_id: mesh.id() };
        let two = DiscreteFunction {
            coefficients: one.coefficients.iter().map(|c| 2.0 * c).collect(),
            mesh_id: mesh.id(),
        };
        let a = exterior_field(&mesh, &one, k, &pts, None).unwrap();
        let b = exterior_field(&mesh, &two, k, &pts, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).norm() < 1e-12);
        }
        let err = exterior_field(&mesh, &one, k, &[[1.01, 0.0]], None).unwrap_err();
        assert!(matches!(err, Error::NearSingular(_)));
    }

    #[test]
    fn dump_round_trip() {
        let mesh = circle_mesh(12);
        let op = combined_direct(&mesh, 3.0, 3.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("cfie");
        op.dump(&stem).unwrap();
        let (meta, m) = read_dump(&stem).unwrap();
        assert_eq!(meta.kind, OperatorKind::CfieDirect);
        assert_eq!(meta.dof, 12);
        assert_eq!(m, op.matrix);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mesh = circle_mesh(10);
        assert!(matches!(assemble_layers(&mesh, 0.0), Err(Error::Domain(_))));
        assert!(assemble(OperatorKind::CfieDirect, &mesh, 1.0).is_err());
        assert!(combined_direct(&mesh, 1.0, f64::NAN).is_err());
    }
}
