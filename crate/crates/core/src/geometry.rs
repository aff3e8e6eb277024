//! Parametrised boundaries and piecewise-constant panel meshes.
//!
//! Closed curves are traversed counter-clockwise so that the derivative
//! rotated by −π/2 is the outward normal. Panels are equal in arc length.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quadrature::cached_gauss;

pub type Point = [f64; 2];

/// Default cap on degrees of freedom (dense storage).
pub const DOF_CAP: usize = 6000;

/// Far-field Gauss order per panel.
pub const FAR_ORDER: usize = 8;
/// Near-field Gauss order per panel.
pub const NEAR_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a1: f64, a2: f64 },
    /// `(cos t + 0.65 cos 2t − 0.65, 1.5 sin t)`.
    Kite,
    /// `{(t, 0) : |t| < 1}`.
    Segment,
    /// `{(t, t²) : |t| < 1}`.
    Parabola,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCurve {
    kind: CurveKind,
}

// cos(t + d) − cos t and sin(t + d) − sin t without cancellation.
fn delta_cos(t: f64, d: f64) -> f64 {
    -2.0 * (t + 0.5 * d).sin() * (0.5 * d).sin()
}

fn delta_sin(t: f64, d: f64) -> f64 {
    2.0 * (t + 0.5 * d).cos() * (0.5 * d).sin()
}

impl ParamCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("circle radius must be positive, got {radius}")));
        }
        Ok(Self { kind: CurveKind::Circle { radius } })
    }

    pub fn ellipse(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::InvalidArgument(format!("ellipse semi-axes must be positive, got {a1}, {a2}")));
        }
        Ok(Self { kind: CurveKind::Ellipse { a1, a2 } })
    }

    pub fn kite() -> Self {
        Self { kind: CurveKind::Kite }
    }

    pub fn segment() -> Self {
        Self { kind: CurveKind::Segment }
    }

    pub fn parabola() -> Self {
        Self { kind: CurveKind::Parabola }
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CurveKind::Circle { .. } => "circle",
            CurveKind::Ellipse { .. } => "ellipse",
            CurveKind::Kite => "kite",
            CurveKind::Segment => "segment",
            CurveKind::Parabola => "parabola",
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.kind, CurveKind::Circle { .. } | CurveKind::Ellipse { .. } | CurveKind::Kite)
    }

    /// Parameter interval `[start, end]`.
    pub fn param_range(&self) -> (f64, f64) {
        if self.is_closed() {
            (0.0, 2.0 * PI)
        } else {
            (-1.0, 1.0)
        }
    }

    pub fn point(&self, t: f64) -> Point {
        match self.kind {
            CurveKind::Circle { radius } => [radius * t.cos(), radius * t.sin()],
            CurveKind::Ellipse { a1, a2 } => [a1 * t.cos(), a2 * t.sin()],
            CurveKind::Kite => [t.cos() + 0.65 * (2.0 * t).cos() - 0.65, 1.5 * t.sin()],
            CurveKind::Segment => [t, 0.0],
            CurveKind::Parabola => [t, t * t],
        }
    }

    pub fn derivative(&self, t: f64) -> Point {
        match self.kind {
            CurveKind::Circle { radius } => [-radius * t.sin(), radius * t.cos()],
            CurveKind::Ellipse { a1, a2 } => [-a1 * t.sin(), a2 * t.cos()],
            CurveKind::Kite => [-t.sin() - 1.3 * (2.0 * t).sin(), 1.5 * t.cos()],
            CurveKind::Segment => [1.0, 0.0],
            CurveKind::Parabola => [1.0, 2.0 * t],
        }
    }

    pub fn second_derivative(&self, t: f64) -> Point {
        match self.kind {
            CurveKind::Circle { radius } => [-radius * t.cos(), -radius * t.sin()],
            CurveKind::Ellipse { a1, a2 } => [-a1 * t.cos(), -a2 * t.sin()],
            CurveKind::Kite => [-t.cos() - 2.6 * (2.0 * t).cos(), -1.5 * t.sin()],
            CurveKind::Segment => [0.0, 0.0],
            CurveKind::Parabola => [0.0, 2.0],
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.derivative(t);
        d[0].hypot(d[1])
    }

    /// Unit normal: the derivative rotated by −π/2.
    pub fn normal(&self, t: f64) -> Point {
        if let CurveKind::Circle { .. } = self.kind {
            return [t.cos(), t.sin()];
        }
        let d = self.derivative(t);
        let s = d[0].hypot(d[1]);
        [d[1] / s, -d[0] / s]
    }

    /// Signed curvature, positive for a counter-clockwise convex curve.
    pub fn curvature(&self, t: f64) -> f64 {
        let d = self.derivative(t);
        let dd = self.second_derivative(t);
        (d[0] * dd[1] - d[1] * dd[0]) / d[0].hypot(d[1]).powi(3)
    }

    /// `point(t + d) − point(t)` evaluated without cancellation for small `d`.
    pub fn chord(&self, t: f64, d: f64) -> Point {
        match self.kind {
            CurveKind::Circle { radius } => [radius * delta_cos(t, d), radius * delta_sin(t, d)],
            CurveKind::Ellipse { a1, a2 } => [a1 * delta_cos(t, d), a2 * delta_sin(t, d)],
            CurveKind::Kite => [
                delta_cos(t, d) + 0.65 * delta_cos(2.0 * t, 2.0 * d),
                1.5 * delta_sin(t, d),
            ],
            CurveKind::Segment => [d, 0.0],
            CurveKind::Parabola => [d, d * (2.0 * t + d)],
        }
    }

    /// Arc length of the parameter interval `[a, b]`.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        let rule = cached_gauss(32);
        let mut total = 0.0;
        let pieces = 4;
        let step = (b - a) / pieces as f64;
        for p in 0..pieces {
            let lo = a + p as f64 * step;
            total += rule.iter().map(|(x, w)| w * self.speed(lo + step * x)).sum::<f64>() * step;
        }
        total
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            CurveKind::Circle { radius } => 2.0 * PI * radius,
            CurveKind::Segment => 2.0,
            _ => {
                let (a, b) = self.param_range();
                let cells = 64;
                let step = (b - a) / cells as f64;
                (0..cells).map(|i| self.arc_length(a + i as f64 * step, a + (i + 1) as f64 * step)).sum()
            }
        }
    }
}

/// A point on the boundary with its parameter, normal and quadrature weight
/// (the weight already contains the speed `|γ'(t)|`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub t: f64,
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub t0: f64,
    pub t1: f64,
    /// Arc length.
    pub length: f64,
    pub midpoint: Point,
}

impl Panel {
    pub fn param_width(&self) -> f64 {
        self.t1 - self.t0
    }
}

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Partition of a curve into equal-arc-length panels carrying the
/// piecewise-constant basis.
#[derive(Debug, Clone)]
pub struct PanelMesh {
    id: u64,
    curve: ParamCurve,
    panels: Vec<Panel>,
    h: f64,
    far: Vec<Vec<QuadNode>>,
    near: Vec<Vec<QuadNode>>,
}

fn panel_nodes(curve: &ParamCurve, panel: &Panel, order: usize) -> Vec<QuadNode> {
    let width = panel.param_width();
    cached_gauss(order)
        .iter()
        .map(|(x, w)| {
            let t = panel.t0 + width * x;
            QuadNode {
                t,
                point: curve.point(t),
                normal: curve.normal(t),
                weight: w * width * curve.speed(t),
            }
        })
        .collect()
}

/// Solve `arc_length(t_lo, t) = target` for `t` by Newton's method.
fn invert_arc_length(curve: &ParamCurve, t_lo: f64, t_hi: f64, target: f64) -> f64 {
    let full = curve.arc_length(t_lo, t_hi);
    let mut t = t_lo + (t_hi - t_lo) * (target / full).clamp(0.0, 1.0);
    for _ in 0..50 {
        let f = curve.arc_length(t_lo, t) - target;
        let dt = f / curve.speed(t);
        t = (t - dt).clamp(t_lo, t_hi);
        if dt.abs() < 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

impl PanelMesh {
    /// Mesh with `h ≤ 2π/(ppw·k)`.
    pub fn build(curve: ParamCurve, k: f64, ppw: f64) -> Result<Self> {
        Self::build_with_cap(curve, k, ppw, DOF_CAP)
    }

    pub fn build_with_cap(curve: ParamCurve, k: f64, ppw: f64, cap: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        if !(ppw >= 2.0) {
            return Err(Error::Domain(format!("points per wavelength must be at least 2, got {ppw}")));
        }
        let target = curve.length() * ppw * k / (2.0 * PI);
        let dof = ((target - 1e-9).ceil() as usize).max(3);
        if dof > cap {
            return Err(Error::Capacity(format!("mesh needs {dof} panels, cap is {cap}")));
        }
        Self::with_dof(curve, dof)
    }

    /// Mesh with exactly `dof` equal-arc-length panels.
    pub fn with_dof(curve: ParamCurve, dof: usize) -> Result<Self> {
        if dof < 3 {
            return Err(Error::InvalidArgument(format!("a mesh needs at least 3 panels, got {dof}")));
        }
        if dof > DOF_CAP {
            return Err(Error::Capacity(format!("mesh needs {dof} panels, cap is {DOF_CAP}")));
        }
        let (a, b) = curve.param_range();
        let breaks = match curve.kind() {
            // Uniform parameter is already uniform in arc length.
            CurveKind::Circle { .. } | CurveKind::Segment => {
                (0..=dof).map(|i| a + (b - a) * i as f64 / dof as f64).collect::<Vec<_>>()
            }
            _ => equal_arc_breaks(&curve, dof),
        };
        let panels: Vec<Panel> = breaks
            .windows(2)
            .map(|w| Panel {
                t0: w[0],
                t1: w[1],
                length: curve.arc_length(w[0], w[1]),
                midpoint: curve.point(0.5 * (w[0] + w[1])),
            })
            .collect();
        let h = panels.iter().map(|p| p.length).fold(0.0, f64::max);
        let far = panels.iter().map(|p| panel_nodes(&curve, p, FAR_ORDER)).collect();
        let near = panels.iter().map(|p| panel_nodes(&curve, p, NEAR_ORDER)).collect();
        Ok(Self {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            curve,
            panels,
            h,
            far,
            near,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn curve(&self) -> &ParamCurve {
        &self.curve
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn dof(&self) -> usize {
        self.panels.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Diagonal of the p = 0 mass matrix: the panel arc lengths.
    pub fn mass(&self) -> Vec<f64> {
        self.panels.iter().map(|p| p.length).collect()
    }

    pub fn far_nodes(&self, panel: usize) -> &[QuadNode] {
        &self.far[panel]
    }

    pub fn near_nodes(&self, panel: usize) -> &[QuadNode] {
        &self.near[panel]
    }

    pub fn shape_ratio(&self) -> f64 {
        let min = self.panels.iter().map(|p| p.length).fold(f64::INFINITY, f64::min);
        self.h / min
    }

    /// Panels `i` and `j` share an endpoint (and are distinct).
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let n = self.dof();
        let d = i.abs_diff(j);
        d == 1 || (self.curve.is_closed() && d == n - 1)
    }

    /// Gap between two panels, estimated from midpoints and half-lengths.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        let (p, q) = (&self.panels[i], &self.panels[j]);
        let d = (p.midpoint[0] - q.midpoint[0]).hypot(p.midpoint[1] - q.midpoint[1]);
        (d - 0.5 * (p.length + q.length)).max(0.0)
    }

    /// Nodes of an `order`-point rule on every panel, in panel order.
    pub fn nodes(&self, order: usize) -> Vec<Vec<QuadNode>> {
        self.panels.iter().map(|p| panel_nodes(&self.curve, p, order)).collect()
    }
}

fn equal_arc_breaks(curve: &ParamCurve, dof: usize) -> Vec<f64> {
    let (a, b) = curve.param_range();
    let cells = (4 * dof).max(256);
    let step = (b - a) / cells as f64;
    let mut cumulative = Vec::with_capacity(cells + 1);
    cumulative.push(0.0);
    for i in 0..cells {
        let lo = a + i as f64 * step;
        let last = *cumulative.last().unwrap();
        cumulative.push(last + curve.arc_length(lo, lo + step));
    }
    let total = cumulative[cells];
    let mut breaks = Vec::with_capacity(dof + 1);
    breaks.push(a);
    let mut cell = 0;
    for j in 1..dof {
        let target = total * j as f64 / dof as f64;
        while cumulative[cell + 1] < target {
            cell += 1;
        }
        let lo = a + cell as f64 * step;
        breaks.push(invert_arc_length(curve, lo, lo + step, target - cumulative[cell]));
    }
    breaks.push(b);
    breaks
}

/// `‖f − P_h f‖_{L²(Γ)}` where `P_h` is the panelwise mean.
pub fn best_approx_error<F>(mesh: &PanelMesh, f: F) -> f64
where
    F: Fn(&QuadNode) -> C64,
{
    let mut total = 0.0;
    for nodes in mesh.nodes(32) {
        let values: Vec<C64> = nodes.iter().map(&f).collect();
        let weight: f64 = nodes.iter().map(|n| n.weight).sum();
        let mean = nodes.iter().zip(&values).map(|(n, v)| v * n.weight).sum::<C64>() / weight;
        total += nodes.iter().zip(&values).map(|(n, v)| n.weight * (v - mean).norm_sqr()).sum::<f64>();
    }
    total.sqrt()
}
