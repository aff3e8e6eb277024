//! Quasimode probes: oscillatory cut-off densities on a flat segment and on a
//! parabola, pushed through the single layer (and its tangential derivative)
//! and observed on a set `U` away from their support.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LogLogFit};
use crate::quadrature::cached_gauss;
use crate::specfun::hankel01;

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_M: f64 = 4.0;

const ORDER: usize = 16;
const REFINE_TOL: f64 = 1e-3;
const MAX_REFINEMENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeGeometry {
    /// `{(x, 0) : |x| < 1}`.
    Segment,
    /// `{(x, x²) : |x| < 1}`.
    Parabola,
}

impl ProbeGeometry {
    pub fn name(self) -> &'static str {
        match self {
            ProbeGeometry::Segment => "segment",
            ProbeGeometry::Parabola => "parabola",
        }
    }

    /// Width exponent of the cut-off: `χ(x k^γ / ε)`.
    fn gamma(self) -> f64 {
        match self {
            ProbeGeometry::Segment => 0.0,
            ProbeGeometry::Parabola => 1.0 / 3.0,
        }
    }

    fn point(self, x: f64) -> [f64; 2] {
        match self {
            ProbeGeometry::Segment => [x, 0.0],
            ProbeGeometry::Parabola => [x, x * x],
        }
    }

    /// `dγ/dx`.
    fn tangent(self, x: f64) -> [f64; 2] {
        match self {
            ProbeGeometry::Segment => [1.0, 0.0],
            ProbeGeometry::Parabola => [1.0, 2.0 * x],
        }
    }

    fn speed(self, x: f64) -> f64 {
        let t = self.tangent(x);
        t[0].hypot(t[1])
    }
}

fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Smooth bump: `1` on `[−1, 1]`, `0` outside `(−2, 2)`.
pub fn bump(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= 2.0 {
        return 0.0;
    }
    let (up, down) = (smooth_step(2.0 - a), smooth_step(a - 1.0));
    up / (up + down)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeProbe {
    pub geometry: ProbeGeometry,
    pub epsilon: f64,
    pub m: f64,
    pub k: f64,
    /// Multiplies the density; the ratio does not depend on it.
    pub amplitude: f64,
}

impl QuasimodeProbe {
    pub fn new(geometry: ProbeGeometry, k: f64) -> Self {
        Self { geometry, epsilon: DEFAULT_EPSILON, m: DEFAULT_M, k, amplitude: 1.0 }
    }

    /// Cut-off half-width scale `ε k^{−γ}`.
    pub fn width(&self) -> f64 {
        self.epsilon * self.k.powf(-self.geometry.gamma())
    }

    /// `[Mεk^{−γ}, 2Mεk^{−γ}]`.
    pub fn target_interval(&self) -> (f64, f64) {
        let w = self.width();
        (self.m * w, 2.0 * self.m * w)
    }

    pub fn density(&self, x: f64) -> C64 {
        self.amplitude * C64::from_polar(1.0, self.k * x) * bump(x / self.width())
    }

    fn validate(&self) -> Result<()> {
        if !(self.k >= 8.0) {
            return Err(Error::Domain(format!("probes need k ≥ 8, got {}", self.k)));
        }
        if !(self.epsilon > 0.0 && self.m > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "need ε > 0 and M > 2 so that U misses the support, got ε = {}, M = {}",
                self.epsilon, self.m
            )));
        }
        let (_, hi) = self.target_interval();
        if hi >= 1.0 {
            return Err(Error::Domain(format!("target set reaches x = {hi}, outside the arc")));
        }
        Ok(())
    }
}

/// Composite Gauss nodes `(x, w·|γ′(x)|)` on `[a, b]`.
fn nodes(geometry: ProbeGeometry, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = cached_gauss(ORDER);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| rule.iter().map(move |(u, w)| (a + h * (p as f64 + u), w * h)))
        .map(|(x, w)| (x, w * geometry.speed(x)))
        .collect()
}

fn panels_for(length: f64, k: f64, minimum: usize) -> usize {
    // At least 20 points per wavelength.
    let wavelengths = length * k / (2.0 * PI);
    ((20.0 * wavelengths / ORDER as f64).ceil() as usize).max(minimum)
}

fn ratio_at(probe: &QuasimodeProbe, derivative: bool, source_panels: usize, target_panels: usize) -> f64 {
    let g = probe.geometry;
    let w = probe.width();
    let k = probe.k;
    let src = nodes(g, -2.0 * w, 2.0 * w, source_panels);
    let values: Vec<C64> = src.iter().map(|(y, _)| probe.density(*y)).collect();
    let (lo, hi) = probe.target_interval();
    let tgt = nodes(g, lo, hi, target_panels);
    let contributions: Vec<f64> = tgt
        .par_iter()
        .map(|&(x, wx)| {
            let px = g.point(x);
            let tx = g.tangent(x);
            let mut acc = C64::new(0.0, 0.0);
            for ((y, wy), u) in src.iter().zip(&values) {
                let py = g.point(*y);
                let d = [px[0] - py[0], px[1] - py[1]];
                let r = d[0].hypot(d[1]);
                let (h0, h1) = hankel01(k * r);
                let kernel = if derivative {
                    // ∇ₓΦ = −(ik/4) H₁(kr)(x − y)/r, paired with dγ/dx.
                    -I * 0.25 * k * h1 * ((d[0] * tx[0] + d[1] * tx[1]) / r)
                } else {
                    I * 0.25 * h0
                };
                acc += wy * kernel * u;
            }
            wx * acc.norm_sqr()
        })
        .collect();
    let image: f64 = contributions.iter().sum();
    let norm_u: f64 = src.iter().zip(&values).map(|((_, w), u)| w * u.norm_sqr()).sum();
    (image / norm_u).sqrt()
}

/// `‖S_k u‖_{L²(U)} / ‖u‖_{L²(Γ)}`, or with `∂_x S_k u` when `derivative` is set.
/// Both grids are doubled until the ratio moves by less than 1e-3.
pub fn apply_slp_probe(probe: &QuasimodeProbe, derivative: bool) -> Result<f64> {
    probe.validate()?;
    let w = probe.width();
    let (lo, hi) = probe.target_interval();
    let mut sp = panels_for(4.0 * w, probe.k, 4);
    let mut tp = panels_for(hi - lo, probe.k, 4);
    let mut previous = ratio_at(probe, derivative, sp, tp);
    for _ in 0..MAX_REFINEMENTS {
        sp *= 2;
        tp *= 2;
        let next = ratio_at(probe, derivative, sp, tp);
        if (next - previous).abs() <= REFINE_TOL * next.abs() {
            return Ok(next);
        }
        previous = next;
    }
    Err(Error::Precision(format!(
        "probe ratio at k = {} did not settle to {REFINE_TOL} after {MAX_REFINEMENTS} refinements",
        probe.k
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSweep {
    pub geometry: ProbeGeometry,
    pub derivative: bool,
    pub epsilon: f64,
    pub m: f64,
    pub k: Vec<f64>,
    pub ratio: Vec<f64>,
    pub fit: LogLogFit,
}

impl ProbeSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,ratio,geometry,derivative\n");
        for (k, r) in self.k.iter().zip(&self.ratio) {
            let _ = writeln!(out, "{k:.16e},{r:.16e},{},{}", self.geometry.name(), self.derivative);
        }
        out
    }
}

/// Probe ratios over `k_list` and their log-log slope.
pub fn probe_exponent_fit(
    geometry: ProbeGeometry,
    derivative: bool,
    k_list: &[f64],
    epsilon: f64,
    m: f64,
) -> Result<ProbeSweep> {
    if k_list.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 wavenumbers, got {}", k_list.len())));
    }
    let ratio = k_list
        .par_iter()
        .map(|&k| apply_slp_probe(&QuasimodeProbe { geometry, epsilon, m, k, amplitude: 1.0 }, derivative))
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_loglog(k_list, &ratio)?;
    Ok(ProbeSweep { geometry, derivative, epsilon, m, k: k_list.to_vec(), ratio, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(-1.0), 1.0);
        assert_eq!(bump(2.0), 0.0);
        assert_eq!(bump(-2.5), 0.0);
        assert!((bump(1.5) - 0.5).abs() < 1e-15);
        let mut last = 1.0;
        for i in 0..=100 {
            let v = bump(1.0 + i as f64 / 100.0);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
    }

    #[test]
    fn ratio_is_linear_invariant() {
        let p = QuasimodeProbe::new(ProbeGeometry::Segment, 32.0);
        let q = QuasimodeProbe { amplitude: 2.0, ..p };
        let (a, b) = (apply_slp_probe(&p, false).unwrap(), apply_slp_probe(&q, false).unwrap());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn two_point_slopes() {
        let slope = |g, d| {
            let r64 = apply_slp_probe(&QuasimodeProbe::new(g, 64.0), d).unwrap();
            let r256 = apply_slp_probe(&QuasimodeProbe::new(g, 256.0), d).unwrap();
            (r256 / r64).ln() / 4f64.ln()
        };
        let s = slope(ProbeGeometry::Segment, false);
        assert!((-0.65..=-0.35).contains(&s), "flat plain {s}");
        let s = slope(ProbeGeometry::Parabola, true);
        assert!((0.18..=0.48).contains(&s), "parabola derivative {s}");
    }

    #[test]
    fn validation() {
        let p = QuasimodeProbe::new(ProbeGeometry::Segment, 4.0);
        assert!(matches!(apply_slp_probe(&p, false), Err(Error::Domain(_))));
        let p = QuasimodeProbe { m: 1.0, ..QuasimodeProbe::new(ProbeGeometry::Segment, 16.0) };
        assert!(apply_slp_probe(&p, false).is_err());
        assert!(probe_exponent_fit(ProbeGeometry::Segment, false, &[8.0, 16.0], 0.1, 4.0).is_err());
    }
}
