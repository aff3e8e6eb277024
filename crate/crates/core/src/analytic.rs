//! Separation of variables on the circle: the sound-soft Mie series, the
//! eigenvalues of the layer operators on Fourier modes and the exterior
//! Dirichlet-to-Neumann symbol.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{cached_gauss, singular_rule};
use crate::specfun::{bessel_j_table, hankel01, hankel_h1, hankel_h1_table};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Modes kept in every circle expansion: `⌈ka + 20(ka)^{1/3} + 40⌉`.
pub fn n_modes(ka: f64) -> usize {
    (ka + 20.0 * ka.cbrt() + 40.0).ceil() as usize
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Plane wave `e^{ik⟨x, (cos α, sin α)⟩}` scattered by the sound-soft disc of radius `a`.
#[derive(Debug, Clone)]
pub struct MieSolution {
    pub k: f64,
    pub a: f64,
    pub incidence: f64,
    /// `1/H_n(ka)` for `n = 0..=N`.
    inv_hankel: Vec<C64>,
    /// `J_n(ka)`.
    j_ka: Vec<f64>,
}

impl MieSolution {
    pub fn new(k: f64, a: f64, incidence: f64) -> Result<Self> {
        check_positive("wavenumber", k)?;
        check_positive("radius", a)?;
        let n = n_modes(k * a);
        let h = hankel_h1_table(n, k * a)?;
        let j_ka = bessel_j_table(n, k * a)?;
        let inv_hankel: Vec<C64> = h.iter().map(|v| 1.0 / v).collect();
        // The tail past N is bounded by its first term, which decays
        // super-exponentially once n exceeds ka.
        let tail = inv_hankel[n].norm() / inv_hankel[0].norm();
        if !(tail <= 1e-10) {
            return Err(Error::Precision(format!(
                "Mie series tail {tail:e} at N = {n} exceeds 1e-10"
            )));
        }
        Ok(Self { k, a, incidence, inv_hankel, j_ka })
    }

    pub fn modes(&self) -> usize {
        self.inv_hankel.len() - 1
    }

    /// `∂_n u` on the boundary:
    /// `−(2i/(πa)) Σ_n iⁿ e^{in(θ−α)} / H_n(ka)`.
    pub fn normal_derivative(&self, theta: f64) -> C64 {
        let phi = theta - self.incidence;
        let mut sum = self.inv_hankel[0];
        let mut ipow = C64::new(1.0, 0.0);
        for (n, inv) in self.inv_hankel.iter().enumerate().skip(1) {
            ipow *= I;
            sum += 2.0 * ipow * inv * (n as f64 * phi).cos();
        }
        -2.0 * I / (PI * self.a) * sum
    }

    /// Total field `Σ iⁿ [J_n(kr) − J_n(ka) H_n(kr)/H_n(ka)] e^{in(θ−α)}` for `r ≥ a`.
    pub fn total_field(&self, point: [f64; 2]) -> Result<C64> {
        let r = point[0].hypot(point[1]);
        if r < self.a * (1.0 - 1e-14) {
            return Err(Error::Domain(format!("point at radius {r} lies inside the disc of radius {}", self.a)));
        }
        let phi = point[1].atan2(point[0]) - self.incidence;
        let n = self.modes();
        let j = bessel_j_table(n, self.k * r)?;
        let h = hankel_h1_table(n, self.k * r)?;
        let term = |m: usize| j[m] - self.j_ka[m] * h[m] * self.inv_hankel[m];
        let mut sum = term(0);
        let mut ipow = C64::new(1.0, 0.0);
        for m in 1..=n {
            ipow *= I;
            sum += 2.0 * ipow * term(m) * (m as f64 * phi).cos();
        }
        Ok(sum)
    }

    /// `‖∂_n u‖_{L²(Γ)}` by the periodic trapezoid rule.
    pub fn normal_derivative_l2(&self) -> f64 {
        let samples = 8 * self.modes() + 64;
        let dt = 2.0 * PI / samples as f64;
        let sum: f64 = (0..samples).map(|i| self.normal_derivative(i as f64 * dt).norm_sqr()).sum();
        (sum * dt * self.a).sqrt()
    }
}

/// `∂_n u` on the circle of radius `a` for incidence along `(1, 0)`.
pub fn mie_normal_derivative(k: f64, a: f64, thetas: &[f64]) -> Result<Vec<C64>> {
    let mie = MieSolution::new(k, a, 0.0)?;
    Ok(thetas.iter().map(|&t| mie.normal_derivative(t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeOperator {
    Slp,
    Dlp,
}

/// Kernel samples on `[0, π]` for the operators applied to `e^{inθ}` at
/// `θ = 0`. By symmetry `λ_n = 2a ∫_0^π K(t) cos(nt) dt`.
struct ModeQuadrature {
    nodes: Vec<f64>,
    slp: Vec<C64>,
    dlp: Vec<C64>,
}

impl ModeQuadrature {
    fn new(k: f64, a: f64, pieces: usize) -> Self {
        let width = PI / pieces as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        // Logarithmic singularity at t = 0 on the first piece only.
        for (u, w) in singular_rule().iter() {
            nodes.push(width * u);
            weights.push(width * w);
        }
        let smooth = cached_gauss(20);
        for p in 1..pieces {
            for (u, w) in smooth.iter() {
                nodes.push(width * (p as f64 + u));
                weights.push(width * w);
            }
        }
        let mut slp = Vec::with_capacity(nodes.len());
        let mut dlp = Vec::with_capacity(nodes.len());
        for (t, w) in nodes.iter().zip(&weights) {
            let r = 2.0 * a * (0.5 * t).sin();
            let (h0, h1) = hankel01(k * r);
            slp.push(2.0 * a * w * I * 0.25 * h0);
            // ⟨x − y, n_y⟩ = −r²/(2a) on the circle.
            dlp.push(2.0 * a * w * I * 0.25 * k * h1 * (-r / (2.0 * a)));
        }
        Self { nodes, slp, dlp }
    }

    fn eigenvalue(&self, which: ModeOperator, n: usize) -> C64 {
        let values = match which {
            ModeOperator::Slp => &self.slp,
            ModeOperator::Dlp => &self.dlp,
        };
        self.nodes.iter().zip(values).map(|(t, v)| v * (n as f64 * t).cos()).sum()
    }
}

fn mode_pieces(k: f64, a: f64, n_max: usize) -> usize {
    // ~ one 20-point panel per half oscillation of max(n, ka).
    ((n_max as f64).max(k * a) / 2.0).ceil() as usize + 8
}

fn checked_eigenvalues(k: f64, a: f64, n_max: usize, ns: &[usize]) -> Result<Vec<(C64, C64)>> {
    let pieces = mode_pieces(k, a, n_max);
    let coarse = ModeQuadrature::new(k, a, pieces);
    let fine = ModeQuadrature::new(k, a, 2 * pieces);
    ns.par_iter()
        .map(|&n| {
            let mut out = [C64::default(); 2];
            for (slot, which) in [ModeOperator::Slp, ModeOperator::Dlp].into_iter().enumerate() {
                let (c, f) = (coarse.eigenvalue(which, n), fine.eigenvalue(which, n));
                let scale = f.norm().max(1e-6 / k);
                if (c - f).norm() > 1e-9 * scale {
                    return Err(Error::Precision(format!(
                        "mode {n}: {which:?} eigenvalue quadrature not converged ({c} vs {f})"
                    )));
                }
                out[slot] = f;
            }
            Ok((out[0], out[1]))
        })
        .collect()
}

/// Eigenvalue of the single or double layer on `e^{inθ}` for the circle of
/// radius `a`, by periodic quadrature of the kernel.
pub fn circle_mode_eigenvalue(which: ModeOperator, n: i64, k: f64, a: f64) -> Result<C64> {
    check_positive("wavenumber", k)?;
    check_positive("radius", a)?;
    let m = n.unsigned_abs() as usize;
    if m > n_modes(k * a) {
        return Err(Error::Capacity(format!("mode {n} exceeds N = {}", n_modes(k * a))));
    }
    let (s, d) = checked_eigenvalues(k, a, m, &[m])?[0];
    Ok(match which {
        ModeOperator::Slp => s,
        ModeOperator::Dlp => d,
    })
}

/// `(iπa/2) J_n(ka) H_n(ka)`, the closed form of the single-layer eigenvalue.
pub fn slp_eigenvalue_closed_form(n: i64, k: f64, a: f64) -> Result<C64> {
    let h = hankel_h1(n, k * a)?;
    Ok(I * 0.5 * PI * a * h.value.re * h.value)
}

/// `½ + (iπka/2) J_n(ka) H_n′(ka)`, the closed form of the double-layer eigenvalue.
pub fn dlp_eigenvalue_closed_form(n: i64, k: f64, a: f64) -> Result<C64> {
    let h = hankel_h1(n, k * a)?;
    Ok(0.5 + I * 0.5 * PI * k * a * h.value.re * h.derivative)
}

/// `k H_n′(k) / H_n(k)`.
pub fn dtn_ratio(n: i64, k: f64) -> Result<C64> {
    check_positive("wavenumber", k)?;
    let m = n.unsigned_abs() as usize;
    if m > crate::specfun::order_cap(k) {
        return Err(Error::Capacity(format!("mode {n} exceeds the order cap at k = {k}")));
    }
    let h = hankel_h1(n, k)?;
    Ok(k * h.derivative / h.value)
}

/// Share of modes `|n| ≤ fraction·k` on which `ik` is closer to the DtN symbol than `−ik`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnShare {
    pub k: f64,
    pub fraction: f64,
    pub modes: usize,
    pub share: f64,
}

pub fn eta_sign_mode_comparison(k: f64, fraction: f64) -> Result<DtnShare> {
    check_positive("wavenumber", k)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let n_max = (fraction * k).floor() as i64;
    let ik = I * k;
    let wins = (0..=n_max)
        .map(|n| -> Result<usize> {
            let r = dtn_ratio(n, k)?;
            let multiplicity = if n == 0 { 1 } else { 2 };
            Ok(if (r - ik).norm() < (r + ik).norm() { multiplicity } else { 0 })
        })
        .sum::<Result<usize>>()?;
    let modes = (2 * n_max + 1) as usize;
    Ok(DtnShare { k, fraction, modes, share: wins as f64 / modes as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub n: i64,
    pub slp: C64,
    pub dlp: C64,
    /// `½ + λ_n^{D′} − iη λ_n^{S}`; on the circle `D′` and `D` share eigenvalues.
    pub cfie: C64,
    pub dtn: C64,
}

/// Per-mode operator eigenvalues and DtN symbol for `|n| ≤ N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub k: f64,
    pub a: f64,
    pub eta: f64,
    pub rows: Vec<ModeRow>,
}

impl ModeTable {
    pub fn build(k: f64, a: f64, eta: f64) -> Result<Self> {
        check_positive("wavenumber", k)?;
        check_positive("radius", a)?;
        let n_max = n_modes(k * a);
        let ns: Vec<usize> = (0..=n_max).collect();
        let eig = checked_eigenvalues(k, a, n_max, &ns)?;
        let h = hankel_h1_table(n_max + 1, k)?;
        let mut positive = Vec::with_capacity(n_max + 1);
        for (n, (slp, dlp)) in eig.into_iter().enumerate() {
            let deriv = if n == 0 { -h[1] } else { h[n - 1] - h[n] * (n as f64 / k) };
            let dtn = k * deriv / h[n];
            let cfie = 0.5 + dlp - I * eta * slp;
            positive.push(ModeRow { n: n as i64, slp, dlp, cfie, dtn });
        }
        let mut rows: Vec<ModeRow> =
            positive.iter().skip(1).rev().map(|r| ModeRow { n: -r.n, ..*r }).collect();
        rows.extend(positive);
        Ok(Self { k, a, eta, rows })
    }

    pub fn row(&self, n: i64) -> Option<&ModeRow> {
        let offset = (self.rows.len() as i64 - 1) / 2;
        self.rows.get((n + offset) as usize)
    }

    /// `sup_n |λ_n|` for the given operator.
    pub fn sup_abs(&self, which: ModeOperator) -> f64 {
        self.rows
            .iter()
            .map(|r| match which {
                ModeOperator::Slp => r.slp.norm(),
                ModeOperator::Dlp => r.dlp.norm(),
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,slp_re,slp_im,dlp_re,dlp_im,cfie_re,cfie_im,dtn_re,dtn_im\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.n, r.slp.re, r.slp.im, r.dlp.re, r.dlp.im, r.cfie.re, r.cfie.im, r.dtn.re, r.dtn.im
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mie_satisfies_dirichlet_condition() {
        for k in [1.0, 10.0, 40.0] {
            let mie = MieSolution::new(k, 1.0, 0.3).unwrap();
            for i in 0..16 {
                let t = i as f64 * 0.41;
                let u = mie.total_field([t.cos(), t.sin()]).unwrap();
                assert!(u.norm() <= 1e-10, "k = {k}: |u| = {}", u.norm());
            }
        }
    }

    #[test]
    fn mie_normal_derivative_matches_field_difference() {
        // Radial finite difference of the total field against the series.
        let (k, a) = (6.0, 1.0);
        let mie = MieSolution::new(k, a, 0.0).unwrap();
        let eps = 1e-5;
        for t in [0.0, 1.0, 2.5] {
            let dir = [f64::cos(t), f64::sin(t)];
            let u1 = mie.total_field([(a + eps) * dir[0], (a + eps) * dir[1]]).unwrap();
            let u2 = mie.total_field([(a + 2.0 * eps) * dir[0], (a + 2.0 * eps) * dir[1]]).unwrap();
            let fd = (4.0 * u1 - u2) / (2.0 * eps); // one-sided, u(a) = 0
            let v = mie.normal_derivative(t);
            assert!((fd - v).norm() <= 1e-5 * v.norm().max(1.0), "{fd} vs {v}");
        }
    }

    #[test]
    fn mie_parity() {
        let v = mie_normal_derivative(12.0, 1.0, &[0.4, -0.4, 2.9, -2.9]).unwrap();
        assert!((v[0] - v[1]).norm() < 1e-12 * v[0].norm());
        assert!((v[2] - v[3]).norm() < 1e-12 * v[2].norm());
    }

    #[test]
    fn slp_eigenvalue_matches_closed_form() {
        let got = circle_mode_eigenvalue(ModeOperator::Slp, 0, 1.0, 1.0).unwrap();
        let expect = slp_eigenvalue_closed_form(0, 1.0, 1.0).unwrap();
        assert!((got - expect).norm() <= 1e-8 * expect.norm(), "{got} vs {expect}");
        for (n, k, a) in [(3, 5.0, 1.0), (-7, 10.0, 0.7), (40, 30.0, 1.0)] {
            let got = circle_mode_eigenvalue(ModeOperator::Slp, n, k, a).unwrap();
            let expect = slp_eigenvalue_closed_form(n, k, a).unwrap();
            assert!((got - expect).norm() <= 1e-8 * expect.norm(), "n = {n}: {got} vs {expect}");
            let got = circle_mode_eigenvalue(ModeOperator::Dlp, n, k, a).unwrap();
            let expect = dlp_eigenvalue_closed_form(n, k, a).unwrap();
            assert!((got - expect).norm() <= 1e-8 * expect.norm().max(1e-3), "n = {n}: {got} vs {expect}");
        }
    }

    #[test]
    fn conjugate_mode_symmetry() {
        let t = ModeTable::build(8.0, 1.0, 8.0).unwrap();
        assert!(t.rows.len() == 2 * n_modes(8.0) + 1);
        for n in 1..=n_modes(8.0) as i64 {
            assert_eq!(t.row(n).unwrap().slp, t.row(-n).unwrap().slp);
            assert_eq!(t.row(-n).unwrap().n, -n);
        }
        let direct = circle_mode_eigenvalue(ModeOperator::Slp, -5, 8.0, 1.0).unwrap();
        assert!((direct - circle_mode_eigenvalue(ModeOperator::Slp, 5, 8.0, 1.0).unwrap()).norm() < 1e-15);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), t.rows.len() + 1);
    }

    #[test]
    fn slp_sup_bracket_at_k100() {
        let k: f64 = 100.0;
        let t = ModeTable::build(k, 1.0, k).unwrap();
        let sup = t.sup_abs(ModeOperator::Slp);
        let scale = k.powf(-2.0 / 3.0);
        assert!(sup <= 1.2 * scale && sup >= 0.2 * scale, "sup = {sup}, k^-2/3 = {scale}");
        // Glancing modes dominate.
        let arg = t.rows.iter().max_by(|a, b| a.slp.norm().total_cmp(&b.slp.norm())).unwrap().n.abs() as f64;
        assert!((arg - k).abs() <= 5.0 * k.cbrt());
    }

    #[test]
    fn cfie_modes_bounded_below() {
        for k in [32.0, 64.0] {
            let t = ModeTable::build(k, 1.0, k).unwrap();
            let min = t.rows.iter().map(|r| r.cfie.norm()).fold(f64::INFINITY, f64::min);
            assert!(min >= 0.4, "k = {k}: min |cfie| = {min}");
        }
    }

    #[test]
    fn dtn_examples() {
        let k = 200.0;
        let r = dtn_ratio(0, k).unwrap();
        assert!((r - I * k).norm() / k <= 0.01);
        let r = dtn_ratio(1, k).unwrap();
        assert!((r - I * k).norm() / k <= 0.02);
        let k = 100.0;
        let r = dtn_ratio(200, k).unwrap();
        let approx = 200.0 * (1.0 - 0.25f64).sqrt();
        assert!((r.re.abs() - approx).abs() <= 0.1 * approx && r.re.abs() > r.im.abs());
        for k in [5.0, 50.0, 150.0] {
            for n in [0, 1, 10, 49, 100, 160, 205] {
                assert!(dtn_ratio(n, k).unwrap().im >= 0.0, "n = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn share_examples() {
        assert_eq!(eta_sign_mode_comparison(100.0, 0.9).unwrap().share, 1.0);
        assert_eq!(eta_sign_mode_comparison(50.0, 0.5).unwrap().share, 1.0);
        let low = eta_sign_mode_comparison(10.0, 0.9).unwrap();
        assert!(low.share >= 0.0 && low.share <= 1.0 && low.modes == 19);
        assert!(eta_sign_mode_comparison(10.0, 1.5).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(MieSolution::new(-1.0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(circle_mode_eigenvalue(ModeOperator::Slp, 10_000, 1.0, 1.0).is_err());
    }
}
