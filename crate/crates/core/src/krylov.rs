//! Unrestarted GMRES, discrete operator norms and the field-of-values
//! estimates behind the Elman and BGT residual bounds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteOperator, TangentialDerivative};
use crate::error::{Error, Result};
use crate::linalg::{
    dot, hermitian_eigenvalues, lanczos, norm2, singular_values, CMatrix, Extreme,
};

/// Above this size spectral quantities switch from dense factorisations to Lanczos.
pub const DENSE_LIMIT: usize = 400;

const LANCZOS_TOL: f64 = 1e-11;
const LANCZOS_MAX_ITER: usize = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmresTrace {
    pub solution: Vec<C64>,
    pub iterations: usize,
    /// `‖r_j‖/‖r_0‖` for `j = 0..=iterations`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
    /// `‖b − A x‖/‖b‖` recomputed from the returned solution.
    pub true_residual: f64,
}

impl GmresTrace {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,relative_residual\n");
        for (j, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(out, "{j},{r:.16e}");
        }
        out
    }
}

/// `(c, s, r)` with `[c s; −s̄ c]·[a; b] = [r; 0]`, `c` real.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if rho == 0.0 {
        return (1.0, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm(), C64::new(b.norm(), 0.0));
    }
    let phase = a / a.norm();
    (a.norm() / rho, phase * b.conj() / rho, phase * rho)
}

/// Full GMRES from a zero initial guess: Arnoldi with modified Gram–Schmidt,
/// least squares by Givens rotations.
pub fn gmres<F>(apply: F, b: &[C64], tol: f64, maxit: usize) -> Result<GmresTrace>
where
    F: Fn(&[C64], &mut [C64]),
{
    let n = b.len();
    let beta = norm2(b);
    if beta == 0.0 {
        return Err(Error::InvalidArgument("GMRES needs a nonzero right-hand side".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let maxit = maxit.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Columns of the (rotated) Hessenberg matrix.
    let mut hess: Vec<Vec<C64>> = Vec::with_capacity(maxit);
    let mut rotations: Vec<(f64, C64)> = Vec::with_capacity(maxit);
    let mut g = vec![C64::new(beta, 0.0)];
    let mut residuals = vec![1.0];
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut converged = false;

    for j in 0..maxit {
        apply(&basis[j], &mut w);
        let mut col = vec![C64::new(0.0, 0.0); j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(v, &w);
            col[i] = hij;
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= hij * y);
        }
        let h_next = norm2(&w);
        col[j + 1] = C64::new(h_next, 0.0);
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, bb) = (col[i], col[i + 1]);
            col[i] = c * a + s * bb;
            col[i + 1] = -s.conj() * a + c * bb;
        }
        let (c, s, r) = givens(col[j], col[j + 1]);
        col[j] = r;
        col[j + 1] = C64::new(0.0, 0.0);
        rotations.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s.conj() * gj);
        hess.push(col);
        let rel = g[j + 1].norm() / beta;
        residuals.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        if h_next <= 1e-14 * beta.max(1.0) {
            return Err(Error::Numerical(format!(
                "Arnoldi breakdown at step {} with relative residual {rel:e}",
                j + 1
            )));
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    let m = hess.len();
    let mut y = vec![C64::new(0.0, 0.0); m];
    for i in (0..m).rev() {
        let mut acc = g[i];
        for l in i + 1..m {
            acc -= hess[l][i] * y[l];
        }
        if hess[i][i].norm() == 0.0 {
            return Err(Error::Numerical("singular Hessenberg matrix in GMRES".into()));
        }
        y[i] = acc / hess[i][i];
    }
    let mut solution = vec![C64::new(0.0, 0.0); n];
    for (yi, v) in y.iter().zip(&basis) {
        solution.iter_mut().zip(v).for_each(|(x, vv)| *x += yi * vv);
    }
    apply(&solution, &mut w);
    let true_residual = norm2(&b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect::<Vec<_>>()) / beta;
    Ok(GmresTrace { solution, iterations: m, residuals, converged, tol, true_residual })
}

/// `M^{−1/2} A M^{−1/2}` for a diagonal mass matrix.
pub fn mass_weighted(op: &DiscreteOperator) -> CMatrix {
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    op.matrix.scale_rows_cols(&s, &s)
}

/// Largest singular value: dense SVD up to [`DENSE_LIMIT`], Lanczos on `BᴴB` above.
pub fn spectral_norm(b: &CMatrix) -> Result<f64> {
    let n = b.cols();
    if n == 0 || b.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if n <= DENSE_LIMIT {
        return Ok(singular_values(b)?[0]);
    }
    let r = lanczos(
        n,
        |x, y| b.matvec_adjoint(&b.apply(x), y),
        Extreme::Largest,
        None,
        LANCZOS_TOL,
        LANCZOS_MAX_ITER,
    )?;
    Ok(r.value.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub enum NormMetric<'a> {
    L2,
    /// `‖·‖²_{H¹} = ‖u‖² + ‖∂_s u‖²` with `∂_s` the central-difference stencil.
    L2ToH1(&'a TangentialDerivative),
}

/// Discrete operator norm in the true `L²(Γ)` metric.
///
/// With `B = M^{−1/2} A M^{−1/2}` and `y = M^{1/2} c`, `B y = M^{1/2} w` where
/// `w = M^{−1} A c` are the coefficients of the `L²` projection of `A u`.
/// The `L²→H¹` norm is `σ_max([I; M^{1/2} D M^{−1/2}] B)` with `D` the stencil.
pub fn operator_norm(op: &DiscreteOperator, metric: NormMetric<'_>) -> Result<f64> {
    let b = mass_weighted(op);
    match metric {
        NormMetric::L2 => spectral_norm(&b),
        NormMetric::L2ToH1(d) => {
            if d.dof != op.dof() {
                return Err(Error::InvalidArgument(format!(
                    "stencil has {} rows, operator has {}",
                    d.dof,
                    op.dof()
                )));
            }
            let n = op.dof();
            let sqrt_m: Vec<f64> = op.mass.iter().map(|m| m.sqrt()).collect();
            // Scaled stencil M^{1/2} D M^{−1/2} and its transpose as triplets.
            let scaled: Vec<(usize, usize, f64)> =
                d.entries.iter().map(|&(i, j, v)| (i, j, v * sqrt_m[i] / sqrt_m[j])).collect();
            if b.max_abs() == 0.0 {
                return Ok(0.0);
            }
            if n <= DENSE_LIMIT {
                let mut g = CMatrix::zeros(2 * n, n);
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] = b[(i, j)];
                    }
                }
                for &(i, l, v) in &scaled {
                    for j in 0..n {
                        let add = v * b[(l, j)];
                        g[(n + i, j)] += add;
                    }
                }
                return Ok(singular_values(&g)?[0]);
            }
            let apply = |x: &[C64], y: &mut [C64]| {
                let bx = b.apply(x);
                let mut dbx = vec![C64::new(0.0, 0.0); n];
                for &(i, j, v) in &scaled {
                    dbx[i] += v * bx[j];
                }
                let mut back = bx;
                for &(i, j, v) in &scaled {
                    back[j] += v * dbx[i];
                }
                b.matvec_adjoint(&back, y);
            };
            let r = lanczos(n, apply, Extreme::Largest, None, LANCZOS_TOL, LANCZOS_MAX_ITER)?;
            Ok(r.value.max(0.0).sqrt())
        }
    }
}

/// `1/σ_min(M^{−1/2} A M^{−1/2})`, by dense SVD.
pub fn inverse_norm(op: &DiscreteOperator) -> Result<f64> {
    let s = singular_values(&mass_weighted(op))?;
    let (max, min) = (s.first().copied().unwrap_or(0.0), s.last().copied().unwrap_or(0.0));
    if !(min > 1e-14 * max) {
        return Err(Error::Singularity(format!("matrix is singular to working precision (σ_min = {min:e})")));
    }
    Ok(1.0 / min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub norm: f64,
    pub dist: f64,
    pub cos_beta: f64,
    pub beta: f64,
    pub sin_beta: f64,
    pub gamma_beta: f64,
    /// Rotation angle attaining the distance.
    pub angle: f64,
    /// No rotation separated the field of values from 0.
    pub contains_origin: bool,
}

/// `γ_β = 2 sin(β / (4 − 2β/π))`.
pub fn gamma_beta(beta: f64) -> f64 {
    2.0 * (beta / (4.0 - 2.0 * beta / PI)).sin()
}

impl RangeEstimate {
    pub fn from_parts(norm: f64, dist: f64, angle: f64, contains_origin: bool) -> Self {
        let cos_beta = if norm > 0.0 { (dist / norm).clamp(0.0, 1.0) } else { 0.0 };
        let beta = cos_beta.acos();
        Self {
            norm,
            dist,
            cos_beta,
            beta,
            sin_beta: beta.sin(),
            gamma_beta: gamma_beta(beta),
            angle,
            contains_origin,
        }
    }
}

/// `λ_min(½(e^{iθ}B + e^{−iθ}Bᴴ))` evaluated along a sweep, with Lanczos warm starts.
struct RotatedHermitian {
    /// `½(B + Bᴴ)` and `(i/2)(B − Bᴴ)`.
    sum: CMatrix,
    diff: CMatrix,
    work: std::cell::RefCell<CMatrix>,
    warm: std::cell::RefCell<Option<Vec<C64>>>,
}

impl RotatedHermitian {
    fn new(b: &CMatrix) -> Self {
        // e^{iθ}B + e^{−iθ}Bᴴ = cos θ (B + Bᴴ) + i sin θ (B − Bᴴ).
        let n = b.rows();
        let sum = CMatrix::from_fn(n, n, |i, j| 0.5 * (b[(i, j)] + b[(j, i)].conj()));
        let diff = CMatrix::from_fn(n, n, |i, j| C64::new(0.0, 0.5) * (b[(i, j)] - b[(j, i)].conj()));
        Self {
            work: std::cell::RefCell::new(CMatrix::zeros(n, n)),
            sum,
            diff,
            warm: std::cell::RefCell::new(None),
        }
    }

    /// `tol` bounds the Lanczos residual, which bounds the eigenvalue error.
    fn lambda_min(&self, theta: f64, tol: f64) -> Result<f64> {
        let (s, c) = theta.sin_cos();
        let mut h = self.work.borrow_mut();
        h.as_mut_slice()
            .par_iter_mut()
            .zip(self.sum.as_slice().par_iter().zip(self.diff.as_slice()))
            .for_each(|(out, (a, d))| *out = c * a + s * d);
        let n = h.rows();
        if n <= DENSE_LIMIT {
            return Ok(hermitian_eigenvalues(&h)?[0]);
        }
        let start = self.warm.borrow().clone();
        let r = lanczos(n, |x, y| h.matvec(x, y), Extreme::Smallest, start.as_deref(), tol, LANCZOS_MAX_ITER)?;
        *self.warm.borrow_mut() = Some(r.vector);
        Ok(r.value)
    }
}

const COARSE_ANGLES: usize = 32;
const FINE_ANGLES: usize = 720;
const ANGLE_RESOLUTION: f64 = 1e-4;
const SWEEP_TOL: f64 = 1e-5;
const REFINE_TOL: f64 = 1e-9;
const CIRCULANT_TOL: f64 = 1e-10;

/// Eigenvalues `λ_m = Σ_l c_l e^{2πi ml/n}` when `b` is circulant to
/// [`CIRCULANT_TOL`] relative to its largest entry.
pub fn circulant_eigenvalues(b: &CMatrix) -> Option<Vec<C64>> {
    let n = b.rows();
    if !b.is_square() || n == 0 {
        return None;
    }
    let first = b.row(0);
    let tol = CIRCULANT_TOL * b.max_abs();
    let circulant = (1..n).into_par_iter().all(|i| {
        let row = b.row(i);
        (0..n).all(|j| (row[j] - first[(j + n - i) % n]).norm() <= tol)
    });
    if !circulant {
        return None;
    }
    let roots: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).collect();
    Some(
        (0..n)
            .into_par_iter()
            .map(|m| first.iter().enumerate().map(|(l, c)| c * roots[(m * l) % n]).sum())
            .collect(),
    )
}

/// Maximises `g(θ, tol)` over the circle: coarse sweep, dense sweep when no
/// coarse angle is positive, then golden section. Returns `(θ, g)`; `g ≤ 0`
/// means no rotation separates the set from 0.
fn maximise_support(g: impl Fn(f64, f64) -> Result<f64>) -> Result<(f64, f64)> {
    let sweep = |count: usize| -> Result<Vec<(f64, f64)>> {
        (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                Ok((t, g(t, SWEEP_TOL)?))
            })
            .collect()
    };
    let best_of = |s: &[(f64, f64)]| s.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let mut samples = sweep(COARSE_ANGLES)?;
    let (mut theta, mut value) = best_of(&samples);
    if value <= 0.0 {
        samples = sweep(FINE_ANGLES)?;
        (theta, value) = best_of(&samples);
        if value <= 0.0 {
            return Ok((theta, value));
        }
    }
    let step = 2.0 * PI / samples.len() as f64;
    let (mut lo, mut hi) = (theta - step, theta + step);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let g = |t: f64| g(t, REFINE_TOL);
    value = g(theta)?;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    while hi - lo > ANGLE_RESOLUTION {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1)?;
        }
    }
    for (t, f) in [(x1, f1), (x2, f2)] {
        if f > value {
            theta = t;
            value = f;
        }
    }
    Ok((theta.rem_euclid(2.0 * PI), value))
}

/// `dist(0, W(B))` by maximising the support function
/// `g(θ) = λ_min(Herm(e^{iθ}B))`. A circulant `B` is normal, so `W(B)` is the
/// convex hull of its eigenvalues and `g(θ) = min_m Re(e^{iθ}λ_m)`.
pub fn range_estimate(b: &CMatrix) -> Result<RangeEstimate> {
    if !b.is_square() || b.rows() == 0 {
        return Err(Error::InvalidArgument("numerical range needs a nonempty square matrix".into()));
    }
    if b.max_abs() == 0.0 {
        return Ok(RangeEstimate::from_parts(0.0, 0.0, 0.0, true));
    }
    let (norm, (theta, value)) = match circulant_eigenvalues(b) {
        Some(eig) => {
            let norm = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let support = |t: f64, _tol: f64| -> Result<f64> {
                let rot = C64::from_polar(1.0, t);
                Ok(eig.iter().map(|z| (rot * z).re).fold(f64::INFINITY, f64::min))
            };
            (norm, maximise_support(support)?)
        }
        None => {
            let norm = spectral_norm(b)?;
            let rh = RotatedHermitian::new(b);
            (norm, maximise_support(|t, tol| rh.lambda_min(t, tol))?)
        }
    };
    if value <= 0.0 {
        return Ok(RangeEstimate::from_parts(norm, 0.0, theta, true));
    }
    Ok(RangeEstimate::from_parts(norm, value, theta, false))
}

/// Field-of-values estimate in the mass-weighted metric.
pub fn numerical_range_distance(op: &DiscreteOperator) -> Result<RangeEstimate> {
    range_estimate(&mass_weighted(op))
}

/// Field-of-values estimate of the raw Galerkin matrix (Euclidean metric).
pub fn numerical_range_distance_euclidean(op: &DiscreteOperator) -> Result<RangeEstimate> {
    range_estimate(&op.matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictors {
    pub m_elman: usize,
    pub m_bgt: usize,
}

/// `2 + 2/√3`.
pub const BGT_CONSTANT: f64 = 2.0 + 2.0 / 1.732_050_807_568_877_2;

pub fn elman_bound(sin_beta: f64, m: usize) -> f64 {
    sin_beta.powi(m as i32)
}

pub fn bgt_bound(gamma: f64, m: usize) -> f64 {
    BGT_CONSTANT * (2.0 + gamma) * gamma.powi(m as i32)
}

/// Smallest `m` with `sin^m β ≤ ε` and with `(2 + 2/√3)(2 + γ_β)γ_β^m ≤ ε`.
/// `None` when `cos β = 0` (no prediction).
pub fn iteration_predictors(range: &RangeEstimate, eps: f64) -> Result<Option<Predictors>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(range.cos_beta > 0.0) {
        return Ok(None);
    }
    let smallest = |bound: &dyn Fn(usize) -> f64, rate: f64, offset: f64| -> usize {
        if rate == 0.0 {
            return 1;
        }
        // Logarithmic estimate, then settle exactly against the bound.
        let mut m = (((eps / offset).ln() / rate.ln()).ceil().max(1.0)) as usize;
        while m > 1 && bound(m - 1) <= eps {
            m -= 1;
        }
        while bound(m) > eps {
            m += 1;
        }
        m
    };
    let (s, g) = (range.sin_beta, range.gamma_beta);
    let m_elman = smallest(&|m| elman_bound(s, m), s, 1.0);
    let m_bgt = smallest(&|m| bgt_bound(g, m), g, BGT_CONSTANT * (2.0 + g));
    Ok(Some(Predictors { m_elman, m_bgt }))
}
