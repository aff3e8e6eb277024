//! Dense complex matrices and the spectral routines built on them.

use faer::{MatRef, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let data = (0..rows * cols).map(|idx| f(idx / cols, idx % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s·other`.
    pub fn add_scaled(&mut self, s: C64, other: &CMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
    }

    /// `diag(l)·self·diag(r)`.
    pub fn scale_rows_cols(&self, l: &[f64], r: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * (l[i] * r[j]))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `y = A x`, rows in parallel.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        y.par_iter_mut().enumerate().with_min_len(64).for_each(|(i, yi)| {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        self.matvec(x, &mut y);
        y
    }

    /// `y = Aᴴ x`, accumulated over row blocks.
    pub fn matvec_adjoint(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        let block = 128;
        let partial: Vec<Vec<C64>> = (0..self.rows.div_ceil(block))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![C64::new(0.0, 0.0); self.cols];
                for i in b * block..((b + 1) * block).min(self.rows) {
                    let xi = x[i];
                    for (a, v) in acc.iter_mut().zip(self.row(i)) {
                        *a += v.conj() * xi;
                    }
                }
                acc
            })
            .collect();
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for p in partial {
            y.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(vec![]);
    }
    a.as_faer()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))
}

/// Eigenvalues of a Hermitian matrix, nondecreasing.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    a.as_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))
}

/// `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()))
}

/// Eigenpairs of a real symmetric tridiagonal matrix (dense path; sizes are small).
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = alpha.len();
    let t = faer::Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..m).map(|i| s[i]).collect();
    let vectors = (0..m).map(|c| (0..m).map(|r| u[(r, c)]).collect()).collect();
    Ok((values, vectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<C64>,
    pub iterations: usize,
}

/// Extreme eigenpair of a Hermitian operator by Lanczos with full
/// reorthogonalisation. Converged when the Ritz residual `|β_m s_m|` falls
/// below `tol·max(|θ|, scale)`.
pub fn lanczos<F>(
    n: usize,
    apply: F,
    which: Extreme,
    start: Option<&[C64]>,
    tol: f64,
    max_iter: usize,
) -> Result<LanczosResult>
where
    F: Fn(&[C64], &mut [C64]),
{
    let mut q = match start {
        Some(s) if norm2(s) > 0.0 => s.to_vec(),
        _ => (0..n)
            .map(|i| {
                let t = i as f64;
                C64::new(1.0 + 0.37 * (1.3 * t).sin(), 0.25 * (0.7 * t + 0.4).cos())
            })
            .collect(),
    };
    let nrm = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nrm);

    let max_iter = max_iter.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_iter);
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut scale: f64 = 0.0;
    for m in 0..max_iter {
        apply(&q, &mut w);
        let a = dot(&q, &w).re;
        basis.push(std::mem::take(&mut q));
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        alpha.push(a);
        let b = norm2(&w);
        scale = scale.max(a.abs()).max(b);
        let last = m + 1 == max_iter || b <= 1e-14 * scale;
        if m % 4 != 3 && !last {
            beta.push(b);
            q = w.iter().map(|v| v / b).collect();
            w = vec![C64::new(0.0, 0.0); n];
            continue;
        }

        let (values, vectors) = tridiagonal_eigen(&alpha, &beta)?;
        let idx = match which {
            Extreme::Smallest => 0,
            Extreme::Largest => values.len() - 1,
        };
        let theta = values[idx];
        let residual = (b * vectors[idx][m]).abs();
        if residual <= tol * theta.abs().max(scale * 1e-3) || last {
            let mut vector = vec![C64::new(0.0, 0.0); n];
            for (coef, v) in vectors[idx].iter().zip(&basis) {
                vector.iter_mut().zip(v).for_each(|(x, y)| *x += *coef * y);
            }
            return Ok(LanczosResult { value: theta, vector, iterations: m + 1 });
        }
        beta.push(b);
        q = w.iter().map(|v| v / b).collect();
        w = vec![C64::new(0.0, 0.0); n];
    }
    Err(Error::Numerical("Lanczos produced no iterate".into()))
}
