//! Cylindrical Bessel and Hankel functions of integer order, the 2-D
//! Helmholtz fundamental solution and its normal derivatives.
//!
//! `J_n` comes from Miller's downward recurrence normalised by
//! `1 = J_0 + 2 Σ J_{2m}`. `Y_n` is recurred upward from `Y_0`, `Y_1`, which
//! are taken from [`hankel01`]. Order-0/1 values used by the kernels go
//! through [`hankel01`] directly: fdlibm rational approximations below
//! `x = 25`, the Hankel asymptotic series above.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Above this argument the Hankel asymptotic series converges to full
/// double precision well before its terms start to grow.
const ASYMPTOTIC_SWITCH: f64 = 25.0;

/// `H_n^{(1)}(x)` together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelValue {
    pub order: i64,
    pub x: f64,
    pub value: C64,
    pub derivative: C64,
}

/// Largest order accepted at argument `x`: `⌈2x⌉ + 200`.
pub fn order_cap(x: f64) -> usize {
    (2.0 * x).ceil() as usize + 200
}

fn check_argument(n: usize, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be positive and finite, got {x}")));
    }
    if n > order_cap(x) {
        return Err(Error::Capacity(format!(
            "order {n} exceeds cap {} at x = {x}",
            order_cap(x)
        )));
    }
    Ok(())
}

fn parity(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `H_0^{(1)}(x)` and `H_1^{(1)}(x)` for `x > 0`. No argument checks; this is
/// the inner loop of every kernel evaluation.
#[inline]
pub fn hankel01(x: f64) -> (C64, C64) {
    if x < ASYMPTOTIC_SWITCH {
        (
            C64::new(libm::j0(x), libm::y0(x)),
            C64::new(libm::j1(x), libm::y1(x)),
        )
    } else {
        hankel01_asymptotic(x)
    }
}

const ASYMPTOTIC_TERMS: usize = 21;

/// `i^m a_m(ν)` folded into real coefficients: entry `m` is `(−1)^{⌊m/2⌋} a_m(ν)`.
const fn asymptotic_coefficients(nu: f64) -> [f64; ASYMPTOTIC_TERMS] {
    let mut out = [0.0; ASYMPTOTIC_TERMS];
    let mut a = 1.0;
    out[0] = 1.0;
    let mut m = 1;
    while m < ASYMPTOTIC_TERMS {
        let odd = (2 * m - 1) as f64;
        a *= (4.0 * nu * nu - odd * odd) / (8.0 * m as f64);
        out[m] = if (m / 2) % 2 == 0 { a } else { -a };
        m += 1;
    }
    out
}

const ASYMPTOTIC_0: [f64; ASYMPTOTIC_TERMS] = asymptotic_coefficients(0.0);
const ASYMPTOTIC_1: [f64; ASYMPTOTIC_TERMS] = asymptotic_coefficients(1.0);

/// `Σ_m i^m a_m / x^m` as `P + iQ`, summed by Horner in `1/x²`.
#[inline]
fn asymptotic_sum(c: &[f64; ASYMPTOTIC_TERMS], terms: usize, y: f64) -> C64 {
    let y2 = y * y;
    let (mut p, mut q) = (0.0, 0.0);
    let mut m = terms - 1;
    loop {
        if m % 2 == 0 {
            p = p * y2 + c[m];
        } else {
            q = q * y2 + c[m];
        }
        if m == 0 {
            break;
        }
        m -= 1;
    }
    C64::new(p, q * y)
}

/// `H_ν(x) ~ sqrt(2/(πx)) e^{i(x − νπ/2 − π/4)} Σ_m i^m a_m(ν) / x^m`.
fn hankel01_asymptotic(x: f64) -> (C64, C64) {
    // Enough terms for 1e-17 relative truncation error.
    let terms = if x < 50.0 {
        21
    } else if x < 100.0 {
        14
    } else if x < 400.0 {
        11
    } else {
        8
    };
    let y = 1.0 / x;
    let s0 = asymptotic_sum(&ASYMPTOTIC_0, terms, y);
    let s1 = asymptotic_sum(&ASYMPTOTIC_1, terms, y);
    let (sin, cos) = x.sin_cos();
    let pref = (2.0 / (PI * x)).sqrt() * FRAC_1_SQRT_2;
    // e^{i(x − π/4)} and e^{i(x − 3π/4)} without reducing a shifted argument.
    let e0 = C64::new(cos + sin, sin - cos) * pref;
    let e1 = C64::new(sin - cos, -(cos + sin)) * pref;
    (e0 * s0, e1 * s1)
}

/// `J_0(x), …, J_{n_max}(x)` by normalised downward recurrence.
pub fn bessel_j_table(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_argument(n_max, x)?;
    let top = n_max.max(x.ceil() as usize) + 25 + (12.0 * x.cbrt()).ceil() as usize;
    let top = top + top % 2;
    let mut values = vec![0.0; n_max + 1];
    let mut upper = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut sum = 0.0_f64;
    for n in (1..=top).rev() {
        if n <= n_max {
            values[n] = current;
        }
        if n % 2 == 0 {
            sum += 2.0 * current;
        }
        let lower = (2.0 * n as f64 / x) * current - upper;
        upper = current;
        current = lower;
        if current.abs() > 1e250 {
            let s = 1e-250;
            current *= s;
            upper *= s;
            sum *= s;
            for v in values.iter_mut().skip(n.min(n_max + 1)) {
                *v *= s;
            }
        }
    }
    values[0] = current;
    sum += current;
    for v in &mut values {
        *v /= sum;
    }
    Ok(values)
}

/// `Y_0(x), …, Y_{n_max}(x)` by upward recurrence.
pub fn bessel_y_table(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_argument(n_max, x)?;
    let (h0, h1) = hankel01(x);
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(h0.im);
    if n_max >= 1 {
        values.push(h1.im);
    }
    for n in 1..n_max {
        let next = (2.0 * n as f64 / x) * values[n] - values[n - 1];
        if !next.is_finite() {
            return Err(Error::Capacity(format!(
                "Y_{} overflows at x = {x}",
                n + 1
            )));
        }
        values.push(next);
    }
    Ok(values)
}

/// `H_0^{(1)}(x), …, H_{n_max}^{(1)}(x)`.
pub fn hankel_h1_table(n_max: usize, x: f64) -> Result<Vec<C64>> {
    let j = bessel_j_table(n_max, x)?;
    let y = bessel_y_table(n_max, x)?;
    Ok(j.into_iter().zip(y).map(|(j, y)| C64::new(j, y)).collect())
}

/// `J_n(x)` for integer `n` (negative orders by `J_{-n} = (-1)^n J_n`).
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    let m = n.unsigned_abs() as usize;
    let table = bessel_j_table(m, x)?;
    let sign = if n < 0 { parity(m) } else { 1.0 };
    Ok(sign * table[m])
}

/// `H_n^{(1)}(x)` and its derivative `H_{n-1} − (n/x) H_n`.
pub fn hankel_h1(n: i64, x: f64) -> Result<HankelValue> {
    let m = n.unsigned_abs() as usize;
    let table = hankel_h1_table(m + 1, x)?;
    let value = table[m];
    let derivative = if m == 0 {
        -table[1]
    } else {
        table[m - 1] - value * (m as f64 / x)
    };
    let sign = if n < 0 { parity(m) } else { 1.0 };
    Ok(HankelValue {
        order: n,
        x,
        value: value * sign,
        derivative: derivative * sign,
    })
}

/// `Φ_k(r) = (i/4) H_0^{(1)}(kr)`.
pub fn green_2d(k: f64, r: f64) -> Result<C64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    if !(r > 0.0) {
        return Err(Error::Singularity(format!(
            "fundamental solution evaluated at r = {r}"
        )));
    }
    Ok(C64::new(0.0, 0.25) * hankel01(k * r).0)
}

fn difference(x: [f64; 2], y: [f64; 2]) -> Result<([f64; 2], f64)> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(Error::Singularity("kernel evaluated at x = y".into()));
    }
    Ok((d, r))
}

/// `∂Φ_k(x, y)/∂n(y) = (ik/4) H_1^{(1)}(k|x−y|) ⟨x−y, n_y⟩ / |x−y|`.
pub fn dlp_kernel_2d(k: f64, x: [f64; 2], y: [f64; 2], n_y: [f64; 2]) -> Result<C64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let (d, r) = difference(x, y)?;
    let cos = (d[0] * n_y[0] + d[1] * n_y[1]) / r;
    Ok(C64::new(0.0, 0.25 * k) * hankel01(k * r).1 * cos)
}

/// `∂Φ_k(x, y)/∂n(x) = (ik/4) H_1^{(1)}(k|x−y|) ⟨y−x, n_x⟩ / |x−y|`, so that
/// `adlp_kernel_2d(k, x, y, n) == dlp_kernel_2d(k, y, x, n)`.
pub fn adlp_kernel_2d(k: f64, x: [f64; 2], y: [f64; 2], n_x: [f64; 2]) -> Result<C64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let (d, r) = difference(x, y)?;
    let cos = -(d[0] * n_x[0] + d[1] * n_x[1]) / r;
    Ok(C64::new(0.0, 0.25 * k) * hankel01(k * r).1 * cos)
}
