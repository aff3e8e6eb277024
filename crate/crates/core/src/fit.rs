//! Ordinary least squares on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for two points).
    pub stderr: f64,
    pub points: usize,
}

impl LogLogFit {
    pub fn upper(&self, sigmas: f64) -> f64 {
        self.slope + sigmas * self.stderr
    }

    pub fn lower(&self, sigmas: f64) -> f64 {
        self.slope - sigmas * self.stderr
    }
}

/// Fits `ln y = intercept + slope · ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a log-log fit needs at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if lx.len() > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogLogFit { slope, intercept, stderr, points: lx.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let x = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0 / 3.0)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope + 2.0 / 3.0).abs() < 1e-12 && f.stderr < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_loglog(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn slope_is_scale_invariant(p in -2.0f64..2.0, c in 0.1f64..10.0, s in 0.1f64..10.0) {
            let x = [4.0, 9.0, 20.0, 50.0, 130.0];
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v): (usize, &f64)| c * v.powf(p) * (1.0 + 0.05 * (i as f64).sin())).collect();
            let ys: Vec<f64> = y.iter().map(|v| s * v).collect();
            let (a, b) = (fit_loglog(&x, &y).unwrap(), fit_loglog(&x, &ys).unwrap());
            prop_assert!((a.slope - b.slope).abs() < 1e-10);
            prop_assert!((a.stderr - b.stderr).abs() < 1e-10);
        }
    }
}
