//! Small shared numerical kernels: tridiagonal solves, uniform-grid
//! interpolation, and least-squares line fits.

use thiserror::Error;

/// Errors from the low-level numerical kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// A pivot in the Thomas elimination fell below the breakdown threshold.
    #[error("tridiagonal solve broke down at row {row} (pivot {pivot:.3e})")]
    TridiagonalBreakdown { row: usize, pivot: f64 },
    /// Not enough samples to perform the requested fit.
    #[error("need at least {needed} samples for the fit, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Tridiagonal system solver (Thomas algorithm) with reusable scratch space.
///
/// The system is `lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]`
/// with `lower[0]` and `upper[n-1]` ignored. No pivoting is performed; every
/// matrix assembled in this crate is strictly diagonally dominant.
#[derive(Debug, Default, Clone)]
pub struct TridiagonalWorkspace {
    c_prime: Vec<f64>,
    d_prime: Vec<f64>,
}

impl TridiagonalWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves the system in place, writing the solution over `rhs`.
    pub fn solve(
        &mut self,
        lower: &[f64],
        diag: &[f64],
        upper: &[f64],
        rhs: &mut [f64],
    ) -> Result<(), NumericsError> {
        let n = diag.len();
        assert_eq!(lower.len(), n);
        assert_eq!(upper.len(), n);
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(());
        }
        self.c_prime.resize(n, 0.0);
        self.d_prime.resize(n, 0.0);

        let mut pivot = diag[0];
        if pivot.abs() < f64::MIN_POSITIVE {
            return Err(NumericsError::TridiagonalBreakdown { row: 0, pivot });
        }
        self.c_prime[0] = upper[0] / pivot;
        self.d_prime[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = diag[i] - lower[i] * self.c_prime[i - 1];
            if pivot.abs() < f64::MIN_POSITIVE {
                return Err(NumericsError::TridiagonalBreakdown { row: i, pivot });
            }
            self.c_prime[i] = upper[i] / pivot;
            self.d_prime[i] = (rhs[i] - lower[i] * self.d_prime[i - 1]) / pivot;
        }
        rhs[n - 1] = self.d_prime[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = self.d_prime[i] - self.c_prime[i] * rhs[i + 1];
        }
        Ok(())
    }
}

/// Linear interpolation on a uniform grid `x0 + i*dx`, clamped at both ends.
pub fn lerp_uniform(x0: f64, dx: f64, values: &[f64], x: f64) -> f64 {
    assert!(dx > 0.0 && !values.is_empty());
    let n = values.len();
    let pos = (x - x0) / dx;
    if pos <= 0.0 {
        return values[0];
    }
    if pos >= (n - 1) as f64 {
        return values[n - 1];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Result of a least-squares straight-line fit `y = slope*x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit.
    pub slope_stderr: f64,
}

/// Least-squares line through `(xs[i], ys[i])`. Needs at least three points
/// so the residual variance is defined.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, NumericsError> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 3 {
        return Err(NumericsError::TooFewSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = xs[i] - x_mean;
        sxx += dx * dx;
        sxy += dx * (ys[i] - y_mean);
    }
    assert!(sxx > 0.0, "degenerate abscissae in line fit");
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ss_res = 0.0;
    for i in 0..n {
        let r = ys[i] - (slope * xs[i] + intercept);
        ss_res += r * r;
    }
    let variance = ss_res / (nf - 2.0);
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: (variance / sxx).sqrt(),
    })
}

/// Fits the log-slope of a positive decaying sequence over the index window
/// where `values` lies in `(floor, cap)`. Returns `None` when fewer than
/// `min_points` grid points fall inside the window.
pub fn fit_log_slope(
    xs: &[f64],
    values: &[f64],
    floor: f64,
    cap: f64,
    min_points: usize,
) -> Option<LineFit> {
    assert_eq!(xs.len(), values.len());
    let mut wx = Vec::new();
    let mut wy = Vec::new();
    for (&x, &v) in xs.iter().zip(values) {
        if v > floor && v < cap {
            wx.push(x);
            wy.push(v.ln());
        }
    }
    if wx.len() < min_points.max(3) {
        return None;
    }
    fit_line(&wx, &wy).ok()
}
