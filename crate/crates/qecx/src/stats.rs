//! Binomial intervals and log-log slope fits.

use serde::{Deserialize, Serialize};

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points with positive values, got {0}")]
    TooFewPoints(usize),
    #[error("all points share one abscissa")]
    Degenerate,
}

/// Least-squares fit of ln y against ln x over the points with x, y > 0.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, FitError> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, points: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_square_law() {
        let pts: Vec<(f64, f64)> = [1e-4, 3e-4, 1e-3].iter().map(|&p| (p, 7.0 * p * p)).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.stderr < 1e-9);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn refuses_short_input() {
        assert_eq!(fit_slope(&[(1e-3, 1e-4), (1e-4, 0.0), (2e-4, 1e-5)]), Err(FitError::TooFewPoints(2)));
        assert_eq!(fit_slope(&[(1e-3, 1e-4); 3]), Err(FitError::Degenerate));
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let (lo, hi) = wilson(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
        assert_eq!(wilson(0, 0), (0.0, 1.0));
    }
}
