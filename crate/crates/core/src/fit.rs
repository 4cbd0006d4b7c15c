//! Two-parameter ordinary least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VcemError};

/// Fewest points accepted by [`fit_linear`] and [`fit_loglog`].
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
    /// The `(x, y)` pairs the line was fitted to, after any transform.
    pub points: Vec<(f64, f64)>,
}

/// Fits `y = slope * x + intercept`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    VcemError::check_size(xs.len(), ys.len())?;
    let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    fit_points(points)
}

/// Fits `ln|y| = slope * ln x + intercept`, skipping points with `x <= 0` or `y == 0`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    VcemError::check_size(xs.len(), ys.len())?;
    let points = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y != 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    fit_points(points)
}

fn fit_points(points: Vec<(f64, f64)>) -> Result<FitResult> {
    if points.len() < MIN_FIT_POINTS {
        return Err(VcemError::Config(format!(
            "a fit needs at least {MIN_FIT_POINTS} usable points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(VcemError::NonFinite("fit input".into()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(VcemError::invalid("all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let f = fit_linear(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law() {
        let xs = [1e-3, 1e-2, 1e-1, 1.0, 0.0];
        let ys: Vec<f64> = xs.iter().map(|x| -5.0 * x * x).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert_eq!(f.points.len(), 4);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn known_residuals() {
        // y = x plus residuals (+1, -1, -1, +1): slope 1, intercept 0,
        // SSE 4, SST 5 + 4 = 9 -> R² = 5/9.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 0.0, 1.0, 4.0];
        let f = fit_linear(&xs, &ys).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_linear(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(VcemError::Config(_))));
        assert!(fit_loglog(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(fit_linear(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
