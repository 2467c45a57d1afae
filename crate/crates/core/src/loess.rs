//! Weighted local polynomial regression (loess) on a sorted grid.
//!
//! Each fitted value comes from a weighted least-squares polynomial fit over
//! the `floor(span * m)` nearest positively weighted points, where `m` is the
//! number of such points. Observation weights multiply tricube kernel
//! weights. No robustness iterations are performed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CensurvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoessConfig {
    /// Fraction of the positively weighted points in each local window.
    pub span: f64,
    /// Local polynomial degree, 1 or 2.
    pub degree: usize,
    /// Lower clamp applied to smoothed variance curves.
    pub variance_floor: f64,
}

impl Default for LoessConfig {
    fn default() -> Self {
        Self {
            span: 0.75,
            degree: 1,
            variance_floor: 1e-6,
        }
    }
}

impl LoessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(CensurvError::InvalidConfig(format!(
                "span {} outside (0, 1]",
                self.span
            )));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(CensurvError::InvalidConfig(format!(
                "degree {} not in {{1, 2}}",
                self.degree
            )));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(CensurvError::InvalidConfig(format!(
                "variance floor {} must be positive",
                self.variance_floor
            )));
        }
        Ok(())
    }

    /// Number of points in a local window given `m` usable points.
    pub fn window_size(&self, m: usize) -> usize {
        let q = (self.span * m as f64 + 1e-9).floor() as usize;
        q.clamp((self.degree + 2).min(m), m)
    }
}

#[inline]
fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let a = 1.0 - u * u * u;
        a * a * a
    }
}

/// Fits loess at every grid point.
///
/// `xs` must be sorted ascending. Points with zero weight never enter a
/// local system but still receive fitted values.
pub fn fit_weighted_loess(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    config: &LoessConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if xs.len() != ys.len() {
        return Err(CensurvError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() != ws.len() {
        return Err(CensurvError::LengthMismatch {
            left: xs.len(),
            right: ws.len(),
        });
    }
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(CensurvError::InvalidData("loess grid is not sorted".into()));
    }
    if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(CensurvError::InvalidData(
            "loess weights must be finite and non-negative".into(),
        ));
    }

    let usable: Vec<usize> = (0..xs.len()).filter(|&i| ws[i] > 0.0).collect();
    let m = usable.len();
    let needed = config.degree + 2;
    if m < needed {
        return Err(CensurvError::InsufficientData { needed, got: m });
    }
    let px: Vec<f64> = usable.iter().map(|&i| xs[i]).collect();
    let py: Vec<f64> = usable.iter().map(|&i| ys[i]).collect();
    let pw: Vec<f64> = usable.iter().map(|&i| ws[i]).collect();
    let q = config.window_size(m);

    let mut fitted = Vec::with_capacity(xs.len());
    let mut left = 0usize;
    for &x0 in xs {
        while left + q < m && x0 - px[left] > px[left + q] - x0 {
            left += 1;
        }
        let right = left + q; // exclusive
        let h = (x0 - px[left]).max(px[right - 1] - x0);
        fitted.push(local_fit(
            &px[left..right],
            &py[left..right],
            &pw[left..right],
            x0,
            h,
            config.degree,
        ));
    }
    Ok(fitted)
}

fn local_fit(x: &[f64], y: &[f64], w: &[f64], x0: f64, h: f64, degree: usize) -> f64 {
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for i in 0..x.len() {
        let (u, k) = if h > 0.0 {
            let u = (x[i] - x0) / h;
            (u, tricube(u.abs()))
        } else {
            (0.0, 1.0)
        };
        let wi = k * w[i];
        if wi == 0.0 {
            continue;
        }
        let mut up = 1.0;
        for sk in s.iter_mut().take(2 * degree + 1) {
            *sk += wi * up;
            up *= u;
        }
        let mut up = 1.0;
        for tk in t.iter_mut().take(degree + 1) {
            *tk += wi * y[i] * up;
            up *= u;
        }
    }
    if s[0] <= 0.0 {
        return nearest_value(x, y, x0);
    }
    if degree == 2 {
        let a = Matrix3::new(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
        let b = Vector3::new(t[0], t[1], t[2]);
        if let Some(sol) = a.cholesky().map(|c| c.solve(&b)) {
            let scale = s[0].max(s[2]).max(s[4]);
            if well_conditioned(&a, scale) && sol[0].is_finite() {
                return sol[0];
            }
        }
    }
    let det = s[0] * s[2] - s[1] * s[1];
    if det > 1e-10 * s[0] * s[2] {
        (s[2] * t[0] - s[1] * t[1]) / det
    } else {
        t[0] / s[0]
    }
}

fn well_conditioned(a: &Matrix3<f64>, scale: f64) -> bool {
    a.determinant().abs() > 1e-12 * scale.powi(3)
}

fn nearest_value(x: &[f64], y: &[f64], x0: f64) -> f64 {
    let mut best = 0;
    for i in 1..x.len() {
        if (x[i] - x0).abs() < (x[best] - x0).abs() {
            best = i;
        }
    }
    y[best]
}
