//! Least-squares power-law fits in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// y ≈ exp(intercept)·x^slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residual in natural-log space.
    pub rms: f64,
    pub points: usize,
    pub decades: f64,
}

impl ExponentFit {
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

pub const MIN_FIT_POINTS: usize = 8;

/// Fits log y = intercept + slope·log x. Needs at least 8 positive points
/// spanning at least one decade in x.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<ExponentFit> {
    fit_with_span(xs, ys, 1.0)
}

/// As [`fit_exponent`] but accepts any span; callers flag short windows.
pub fn fit_exponent_short(xs: &[f64], ys: &[f64]) -> Result<ExponentFit> {
    fit_with_span(xs, ys, 0.0)
}

fn fit_with_span(xs: &[f64], ys: &[f64], min_decades: f64) -> Result<ExponentFit> {
    if xs.len() != ys.len() {
        return Err(ForgeError::Fit("x and y lengths differ".into()));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(ForgeError::Fit(format!("need at least {MIN_FIT_POINTS} points (got {})", xs.len())));
    }
    if let Some(i) = (0..xs.len()).find(|&i| !(xs[i] > 0.0 && ys[i] > 0.0 && ys[i].is_finite())) {
        return Err(ForgeError::Fit(format!("non-positive sample at index {i}: ({}, {})", xs[i], ys[i])));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (lo, hi) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades < min_decades - 1e-9 || decades <= 0.0 {
        return Err(ForgeError::Fit(format!("window spans only {decades:.3} decades")));
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit { slope, intercept, rms, points: xs.len(), decades })
}

/// Fit restricted to x ∈ [lo, hi].
pub fn fit_exponent_window(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<ExponentFit> {
    let (wx, wy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12))
        .map(|(x, y)| (*x, *y))
        .unzip();
    fit_exponent(&wx, &wy)
}
