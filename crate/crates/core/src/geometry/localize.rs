//! Localization φ̃ = (φ − ℓx₁)χ(|x|/r) + ℓx₁ with a radius search.

use serde::{Deserialize, Serialize};

use super::surface::{Hypersurface, Point};
use crate::error::{ForgeError, Result};
use crate::grid::MAX_DIM;
use crate::model::cutoff::chi_jet;
use crate::model::ModelParams;

/// Sampled gradient deviation must stay below bound/SAFETY.
pub const SAFETY: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    /// Samples per axis over [−2r, 2r]^N.
    pub samples_per_axis: usize,
    /// Cap on the total number of samples (binding for N ≥ 3).
    pub max_samples: usize,
    /// Smallest radius tried.
    pub r_floor: f64,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self { samples_per_axis: 256, max_samples: 2_000_000, r_floor: 1e-6 }
    }
}

impl LocalizeConfig {
    pub fn per_axis(&self, dim: usize) -> usize {
        let cap = (self.max_samples as f64).powf(1.0 / dim as f64).floor() as usize;
        self.samples_per_axis.min(cap).max(3)
    }
}

/// φ̃ for a surface already aligned so that ∇φ(0) = ℓe₁.
#[derive(Debug, Clone)]
pub struct LocalizedSurface {
    pub surface: Hypersurface,
    pub ell: f64,
    pub r: f64,
}

impl LocalizedSurface {
    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let rr = radius(x);
        let lin = self.ell * x[0];
        if rr >= 2.0 * self.r {
            return lin;
        }
        (self.surface.value(x) - lin) * chi_jet(rr / self.r).value + lin
    }

    /// ∇φ̃ = (∇φ − ℓe₁)χ + (φ − ℓx₁)χ′ x/(r|x|) + ℓe₁.
    pub fn gradient(&self, x: &[f64]) -> Point {
        let n = x.len();
        let rr = radius(x);
        let mut g = [0.0; MAX_DIM];
        g[0] = self.ell;
        if rr >= 2.0 * self.r {
            return g;
        }
        let c = chi_jet(rr / self.r);
        let gp = self.surface.gradient(x);
        let bracket = self.surface.value(x) - self.ell * x[0];
        for i in 0..n {
            let dev = gp[i] - if i == 0 { self.ell } else { 0.0 };
            let radial = if rr > 0.0 { bracket * c.d1 * x[i] / (self.r * rr) } else { 0.0 };
            g[i] += dev * c.value + radial;
        }
        g
    }

    /// Euclidean norm of ∇φ̃ − ℓe₁.
    pub fn deviation(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        let mut acc = 0.0;
        for (i, gi) in g.iter().enumerate().take(x.len()) {
            let d = gi - if i == 0 { self.ell } else { 0.0 };
            acc += d * d;
        }
        acc.sqrt()
    }
}

#[inline]
fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// (1−ℓ)·min{λ(p−1)/(8(p+1)), ½}.
pub fn deviation_bound(params: &ModelParams, ell: f64) -> f64 {
    (1.0 - ell) * params.psi_gradient_bound().min(0.5)
}

/// Outcome of the radius search.
#[derive(Debug, Clone)]
pub struct Localization {
    pub surface: LocalizedSurface,
    pub bound: f64,
    pub sampled_deviation: f64,
}

/// Largest r = 2^{−m} ≥ floor for which the sampled sup over |x| ≤ 2r of
/// |∇φ̃ − ℓe₁| is at most bound/1.1. `surface` must already be aligned.
pub fn localize(surface: Hypersurface, params: &ModelParams, cfg: &LocalizeConfig) -> Result<Localization> {
    let dim = surface.dim();
    if dim != params.dim {
        return Err(ForgeError::InvalidParams(format!(
            "surface dimension {dim} does not match model dimension {}",
            params.dim
        )));
    }
    let origin = vec![0.0; dim];
    if surface.value(&origin).abs() > 1e-12 {
        return Err(ForgeError::InvalidParams(format!(
            "surface must vanish at the origin (phi(0) = {})",
            surface.value(&origin)
        )));
    }
    let g0 = surface.gradient(&origin);
    let ell = g0[0];
    if g0[1..dim].iter().any(|v| v.abs() > 1e-12) || ell < 0.0 {
        return Err(ForgeError::InvalidParams(
            "gradient at the origin must be aligned with +e1 (use Hypersurface::aligned)".into(),
        ));
    }
    if ell >= 1.0 {
        return Err(ForgeError::InvalidParams(format!("surface is not space-like at 0 (slope {ell})")));
    }
    let max_r = match &surface {
        Hypersurface::Tabulated(t) => (0.5 * t.inner_extent()).min(1.0),
        _ => 1.0,
    };
    let bound = deviation_bound(params, ell);
    let per_axis = cfg.per_axis(dim);
    let mut r = 1.0;
    while r > max_r {
        r *= 0.5;
    }
    while r >= cfg.r_floor {
        let loc = LocalizedSurface { surface: surface.clone(), ell, r };
        let dev = sampled_deviation(&loc, per_axis);
        if dev <= bound / SAFETY {
            return Ok(Localization { surface: loc, bound, sampled_deviation: dev });
        }
        r *= 0.5;
    }
    Err(ForgeError::Localization { floor: cfg.r_floor })
}

/// Sup of |∇φ̃ − ℓe₁| over grid samples in the ball |x| ≤ 2r. The bound
/// keeps |∇φ̃| < 1, so φ itself only needs to be space-like near 0.
pub fn sampled_deviation(loc: &LocalizedSurface, per_axis: usize) -> f64 {
    use rayon::prelude::*;
    let dim = loc.dim();
    let half = 2.0 * loc.r;
    let step = 2.0 * half / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut x = [0.0; MAX_DIM];
            let mut rest = flat;
            for a in (0..dim).rev() {
                x[a] = -half + (rest % per_axis) as f64 * step;
                rest /= per_axis;
            }
            let xs = &x[..dim];
            if radius(xs) > half {
                0.0
            } else {
                loc.deviation(xs)
            }
        })
        .reduce(|| 0.0, f64::max)
}
