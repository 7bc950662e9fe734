//! Finite speed of propagation on truncated cones for the flat semilinear
//! wave equation ∂_ttu − Δu = |u|^{p−1}u.

use serde::{Deserialize, Serialize};

use super::scheme::{Coefficients, Forcing, WaveScheme};
use crate::error::{ForgeError, Result};
use crate::grid::SpatialGrid;
use crate::model::Nonlinearity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub dim: usize,
    pub p: f64,
    pub half_width: f64,
    /// Nodes per axis of the coarse grid.
    pub nodes: usize,
    pub cfl: f64,
    pub x0: Vec<f64>,
    pub radius: f64,
    pub tau: f64,
    /// The extensions differ only for |x − x₀| > radius + gap.
    pub gap: f64,
    /// Amplitude of the common data.
    pub amplitude: f64,
    /// Amplitude of the second extension's extra bump (0 gives identical data).
    pub extension: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            p: 3.0,
            half_width: 4.0,
            nodes: 201,
            cfl: 0.5,
            x0: vec![0.0],
            radius: 1.0,
            tau: 0.6,
            gap: 0.16,
            amplitude: 0.5,
            extension: 1.0,
        }
    }
}

/// Deviation of the two runs at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeLevel {
    pub h: f64,
    pub ds: f64,
    pub inside: f64,
    pub outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub levels: Vec<ConeLevel>,
    /// log₂ of the inside-deviation ratio; infinite when the fine deviation
    /// vanishes exactly.
    pub order: f64,
    /// C fitted on the coarse level in tol = C(h² + Δs²).
    pub tol_constant: f64,
}

struct PowerForcing(Nonlinearity);

impl Forcing for PowerForcing {
    fn rhs(&self, _s: f64, w: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(w) {
            *o = self.0.f(u);
        }
    }
}

fn smooth_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn distance(x: &[f64], x0: &[f64]) -> f64 {
    x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl ConeConfig {
    fn validate(&self) -> Result<()> {
        if self.x0.len() != self.dim {
            return Err(ForgeError::Config(format!("x0 has {} entries for dim {}", self.x0.len(), self.dim)));
        }
        if !(self.tau > 0.0 && self.tau < self.radius) {
            return Err(ForgeError::Config(format!("tau = {} must lie in (0, radius = {})", self.tau, self.radius)));
        }
        if !(self.gap > 0.0) {
            return Err(ForgeError::Config("gap must be positive".into()));
        }
        let reach = self.x0.iter().fold(0.0f64, |m, v| m.max(v.abs())) + self.outer_edge();
        if reach >= self.half_width {
            return Err(ForgeError::Domain(format!(
                "cone and extension reach {reach} exit the grid of half width {}",
                self.half_width
            )));
        }
        Ok(())
    }

    fn band(&self) -> f64 {
        0.5 * self.radius
    }

    fn outer_edge(&self) -> f64 {
        self.radius + self.gap + 2.0 * self.band() + self.tau
    }

    /// Common data: a bump filling B(x₀, radius).
    fn base(&self, x: &[f64]) -> f64 {
        self.amplitude * smooth_bump(distance(x, &self.x0) / self.radius)
    }

    /// Extra data of the second extension, supported in the annulus
    /// radius + gap < |x − x₀| < radius + gap + 2·band.
    fn extra(&self, x: &[f64]) -> f64 {
        let c = self.radius + self.gap + self.band();
        self.extension * smooth_bump((distance(x, &self.x0) - c) / self.band())
    }

    fn level(&self, grid: &SpatialGrid) -> Result<ConeLevel> {
        let coeffs = Coefficients::flat(grid);
        let ds = coeffs.max_step(grid, self.cfl);
        let steps = (self.tau / ds).ceil() as usize;
        let scheme = WaveScheme::new(grid, &coeffs, ds, self.cfl)?;
        let forcing = PowerForcing(Nonlinearity::new(self.p));
        let zero_edge = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter().enumerate().map(|(i, u)| if grid.is_interior(i) { u } else { 0.0 }).collect()
        };
        let u_a = zero_edge(grid.sample(|x| self.base(x)));
        let u_b = zero_edge(grid.sample(|x| self.base(x) + self.extra(x)));
        let zeros = vec![0.0; grid.len()];
        let mut a = scheme.start(0.0, u_a, zeros.clone(), &forcing);
        let mut b = scheme.start(0.0, u_b, zeros, &forcing);
        let dist: Vec<f64> = (0..grid.len()).map(|i| distance(&grid.point(i)[..self.dim], &self.x0)).collect();
        let mut inside: f64 = 0.0;
        let mut outside: f64 = 0.0;
        for k in 0..=steps {
            let t = k as f64 * ds;
            if t >= self.tau {
                break;
            }
            if !(a.is_finite() && b.is_finite()) {
                return Err(ForgeError::Solver { step: k, s: t, message: "non-finite value".into() });
            }
            for i in 0..grid.len() {
                let d = (a.w[i] - b.w[i]).abs();
                if dist[i] < self.radius - t {
                    inside = inside.max(d);
                } else {
                    outside = outside.max(d);
                }
            }
            scheme.advance(&mut a, &forcing);
            scheme.advance(&mut b, &forcing);
        }
        Ok(ConeLevel { h: grid.h(), ds, inside, outside })
    }
}

/// Runs both extensions on the configured grid and on its refinement.
pub fn cone_uniqueness_test(cfg: &ConeConfig) -> Result<ConeReport> {
    cfg.validate()?;
    let coarse = SpatialGrid::new(cfg.dim, cfg.nodes, cfg.half_width)?;
    let fine = coarse.refined();
    let levels = vec![cfg.level(&coarse)?, cfg.level(&fine)?];
    let (c, f) = (&levels[0], &levels[1]);
    let order = if f.inside == 0.0 { f64::INFINITY } else { (c.inside / f.inside).log2() };
    let tol_constant = c.inside / (c.h * c.h + c.ds * c.ds);
    Ok(ConeReport { levels, order, tol_constant })
}
