//! Manufactured solution v* = cos(s)·Π sin(x_a) on [−π, π]^N, exact for the
//! transformed operator with ψ = ε Σ cos(x_a) once the matching source is
//! added.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::scheme::{Coefficients, Forcing, WaveScheme};
use crate::error::Result;
use crate::grid::{SpatialGrid, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsConfig {
    pub dim: usize,
    pub nodes: usize,
    pub cfl: f64,
    pub s_end: f64,
    /// ε in ψ = ε Σ cos(x_a); 0 gives the flat operator.
    pub curvature: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self { dim: 1, nodes: 65, cfl: 0.5, s_end: 1.0, curvature: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsLevel {
    pub h: f64,
    pub ds: f64,
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub levels: Vec<MmsLevel>,
    pub order: f64,
}

fn spatial(x: &[f64]) -> f64 {
    x.iter().map(|v| v.sin()).product()
}

fn spatial_partial(x: &[f64], a: usize) -> f64 {
    x.iter().enumerate().map(|(b, v)| if b == a { v.cos() } else { v.sin() }).product()
}

fn coefficients(grid: &SpatialGrid, eps: f64) -> Coefficients {
    let n = grid.dim;
    let mut c = Coefficients::flat(grid);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut gp = [0.0; MAX_DIM];
        for a in 0..n {
            gp[a] = -eps * x[a].sin();
        }
        c.grad_psi[i] = gp;
        c.g[i] = gp.iter().map(|v| v * v).sum();
        c.lap_psi[i] = -eps * x[..n].iter().map(|v| v.cos()).sum::<f64>();
    }
    c
}

struct Source<'a> {
    grid: &'a SpatialGrid,
    coeffs: &'a Coefficients,
}

impl Forcing for Source<'_> {
    fn rhs(&self, s: f64, _w: &[f64], out: &mut [f64]) {
        let n = self.grid.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let x = self.grid.point(i);
            let x = &x[..n];
            let v = spatial(x);
            let v_ss = -s.cos() * v;
            let v_s = -s.sin() * v;
            let lap = -(n as f64) * s.cos() * v;
            let mut mixed = 0.0;
            for a in 0..n {
                mixed += self.coeffs.grad_psi[i][a] * (-s.sin()) * spatial_partial(x, a);
            }
            *o = (1.0 - self.coeffs.g[i]) * v_ss - 2.0 * mixed - self.coeffs.lap_psi[i] * v_s - lap;
        }
    }
}

fn level(cfg: &MmsConfig, grid: &SpatialGrid) -> Result<MmsLevel> {
    let coeffs = coefficients(grid, cfg.curvature);
    let cap = coeffs.max_step(grid, cfg.cfl);
    let steps = (cfg.s_end / cap).ceil() as usize;
    let ds = cfg.s_end / steps as f64;
    let scheme = WaveScheme::new(grid, &coeffs, ds, cfg.cfl)?;
    let src = Source { grid, coeffs: &coeffs };
    let w0 = grid.sample(|x| spatial(&x[..grid.dim]));
    let mut st = scheme.start(0.0, w0, vec![0.0; grid.len()], &src);
    for _ in 0..steps {
        scheme.advance(&mut st, &src);
    }
    let exact = grid.sample(|x| cfg.s_end.cos() * spatial(&x[..grid.dim]));
    let err: Vec<f64> = st.w.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(MmsLevel { h: grid.h(), ds, l2_error: grid.l2_norm_sq(&err).sqrt() })
}

/// Error at s_end on the configured grid and on its refinement.
pub fn manufactured_convergence(cfg: &MmsConfig) -> Result<MmsReport> {
    let coarse = SpatialGrid::new(cfg.dim, cfg.nodes, PI)?;
    let fine = coarse.refined();
    let levels = vec![level(cfg, &coarse)?, level(cfg, &fine)?];
    let order = (levels[0].l2_error / levels[1].l2_error).log2();
    Ok(MmsReport { levels, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_order_is_two() {
        let r = manufactured_convergence(&MmsConfig::default()).unwrap();
        assert!(r.order >= 1.9, "{r:?}");
    }

    #[test]
    fn curved_order_is_two() {
        let r = manufactured_convergence(&MmsConfig { curvature: 0.3, ..Default::default() }).unwrap();
        assert!(r.order >= 1.9, "{r:?}");
    }

    #[test]
    fn two_dimensional_order_is_two() {
        let r =
            manufactured_convergence(&MmsConfig { dim: 2, nodes: 33, curvature: 0.2, ..Default::default() }).unwrap();
        assert!(r.order >= 1.9, "{r:?}");
    }
}
