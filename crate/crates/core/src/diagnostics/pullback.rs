//! u(t, x) = v(Λ(t, x)) and ∂_tu by the chain rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzStack;
use crate::error::{ForgeError, Result};
use crate::geometry::surface::Point;
use crate::geometry::LorentzGraphMap;
use crate::grid::SpatialGrid;
use crate::solver::Checkpoint;

/// Anything that yields (v, ∂_sv, ∂_{y₁}v) at a point of (s, y)-space.
pub trait FieldSource: Sync {
    fn s_range(&self) -> (f64, f64);
    /// `None` outside the covered region.
    fn eval(&self, s: f64, y: &[f64]) -> Option<[f64; 3]>;
}

/// v on a sequence of s-slices over a spatial grid, interpolated linearly in
/// s and multilinearly in y.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: SpatialGrid,
    pub s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub v_s: Vec<Vec<f64>>,
    v_y1: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: SpatialGrid, s: Vec<f64>, v: Vec<Vec<f64>>, v_s: Vec<Vec<f64>>) -> Result<Self> {
        if s.len() < 2 || v.len() != s.len() || v_s.len() != s.len() {
            return Err(ForgeError::Domain("a trajectory needs at least two matching slices".into()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ForgeError::Domain("trajectory s-values must increase".into()));
        }
        let v_y1 = v.par_iter().map(|sl| grid.partial(sl, 0)).collect();
        Ok(Self { grid, s, v, v_s, v_y1 })
    }

    pub fn from_checkpoints(grid: &SpatialGrid, cps: &[Checkpoint]) -> Result<Self> {
        Self::new(
            grid.clone(),
            cps.iter().map(|c| c.s).collect(),
            cps.iter().map(|c| c.v.clone()).collect(),
            cps.iter().map(|c| c.v_s.clone()).collect(),
        )
    }

    /// V_J and ∂_sV_J on the stack's s-nodes inside [s_lo, s_hi].
    pub fn from_ansatz(stack: &AnsatzStack, s_lo: f64, s_hi: f64) -> Result<Self> {
        let idx: Vec<usize> = (0..=stack.top())
            .filter(|&i| {
                let s = stack.sgrid.s(i);
                s >= s_lo * (1.0 - 1e-12) && s <= s_hi * (1.0 + 1e-12)
            })
            .collect();
        let nx = stack.grid.len();
        Self::new(
            stack.grid.clone(),
            idx.iter().map(|&i| stack.sgrid.s(i)).collect(),
            idx.iter().map(|&i| (0..nx).map(|x| stack.vj(i, x)).collect()).collect(),
            idx.iter().map(|&i| (0..nx).map(|x| stack.vj_s(i, x)).collect()).collect(),
        )
    }
}

impl FieldSource for Trajectory {
    fn s_range(&self) -> (f64, f64) {
        (self.s[0], *self.s.last().unwrap())
    }

    fn eval(&self, s: f64, y: &[f64]) -> Option<[f64; 3]> {
        let (lo, hi) = self.s_range();
        if !(s >= lo && s <= hi) {
            return None;
        }
        let k = self.s.partition_point(|&v| v <= s).clamp(1, self.s.len() - 1) - 1;
        let th = (s - self.s[k]) / (self.s[k + 1] - self.s[k]);
        let g = &self.grid;
        let lerp = |f: &[Vec<f64>]| -> Option<f64> {
            let a = g.interpolate(&f[k], y)?;
            let b = g.interpolate(&f[k + 1], y)?;
            Some((1.0 - th) * a + th * b)
        };
        Some([lerp(&self.v)?, lerp(&self.v_s)?, lerp(&self.v_y1)?])
    }
}

/// Pulled-back field on times × points; masked entries are NaN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PullbackField {
    pub dim: usize,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Row-major: u[ti·points + xi].
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub masked: usize,
}

impl PullbackField {
    pub fn at(&self, ti: usize, xi: usize) -> f64 {
        self.u[ti * self.points.len() + xi]
    }

    pub fn u_t_at(&self, ti: usize, xi: usize) -> f64 {
        self.u_t[ti * self.points.len() + xi]
    }
}

/// u and ∂_tu = −(1−ℓ²)^{−1/2}[(1 + ℓ∂_{y₁}ψ)∂_sv + ℓ∂_{y₁}v] at one point,
/// or `None` when Λ(t, x) is not covered by the source.
pub fn pullback_point<S: FieldSource + ?Sized>(
    src: &S,
    map: &LorentzGraphMap,
    t: f64,
    x: &[f64],
) -> Result<Option<(f64, f64)>> {
    let n = map.dim();
    let (s, y) = map.forward(t, x)?;
    let Some([v, v_s, v_y1]) = src.eval(s, &y[..n]) else {
        return Ok(None);
    };
    let ell = map.bundle.ell;
    let psi_y1 = if ell == 0.0 { 0.0 } else { map.bundle.psi_jet(&y[..n])?.grad[0] };
    let u_t = -((1.0 + ell * psi_y1) * v_s + ell * v_y1) / map.bundle.gamma_inv();
    Ok(Some((v, u_t)))
}

pub fn pullback<S: FieldSource + ?Sized>(
    src: &S,
    map: &LorentzGraphMap,
    times: &[f64],
    points: &[Point],
) -> Result<PullbackField> {
    let n = map.dim();
    let np = points.len();
    let vals: Vec<Option<(f64, f64)>> = (0..times.len() * np)
        .into_par_iter()
        .map(|k| pullback_point(src, map, times[k / np], &points[k % np][..n]))
        .collect::<Result<_>>()?;
    let masked = vals.iter().filter(|v| v.is_none()).count();
    Ok(PullbackField {
        dim: n,
        times: times.to_vec(),
        points: points.iter().map(|p| p[..n].to_vec()).collect(),
        u: vals.iter().map(|v| v.map_or(f64::NAN, |a| a.0)).collect(),
        u_t: vals.iter().map(|v| v.map_or(f64::NAN, |a| a.1)).collect(),
        masked,
    })
}
