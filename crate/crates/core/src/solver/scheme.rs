//! Explicit second-order stepping for
//! (1−g)∂_ssw − 2∇ψ·∇∂_sw − (Δψ)∂_sw − Δw = r(s, w)
//! with Dirichlet w = 0 on the grid boundary.

use rayon::prelude::*;

use crate::ansatz::SurfaceFields;
use crate::error::{ForgeError, Result};
use crate::grid::{SpatialGrid, MAX_DIM};

/// Coefficients of the transformed operator at the grid nodes.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub dim: usize,
    /// |∇ψ|²
    pub g: Vec<f64>,
    pub grad_psi: Vec<[f64; MAX_DIM]>,
    pub lap_psi: Vec<f64>,
}

impl Coefficients {
    /// ψ ≡ 0: the plain wave operator.
    pub fn flat(grid: &SpatialGrid) -> Self {
        let n = grid.len();
        Self { dim: grid.dim, g: vec![0.0; n], grad_psi: vec![[0.0; MAX_DIM]; n], lap_psi: vec![0.0; n] }
    }

    pub fn from_fields(fields: &SurfaceFields) -> Self {
        Self {
            dim: fields.dim,
            g: fields.g.clone(),
            grad_psi: fields.grad_psi.clone(),
            lap_psi: fields.lap_psi.clone(),
        }
    }

    /// Largest Δs allowed by the CFL rule Δs ≤ cfl·h·min (1−g)^{1/2}/(1+|∇ψ|).
    pub fn max_step(&self, grid: &SpatialGrid, cfl: f64) -> f64 {
        let worst = self.g.iter().map(|&g| (1.0 - g).sqrt() / (1.0 + g.sqrt())).fold(f64::INFINITY, f64::min);
        cfl * grid.h() * worst
    }
}

/// Source side r(s, w) of the w-equation, evaluated on a whole slice.
pub trait Forcing: Sync {
    fn rhs(&self, s: f64, w: &[f64], out: &mut [f64]);
}

/// r ≡ 0.
pub struct NoForcing;

impl Forcing for NoForcing {
    fn rhs(&self, _s: f64, _w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Solution at one step: w, the lagged ∂_sw estimate and ∂_ssw from the
/// equation.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub step: usize,
    pub s: f64,
    pub w: Vec<f64>,
    pub w_s: Vec<f64>,
    pub w_ss: Vec<f64>,
    w_prev: Vec<f64>,
    acc_prev: Vec<f64>,
}

/// Leapfrog in s with the mixed term evaluated from a lagged ∂_sw:
///
/// ∂_sw(sⁿ) ≈ (wⁿ − wⁿ⁻¹)/Δs + ½Δs·∂_ssw(sⁿ⁻¹),
///
/// which is second order and keeps the step explicit.
pub struct WaveScheme<'a> {
    pub grid: &'a SpatialGrid,
    pub coeffs: &'a Coefficients,
    pub ds: f64,
}

impl<'a> WaveScheme<'a> {
    pub fn new(grid: &'a SpatialGrid, coeffs: &'a Coefficients, ds: f64, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 0.5) {
            return Err(ForgeError::Config(format!("CFL number must lie in (0, 0.5] (got {cfl})")));
        }
        let limit = coeffs.max_step(grid, cfl);
        if !(ds > 0.0) || ds > limit * (1.0 + 1e-12) {
            return Err(ForgeError::Config(format!("step {ds} violates the CFL limit {limit}")));
        }
        Ok(Self { grid, coeffs, ds })
    }

    /// ∂_ssw from the equation given w, ∂_sw and the source.
    pub fn acceleration<F: Forcing>(&self, s: f64, w: &[f64], w_s: &[f64], forcing: &F) -> Vec<f64> {
        let grid = self.grid;
        let c = self.coeffs;
        let mut out = vec![0.0; w.len()];
        forcing.rhs(s, w, &mut out);
        out.par_iter_mut().enumerate().for_each(|(x, o)| {
            if !grid.is_interior(x) {
                *o = 0.0;
                return;
            }
            let mut mixed = 0.0;
            for a in 0..grid.dim {
                mixed += c.grad_psi[x][a] * grid.partial_at(w_s, x, a);
            }
            *o = (2.0 * mixed + c.lap_psi[x] * w_s[x] + grid.laplacian_at(w, x) + *o) / (1.0 - c.g[x]);
        });
        out
    }

    /// Taylor start: w¹ = w⁰ + Δs·w_s⁰ + ½Δs²·∂_ssw⁰. Returns the state at s₀.
    pub fn start<F: Forcing>(&self, s0: f64, w0: Vec<f64>, w1: Vec<f64>, forcing: &F) -> SchemeState {
        let acc = self.acceleration(s0, &w0, &w1, forcing);
        SchemeState { step: 0, s: s0, w_prev: Vec::new(), acc_prev: Vec::new(), w: w0, w_s: w1, w_ss: acc }
    }

    /// Advances by one step and fills ∂_sw, ∂_ssw at the new level.
    pub fn advance<F: Forcing>(&self, st: &mut SchemeState, forcing: &F) {
        let ds = self.ds;
        let grid = self.grid;
        let next: Vec<f64> = if st.step == 0 {
            (0..st.w.len())
                .into_par_iter()
                .map(|x| if grid.is_interior(x) { st.w[x] + ds * st.w_s[x] + 0.5 * ds * ds * st.w_ss[x] } else { 0.0 })
                .collect()
        } else {
            (0..st.w.len())
                .into_par_iter()
                .map(|x| if grid.is_interior(x) { 2.0 * st.w[x] - st.w_prev[x] + ds * ds * st.w_ss[x] } else { 0.0 })
                .collect()
        };
        let acc_now = std::mem::take(&mut st.w_ss);
        st.w_prev = std::mem::replace(&mut st.w, next);
        st.acc_prev = acc_now;
        st.step += 1;
        st.s += ds;
        st.w_s = (0..st.w.len())
            .into_par_iter()
            .map(|x| (st.w[x] - st.w_prev[x]) / ds + 0.5 * ds * st.acc_prev[x])
            .collect();
        st.w_ss = self.acceleration(st.s, &st.w, &st.w_s, forcing);
    }
}

impl SchemeState {
    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.w_s).chain(&self.w_ss).all(|v| v.is_finite())
    }
}
