//! Uniform spatial grids on [−L, L]^N, log-spaced s-grids and fields on them.

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

pub const MAX_DIM: usize = 4;

/// Uniform grid with `n` nodes per axis on [−L, L]^N (n odd so 0 is a node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(ForgeError::Grid(format!("dim outside 1..4 (got {dim})")));
        }
        if n < 5 || n.is_multiple_of(2) {
            return Err(ForgeError::Grid(format!("nodes per axis must be odd and at least 5 (got {n})")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(ForgeError::Grid(format!("half width must be positive (got {half_width})")));
        }
        let total = n.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if total > 50_000_000 {
            return Err(ForgeError::Grid(format!("grid of {total} nodes is too large")));
        }
        Ok(Self { dim, n, half_width })
    }

    /// Grid with spacing as close to `h` as possible from below.
    pub fn with_spacing(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        let cells = (2.0 * half_width / h - 1e-9).ceil() as usize;
        let cells = cells + cells % 2;
        Self::new(dim, cells + 1, half_width)
    }

    /// Same extent, twice the resolution.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..self.clone() }
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// Stride of axis `a` in the flat layout (last axis fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of a node, padded with zeros to length 4.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coord(m[a]);
        }
        x
    }

    /// Distance (in nodes) from the nearest boundary face.
    pub fn boundary_depth(&self, flat: usize) -> usize {
        let m = self.multi_index(flat);
        (0..self.dim).map(|a| m[a].min(self.n - 1 - m[a])).min().unwrap_or(0)
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        self.boundary_depth(flat) >= 1
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Nodes of the grid as a flat list of padded points.
    pub fn points(&self) -> Vec<[f64; MAX_DIM]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Σ u_i² h^N with trapezoid end weights.
    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.integrate(|i| u[i] * u[i])
    }

    /// Trapezoid rule over the whole box of a per-node integrand.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.trapezoid_weight(i) * f(i);
        }
        acc * self.cell_volume()
    }

    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let m = self.multi_index(flat);
        let mut w = 1.0;
        for a in 0..self.dim {
            if m[a] == 0 || m[a] == self.n - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// Second-order Laplacian at an interior node.
    #[inline]
    pub fn laplacian_at(&self, u: &[f64], flat: usize) -> f64 {
        let inv_h2 = 1.0 / (self.h() * self.h());
        let mut acc = 0.0;
        for a in 0..self.dim {
            let s = self.stride(a);
            acc += u[flat + s] - 2.0 * u[flat] + u[flat - s];
        }
        acc * inv_h2
    }

    /// Central difference ∂_a u at an interior node.
    #[inline]
    pub fn partial_at(&self, u: &[f64], flat: usize, axis: usize) -> f64 {
        let s = self.stride(axis);
        (u[flat + s] - u[flat - s]) / (2.0 * self.h())
    }

    /// Central second difference ∂_a∂_b u at an interior node.
    pub fn second_partial_at(&self, u: &[f64], flat: usize, a: usize, b: usize) -> f64 {
        let h = self.h();
        if a == b {
            let s = self.stride(a);
            return (u[flat + s] - 2.0 * u[flat] + u[flat - s]) / (h * h);
        }
        let (sa, sb) = (self.stride(a), self.stride(b));
        (u[flat + sa + sb] - u[flat + sa - sb] - u[flat - sa + sb] + u[flat - sa - sb]) / (4.0 * h * h)
    }

    /// Laplacian on the whole grid; boundary nodes get 0.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| if self.is_interior(i) { self.laplacian_at(u, i) } else { 0.0 }).collect()
    }

    /// Gradient component on the whole grid; boundary nodes get 0.
    pub fn partial(&self, u: &[f64], axis: usize) -> Vec<f64> {
        (0..self.len()).map(|i| if self.is_interior(i) { self.partial_at(u, i, axis) } else { 0.0 }).collect()
    }

    /// Multilinear interpolation of `u` at `y`; `None` outside the grid.
    pub fn interpolate(&self, u: &[f64], y: &[f64]) -> Option<f64> {
        let h = self.h();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..self.dim {
            let pos = (y[a] + self.half_width) / h;
            if !(pos >= 0.0 && pos <= (self.n - 1) as f64) {
                return None;
            }
            let i = (pos.floor() as usize).min(self.n - 2);
            base[a] = i;
            frac[a] = pos - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..self.dim {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat += (base[a] + bit) * self.stride(a);
            }
            if w != 0.0 {
                acc += w * u[flat];
            }
        }
        Some(acc)
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i)[..self.dim])).collect()
    }
}

/// Log-spaced s-nodes s_i = s_max·2^{−(M−i)/ppo}, i = 0..=M, so that
/// ln s is uniform and halving s lands on a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub s_max: f64,
    pub per_octave: usize,
    pub octaves_steps: usize,
}

impl LogGrid {
    pub fn new(s_min: f64, s_max: f64, per_octave: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min && s_max <= 1.0) {
            return Err(ForgeError::Grid(format!(
                "s-range must satisfy 0 < s_min < s_max <= 1 (got [{s_min}, {s_max}])"
            )));
        }
        if per_octave < 3 {
            return Err(ForgeError::Grid(format!("at least 3 s-nodes per octave are required (got {per_octave})")));
        }
        let steps = (per_octave as f64 * (s_max / s_min).log2() - 1e-9).ceil() as usize;
        Ok(Self { s_max, per_octave, octaves_steps: steps })
    }

    pub fn refined(&self) -> Self {
        Self { per_octave: 2 * self.per_octave, octaves_steps: 2 * self.octaves_steps, ..*self }
    }

    pub fn len(&self) -> usize {
        self.octaves_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing in σ = ln s.
    pub fn dsig(&self) -> f64 {
        std::f64::consts::LN_2 / self.per_octave as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_max * (-((self.octaves_steps - i) as f64) / self.per_octave as f64).exp2()
    }

    pub fn s_min(&self) -> f64 {
        self.s(0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.s(i)).collect()
    }

    /// Largest index with s_i ≤ s (within rounding), or None when s < s_min.
    pub fn index_at_or_below(&self, s: f64) -> Option<usize> {
        let x = (s / self.s_max).log2() * self.per_octave as f64 + self.octaves_steps as f64;
        if x < -1e-9 {
            return None;
        }
        Some(((x + 1e-9).floor() as usize).min(self.octaves_steps))
    }

    /// Fractional node position of s (in index units).
    pub fn position(&self, s: f64) -> f64 {
        (s / self.s_max).log2() * self.per_octave as f64 + self.octaves_steps as f64
    }

    /// ∂_ss at interior nodes from the three-point formula on the actual
    /// (geometric) node spacing; the end entries are NaN.
    pub fn s_second_nonuniform(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut out = vec![f64::NAN; n];
        for i in 1..n.saturating_sub(1) {
            let (sm, s0, sp) = (self.s(i - 1), self.s(i), self.s(i + 1));
            let (hm, hp) = (s0 - sm, sp - s0);
            out[i] = 2.0 * ((f[i + 1] - f[i]) / hp - (f[i] - f[i - 1]) / hm) / (hp + hm);
        }
        out
    }

    /// ∂_s and ∂_ss of a sampled function via differences in σ = ln s,
    /// second order in the interior, one-sided second order at the ends.
    pub fn s_derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = f.len();
        let d = self.dsig();
        let mut fs = vec![0.0; n];
        let mut fss = vec![0.0; n];
        if n < 4 {
            return (fs, fss);
        }
        for i in 0..n {
            let (f1, f2) = if i == 0 {
                ((-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * d), (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (d * d))
            } else if i == n - 1 {
                (
                    (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * d),
                    (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (d * d),
                )
            } else {
                ((f[i + 1] - f[i - 1]) / (2.0 * d), (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (d * d))
            };
            let s = self.s(i);
            fs[i] = f1 / s;
            fss[i] = (f2 - f1) / (s * s);
        }
        (fs, fss)
    }
}

/// A field sampled on (s-grid) × (spatial grid), stored s-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub ns: usize,
    pub nx: usize,
    pub data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(ns: usize, nx: usize) -> Self {
        Self { ns, nx, data: vec![0.0; ns * nx] }
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.nx..(i + 1) * self.nx]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.nx..(i + 1) * self.nx]
    }

    pub fn at(&self, i: usize, x: usize) -> f64 {
        self.data[i * self.nx + x]
    }

    /// Time series at one spatial node.
    pub fn column(&self, x: usize) -> Vec<f64> {
        (0..self.ns).map(|i| self.data[i * self.nx + x]).collect()
    }

    pub fn set_column(&mut self, x: usize, col: &[f64]) {
        for (i, v) in col.iter().enumerate() {
            self.data[i * self.nx + x] = *v;
        }
    }

    /// Builds a field column by column, in parallel over spatial nodes.
    pub fn from_columns<F>(ns: usize, nx: usize, f: F) -> Self
    where
        F: Fn(usize) -> Vec<f64> + Sync + Send,
    {
        use rayon::prelude::*;
        let cols: Vec<Vec<f64>> = (0..nx).into_par_iter().map(f).collect();
        let mut out = Self::zeros(ns, nx);
        for (x, c) in cols.iter().enumerate() {
            out.set_column(x, c);
        }
        out
    }
}
