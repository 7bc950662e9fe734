//! User hypersurfaces t = φ(x) and the rotation bringing ∇φ(0) onto ℓe₁.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::grid::MAX_DIM;
use crate::model::cutoff::chi_jet;

pub type Point = [f64; MAX_DIM];

pub fn pad(x: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    p
}

/// Declarative surface description used by configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Zero,
    Linear {
        ell: f64,
    },
    /// ℓx₁ + a|x|²χ(|x|)
    Quadratic {
        ell: f64,
        a: f64,
    },
    /// CSV with columns x1..xN, phi, dphi_1..dphi_N on a tensor grid.
    Tabulated {
        path: String,
    },
}

impl SurfaceSpec {
    pub fn build(&self, dim: usize) -> Result<Hypersurface> {
        let check_ell = |ell: f64| {
            if !(ell.abs() < 1.0) {
                Err(ForgeError::InvalidParams(format!("slope must satisfy |ell| < 1 (got {ell})")))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            SurfaceSpec::Zero => Hypersurface::Zero { dim },
            SurfaceSpec::Linear { ell } => {
                check_ell(*ell)?;
                Hypersurface::Linear { dim, ell: *ell }
            }
            SurfaceSpec::Quadratic { ell, a } => {
                check_ell(*ell)?;
                Hypersurface::Quadratic { dim, ell: *ell, a: *a }
            }
            SurfaceSpec::Tabulated { path } => {
                Hypersurface::Tabulated(Arc::new(TabulatedSurface::from_csv(Path::new(path), dim)?))
            }
        })
    }
}

/// A graph t = φ(x) with φ(0) = 0 and |∇φ| < 1.
#[derive(Debug, Clone)]
pub enum Hypersurface {
    Zero {
        dim: usize,
    },
    Linear {
        dim: usize,
        ell: f64,
    },
    Quadratic {
        dim: usize,
        ell: f64,
        a: f64,
    },
    Tabulated(Arc<TabulatedSurface>),
    /// x ↦ φ(Rᵀx) for an orthogonal R (row-major N×N).
    Rotated {
        inner: Box<Hypersurface>,
        matrix: Vec<f64>,
    },
}

impl Hypersurface {
    pub fn dim(&self) -> usize {
        match self {
            Hypersurface::Zero { dim } | Hypersurface::Linear { dim, .. } | Hypersurface::Quadratic { dim, .. } => *dim,
            Hypersurface::Tabulated(t) => t.dim,
            Hypersurface::Rotated { inner, .. } => inner.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Hypersurface::Zero { .. } => 0.0,
            Hypersurface::Linear { ell, .. } => ell * x[0],
            Hypersurface::Quadratic { ell, a, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                ell * x[0] + a * r2 * chi_jet(r2.sqrt()).value
            }
            Hypersurface::Tabulated(t) => t.value(x),
            Hypersurface::Rotated { inner, matrix } => {
                let n = x.len();
                inner.value(&transpose_apply(matrix, n, x)[..n])
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        let n = x.len();
        let mut g = [0.0; MAX_DIM];
        match self {
            Hypersurface::Zero { .. } => {}
            Hypersurface::Linear { ell, .. } => g[0] = *ell,
            Hypersurface::Quadratic { ell, a, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let r = r2.sqrt();
                let c = chi_jet(r);
                for i in 0..n {
                    // ∂_i(|x|²χ(|x|)) = 2xχ + |x|²χ' x/|x| = x(2χ + |x|χ')
                    g[i] = a * x[i] * (2.0 * c.value + r * c.d1);
                }
                g[0] += ell;
            }
            Hypersurface::Tabulated(t) => g = t.gradient(x),
            Hypersurface::Rotated { inner, matrix } => {
                let xi = transpose_apply(matrix, n, x);
                let gi = inner.gradient(&xi[..n]);
                for i in 0..n {
                    g[i] = (0..n).map(|j| matrix[i * n + j] * gi[j]).sum();
                }
            }
        }
        g
    }

    /// Returns the surface expressed in coordinates where ∇φ(0) = ℓe₁ with
    /// ℓ ≥ 0, and ℓ. A Householder reflection is used for N ≥ 2; for N = 1 the
    /// line is mirrored when φ'(0) < 0.
    pub fn aligned(self) -> (Hypersurface, f64) {
        let n = self.dim();
        let g0 = self.gradient(&vec![0.0; n]);
        let ell = g0[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let already = g0[0] >= 0.0 && g0[1..n].iter().all(|v| v.abs() <= 1e-15 * ell.max(1e-300));
        if ell == 0.0 || already {
            return (self, ell);
        }
        let matrix = householder_to_e1(&g0[..n]);
        (Hypersurface::Rotated { inner: Box::new(self), matrix }, ell)
    }
}

/// Orthogonal symmetric H with H·(g/|g|) = e₁.
pub fn householder_to_e1(g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    if norm == 0.0 {
        return h;
    }
    let mut v: Vec<f64> = g.iter().map(|x| x / norm).collect();
    v[0] -= 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv < 1e-30 {
        return h;
    }
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] -= 2.0 * v[i] * v[j] / vv;
        }
    }
    h
}

fn transpose_apply(m: &[f64], n: usize, x: &[f64]) -> Point {
    let mut out = [0.0; MAX_DIM];
    for j in 0..n {
        out[j] = (0..n).map(|i| m[i * n + j] * x[i]).sum();
    }
    out
}

/// φ and ∇φ sampled on a tensor grid. N = 1 uses cubic Hermite interpolation
/// of (φ, φ′); N ≥ 2 interpolates φ and each gradient column multilinearly.
/// Points outside the table are clamped to its extent.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSurface {
    pub dim: usize,
    pub axes: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub grad: Vec<Point>,
}

impl TabulatedSurface {
    pub fn from_csv(path: &Path, dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| ForgeError::Config(format!("{}: {e}", path.display())))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ForgeError::Config(format!("{}: {e}", path.display())))?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| ForgeError::Config(format!("{}: {e}", path.display())))?;
            if vals.len() != 2 * dim + 1 {
                return Err(ForgeError::Config(format!(
                    "{}: expected {} columns (x, phi, grad), found {}",
                    path.display(),
                    2 * dim + 1,
                    vals.len()
                )));
            }
            rows.push(vals);
        }
        Self::from_rows(dim, &rows)
    }

    /// Rows of (x₁..x_N, φ, ∂₁φ..∂_Nφ) covering a full tensor grid.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for (a, axis) in axes.iter_mut().enumerate() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[a]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            if vals.len() < 2 {
                return Err(ForgeError::Config("tabulated surface needs at least 2 nodes per axis".into()));
            }
            *axis = vals;
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if total != rows.len() {
            return Err(ForgeError::Config(format!(
                "tabulated surface is not a full tensor grid ({} rows for {total} nodes)",
                rows.len()
            )));
        }
        let mut phi = vec![f64::NAN; total];
        let mut grad = vec![[0.0; MAX_DIM]; total];
        for r in rows {
            let mut flat = 0;
            for a in 0..dim {
                let i = axes[a].binary_search_by(|v| v.total_cmp(&r[a])).expect("axis value present");
                flat = flat * axes[a].len() + i;
            }
            phi[flat] = r[dim];
            for a in 0..dim {
                grad[flat][a] = r[dim + 1 + a];
            }
        }
        if phi.iter().any(|v| v.is_nan()) {
            return Err(ForgeError::Config("tabulated surface has duplicate rows".into()));
        }
        Ok(Self { dim, axes, phi, grad })
    }

    fn locate(&self, a: usize, x: f64) -> (usize, f64) {
        let ax = &self.axes[a];
        let x = x.clamp(ax[0], ax[ax.len() - 1]);
        let i = match ax.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(ax.len() - 2),
            Err(i) => i.saturating_sub(1).min(ax.len() - 2),
        };
        (i, (x - ax[i]) / (ax[i + 1] - ax[i]))
    }

    /// Multilinear weights over the 2^N corners of the cell containing x.
    fn corners(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let loc: Vec<(usize, f64)> = (0..self.dim).map(|a| self.locate(a, x[a])).collect();
        (0..1usize << self.dim)
            .map(|mask| {
                let mut flat = 0;
                let mut w = 1.0;
                for a in 0..self.dim {
                    let up = (mask >> a) & 1;
                    flat = flat * self.axes[a].len() + loc[a].0 + up;
                    w *= if up == 1 { loc[a].1 } else { 1.0 - loc[a].1 };
                }
                (flat, w)
            })
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.dim == 1 {
            return self.hermite(x[0]).0;
        }
        self.corners(x).iter().map(|&(i, w)| w * self.phi[i]).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        let mut g = [0.0; MAX_DIM];
        if self.dim == 1 {
            g[0] = self.hermite(x[0]).1;
            return g;
        }
        for (i, w) in self.corners(x) {
            for a in 0..self.dim {
                g[a] += w * self.grad[i][a];
            }
        }
        g
    }

    fn hermite(&self, x: f64) -> (f64, f64) {
        let (i, t) = self.locate(0, x);
        let ax = &self.axes[0];
        let h = ax[i + 1] - ax[i];
        let (p0, p1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.grad[i][0] * h, self.grad[i + 1][0] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
        let d = (6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, d / h)
    }

    /// Half-width of the largest centred cube inside the table.
    pub fn inner_extent(&self) -> f64 {
        self.axes.iter().map(|ax| ax[0].abs().min(ax[ax.len() - 1].abs())).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_gradient_matches_differences() {
        let s = Hypersurface::Quadratic { dim: 2, ell: 0.2, a: 0.3 };
        let x = [0.7, -0.9];
        let g = s.gradient(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            assert_relative_eq!(g[i], (s.value(&xp) - s.value(&xm)) / (2.0 * h), epsilon = 1e-8);
        }
    }

    #[test]
    fn householder_aligns_gradient() {
        let g = [0.1, 0.2, -0.2];
        let h = householder_to_e1(&g);
        let norm = 0.3;
        for i in 0..3 {
            let v: f64 = (0..3).map(|j| h[i * 3 + j] * g[j]).sum();
            assert_relative_eq!(v, if i == 0 { norm } else { 0.0 }, epsilon = 1e-15);
        }
    }

    #[test]
    fn rotated_surface_is_aligned() {
        let base = Hypersurface::Tabulated(Arc::new(plane_table(&[0.1, -0.3])));
        let (rot, ell) = base.aligned();
        assert_relative_eq!(ell, 0.1f64.hypot(0.3), epsilon = 1e-14);
        let g = rot.gradient(&[0.0, 0.0]);
        assert_relative_eq!(g[0], ell, epsilon = 1e-14);
        assert!(g[1].abs() < 1e-14);
        let (flip, l1) = Hypersurface::Linear { dim: 1, ell: -0.4 }.aligned();
        assert_relative_eq!(l1, 0.4);
        assert_relative_eq!(flip.value(&[1.0]), 0.4, epsilon = 1e-15);
    }

    fn plane_table(c: &[f64; 2]) -> TabulatedSurface {
        let mut rows = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let x = -1.0 + 0.5 * i as f64;
                let y = -1.0 + 0.5 * j as f64;
                rows.push(vec![x, y, c[0] * x + c[1] * y, c[0], c[1]]);
            }
        }
        TabulatedSurface::from_rows(2, &rows).unwrap()
    }

    #[test]
    fn tabulated_reproduces_planes_and_cubics() {
        let t = plane_table(&[0.1, -0.3]);
        assert_relative_eq!(t.value(&[0.3, 0.2]), 0.03 - 0.06, epsilon = 1e-15);
        let rows: Vec<Vec<f64>> = (0..11)
            .map(|i| {
                let x = -1.0 + 0.2 * i as f64;
                vec![x, 0.1 * x * x * x, 0.3 * x * x]
            })
            .collect();
        let t1 = TabulatedSurface::from_rows(1, &rows).unwrap();
        assert_relative_eq!(t1.value(&[0.33]), 0.1 * 0.33f64.powi(3), epsilon = 1e-14);
        assert_relative_eq!(t1.gradient(&[0.33])[0], 0.3 * 0.33 * 0.33, epsilon = 1e-13);
        assert!(TabulatedSurface::from_rows(1, &rows[..1]).is_err());
    }
}
