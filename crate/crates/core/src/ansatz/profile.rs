//! The basic profile V₀ = κ(s + A)^{−2/(p−1)} and its residual ℰ₀.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::SurfaceBundle;
use crate::grid::{SpatialGrid, MAX_DIM};
use crate::model::cutoff::chi;
use crate::model::{BumpA, ModelParams};

/// Per-node spatial data entering V₀: ψ-derived coefficients, κ and A with
/// their first and second derivatives.
#[derive(Debug, Clone)]
pub struct SurfaceFields {
    pub dim: usize,
    pub grad_psi: Vec<[f64; MAX_DIM]>,
    pub lap_psi: Vec<f64>,
    /// |∇ψ|²
    pub g: Vec<f64>,
    pub kappa: Vec<f64>,
    pub grad_kappa: Vec<[f64; MAX_DIM]>,
    pub lap_kappa: Vec<f64>,
    pub a: Vec<f64>,
    pub grad_a: Vec<[f64; MAX_DIM]>,
    pub lap_a: Vec<f64>,
    /// χ(|x|)
    pub chi_x: Vec<f64>,
}

impl SurfaceFields {
    /// κ, ∇κ and Δκ come from central differences of the identity-based ∇ψ
    /// with step `fd_step`; Δψ likewise.
    pub fn build(params: &ModelParams, bundle: &SurfaceBundle, grid: &SpatialGrid, fd_step: f64) -> Result<Self> {
        let n = grid.dim;
        let bump = BumpA::new(params.k);
        let kappa0 = params.kappa0;
        let e = 1.0 / (params.p - 1.0);
        let flat_psi = is_flat(bundle);
        let kappa_at = |y: &[f64]| -> Result<f64> {
            let j = bundle.psi_jet(y)?;
            let g: f64 = j.grad[..n].iter().map(|v| v * v).sum();
            Ok(kappa0 * (1.0 - g).powf(e))
        };
        let rows: Vec<_> = (0..grid.len())
            .into_par_iter()
            .map(|i| -> Result<_> {
                let x = grid.point(i);
                let xs = &x[..n];
                let be = bump.eval(xs);
                let mut ga = [0.0; MAX_DIM];
                ga[..n].copy_from_slice(&be.gradient);
                let lap_a = be.laplacian();
                let chi_x = chi(xs.iter().map(|v| v * v).sum::<f64>().sqrt());
                if flat_psi {
                    return Ok(([0.0; MAX_DIM], 0.0, 0.0, kappa0, [0.0; MAX_DIM], 0.0, be.value, ga, lap_a, chi_x));
                }
                let jet = bundle.psi_jet(xs)?;
                let g: f64 = jet.grad[..n].iter().map(|v| v * v).sum();
                let k0 = kappa0 * (1.0 - g).powf(e);
                let lap_psi = bundle.psi_laplacian(xs, fd_step)?;
                let mut gk = [0.0; MAX_DIM];
                let mut lk = 0.0;
                for a in 0..n {
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] += fd_step;
                    xm[a] -= fd_step;
                    let kp = kappa_at(&xp[..n])?;
                    let km = kappa_at(&xm[..n])?;
                    gk[a] = (kp - km) / (2.0 * fd_step);
                    lk += (kp - 2.0 * k0 + km) / (fd_step * fd_step);
                }
                Ok((jet.grad, lap_psi, g, k0, gk, lk, be.value, ga, lap_a, chi_x))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self {
            dim: n,
            grad_psi: Vec::with_capacity(rows.len()),
            lap_psi: Vec::with_capacity(rows.len()),
            g: Vec::with_capacity(rows.len()),
            kappa: Vec::with_capacity(rows.len()),
            grad_kappa: Vec::with_capacity(rows.len()),
            lap_kappa: Vec::with_capacity(rows.len()),
            a: Vec::with_capacity(rows.len()),
            grad_a: Vec::with_capacity(rows.len()),
            lap_a: Vec::with_capacity(rows.len()),
            chi_x: Vec::with_capacity(rows.len()),
        };
        for (gp, lp, g, k, gk, lk, a, ga, la, cx) in rows {
            out.grad_psi.push(gp);
            out.lap_psi.push(lp);
            out.g.push(g);
            out.kappa.push(k);
            out.grad_kappa.push(gk);
            out.lap_kappa.push(lk);
            out.a.push(a);
            out.grad_a.push(ga);
            out.lap_a.push(la);
            out.chi_x.push(cx);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn max_grad_psi_sq(&self) -> f64 {
        self.g.iter().cloned().fold(0.0, f64::max)
    }
}

fn is_flat(bundle: &SurfaceBundle) -> bool {
    use crate::geometry::Hypersurface;
    matches!(bundle.phi_tilde.surface, Hypersurface::Zero { .. } | Hypersurface::Linear { .. })
}

/// Closed-form evaluation of V₀ and its derivatives at grid nodes.
#[derive(Debug, Clone, Copy)]
pub struct Profile<'a> {
    pub fields: &'a SurfaceFields,
    pub p: f64,
    /// 2/(p−1)
    pub a: f64,
}

/// Value, gradient and Laplacian of a field at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceJet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub lap: f64,
}

impl<'a> Profile<'a> {
    pub fn new(fields: &'a SurfaceFields, p: f64) -> Self {
        Self { fields, p, a: 2.0 / (p - 1.0) }
    }

    #[inline]
    fn coefficient(&self, alpha: usize) -> f64 {
        match alpha {
            0 => 1.0,
            1 => -self.a,
            2 => self.a * (self.a + 1.0),
            _ => (0..alpha).map(|m| -(self.a + m as f64)).product(),
        }
    }

    /// ∂_s^α V₀ = c_α κ W^{−a−α}, W = s + A.
    #[inline]
    pub fn ds(&self, alpha: usize, s: f64, i: usize) -> f64 {
        let w = s + self.fields.a[i];
        self.coefficient(alpha) * self.fields.kappa[i] * w.powf(-self.a - alpha as f64)
    }

    #[inline]
    pub fn v0(&self, s: f64, i: usize) -> f64 {
        self.ds(0, s, i)
    }

    /// ∂_s^α V₀ with its spatial gradient and Laplacian (chain rule through κ and A).
    pub fn jet(&self, alpha: usize, s: f64, i: usize) -> SpaceJet {
        let f = self.fields;
        let n = f.dim;
        let c = self.coefficient(alpha);
        let b = self.a + alpha as f64;
        let w = s + f.a[i];
        let wb = w.powf(-b);
        let wb1 = wb / w;
        let wb2 = wb1 / w;
        let k = f.kappa[i];
        let mut grad = [0.0; MAX_DIM];
        let mut gkga = 0.0;
        let mut ga2 = 0.0;
        for d in 0..n {
            grad[d] = c * (f.grad_kappa[i][d] * wb - b * k * wb1 * f.grad_a[i][d]);
            gkga += f.grad_kappa[i][d] * f.grad_a[i][d];
            ga2 += f.grad_a[i][d] * f.grad_a[i][d];
        }
        let lap = c * (f.lap_kappa[i] * wb - 2.0 * b * wb1 * gkga - b * k * (wb1 * f.lap_a[i] - (b + 1.0) * wb2 * ga2));
        SpaceJet { value: c * k * wb, grad, lap }
    }

    /// ℰ₀ = 2∇ψ·∇∂_sV₀ + (Δψ)∂_sV₀ + ΔV₀.
    pub fn e0(&self, s: f64, i: usize) -> f64 {
        let f = self.fields;
        let j0 = self.jet(0, s, i);
        let j1 = self.jet(1, s, i);
        let mut mixed = 0.0;
        for d in 0..f.dim {
            mixed += f.grad_psi[i][d] * j1.grad[d];
        }
        2.0 * mixed + f.lap_psi[i] * j1.value + j0.lap
    }

    /// Q = (1 − χ(|x|) + V₀)^{p+1}.
    #[inline]
    pub fn q(&self, s: f64, i: usize) -> f64 {
        (1.0 - self.fields.chi_x[i] + self.v0(s, i)).powf(self.p + 1.0)
    }

    /// ∂_sQ = (p+1)∂_sV₀(1 − χ + V₀)^p.
    #[inline]
    pub fn q_s(&self, s: f64, i: usize) -> f64 {
        (self.p + 1.0) * self.ds(1, s, i) * (1.0 - self.fields.chi_x[i] + self.v0(s, i)).powf(self.p)
    }

    /// ∇Q = (p+1)∇V₀(1 − χ + V₀)^p − (p+1)(1 − χ + V₀)^p ∇χ(|x|)... with ∇χ
    /// taken from the radial cutoff.
    pub fn q_grad(&self, s: f64, i: usize, x: &[f64]) -> [f64; MAX_DIM] {
        let f = self.fields;
        let n = f.dim;
        let j = self.jet(0, s, i);
        let base = (1.0 - f.chi_x[i] + j.value).powf(self.p);
        let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let dchi = crate::model::cutoff::chi_jet(r).d1;
        let mut g = [0.0; MAX_DIM];
        for d in 0..n {
            let grad_chi = if r > 0.0 { dchi * x[d] / r } else { 0.0 };
            g[d] = (self.p + 1.0) * base * (j.grad[d] - grad_chi);
        }
        g
    }
}
