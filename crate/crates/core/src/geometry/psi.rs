//! The flattened graph ψ: solving y₁ = Φ(X₁, ȳ) and evaluating ψ, ∇ψ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::localize::{Localization, LocalizeConfig, LocalizedSurface};
use super::surface::Point;
use crate::error::{ForgeError, Result};
use crate::grid::MAX_DIM;
use crate::model::ModelParams;

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

/// ψ(y) with its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiJet {
    pub value: f64,
    pub grad: Point,
}

/// Localized surface plus everything needed to evaluate ψ.
#[derive(Debug, Clone)]
pub struct SurfaceBundle {
    pub dim: usize,
    pub ell: f64,
    pub r: f64,
    pub phi_tilde: LocalizedSurface,
    /// ψ vanishes for |y| ≥ this radius.
    pub r_support: f64,
    /// λ(p−1)/(8(p+1)): componentwise bound on ∇ψ.
    pub lambda_bound: f64,
    /// (1−ℓ)·min{λ(p−1)/(8(p+1)), ½}: bound on |∇φ̃ − ℓe₁|.
    pub deviation_bound: f64,
    pub tol: f64,
}

impl SurfaceBundle {
    pub fn new(loc: Localization, params: &ModelParams) -> Self {
        let r = loc.surface.r;
        Self {
            dim: loc.surface.dim(),
            ell: loc.surface.ell,
            r,
            r_support: (2.0f64).max(2.0 * std::f64::consts::SQRT_2 * r),
            lambda_bound: params.psi_gradient_bound(),
            deviation_bound: loc.bound,
            phi_tilde: loc.surface,
            tol: DEFAULT_TOL,
        }
    }

    /// (1−ℓ²)^{1/2}
    pub fn gamma_inv(&self) -> f64 {
        (1.0 - self.ell * self.ell).sqrt()
    }

    /// Slope bounds ((1−ℓ)/(1+ℓ))^{1/2} ≤ ∂Φ/∂x₁ ≤ ((1+ℓ)/(1−ℓ))^{1/2}.
    pub fn slope_bounds(&self) -> (f64, f64) {
        let q = ((1.0 - self.ell) / (1.0 + self.ell)).sqrt();
        (q, 1.0 / q)
    }

    /// Φ(x₁, ȳ) = (x₁ − ℓφ̃(x₁, ȳ))/(1−ℓ²)^{1/2}.
    pub fn big_phi(&self, x1: f64, ybar: &[f64]) -> f64 {
        let mut x = [0.0; MAX_DIM];
        x[0] = x1;
        x[1..self.dim].copy_from_slice(&ybar[..self.dim - 1]);
        (x1 - self.ell * self.phi_tilde.value(&x[..self.dim])) / self.gamma_inv()
    }

    /// Initial bracket [lo, hi] guaranteed to contain the root, from the
    /// slope bounds around the guess y₁/(1−ℓ²)^{1/2}.
    pub fn bracket(&self, y: &[f64]) -> (f64, f64) {
        let ybar = &y[1..];
        let guess = y[0] / self.gamma_inv();
        let res = self.big_phi(guess, ybar) - y[0];
        let (cmin, cmax) = self.slope_bounds();
        let a = guess - res / cmin;
        let b = guess - res / cmax;
        let pad = 1e-12 * (1.0 + guess.abs()) + 1e-3 * (a - b).abs();
        (a.min(b) - pad, a.max(b) + pad)
    }

    /// X₁(y): the x₁ with Φ(x₁, ȳ) = y₁, to absolute residual tol·max(1, |y₁|).
    pub fn solve_x1(&self, y: &[f64], tol: f64) -> Result<f64> {
        if self.ell == 0.0 {
            return Ok(y[0]);
        }
        let ybar = &y[1..];
        let target = y[0];
        let f = |x: f64| self.big_phi(x, ybar) - target;
        let scale = tol * target.abs().max(1.0);
        let (mut a, mut b) = self.bracket(y);
        let (mut fa, mut fb) = (f(a), f(b));
        if fa.abs() <= scale {
            return Ok(a);
        }
        if fb.abs() <= scale {
            return Ok(b);
        }
        if fa.signum() == fb.signum() {
            return Err(ForgeError::NonConvergence { iterations: 0, residual: fa.abs().min(fb.abs()) });
        }
        // Illinois variant of regula falsi
        let mut side = 0i8;
        let mut best = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a.min(b) && c < a.max(b)) {
                c = 0.5 * (a + b);
            }
            let fc = f(c);
            best = best.min(fc.abs());
            if fc.abs() <= scale || (b - a).abs() <= f64::EPSILON * c.abs().max(1.0) {
                return Ok(c);
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Err(ForgeError::NonConvergence { iterations: MAX_ITERATIONS, residual: best })
    }

    /// X(y) = (X₁(y), ȳ).
    pub fn x_of_y(&self, y: &[f64]) -> Result<Point> {
        let mut x = [0.0; MAX_DIM];
        x[..self.dim].copy_from_slice(&y[..self.dim]);
        x[0] = self.solve_x1(y, self.tol)?;
        Ok(x)
    }

    pub fn psi(&self, y: &[f64]) -> Result<f64> {
        Ok(self.psi_jet(y)?.value)
    }

    /// ψ(y) = (φ̃(X) − ℓX₁)/(1−ℓ²)^{1/2} and ∇ψ from the identities
    /// ∂_{y₁}ψ = (∂₁φ̃ − ℓ)/(1 − ℓ∂₁φ̃), ∂_{y_j}ψ = ∂_jφ̃(1 + ℓ∂_{y₁}ψ)/(1−ℓ²)^{1/2}.
    pub fn psi_jet(&self, y: &[f64]) -> Result<PsiJet> {
        if norm(&y[..self.dim]) >= self.r_support {
            return Ok(PsiJet { value: 0.0, grad: [0.0; MAX_DIM] });
        }
        self.psi_jet_unclipped(y)
    }

    /// ψ and ∇ψ evaluated through the root solve even beyond the support radius.
    pub fn psi_jet_unclipped(&self, y: &[f64]) -> Result<PsiJet> {
        let n = self.dim;
        let mut grad = [0.0; MAX_DIM];
        let x = self.x_of_y(y)?;
        let xs = &x[..n];
        let gi = self.gamma_inv();
        let g = self.phi_tilde.gradient(xs);
        let value = (self.phi_tilde.value(xs) - self.ell * x[0]) / gi;
        grad[0] = (g[0] - self.ell) / (1.0 - self.ell * g[0]);
        for j in 1..n {
            grad[j] = g[j] * (1.0 + self.ell * grad[0]) / gi;
        }
        Ok(PsiJet { value, grad })
    }

    /// Δψ by central differences of the identity-based gradient.
    pub fn psi_laplacian(&self, y: &[f64], step: f64) -> Result<f64> {
        let n = self.dim;
        let mut acc = 0.0;
        for a in 0..n {
            let mut yp = [0.0; MAX_DIM];
            yp[..n].copy_from_slice(&y[..n]);
            let mut ym = yp;
            yp[a] += step;
            ym[a] -= step;
            acc += (self.psi_jet(&yp[..n])?.grad[a] - self.psi_jet(&ym[..n])?.grad[a]) / (2.0 * step);
        }
        Ok(acc)
    }

    /// Checks ψ(0) = 0, the componentwise gradient bound on a grid with
    /// `per_axis` nodes over [−R, R]^N, and that ψ vanishes on the sphere |y| = R.
    pub fn verify(&self, per_axis: usize) -> Result<PsiReport> {
        let n = self.dim;
        let psi0 = self.psi(&vec![0.0; n])?;
        if psi0.abs() > 1e-10 {
            return Err(ForgeError::ConstraintViolation {
                constraint: "psi(0) = 0".into(),
                point: vec![0.0; n],
                value: psi0.abs(),
                bound: 1e-10,
            });
        }
        let half = self.r_support;
        let step = 2.0 * half / (per_axis - 1) as f64;
        let total = per_axis.pow(n as u32);
        let rows: Vec<(Point, Point)> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut y = [0.0; MAX_DIM];
                let mut rest = flat;
                for a in (0..n).rev() {
                    y[a] = -half + (rest % per_axis) as f64 * step;
                    rest /= per_axis;
                }
                self.psi_jet(&y[..n]).map(|j| (y, j.grad))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut max_component = [0.0f64; MAX_DIM];
        let mut worst: Option<(Point, usize, f64)> = None;
        for (y, g) in &rows {
            for a in 0..n {
                let v = g[a].abs();
                max_component[a] = max_component[a].max(v);
                if worst.is_none_or(|w| v > w.2) {
                    worst = Some((*y, a, v));
                }
            }
        }
        if let Some((y, _, v)) = worst {
            if v > self.lambda_bound {
                return Err(ForgeError::ConstraintViolation {
                    constraint: "|d_j psi| <= lambda(p-1)/(8(p+1))".into(),
                    point: y[..n].to_vec(),
                    value: v,
                    bound: self.lambda_bound,
                });
            }
        }
        // ψ must vanish on the support sphere
        let mut shell_max: f64 = 0.0;
        for k in 0..64 {
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            let mut y = [0.0; MAX_DIM];
            y[0] = 1.0001 * self.r_support * th.cos();
            if n > 1 {
                y[1] = 1.0001 * self.r_support * th.sin();
            }
            shell_max = shell_max.max(self.psi_jet_unclipped(&y[..n])?.value.abs());
            if n == 1 {
                break;
            }
        }
        let worst = worst.map(|(y, a, v)| WorstGradient { point: y[..n].to_vec(), component: a, value: v });
        Ok(PsiReport {
            max_gradient: max_component[..n].to_vec(),
            bound: self.lambda_bound,
            worst,
            psi_at_origin: psi0,
            support_residual: shell_max,
        })
    }

    /// Rows (point, constraint, value, bound) of a verification sweep.
    pub fn verification_rows(&self, per_axis: usize) -> Result<Vec<VerificationRow>> {
        let n = self.dim;
        let half = self.r_support;
        let step = 2.0 * half / (per_axis - 1) as f64;
        let total = per_axis.pow(n as u32);
        (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut y = [0.0; MAX_DIM];
                let mut rest = flat;
                for a in (0..n).rev() {
                    y[a] = -half + (rest % per_axis) as f64 * step;
                    rest /= per_axis;
                }
                let j = self.psi_jet(&y[..n])?;
                let gmax = j.grad[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                Ok(VerificationRow {
                    point: y[..n].to_vec(),
                    constraint: "grad_psi_component".into(),
                    value: gmax,
                    bound: self.lambda_bound,
                })
            })
            .collect()
    }
}

/// Builds the complete bundle: alignment is the caller's job.
pub fn build_bundle(
    surface: super::surface::Hypersurface,
    params: &ModelParams,
    cfg: &LocalizeConfig,
    verify_per_axis: usize,
) -> Result<(SurfaceBundle, PsiReport)> {
    let loc = super::localize::localize(surface, params, cfg)?;
    let bundle = SurfaceBundle::new(loc, params);
    let per_axis = verify_per_axis.min(cfg.per_axis(params.dim)).max(5);
    let report = bundle.verify(per_axis)?;
    Ok((bundle, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstGradient {
    pub point: Vec<f64>,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub max_gradient: Vec<f64>,
    pub bound: f64,
    pub worst: Option<WorstGradient>,
    pub psi_at_origin: f64,
    pub support_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub point: Vec<f64>,
    pub constraint: String,
    pub value: f64,
    pub bound: f64,
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface::Hypersurface;
    use approx::assert_relative_eq;

    fn bundle(surface: Hypersurface, dim: usize) -> SurfaceBundle {
        let p = ModelParams::derive(dim, 3.0).unwrap();
        build_bundle(surface, &p, &LocalizeConfig::default(), 64).unwrap().0
    }

    #[test]
    fn flat_slope_is_identity() {
        let b = bundle(Hypersurface::Quadratic { dim: 1, ell: 0.0, a: 0.5 }, 1);
        for y in [-0.3, 0.001, 0.02] {
            assert_eq!(b.solve_x1(&[y], 1e-12).unwrap(), y);
            assert_eq!(b.psi(&[y]).unwrap(), b.phi_tilde.value(&[y]));
        }
    }

    #[test]
    fn linear_branch_closed_form() {
        let b = bundle(Hypersurface::Linear { dim: 1, ell: 0.6 }, 1);
        assert_relative_eq!(b.solve_x1(&[0.8], 1e-12).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.psi(&[0.8]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_straddles_root() {
        let b = bundle(Hypersurface::Quadratic { dim: 2, ell: 0.4, a: 1.0 }, 2);
        for &y in &[[0.0, 0.0], [0.01, -0.003], [-0.02, 0.01], [5.0, 1.0]] {
            let (lo, hi) = b.bracket(&y);
            let flo = b.big_phi(lo, &y[1..]) - y[0];
            let fhi = b.big_phi(hi, &y[1..]) - y[0];
            assert!(flo <= 0.0 && fhi >= 0.0, "{y:?}: {flo} {fhi}");
        }
    }

    #[test]
    fn defining_relation_round_trip() {
        let b = bundle(Hypersurface::Quadratic { dim: 2, ell: 0.35, a: 1.5 }, 2);
        let gi = b.gamma_inv();
        for k in 0..50 {
            let x = [0.03 * ((k as f64) * 0.37).sin(), 0.02 * ((k as f64) * 0.91).cos()];
            let ph = b.phi_tilde.value(&x);
            let y = [(x[0] - b.ell * ph) / gi, x[1]];
            let lhs = gi * b.psi(&y).unwrap() + b.ell * x[0];
            assert_relative_eq!(lhs, ph, epsilon = 1e-12);
            assert_relative_eq!(b.solve_x1(&y, 1e-12).unwrap(), x[0], epsilon = 1e-11);
        }
    }

    #[test]
    fn gradient_identities_match_differences() {
        let b = bundle(Hypersurface::Quadratic { dim: 2, ell: 0.3, a: 1.0 }, 2);
        let h = 1e-6 * b.r;
        for y in [[0.2 * b.r, 0.3 * b.r], [-0.5 * b.r, 0.9 * b.r], [1.1 * b.r, -0.2 * b.r]] {
            let g = b.psi_jet(&y).unwrap().grad;
            for i in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[i] += h;
                ym[i] -= h;
                let fd = (b.psi(&yp).unwrap() - b.psi(&ym).unwrap()) / (2.0 * h);
                assert!((g[i] - fd).abs() < 1e-6, "{y:?} {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn verification_reports_bound_and_support() {
        let b = bundle(Hypersurface::Quadratic { dim: 1, ell: 0.3, a: 1.0 }, 1);
        let rep = b.verify(4001).unwrap();
        assert!(rep.psi_at_origin.abs() < 1e-15);
        assert!(rep.max_gradient[0] <= rep.bound);
        assert!(rep.support_residual < 1e-15);
    }
}
