//! The space-time map Λ(t, x) = (s, y) flattening {t = τ₀ + φ̃(x)} to {s = 0}.

use super::psi::SurfaceBundle;
use super::surface::Point;
use crate::error::Result;
use crate::grid::MAX_DIM;

#[derive(Debug, Clone)]
pub struct LorentzGraphMap {
    pub bundle: SurfaceBundle,
    pub tau0: f64,
}

impl LorentzGraphMap {
    pub fn new(bundle: SurfaceBundle, tau0: f64) -> Self {
        Self { bundle, tau0 }
    }

    pub fn dim(&self) -> usize {
        self.bundle.dim
    }

    /// y₁ = (x₁ − ℓ(t−τ₀))/(1−ℓ²)^{1/2}, ȳ = x̄, s = ψ(y) − (t − τ₀ − ℓx₁)/(1−ℓ²)^{1/2}.
    pub fn forward(&self, t: f64, x: &[f64]) -> Result<(f64, Point)> {
        let n = self.dim();
        let ell = self.bundle.ell;
        let gi = self.bundle.gamma_inv();
        let mut y = [0.0; MAX_DIM];
        y[..n].copy_from_slice(&x[..n]);
        y[0] = (x[0] - ell * (t - self.tau0)) / gi;
        let s = self.bundle.psi(&y[..n])? - (t - self.tau0 - ell * x[0]) / gi;
        Ok((s, y))
    }

    /// Explicit inverse: with c = s − ψ(y), x₁ = (y₁ − ℓc)/(1−ℓ²)^{1/2} and
    /// t = τ₀ + (ℓy₁ − c)/(1−ℓ²)^{1/2}.
    pub fn inverse(&self, s: f64, y: &[f64]) -> Result<(f64, Point)> {
        let n = self.dim();
        let ell = self.bundle.ell;
        let gi = self.bundle.gamma_inv();
        let c = s - self.bundle.psi(&y[..n])?;
        let mut x = [0.0; MAX_DIM];
        x[..n].copy_from_slice(&y[..n]);
        x[0] = (y[0] - ell * c) / gi;
        let t = self.tau0 + (ell * y[0] - c) / gi;
        Ok((t, x))
    }

    /// Jacobian determinant of Λ by central differences with step h.
    pub fn jacobian_det(&self, t: f64, x: &[f64], h: f64) -> Result<f64> {
        let n = self.dim();
        let m = n + 1;
        let mut jac = vec![0.0; m * m];
        for col in 0..m {
            let mut tp = t;
            let mut tm = t;
            let mut xp = [0.0; MAX_DIM];
            xp[..n].copy_from_slice(&x[..n]);
            let mut xm = xp;
            if col == 0 {
                tp += h;
                tm -= h;
            } else {
                xp[col - 1] += h;
                xm[col - 1] -= h;
            }
            let (sp, yp) = self.forward(tp, &xp[..n])?;
            let (sm, ym) = self.forward(tm, &xm[..n])?;
            jac[col] = (sp - sm) / (2.0 * h);
            for r in 0..n {
                jac[(r + 1) * m + col] = (yp[r] - ym[r]) / (2.0 * h);
            }
        }
        Ok(determinant(&mut jac, m))
    }
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `a`).
pub fn determinant(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            det = -det;
        }
        let d = a[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = a[r * n + c] / d;
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::localize::LocalizeConfig;
    use crate::geometry::psi::build_bundle;
    use crate::geometry::surface::Hypersurface;
    use crate::model::ModelParams;
    use approx::assert_relative_eq;

    fn map(surface: Hypersurface, dim: usize) -> LorentzGraphMap {
        let p = ModelParams::derive(dim, 3.0).unwrap();
        let (b, _) = build_bundle(surface, &p, &LocalizeConfig::default(), 64).unwrap();
        LorentzGraphMap::new(b, 0.1)
    }

    #[test]
    fn flat_slope_is_time_reflection() {
        let m = map(Hypersurface::Quadratic { dim: 1, ell: 0.0, a: 1.0 }, 1);
        for (t, x) in [(0.03, 0.004), (0.0, -0.01), (0.2, 0.5)] {
            let (s, y) = m.forward(t, &[x]).unwrap();
            assert_relative_eq!(s, m.bundle.phi_tilde.value(&[x]) - t + 0.1, epsilon = 1e-15);
            assert_eq!(y[0], x);
        }
    }

    #[test]
    fn surface_maps_to_zero_and_round_trips() {
        let m = map(Hypersurface::Quadratic { dim: 2, ell: 0.4, a: 1.0 }, 2);
        for k in 0..40 {
            let x = [0.02 * (k as f64 * 0.7).sin(), 0.015 * (k as f64 * 1.3).cos()];
            let t = m.tau0 + m.bundle.phi_tilde.value(&x);
            let (s, _) = m.forward(t, &x).unwrap();
            assert!(s.abs() < 1e-12, "s = {s}");
            let (s2, y2) = m.forward(0.7 * t, &x).unwrap();
            assert!(s2 > 0.0);
            let (tb, xb) = m.inverse(s2, &y2[..2]).unwrap();
            assert_relative_eq!(tb, 0.7 * t, epsilon = 1e-12);
            assert_relative_eq!(xb[0], x[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_jacobian() {
        let m = map(Hypersurface::Quadratic { dim: 2, ell: 0.5, a: 1.0 }, 2);
        let r = m.bundle.r;
        let d = m.jacobian_det(0.05, &[0.3 * r, -0.2 * r], 1e-4 * r).unwrap();
        assert_relative_eq!(d.abs(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn determinant_of_known_matrix() {
        let mut a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        assert_relative_eq!(determinant(&mut a, 3), 18.0, epsilon = 1e-12);
    }
}
