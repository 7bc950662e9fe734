use super::cutoff::chi_jet;

/// Radial profile a(r) of the bump A with its first two radial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub a: f64,
    pub da: f64,
    pub d2a: f64,
}

/// A(x) = 0 for |x| ≤ 1, (|x| − χ(|x|))^k on (1,2], |x|^k beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpA {
    pub k: u32,
}

/// Value, gradient and Hessian of A at a point (Hessian row-major N×N).
#[derive(Debug, Clone, PartialEq)]
pub struct BumpEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl BumpEval {
    pub fn laplacian(&self) -> f64 {
        let n = self.gradient.len();
        (0..n).map(|i| self.hessian[i * n + i]).sum()
    }
}

impl BumpA {
    pub fn new(k: u32) -> Self {
        Self { k }
    }

    /// a(r), a'(r), a''(r).
    pub fn radial(&self, r: f64) -> RadialJet {
        let k = self.k as i32;
        let kf = self.k as f64;
        if r <= 1.0 {
            return RadialJet { a: 0.0, da: 0.0, d2a: 0.0 };
        }
        if r > 2.0 {
            return RadialJet { a: r.powi(k), da: kf * r.powi(k - 1), d2a: kf * (kf - 1.0) * r.powi(k - 2) };
        }
        let c = chi_jet(r);
        let m = r - c.value;
        let dm = 1.0 - c.d1;
        RadialJet {
            a: m.powi(k),
            da: kf * m.powi(k - 1) * dm,
            d2a: kf * (kf - 1.0) * m.powi(k - 2) * dm * dm - kf * m.powi(k - 1) * c.d2,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.radial(norm(x)).a
    }

    /// Radial jet together with |x|, the building block for chain rules.
    pub fn radial_at(&self, x: &[f64]) -> (f64, RadialJet) {
        let r = norm(x);
        (r, self.radial(r))
    }

    pub fn eval(&self, x: &[f64]) -> BumpEval {
        let n = x.len();
        let r = norm(x);
        let j = self.radial(r);
        let mut gradient = vec![0.0; n];
        let mut hessian = vec![0.0; n * n];
        if r > 0.0 && (j.da != 0.0 || j.d2a != 0.0) {
            let tangential = j.da / r;
            for i in 0..n {
                let ui = x[i] / r;
                gradient[i] = j.da * ui;
                for l in 0..n {
                    let ul = x[l] / r;
                    let delta = if i == l { 1.0 } else { 0.0 };
                    hessian[i * n + l] = j.d2a * ui * ul + tangential * (delta - ui * ul);
                }
            }
        }
        BumpEval { value: j.a, gradient, hessian }
    }

    /// ΔA = a'' + (N−1) a'/r.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return 0.0;
        }
        let j = self.radial(r);
        j.d2a + (x.len() as f64 - 1.0) * j.da / r
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn core_is_flat() {
        let a = BumpA::new(14);
        let e = a.eval(&[0.5]);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, vec![0.0]);
        assert_eq!(a.eval(&[0.3, -0.2]).value, 0.0);
    }

    #[test]
    fn far_field_power() {
        let a = BumpA::new(14);
        assert_eq!(a.value(&[3.0]), 4_782_969.0);
        assert_eq!(a.value(&[0.0, -3.0, 0.0]), 4_782_969.0);
    }

    #[test]
    fn seams_are_continuous() {
        let a = BumpA::new(14);
        let eps = 1e-9;
        let lo = a.radial(2.0 - eps);
        let hi = a.radial(2.0 + eps);
        assert_relative_eq!(lo.a, hi.a, max_relative = 1e-7);
        assert_relative_eq!(lo.da, hi.da, max_relative = 1e-7);
        assert_relative_eq!(lo.d2a, hi.d2a, max_relative = 1e-6);
        assert_relative_eq!(a.radial(2.0).a, 2f64.powi(14));
        let inner = a.radial(1.0 + 1e-3);
        assert!(inner.a < 1e-30 && inner.da < 1e-25);
    }

    #[test]
    fn gradient_second_order_convergence() {
        let a = BumpA::new(14);
        let x = [1.1, 0.9];
        let exact = a.eval(&x).gradient;
        let err = |h: f64| {
            let mut e: f64 = 0.0;
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (a.value(&xp) - a.value(&xm)) / (2.0 * h);
                e = e.max((fd - exact[i]).abs());
            }
            e
        };
        let order = (err(1e-3) / err(5e-4)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn laplacian_matches_hessian_trace() {
        let a = BumpA::new(16);
        for x in [[1.2, 0.4], [2.5, -1.0], [0.1, 1.7]] {
            let e = a.eval(&x);
            assert_relative_eq!(e.laplacian(), a.laplacian(&x), max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rotation_invariant(r in 0.0f64..3.5, th in 0.0f64..std::f64::consts::TAU, ph in 0.0f64..std::f64::consts::TAU) {
            let a = BumpA::new(14);
            let x = [r * th.cos(), r * th.sin()];
            let y = [r * ph.cos(), r * ph.sin()];
            let (va, vb) = (a.value(&x), a.value(&y));
            // near |x| = 1 the base r − χ(r) ≈ r − 1 amplifies the rounding of |x| by k/(r−1)
            let cond = 14.0 / (r - 1.0).abs().max(1e-3);
            prop_assert!((va - vb).abs() <= 1e-14 * cond * va.abs().max(1e-300));
            prop_assert!(va >= 0.0);
        }
    }
}
