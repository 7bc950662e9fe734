//! Smooth cutoff χ: equal to 1 on [0,1], 0 on [2,∞), monotone bridge between.
//!
//! On (1,2) the bridge g(2−r)/(g(2−r)+g(r−1)) with g(t)=exp(−1/t) is written as
//! the logistic function of z(r) = 1/(r−1) − 1/(2−r), which keeps the value and
//! its first two derivatives free of overflow near the seams.

/// Beyond this |z| the logistic is 0 or 1 to double precision and the
/// derivatives underflow.
const Z_SATURATION: f64 = 700.0;

/// Value, first and second derivative of χ at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { value: 0.0, d1: 0.0, d2: 0.0 };
    pub const ONE: Jet2 = Jet2 { value: 1.0, d1: 0.0, d2: 0.0 };
}

/// χ(r) for any real r (even extension).
#[inline]
pub fn chi(r: f64) -> f64 {
    chi_jet(r).value
}

/// χ(r) with its derivatives to order 2 (even extension: χ'(−r) = −χ'(r)).
pub fn chi_jet(r: f64) -> Jet2 {
    let a = r.abs();
    if a <= 1.0 {
        return Jet2::ONE;
    }
    if a >= 2.0 {
        return Jet2::ZERO;
    }
    let u = a - 1.0;
    let w = 2.0 - a;
    let z = 1.0 / u - 1.0 / w;
    if z > Z_SATURATION {
        return Jet2::ONE;
    }
    if z < -Z_SATURATION {
        return Jet2::ZERO;
    }
    // logistic and its complement computed without cancellation
    let (value, comp) = if z >= 0.0 {
        let e = (-z).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = z.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    };
    let l1 = value * comp;
    let l2 = l1 * (comp - value);
    let dz = -1.0 / (u * u) - 1.0 / (w * w);
    let d2z = 2.0 / (u * u * u) - 2.0 / (w * w * w);
    let d1 = l1 * dz;
    let d2 = l2 * dz * dz + l1 * d2z;
    let sign = if r < 0.0 { -1.0 } else { 1.0 };
    Jet2 { value, d1: sign * d1, d2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bridge_reference(r: f64) -> f64 {
        let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let a = g(2.0 - r);
        let b = g(r - 1.0);
        a / (a + b)
    }

    #[test]
    fn plateaus_and_midpoint() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(-0.7), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(5.0), 0.0);
        assert_relative_eq!(chi(1.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn matches_exponential_bridge() {
        for i in 1..200 {
            let r = 1.0 + i as f64 / 200.0;
            assert_relative_eq!(chi(r), bridge_reference(r), epsilon = 1e-14);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for i in 1..100 {
            let r = 1.0 + i as f64 / 100.0;
            let j = chi_jet(r);
            let fd1 = (chi(r + h) - chi(r - h)) / (2.0 * h);
            let fd2 = (chi(r + h) - 2.0 * chi(r) + chi(r - h)) / (h * h);
            assert!((j.d1 - fd1).abs() < 1e-7 * (1.0 + j.d1.abs()), "r={r}");
            assert!((j.d2 - fd2).abs() < 1e-3 * (1.0 + j.d2.abs()), "r={r}");
        }
    }

    #[test]
    fn even_extension() {
        let a = chi_jet(1.3);
        let b = chi_jet(-1.3);
        assert_eq!(a.value, b.value);
        assert_eq!(a.d1, -b.d1);
        assert_eq!(a.d2, b.d2);
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(r in 0.0f64..3.0, dr in 1e-6f64..0.5) {
            let j = chi_jet(r);
            prop_assert!((0.0..=1.0).contains(&j.value));
            prop_assert!(j.d1 <= 0.0);
            prop_assert!(chi(r + dr) <= j.value);
            prop_assert!(j.value.is_finite() && j.d1.is_finite() && j.d2.is_finite());
        }
    }
}
