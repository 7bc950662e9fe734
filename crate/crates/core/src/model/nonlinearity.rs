use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::cutoff::chi_jet;
use crate::error::{ForgeError, Result};
use crate::quad::GaussLegendre;

/// Below this |ε| = |d/V| the remainders are summed as a binomial series.
const SERIES_SWITCH: f64 = 0.1;
const TRUNCATION_PANELS: usize = 16;

fn truncation_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// The power nonlinearity f(u) = |u|^{p−1}u, optionally truncated as
/// fₙ(u) = f(u)χ(|u|/B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub p: f64,
    pub truncation: Option<f64>,
}

impl Nonlinearity {
    pub fn new(p: f64) -> Self {
        Self { p, truncation: None }
    }

    pub fn truncated(p: f64, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(ForgeError::InvalidParams(format!("truncation level must be positive (got {level})")));
        }
        Ok(Self { p, truncation: Some(level) })
    }

    pub fn pbar(&self) -> f64 {
        self.p.min(2.0)
    }

    /// |u|^e, using integer powers when e is integral.
    #[inline]
    fn abs_pow(u: f64, e: f64) -> f64 {
        let a = u.abs();
        if e == e.trunc() && e.abs() < 64.0 {
            a.powi(e as i32)
        } else {
            a.powf(e)
        }
    }

    /// Untruncated f.
    #[inline]
    pub fn f_raw(&self, u: f64) -> f64 {
        Self::abs_pow(u, self.p - 1.0) * u
    }

    #[inline]
    pub fn big_f_raw(&self, u: f64) -> f64 {
        Self::abs_pow(u, self.p + 1.0) / (self.p + 1.0)
    }

    #[inline]
    pub fn f_prime_raw(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        self.p * Self::abs_pow(u, self.p - 1.0)
    }

    /// f''(u) = p(p−1)|u|^{p−3}u; undefined at 0 when p < 2.
    pub fn f_second(&self, u: f64) -> Result<f64> {
        if u == 0.0 {
            if self.p < 2.0 {
                return Err(ForgeError::Domain(format!("f'' is singular at u = 0 for p = {} < 2", self.p)));
            }
            return Ok(0.0);
        }
        Ok(self.p * (self.p - 1.0) * Self::abs_pow(u, self.p - 3.0) * u)
    }

    /// f or fₙ.
    pub fn f(&self, u: f64) -> f64 {
        match self.truncation {
            None => self.f_raw(u),
            Some(b) => {
                let a = u.abs();
                if a < b {
                    self.f_raw(u)
                } else if a >= 2.0 * b {
                    0.0
                } else {
                    self.f_raw(u) * chi_jet(a / b).value
                }
            }
        }
    }

    /// f′ or fₙ′.
    pub fn f_prime(&self, u: f64) -> f64 {
        match self.truncation {
            None => self.f_prime_raw(u),
            Some(b) => {
                let a = u.abs();
                if a < b {
                    self.f_prime_raw(u)
                } else if a >= 2.0 * b {
                    0.0
                } else {
                    let c = chi_jet(a / b);
                    self.f_prime_raw(u) * c.value + self.f_raw(u) * c.d1 * u.signum() / b
                }
            }
        }
    }

    /// F or Fₙ (the antiderivative vanishing at 0).
    pub fn big_f(&self, u: f64) -> f64 {
        match self.truncation {
            None => self.big_f_raw(u),
            Some(b) => {
                let a = u.abs();
                if a <= b {
                    return self.big_f_raw(u);
                }
                let top = a.min(2.0 * b);
                let bridge = truncation_rule()
                    .integrate_composite(b, top, TRUNCATION_PANELS, |t| self.f_raw(t) * chi_jet(t / b).value);
                self.big_f_raw(b) + bridge
            }
        }
    }

    /// f(V+d) − f(V) − f′(V)d for V > 0, free of cancellation when |d| ≪ V.
    /// Ignores truncation.
    pub fn f_remainder(&self, v: f64, d: f64) -> f64 {
        debug_assert!(v > 0.0);
        let eps = d / v;
        Self::abs_pow(v, self.p) * binomial_tail(self.p, eps, 2)
    }

    /// F(V+d) − F(V) − f(V)d − ½f′(V)d² for V > 0. Ignores truncation.
    pub fn big_f_remainder(&self, v: f64, d: f64) -> f64 {
        debug_assert!(v > 0.0);
        let eps = d / v;
        Self::abs_pow(v, self.p + 1.0) / (self.p + 1.0) * binomial_tail_even(self.p + 1.0, eps, 3)
    }
}

/// Σ_{n≥m} C(q,n) εⁿ, i.e. (1+ε)|1+ε|^{q−1} minus its Taylor polynomial of
/// degree m−1 at ε = 0. Below ε = −1 the odd extension is used.
pub fn binomial_tail(q: f64, eps: f64, m: usize) -> f64 {
    binomial_tail_with(q, eps, m, true)
}

/// As [`binomial_tail`] with the even extension |1+ε|^q below ε = −1.
pub fn binomial_tail_even(q: f64, eps: f64, m: usize) -> f64 {
    binomial_tail_with(q, eps, m, false)
}

fn binomial_tail_with(q: f64, eps: f64, m: usize, odd: bool) -> f64 {
    if eps.abs() < SERIES_SWITCH {
        let mut coef = 1.0;
        let mut power = 1.0;
        let mut acc: f64 = 0.0;
        for n in 0..80usize {
            if n >= m {
                let term: f64 = coef * power;
                acc += term;
                if term.abs() <= 1e-18 * acc.abs() || coef == 0.0 {
                    break;
                }
            }
            coef *= (q - n as f64) / (n as f64 + 1.0);
            power *= eps;
        }
        acc
    } else {
        let base = 1.0 + eps;
        let mut acc = if odd { base.abs().powf(q - 1.0) * base } else { base.abs().powf(q) };
        let mut coef = 1.0;
        let mut power = 1.0;
        for n in 0..m {
            acc -= coef * power;
            coef *= (q - n as f64) / (n as f64 + 1.0);
            power *= eps;
        }
        acc
    }
}
