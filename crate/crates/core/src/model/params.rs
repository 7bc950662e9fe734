use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// Slack used when rounding the floor/ceil laws; the closed forms hit exact
/// integers for the usual rational exponents.
const ROUNDING_SLACK: f64 = 1e-9;

/// Model parameters `(N, p)` together with every derived constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Space dimension N.
    pub dim: usize,
    /// Nonlinearity exponent.
    pub p: f64,
    /// Correction depth J = floor((2p+2)/(p-1)).
    pub depth: usize,
    /// Regularity order q0 = 2J + 3.
    pub q0: usize,
    /// Flatness order of the bump A.
    pub k: u32,
    /// Decay margin λ.
    pub lambda: f64,
    /// Profile constant κ0 = [2(p+1)/(p-1)^2]^{1/(p-1)}.
    pub kappa0: f64,
    /// Radius beyond which ψ vanishes.
    pub support_radius: f64,
}

impl ModelParams {
    /// Derives all constants from `(N, p)` with the minimal admissible `k`.
    pub fn derive(dim: usize, p: f64) -> Result<Self> {
        if !(1..=4).contains(&dim) {
            return Err(ForgeError::InvalidParams(format!("dim outside 1..4 (got {dim})")));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(ForgeError::InvalidParams(format!("p must exceed 1 (got {p})")));
        }
        if dim >= 3 {
            let critical = (dim as f64 + 2.0) / (dim as f64 - 2.0);
            if p > critical + ROUNDING_SLACK {
                return Err(ForgeError::InvalidParams(format!(
                    "p = {p} exceeds the energy-critical exponent {critical} for dim {dim}"
                )));
            }
        }
        let depth = ((2.0 * p + 2.0) / (p - 1.0) + ROUNDING_SLACK).floor() as usize;
        let q0 = 2 * depth + 3;
        let lambda = (0.5 * (depth as f64 - (p + 3.0) / (p - 1.0))).min(1.0 / p);
        if lambda <= 0.0 {
            return Err(ForgeError::InvalidParams(format!("derived lambda = {lambda} is not positive")));
        }
        let k = minimal_k(p, lambda, q0);
        let kappa0 = (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0));
        Ok(Self { dim, p, depth, q0, k, lambda, kappa0, support_radius: 2.0 })
    }

    /// Raises `k` to a larger admissible value. Lowering it is rejected.
    pub fn with_k(mut self, k: u32) -> Result<Self> {
        let k_min = minimal_k(self.p, self.lambda, self.q0);
        if k < k_min {
            return Err(ForgeError::InvalidParams(format!("k = {k} is below the admissible minimum {k_min}")));
        }
        self.k = k;
        Ok(self)
    }

    pub fn with_support_radius(mut self, radius: f64) -> Result<Self> {
        if radius < 2.0 || !radius.is_finite() {
            return Err(ForgeError::InvalidParams(format!("support radius must be at least 2 (got {radius})")));
        }
        self.support_radius = radius;
        Ok(self)
    }

    /// p̄ = min(2, p).
    pub fn pbar(&self) -> f64 {
        self.p.min(2.0)
    }

    /// Exponent 2/(p-1) of the blow-up profile.
    pub fn profile_exponent(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// Sup-norm bound λ(p-1)/(8(p+1)) on each component of ∇ψ.
    pub fn psi_gradient_bound(&self) -> f64 {
        self.lambda * (self.p - 1.0) / (8.0 * (self.p + 1.0))
    }

    /// Checks that the stored derived fields agree with a fresh derivation.
    pub fn is_consistent(&self) -> bool {
        match Self::derive(self.dim, self.p) {
            Ok(fresh) => {
                fresh.depth == self.depth
                    && fresh.q0 == self.q0
                    && fresh.lambda == self.lambda
                    && fresh.kappa0 == self.kappa0
                    && self.k >= fresh.k
            }
            Err(_) => false,
        }
    }
}

/// Smallest integer k with k ≥ q0 + 1 and k ≥ 2[p+1+λ(p-1)]/(λ(p-1)).
pub fn minimal_k(p: f64, lambda: f64, q0: usize) -> u32 {
    let bound = 2.0 * (p + 1.0 + lambda * (p - 1.0)) / (lambda * (p - 1.0));
    let from_lambda = (bound - ROUNDING_SLACK).ceil().max(0.0) as u32;
    from_lambda.max(q0 as u32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cubic_line() {
        let m = ModelParams::derive(1, 3.0).unwrap();
        assert_eq!((m.depth, m.q0, m.k), (4, 11, 14));
        assert_relative_eq!(m.lambda, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m.kappa0, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn quintic_space() {
        let m = ModelParams::derive(3, 5.0).unwrap();
        assert_eq!((m.depth, m.q0, m.k), (3, 9, 17));
        assert_relative_eq!(m.lambda, 0.2, epsilon = 1e-15);
        assert_relative_eq!(m.kappa0, 0.75f64.powf(0.25), epsilon = 1e-14);
    }

    #[test]
    fn quadratic_plane() {
        let m = ModelParams::derive(2, 2.0).unwrap();
        assert_eq!((m.depth, m.q0, m.k), (6, 15, 16));
        assert_relative_eq!(m.lambda, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.kappa0, 6.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ModelParams::derive(0, 3.0).is_err());
        assert!(ModelParams::derive(5, 3.0).is_err());
        assert!(ModelParams::derive(1, 1.0).is_err());
        assert!(ModelParams::derive(3, 5.5).is_err());
        assert!(ModelParams::derive(4, 3.0).is_ok());
        assert!(ModelParams::derive(4, 3.1).is_err());
        let msg = ModelParams::derive(5, 3.0).unwrap_err().to_string();
        assert!(msg.contains("dim outside 1..4"), "{msg}");
    }

    #[test]
    fn k_override_only_upward() {
        let m = ModelParams::derive(1, 3.0).unwrap();
        assert_eq!(m.clone().with_k(20).unwrap().k, 20);
        assert!(m.with_k(13).is_err());
    }

    #[test]
    fn derivation_is_reproducible() {
        for &(n, p) in &[(1, 1.5), (2, 2.5), (3, 3.0), (4, 2.0), (1, 7.0)] {
            let a = ModelParams::derive(n, p).unwrap();
            let b = ModelParams::derive(n, p).unwrap();
            assert_eq!(a, b);
            assert!(a.is_consistent());
            assert!(a.lambda > 0.0 && a.lambda <= 0.5);
            assert!(a.k as usize > a.q0);
        }
    }
}
