//! The region 𝒯 on which the pulled-back solution lives, and cone predicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map::LorentzGraphMap;
use super::surface::Point;
use crate::error::{ForgeError, Result};
use crate::grid::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRegion {
    pub ell: f64,
    pub delta0: f64,
    /// τ₀ = ((1−ℓ)/(1+ℓ))^{1/2} δ₀/6
    pub tau0: f64,
    /// ε₀ = (1−ℓ)/(2+ℓ) τ₀
    pub eps0: f64,
}

impl InfluenceRegion {
    pub fn new(ell: f64, delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(ForgeError::InvalidParams(format!("delta0 must lie in (0, 1) (got {delta0})")));
        }
        if !(0.0..1.0).contains(&ell) {
            return Err(ForgeError::InvalidParams(format!("slope must lie in [0, 1) (got {ell})")));
        }
        let tau0 = ((1.0 - ell) / (1.0 + ell)).sqrt() * delta0 / 6.0;
        let eps0 = (1.0 - ell) / (2.0 + ell) * tau0;
        Ok(Self { ell, delta0, tau0, eps0 })
    }

    /// Radius of the verifiable patch: min{ε₀/4, r}.
    pub fn patch_radius(&self, r: f64) -> f64 {
        (0.25 * self.eps0).min(r)
    }

    /// 0 ≤ t < τ₀ + φ̃(x) and |x| < τ₀ + ε₀ − t.
    pub fn contains(&self, map: &LorentzGraphMap, t: f64, x: &[f64]) -> bool {
        let phi = map.bundle.phi_tilde.value(x);
        t >= 0.0 && t < self.tau0 + phi && norm(x) < self.tau0 + self.eps0 - t
    }

    /// Blow-up time above x: τ₀ + φ̃(x).
    pub fn blowup_time(&self, map: &LorentzGraphMap, x: &[f64]) -> f64 {
        self.tau0 + map.bundle.phi_tilde.value(x)
    }
}

/// Open backward cone C(t, x) = {0 ≤ t′ < t, |x′ − x| < t − t′}.
pub fn in_backward_cone(t: f64, x: &[f64], tp: f64, xp: &[f64]) -> bool {
    tp >= 0.0 && tp < t && dist(x, xp) < t - tp
}

/// Truncated cone E(x₀, R, τ) = {0 ≤ t < τ, |x − x₀| < R − t}.
pub fn in_truncated_cone(x0: &[f64], radius: f64, tau: f64, t: f64, x: &[f64]) -> bool {
    t >= 0.0 && t < tau && dist(x, x0) < radius - t
}

/// η = (1−σ+δ)((1−ℓ)/(1+ℓ))^{1/2}.
pub fn eta(sigma: f64, delta: f64, ell: f64) -> f64 {
    (1.0 - sigma + delta) * ((1.0 - ell) / (1.0 + ell)).sqrt()
}

/// Largest σ′ with (ℓ + σ′c)/(1 − σ′c) ≤ σ − δ, c = ((1+ℓ)/(1−ℓ))^{1/2}.
pub fn sigma_prime(sigma: f64, delta: f64, ell: f64) -> f64 {
    let c = ((1.0 + ell) / (1.0 - ell)).sqrt();
    ((sigma - delta - ell) / (c * (1.0 + sigma - delta))).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub holds: bool,
    /// Smallest slack of the K(t) membership conditions over the samples.
    pub worst_margin: f64,
    pub falsified: Vec<(f64, Vec<f64>)>,
}

/// Monte-Carlo check of L(s(t), σ′) ⊂ Λ(K(t)) with s(t) = η(τ₀+φ̃(x₀)−t):
/// samples (s′, y) in the small cone, maps them back through Λ⁻¹ and tests
/// membership in K(t) = {t < t′ < T, |x − x₀| < σ(T − t′)}, T = τ₀ + φ̃(x₀).
#[allow(clippy::too_many_arguments)]
pub fn cone_image_check(
    map: &LorentzGraphMap,
    region: &InfluenceRegion,
    x0: &[f64],
    t: f64,
    sigma: f64,
    sigma_p: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<ConeCheck> {
    let n = map.dim();
    let ell = map.bundle.ell;
    if !(sigma > ell && sigma <= 1.0) {
        return Err(ForgeError::InvalidParams(format!("sigma must lie in (ell, 1] (got {sigma})")));
    }
    if norm(x0) > 0.25 * region.eps0 * (1.0 + 1e-12) {
        return Err(ForgeError::InvalidParams("x0 must satisfy |x0| <= eps0/4".into()));
    }
    let big_t = region.blowup_time(map, x0);
    let (s0, y0) = map.forward(big_t, x0)?;
    let s_top = eta * (big_t - t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut falsified = Vec::new();
    for _ in 0..samples {
        let sp = s0 + s_top * rng.gen_range(0.0f64..1.0).max(1e-12);
        let rad = sigma_p * (sp - s0) * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        let dir = random_direction(&mut rng, n);
        let mut y = [0.0; MAX_DIM];
        for a in 0..n {
            y[a] = y0[a] + rad * dir[a];
        }
        let (tp, x) = map.inverse(sp, &y[..n])?;
        let margin = (tp - t).min(big_t - tp).min(sigma * (big_t - tp) - dist(&x[..n], x0));
        worst = worst.min(margin);
        if margin <= 0.0 && falsified.len() < 16 {
            falsified.push((tp, x[..n].to_vec()));
        }
    }
    Ok(ConeCheck { holds: falsified.is_empty(), worst_margin: worst, falsified })
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Point {
    let mut d = [0.0; MAX_DIM];
    if n == 1 {
        d[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return d;
    }
    loop {
        for v in d.iter_mut().take(n) {
            *v = rng.gen_range(-1.0..1.0);
        }
        let r = norm(&d[..n]);
        if r > 1e-3 && r <= 1.0 {
            for v in d.iter_mut().take(n) {
                *v /= r;
            }
            return d;
        }
    }
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        let r = InfluenceRegion::new(0.0, 0.6).unwrap();
        assert_relative_eq!(r.tau0, 0.1, epsilon = 1e-15);
        assert_relative_eq!(r.eps0, 0.05, epsilon = 1e-15);
        assert_relative_eq!(eta(1.0, 0.1, 0.0), 0.1, epsilon = 1e-15);
        assert!(InfluenceRegion::new(0.0, 1.5).is_err());
    }

    #[test]
    fn cone_predicates() {
        assert!(in_backward_cone(1.0, &[0.0], 0.5, &[0.4]));
        assert!(!in_backward_cone(1.0, &[0.0], 0.5, &[0.6]));
        assert!(in_truncated_cone(&[0.0, 0.0], 1.0, 0.5, 0.2, &[0.5, 0.0]));
        assert!(!in_truncated_cone(&[0.0, 0.0], 1.0, 0.5, 0.6, &[0.0, 0.0]));
    }

    #[test]
    fn sigma_prime_satisfies_cone_condition() {
        for &(s, d, l) in &[(0.9, 0.05, 0.3), (1.0, 0.1, 0.0), (0.6, 0.05, 0.5)] {
            let sp = sigma_prime(s, d, l);
            let c = ((1.0 + l) / (1.0 - l)).sqrt();
            assert!((l + sp * c) / (1.0 - sp * c) <= s - d + 1e-14);
        }
    }
}
