//! Empirical constants for the four Taylor-type inequalities of the power
//! nonlinearity, estimated by random sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nonlinearity::{binomial_tail, Nonlinearity};
use crate::error::{ForgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorSampling {
    pub trials: usize,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub seed: u64,
}

impl Default for TaylorSampling {
    fn default() -> Self {
        Self { trials: 100_000, u_range: (0.1, 10.0), v_range: (1e-3, 1e2), seed: 7 }
    }
}

/// Max of LHS/RHS over the samples, per inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorConstants {
    /// |F(u+v)−F(u)−F′(u)v−½F″(u)v²| against |v|^{p+1}+u^{p−p̄}|v|^{p̄+1}
    pub second_order_primitive: f64,
    /// |(f(u+v)−f(u)−f′(u)v)v| against the same right side
    pub first_order_times_v: f64,
    /// |f′(u+v)−f′(u)| against u^{−1}|v|^p+u^{p−2}|v|
    pub derivative_increment: f64,
    /// |f(u+v)−f(u)−f′(u)v−½f″(u)v²| against u^{−1}|v|^{p+1}+u^{p−p̄−1}|v|^{p̄+1}
    pub second_order: f64,
}

impl TaylorConstants {
    pub fn as_array(&self) -> [f64; 4] {
        [self.second_order_primitive, self.first_order_times_v, self.derivative_increment, self.second_order]
    }

    fn max(self, o: Self) -> Self {
        Self {
            second_order_primitive: self.second_order_primitive.max(o.second_order_primitive),
            first_order_times_v: self.first_order_times_v.max(o.first_order_times_v),
            derivative_increment: self.derivative_increment.max(o.derivative_increment),
            second_order: self.second_order.max(o.second_order),
        }
    }

    const ZERO: Self =
        Self { second_order_primitive: 0.0, first_order_times_v: 0.0, derivative_increment: 0.0, second_order: 0.0 };
}

/// The four (LHS, RHS) pairs at one point; u > 0, untruncated nonlinearity.
pub fn taylor_sides(p: f64, u: f64, v: f64) -> [(f64, f64); 4] {
    let nl = Nonlinearity::new(p);
    let pbar = nl.pbar();
    let av = v.abs();
    let eps = v / u;
    let lhs0 = nl.big_f_remainder(u, v).abs();
    let lhs1 = (nl.f_remainder(u, v) * v).abs();
    let lhs10 = (nl.f_prime_raw(u + v) - nl.f_prime_raw(u)).abs();
    let lhs2 = (u.powf(p) * binomial_tail(p, eps, 3)).abs();
    let rhs01 = av.powf(p + 1.0) + u.powf(p - pbar) * av.powf(pbar + 1.0);
    let rhs10 = av.powf(p) / u + u.powf(p - 2.0) * av;
    let rhs2 = av.powf(p + 1.0) / u + u.powf(p - pbar - 1.0) * av.powf(pbar + 1.0);
    [(lhs0, rhs01), (lhs1, rhs01), (lhs10, rhs10), (lhs2, rhs2)]
}

/// LHS/RHS for each inequality; 0 when both sides vanish.
pub fn taylor_ratios(p: f64, u: f64, v: f64) -> [f64; 4] {
    taylor_sides(p, u, v).map(|(l, r)| {
        if r == 0.0 {
            if l == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            l / r
        }
    })
}

/// Samples (u, v): u log-uniform in `u_range`, |v| log-uniform in `v_range`
/// with a random sign. The first n samples of a larger run coincide with an
/// n-trial run of the same seed.
pub fn draw_samples(cfg: &TaylorSampling) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (ul, uh) = (cfg.u_range.0.ln(), cfg.u_range.1.ln());
    let (vl, vh) = (cfg.v_range.0.ln(), cfg.v_range.1.ln());
    (0..cfg.trials)
        .map(|_| {
            let u = rng.gen_range(ul..=uh).exp();
            let mag = rng.gen_range(vl..=vh).exp();
            let v = if rng.gen::<bool>() { mag } else { -mag };
            (u, v)
        })
        .collect()
}

pub fn sample_taylor_bounds(nl: &Nonlinearity, cfg: &TaylorSampling) -> Result<TaylorConstants> {
    if cfg.trials < 1000 {
        return Err(ForgeError::InvalidParams(format!(
            "taylor sampling needs at least 1000 trials (got {})",
            cfg.trials
        )));
    }
    let valid_range = |r: (f64, f64)| r.0 > 0.0 && r.1 >= r.0 && r.1.is_finite();
    if !valid_range(cfg.u_range) || !valid_range(cfg.v_range) {
        return Err(ForgeError::InvalidParams("taylor sampling ranges must be positive and ordered".into()));
    }
    let p = nl.p;
    let samples = draw_samples(cfg);
    // max is exact and order independent, so the parallel reduction is deterministic
    let out = samples
        .par_iter()
        .map(|&(u, v)| {
            let r = taylor_ratios(p, u, v);
            TaylorConstants {
                second_order_primitive: r[0],
                first_order_times_v: r[1],
                derivative_increment: r[2],
                second_order: r[3],
            }
        })
        .reduce(|| TaylorConstants::ZERO, TaylorConstants::max);
    Ok(out)
}
