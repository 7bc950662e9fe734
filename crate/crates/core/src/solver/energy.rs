//! The weighted functionals 𝒩, ℰ, 𝒦 and the Sobolev norm ℳ of w.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::AnsatzSlice;
use crate::ansatz::AnsatzStack;
use crate::model::Nonlinearity;

/// Functionals at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub step: usize,
    pub s: f64,
    /// 𝒩
    pub norm: f64,
    /// ℰ
    pub energy: f64,
    /// 𝒦₀, 𝒦₁, …, 𝒦_N
    pub k_parts: Vec<f64>,
    /// 𝒦 = Σ 𝒦_ℓ
    pub k_total: f64,
    /// ℳ
    pub sobolev: f64,
    /// 2ℰ + 𝒦 − 𝒩²
    pub coercivity_margin: f64,
    /// sup |G| with G = f′(V₀)Q^{1/2} − (1−g)∂_ss(Q^{1/2})
    pub g_sup: f64,
    pub max_w: f64,
}

/// Nonlinear part of the energy density:
/// 2Fₙ(V+w) − 2Fₙ(V) − 2fₙ(V)w − fₙ′(V₀)w².
pub fn potential_bracket(nl: &Nonlinearity, vj: f64, v0: f64, w: f64) -> f64 {
    let b = nl.truncation.unwrap_or(f64::INFINITY);
    if vj > 0.0 && vj.abs() + w.abs() < b {
        2.0 * nl.big_f_remainder(vj, w) + (nl.f_prime_raw(vj) - nl.f_prime_raw(v0)) * w * w
    } else {
        2.0 * (nl.big_f(vj + w) - nl.big_f(vj)) - 2.0 * nl.f(vj) * w - nl.f_prime(v0) * w * w
    }
}

/// fₙ(V+w) − fₙ(V), free of cancellation when |w| ≪ V.
pub fn force_difference(nl: &Nonlinearity, vj: f64, w: f64) -> f64 {
    let b = nl.truncation.unwrap_or(f64::INFINITY);
    if vj > 0.0 && vj.abs() + w.abs() < b {
        nl.f_remainder(vj, w) + nl.f_prime_raw(vj) * w
    } else {
        nl.f(vj + w) - nl.f(vj)
    }
}

/// Evaluates every functional of w at one step.
pub fn energy_row(
    stack: &AnsatzStack,
    nl: &Nonlinearity,
    slice: &AnsatzSlice,
    step: usize,
    w: &[f64],
    w_s: &[f64],
    w_ss: &[f64],
) -> EnergyRow {
    let grid = &stack.grid;
    let n = grid.dim;
    let p = stack.params.p;
    let lambda = stack.params.lambda;
    let s = slice.s;
    let pr = stack.profile();
    let f = &stack.fields;
    let grad_w: Vec<Vec<f64>> = (0..n).map(|a| grid.partial(w, a)).collect();
    let grad_ws: Vec<Vec<f64>> = (0..n).map(|a| grid.partial(w_s, a)).collect();
    let hess_w: Vec<Vec<f64>> = (0..n * n)
        .map(|ab| {
            let (a, b) = (ab / n, ab % n);
            (0..grid.len())
                .map(|x| if grid.is_interior(x) { grid.second_partial_at(w, x, a, b) } else { 0.0 })
                .collect()
        })
        .collect();
    // ∂_s∂_ℓ w and ∇∂_ℓ w for 𝒦_ℓ
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let dens: Vec<[f64; 8]> = nodes
        .par_iter()
        .map(|&x| {
            let weight = grid.trapezoid_weight(x);
            let g = f.g[x];
            let q = pr.q(s, x);
            let q_s = pr.q_s(s, x);
            let pt = grid.point(x);
            let q_grad = pr.q_grad(s, x, &pt);
            let sq = q.sqrt();
            let t1 = sq * w_s[x] - 0.5 * q_s / sq * w[x];
            let mut t2 = 0.0;
            let mut gw2 = 0.0;
            let mut gws2 = 0.0;
            for a in 0..n {
                let c = grad_w[a][x] - 0.5 * q_grad[a] / q * w[x];
                t2 += q * c * c;
                gw2 += grad_w[a][x] * grad_w[a][x];
                gws2 += grad_ws[a][x] * grad_ws[a][x];
            }
            let t3 = lambda / 16.0 / (s * s) * q * w[x] * w[x];
            let pot = q * potential_bracket(nl, slice.vj[x], slice.v0[x], w[x]);
            let mut hess2 = 0.0;
            for ab in 0..n * n {
                hess2 += hess_w[ab][x] * hess_w[ab][x];
            }
            let k0 = (1.0 - g) * w_ss[x] * w_ss[x] + gws2;
            let m2 = w[x] * w[x] + gw2 + hess2 + w_s[x] * w_s[x] + gws2 + w_ss[x] * w_ss[x];
            [
                weight * (t1 * t1 + t2 + t3),
                weight * ((1.0 - g) * t1 * t1 + t2 + t3 - pot),
                weight * k0,
                weight * m2,
                weight * (1.0 - g),
                weight * hess2,
                weight,
                0.0,
            ]
        })
        .collect();
    let sum = |k: usize| dens.iter().map(|d| d[k]).sum::<f64>();
    let norm = sum(0).max(0.0).sqrt();
    let energy = sum(1);
    let mut k_parts = vec![sum(2)];
    for l in 0..n {
        // (1−g)(∂_s∂_ℓw)² + |∇∂_ℓw|²
        let kl: f64 = (0..grid.len())
            .map(|x| {
                let mut hw = 0.0;
                for b in 0..n {
                    let v = hess_w[l * n + b][x];
                    hw += v * v;
                }
                grid.trapezoid_weight(x) * ((1.0 - f.g[x]) * grad_ws[l][x] * grad_ws[l][x] + hw)
            })
            .sum();
        k_parts.push(kl);
    }
    let k_total: f64 = k_parts.iter().sum();
    let sobolev = sum(3).max(0.0).sqrt();
    let g_sup = (0..grid.len())
        .map(|x| {
            let b = 1.0 - f.chi_x[x] + slice.v0[x];
            let v1 = pr.ds(1, s, x);
            let v2 = pr.ds(2, s, x);
            let h = 0.5 * (p + 1.0);
            let d2 = h * ((h - 1.0) * b.powf(h - 2.0) * v1 * v1 + b.powf(h - 1.0) * v2);
            (nl.f_prime_raw(slice.v0[x]) * b.powf(h) - (1.0 - f.g[x]) * d2).abs()
        })
        .fold(0.0, f64::max);
    EnergyRow {
        step,
        s,
        norm,
        energy,
        k_total,
        k_parts,
        sobolev,
        coercivity_margin: 2.0 * energy + k_total - norm * norm,
        g_sup,
        max_w: w.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}
