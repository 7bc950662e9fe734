//! Checks of the energy inequalities on a finished run.

use serde::{Deserialize, Serialize};

use super::energy::EnergyRow;
use super::run::Checkpoint;
use crate::ansatz::AnsatzStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    /// Rows with 𝒩, ℳ ≤ ω.
    pub audited: usize,
    pub coercivity_violations: usize,
    pub min_margin: f64,
    /// Smallest C with Δℰ/Δs ≤ Cs^{−1+λ}𝒩 + (λ/4)s^{−1}𝒩² + Cs^{−1/2}𝒩² + Cs^{−1}(𝒩^{p+1}+ℳ^{p+1}).
    pub increment_constant: f64,
    /// Smallest C with ℳ² ≤ C(𝒩² + 𝒦).
    pub equivalence_constant: f64,
}

impl EnergyAudit {
    pub fn coercive(&self) -> bool {
        self.audited > 0 && self.coercivity_violations == 0
    }
}

pub fn energy_step_audit(rows: &[EnergyRow], omega: f64, lambda: f64, p: f64) -> EnergyAudit {
    let small = |r: &EnergyRow| r.norm <= omega && r.sobolev <= omega;
    let mut audited = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut equiv: f64 = 0.0;
    for r in rows.iter().filter(|r| small(r)) {
        audited += 1;
        min_margin = min_margin.min(r.coercivity_margin);
        if r.coercivity_margin < 0.0 {
            violations += 1;
        }
        let den = r.norm * r.norm + r.k_total;
        if den > 0.0 {
            equiv = equiv.max(r.sobolev * r.sobolev / den);
        }
    }
    let mut incr: f64 = 0.0;
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !(small(a) && small(b)) || b.s <= a.s {
            continue;
        }
        let s = 0.5 * (a.s + b.s);
        let nn = 0.5 * (a.norm + b.norm);
        let mm = 0.5 * (a.sobolev + b.sobolev);
        let growth = (b.energy - a.energy) / (b.s - a.s) - 0.25 * lambda / s * nn * nn;
        let basis = s.powf(-1.0 + lambda) * nn + s.powf(-0.5) * nn * nn + (nn.powf(p + 1.0) + mm.powf(p + 1.0)) / s;
        if growth > 0.0 && basis > 0.0 {
            incr = incr.max(growth / basis);
        }
    }
    EnergyAudit {
        audited,
        coercivity_violations: violations,
        min_margin: if audited > 0 { min_margin } else { f64::NAN },
        increment_constant: incr,
        equivalence_constant: equiv,
    }
}

/// Pointwise lower bound |∂_sv|² − |∇v|² ≥ ¼|∂_sV₀|² − C − g² with
/// g² = |∂_sw|² + 2|∇w|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub s: f64,
    /// Smallest C making the bound hold on this slice.
    pub constant: f64,
    /// Discrete H¹ norm of g.
    pub g_h1: f64,
    pub min_margin_core: f64,
}

pub fn lower_bound_check(trajectory: &[Checkpoint], stack: &AnsatzStack) -> Vec<LowerBoundRow> {
    let grid = &stack.grid;
    let pr = stack.profile();
    let n = grid.dim;
    trajectory
        .iter()
        .map(|cp| {
            let gv: Vec<Vec<f64>> = (0..n).map(|a| grid.partial(&cp.v, a)).collect();
            let gw: Vec<Vec<f64>> = (0..n).map(|a| grid.partial(&cp.w, a)).collect();
            let mut g = vec![0.0; grid.len()];
            let mut constant: f64 = 0.0;
            let mut core = f64::INFINITY;
            for x in 0..grid.len() {
                if !grid.is_interior(x) {
                    continue;
                }
                let mut grad_v2 = 0.0;
                let mut grad_w2 = 0.0;
                for a in 0..n {
                    grad_v2 += gv[a][x] * gv[a][x];
                    grad_w2 += gw[a][x] * gw[a][x];
                }
                let g2 = cp.w_s[x] * cp.w_s[x] + 2.0 * grad_w2;
                g[x] = g2.sqrt();
                let v0s = pr.ds(1, cp.s, x);
                let lhs = cp.v_s[x] * cp.v_s[x] - grad_v2;
                let margin = lhs - 0.25 * v0s * v0s;
                constant = constant.max(-(margin + g2));
                if stack.fields.a[x] == 0.0 {
                    core = core.min(margin);
                }
            }
            let gg: Vec<Vec<f64>> = (0..n).map(|a| grid.partial(&g, a)).collect();
            let g_h1 = grid.integrate(|x| g[x] * g[x] + (0..n).map(|a| gg[a][x] * gg[a][x]).sum::<f64>()).sqrt();
            LowerBoundRow { s: cp.s, constant, g_h1, min_margin_core: core }
        })
        .collect()
}

/// Fit of ℳ² against s − S_n over the first resolved decade
/// [Δs, 10Δs] of the run.
pub fn growth_fit(rows: &[EnergyRow], s_start: f64, ds: f64) -> crate::error::Result<crate::fit::ExponentFit> {
    let (lo, hi) = (ds * (1.0 - 1e-9), 10.0 * ds * (1.0 + 1e-9));
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().map(|r| (r.s - s_start, r.sobolev * r.sobolev)).filter(|(x, _)| *x >= lo && *x <= hi).unzip();
    crate::fit::fit_exponent(&xs, &ys)
}
