//! The regularized run v = V_J + w from w(S_n) = ∂_sw(S_n) = 0.

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use super::energy::{energy_row, force_difference, EnergyRow};
use super::sampler::AnsatzSampler;
use super::scheme::{Coefficients, Forcing, SchemeState, WaveScheme};
use crate::ansatz::AnsatzStack;
use crate::error::{ForgeError, Result};
use crate::model::Nonlinearity;

/// Stored state at one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub s: f64,
    pub w: Vec<f64>,
    pub w_s: Vec<f64>,
    pub v: Vec<f64>,
    pub v_s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub config: SolverConfig,
    pub s_start: f64,
    pub s_end: f64,
    pub ds: f64,
    pub steps: usize,
    /// B_n
    pub truncation: f64,
    pub energy: Vec<EnergyRow>,
    pub checkpoints: Vec<Checkpoint>,
    /// Largest |w| seen on the two outer layers relative to max |w|.
    pub boundary_activity: f64,
}

/// fₙ(V_J+w) − fₙ(V_J) + ℰ_J.
struct WForcing<'a> {
    sampler: AnsatzSampler<'a>,
    nl: Nonlinearity,
    linear: bool,
}

impl Forcing for WForcing<'_> {
    fn rhs(&self, s: f64, w: &[f64], out: &mut [f64]) {
        let sl = self.sampler.slice(s).expect("s inside the ansatz range");
        for x in 0..out.len() {
            let nonlinear = if self.linear { 0.0 } else { force_difference(&self.nl, sl.vj[x], w[x]) };
            out[x] = nonlinear + sl.residual[x];
        }
    }
}

/// sup |V_J| over [S_n, s_J], including the interpolated slice at S_n.
pub fn truncation_level(stack: &AnsatzStack, s_start: f64) -> Result<f64> {
    let sampler = AnsatzSampler::new(stack);
    let first = sampler.slice(s_start)?;
    let mut b = first.vj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..=stack.top() {
        if stack.sgrid.s(i) >= s_start {
            for x in 0..stack.grid.len() {
                b = b.max(stack.vj(i, x).abs());
            }
        }
    }
    Ok(b)
}

fn outer_layers(stack: &AnsatzStack) -> Vec<usize> {
    (0..stack.grid.len()).filter(|&x| stack.grid.boundary_depth(x) <= 1).collect()
}

pub fn solve(cfg: &SolverConfig, stack: &AnsatzStack) -> Result<SolveOutput> {
    cfg.validate()?;
    let sampler = AnsatzSampler::new(stack);
    let (lo, hi) = sampler.range();
    let s0 = cfg.s_start();
    let s_end = cfg.s_end.unwrap_or(hi);
    if s0 < lo || s_end > hi * (1.0 + 1e-12) {
        return Err(ForgeError::Config(format!("run [{s0}, {s_end}] is not covered by the ansatz range [{lo}, {hi}]")));
    }
    let b_n = match cfg.truncation {
        Some(b) => b,
        None => truncation_level(stack, s0)?,
    };
    if b_n < 1.0 {
        return Err(ForgeError::Config(format!("truncation level B_n = {b_n} is below 1; increase n")));
    }
    let nl = Nonlinearity::truncated(stack.params.p, b_n)?;
    let coeffs = Coefficients::from_fields(&stack.fields);
    let cap = coeffs.max_step(&stack.grid, cfg.cfl).min(cfg.step_fraction * s0);
    let steps = ((s_end - s0) / cap).ceil().max(1.0) as usize;
    let ds = (s_end - s0) / steps as f64;
    let scheme = WaveScheme::new(&stack.grid, &coeffs, ds, cfg.cfl)?;
    let forcing = WForcing { sampler: AnsatzSampler::new(stack), nl, linear: cfg.linear };

    let nx = stack.grid.len();
    let mut st = scheme.start(s0, vec![0.0; nx], vec![0.0; nx], &forcing);
    let outer = outer_layers(stack);
    let mut targets: Vec<usize> =
        cfg.checkpoints.iter().filter(|&&c| c >= s0 && c <= s_end).map(|&c| ((c - s0) / ds).round() as usize).collect();
    targets.sort_unstable();
    targets.dedup();

    let mut energy = Vec::new();
    let mut checkpoints = Vec::new();
    let mut activity: f64 = 0.0;
    loop {
        if !st.is_finite() {
            return Err(ForgeError::Solver { step: st.step, s: st.s, message: "non-finite value".into() });
        }
        let max_w = st.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_w > 0.0 {
            let edge = outer.iter().fold(0.0f64, |m, &x| m.max(st.w[x].abs()));
            let rel = edge / max_w;
            activity = activity.max(rel);
            if rel > cfg.boundary_tolerance {
                return Err(ForgeError::Solver {
                    step: st.step,
                    s: st.s,
                    message: format!("boundary activity {rel:e} exceeds {:e}", cfg.boundary_tolerance),
                });
            }
        }
        let last = st.step == steps;
        let want_energy = st.step % cfg.energy_every == 0 || last;
        let want_checkpoint = targets.binary_search(&st.step).is_ok()
            || (cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0);
        if want_energy || want_checkpoint {
            // guard against drift of the accumulated s
            let s = if last { s_end } else { s0 + st.step as f64 * ds };
            let sl = sampler.slice(s.min(hi))?;
            if want_energy {
                energy.push(energy_row(stack, &nl, &sl, st.step, &st.w, &st.w_s, &st.w_ss));
            }
            if want_checkpoint {
                checkpoints.push(checkpoint(&st, s, &sl.vj, &sl.vj_s));
            }
        }
        if last {
            break;
        }
        advance(&scheme, &mut st, &forcing, s0, ds);
    }
    Ok(SolveOutput {
        config: cfg.clone(),
        s_start: s0,
        s_end,
        ds,
        steps,
        truncation: b_n,
        energy,
        checkpoints,
        boundary_activity: activity,
    })
}

fn advance<F: Forcing>(scheme: &WaveScheme, st: &mut SchemeState, forcing: &F, s0: f64, ds: f64) {
    scheme.advance(st, forcing);
    st.s = s0 + st.step as f64 * ds;
}

fn checkpoint(st: &SchemeState, s: f64, vj: &[f64], vj_s: &[f64]) -> Checkpoint {
    Checkpoint {
        step: st.step,
        s,
        w: st.w.clone(),
        w_s: st.w_s.clone(),
        v: vj.iter().zip(&st.w).map(|(a, b)| a + b).collect(),
        v_s: vj_s.iter().zip(&st.w_s).map(|(a, b)| a + b).collect(),
    }
}
