//! V_J, ∂_sV_J and ℰ_J at arbitrary s by cubic Lagrange interpolation of the
//! stored corrections in σ = ln s; V₀ itself is evaluated in closed form.

use rayon::prelude::*;

use crate::ansatz::AnsatzStack;
use crate::error::{ForgeError, Result};

/// Ansatz data on one s-slice.
#[derive(Debug, Clone)]
pub struct AnsatzSlice {
    pub s: f64,
    pub v0: Vec<f64>,
    pub vj: Vec<f64>,
    pub vj_s: Vec<f64>,
    pub residual: Vec<f64>,
}

pub struct AnsatzSampler<'a> {
    pub stack: &'a AnsatzStack,
}

impl<'a> AnsatzSampler<'a> {
    pub fn new(stack: &'a AnsatzStack) -> Self {
        Self { stack }
    }

    /// Range of s where the deepest level is defined.
    pub fn range(&self) -> (f64, f64) {
        (self.stack.sgrid.s_min(), self.stack.sgrid.s(self.stack.top()))
    }

    /// Four node indices and their Lagrange weights for position s.
    fn stencil(&self, s: f64) -> Result<([usize; 4], [f64; 4])> {
        let (lo, hi) = self.range();
        if !(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)) {
            return Err(ForgeError::Domain(format!("s = {s} outside the ansatz range [{lo}, {hi}]")));
        }
        let top = self.stack.top();
        let pos = self.stack.sgrid.position(s).clamp(0.0, top as f64);
        let i0 = (pos.floor() as usize).saturating_sub(1).min(top.saturating_sub(3));
        let idx = [i0, i0 + 1, i0 + 2, i0 + 3];
        let t = pos - i0 as f64;
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (t - b as f64) / (a as f64 - b as f64);
                }
            }
        }
        Ok((idx, w))
    }

    pub fn slice(&self, s: f64) -> Result<AnsatzSlice> {
        let (idx, wt) = self.stencil(s)?;
        let st = self.stack;
        let pr = st.profile();
        let nx = st.grid.len();
        let res = &st.last().residual;
        let interp =
            |f: &crate::grid::SpaceTimeField, x: usize| -> f64 { (0..4).map(|a| wt[a] * f.at(idx[a], x)).sum() };
        let rows: Vec<(f64, f64, f64, f64)> = (0..nx)
            .into_par_iter()
            .map(|x| {
                let v0 = pr.v0(s, x);
                let vj = v0 + interp(&st.correction, x);
                let vj_s = pr.ds(1, s, x) + interp(&st.correction_s, x);
                (v0, vj, vj_s, interp(res, x))
            })
            .collect();
        let mut out = AnsatzSlice {
            s,
            v0: Vec::with_capacity(nx),
            vj: Vec::with_capacity(nx),
            vj_s: Vec::with_capacity(nx),
            residual: Vec::with_capacity(nx),
        };
        for (a, b, c, d) in rows {
            out.v0.push(a);
            out.vj.push(b);
            out.vj_s.push(c);
            out.residual.push(d);
        }
        Ok(out)
    }
}
