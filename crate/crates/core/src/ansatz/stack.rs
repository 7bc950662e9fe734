//! The ansatz hierarchy V_J = V₀ + Σ χ_j v_j and its residuals ℰ_j.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::level::{running_ratio, solve_column};
use super::profile::{Profile, SurfaceFields};
use crate::error::{ForgeError, Result};
use crate::geometry::SurfaceBundle;
use crate::grid::{LogGrid, SpaceTimeField, SpatialGrid};
use crate::model::cutoff::chi;
use crate::model::{ModelParams, Nonlinearity};

/// Knobs of the level construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzConfig {
    /// Number of correction levels; defaults to the depth J of the model.
    pub levels: Option<usize>,
    /// The (r_j, s_j) search accepts a pair once both envelopes hold with
    /// this factor to spare.
    pub margin: f64,
    /// Smallest admissible r_j and s_j.
    pub floor: f64,
    /// Finite-difference step for κ and Δψ.
    pub fd_step: f64,
    pub sweep: SweepOrder,
}

/// Order in which halvings of (r_j, s_j) are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Shrink r_j alone first; halve s_j only when no r_j above the floor works.
    RadiusFirst,
    /// Try pairs by total number of halvings, fewest s-halvings first.
    Diagonal,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self { levels: None, margin: 0.95, floor: 1e-6, fd_step: 1e-3, sweep: SweepOrder::Diagonal }
    }
}

/// Level j of the hierarchy. Fields are NaN on s-nodes where they are not
/// defined (above s_{j−1} for v_j, above s_j for ℰ_j).
#[derive(Debug, Clone)]
pub struct Level {
    pub j: usize,
    pub r: f64,
    pub s_top: f64,
    /// Index of s_j on the s-grid.
    pub top: usize,
    /// χ_j(x) = χ(A(x)/r_j); all zeros for j = 0.
    pub chi: Vec<f64>,
    pub v: SpaceTimeField,
    pub v_s: SpaceTimeField,
    pub v_ss: SpaceTimeField,
    pub residual: SpaceTimeField,
}

/// Everything downstream needs from the ansatz, sampled on (s-grid) × (x-grid).
#[derive(Debug, Clone)]
pub struct AnsatzStack {
    pub params: ModelParams,
    pub bundle: SurfaceBundle,
    pub grid: SpatialGrid,
    pub sgrid: LogGrid,
    pub fields: SurfaceFields,
    pub levels: Vec<Level>,
    /// D_J = V_J − V₀ and ∂_sD_J for the deepest level built.
    pub correction: SpaceTimeField,
    pub correction_s: SpaceTimeField,
    pub correction_ss: SpaceTimeField,
}

impl AnsatzStack {
    pub fn profile(&self) -> Profile<'_> {
        Profile::new(&self.fields, self.params.p)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn last(&self) -> &Level {
        self.levels.last().expect("level 0 always present")
    }

    /// Index of s_J on the s-grid.
    pub fn top(&self) -> usize {
        self.last().top
    }

    pub fn v0(&self, i: usize, x: usize) -> f64 {
        self.profile().v0(self.sgrid.s(i), x)
    }

    /// V_J at node (i, x), i ≤ top.
    pub fn vj(&self, i: usize, x: usize) -> f64 {
        self.v0(i, x) + self.correction.at(i, x)
    }

    pub fn vj_s(&self, i: usize, x: usize) -> f64 {
        self.profile().ds(1, self.sgrid.s(i), x) + self.correction_s.at(i, x)
    }

    pub fn vj_ss(&self, i: usize, x: usize) -> f64 {
        self.profile().ds(2, self.sgrid.s(i), x) + self.correction_ss.at(i, x)
    }

    pub fn residual(&self, i: usize, x: usize) -> f64 {
        self.last().residual.at(i, x)
    }

    /// Builds levels 0..=J on the given grids.
    pub fn build(
        params: &ModelParams,
        bundle: &SurfaceBundle,
        grid: &SpatialGrid,
        sgrid: &LogGrid,
        cfg: &AnsatzConfig,
    ) -> Result<Self> {
        if grid.dim != params.dim {
            return Err(ForgeError::Grid(format!(
                "spatial grid has dimension {} but the model has N = {}",
                grid.dim, params.dim
            )));
        }
        let fields = SurfaceFields::build(params, bundle, grid, cfg.fd_step)?;
        let ns = sgrid.len();
        let nx = grid.len();
        let level0 = {
            let profile = Profile::new(&fields, params.p);
            let mut residual = SpaceTimeField::zeros(ns, nx);
            residual.data.par_chunks_mut(nx).enumerate().for_each(|(i, slab)| {
                let s = sgrid.s(i);
                for (x, out) in slab.iter_mut().enumerate() {
                    *out = profile.e0(s, x);
                }
            });
            Level {
                j: 0,
                r: 1.0,
                s_top: sgrid.s_max,
                top: ns - 1,
                chi: vec![0.0; nx],
                v: SpaceTimeField::zeros(ns, nx),
                v_s: SpaceTimeField::zeros(ns, nx),
                v_ss: SpaceTimeField::zeros(ns, nx),
                residual,
            }
        };
        let mut stack = Self {
            params: params.clone(),
            bundle: bundle.clone(),
            grid: grid.clone(),
            sgrid: sgrid.clone(),
            fields,
            levels: vec![level0],
            correction: SpaceTimeField::zeros(ns, nx),
            correction_s: SpaceTimeField::zeros(ns, nx),
            correction_ss: SpaceTimeField::zeros(ns, nx),
        };
        let depth = cfg.levels.unwrap_or(params.depth);
        let mut cutoff_residual = SpaceTimeField::zeros(ns, nx);
        for j in 1..=depth {
            stack.build_level(j, cfg, &mut cutoff_residual).map_err(|e| match e {
                ForgeError::Ansatz { .. } => e,
                other => ForgeError::Ansatz { level: j, message: other.to_string() },
            })?;
        }
        Ok(stack)
    }

    fn build_level(&mut self, j: usize, cfg: &AnsatzConfig, cutoff_residual: &mut SpaceTimeField) -> Result<()> {
        let p = self.params.p;
        let ns = self.sgrid.len();
        let nx = self.grid.len();
        let prev = &self.levels[j - 1];
        let top_prev = prev.top;
        let r_prev = prev.r;
        let profile = Profile::new(&self.fields, p);
        let sgrid = &self.sgrid;
        let nonlin = Nonlinearity::new(p);

        // v_j column by column
        let columns: Vec<_> = (0..nx)
            .into_par_iter()
            .map(|x| {
                let n = top_prev + 1;
                let mut v0 = Vec::with_capacity(n);
                let mut v1 = Vec::with_capacity(n);
                let mut v2 = Vec::with_capacity(n);
                let mut e = Vec::with_capacity(n);
                for i in 0..n {
                    let s = sgrid.s(i);
                    v0.push(profile.ds(0, s, x));
                    v1.push(profile.ds(1, s, x));
                    v2.push(profile.ds(2, s, x));
                    e.push(prev.residual.at(i, x));
                }
                let sol = solve_column(sgrid, p, self.fields.g[x], &v0, &v1, &v2, &e);
                let quarter = 0.25 * 0.5f64.powi(j as i32);
                let env: Vec<f64> = v0
                    .iter()
                    .map(|&v| {
                        let a = quarter * v;
                        let b = 0.5f64.powi(j as i32) * (1.0 + v).powf(-0.25 * (p - 1.0)) * v;
                        a.min(b)
                    })
                    .collect();
                let ratio = running_ratio(&sol.v, &env);
                (sol, ratio)
            })
            .collect();

        // (r_j, s_j): halve r and s along anti-diagonals, fewest s-halvings first
        let ppo = sgrid.per_octave;
        let max_r_halvings = ((r_prev / cfg.floor).log2().floor().max(0.0)) as usize;
        let floor_index = sgrid.index_at_or_below(cfg.floor.max(sgrid.s_min())).unwrap_or(0);
        let s_floor_index = if sgrid.s_min() >= cfg.floor { 0 } else { floor_index };
        let max_s_halvings = (top_prev.saturating_sub(s_floor_index)) / ppo;
        let a_values = &self.fields.a;
        let worst_at = |a: usize, b: usize| {
            let r = r_prev * 0.5f64.powi(a as i32);
            let top = top_prev - b * ppo;
            let w = (0..nx).into_par_iter().map(|x| chi(a_values[x] / r) * columns[x].1[top]).reduce(|| 0.0, f64::max);
            (w, r, top)
        };
        let candidates: Vec<(usize, usize)> = match cfg.sweep {
            SweepOrder::RadiusFirst => {
                (0..=max_s_halvings).flat_map(|b| (0..=max_r_halvings).map(move |a| (a, b))).collect()
            }
            SweepOrder::Diagonal => (0..=(max_r_halvings + max_s_halvings))
                .flat_map(|m| (0..=m.min(max_s_halvings)).map(move |b| (m - b, b)))
                .filter(|&(a, _)| a <= max_r_halvings)
                .collect(),
        };
        let mut chosen = None;
        for (a, b) in candidates {
            let (w, r, top) = worst_at(a, b);
            if w <= cfg.margin {
                chosen = Some((r, top));
                break;
            }
        }
        let (r, top) = chosen.ok_or_else(|| ForgeError::Ansatz {
            level: j,
            message: format!(
                "no (r_j, s_j) above the floor {} satisfies the envelopes; refine the grid or raise k",
                cfg.floor
            ),
        })?;
        let s_top = sgrid.s(top);
        let chi_j: Vec<f64> = a_values.iter().map(|a| chi(a / r)).collect();

        let mut v = SpaceTimeField { ns, nx, data: vec![f64::NAN; ns * nx] };
        let mut v_s = v.clone();
        let mut v_ss = v.clone();
        for (x, (sol, _)) in columns.iter().enumerate() {
            for i in 0..=top_prev {
                let k = i * nx + x;
                v.data[k] = sol.v[i];
                v_s.data[k] = sol.v_s[i];
                v_ss.data[k] = sol.v_ss[i];
            }
        }

        // running sums over levels
        for i in 0..=top {
            for x in 0..nx {
                let k = i * nx + x;
                let c = chi_j[x];
                if c != 0.0 {
                    self.correction.data[k] += c * v.data[k];
                    self.correction_s.data[k] += c * v_s.data[k];
                    self.correction_ss.data[k] += c * v_ss.data[k];
                    cutoff_residual.data[k] += c * prev.residual.data[k];
                }
            }
        }
        for i in top + 1..ns {
            for x in 0..nx {
                let k = i * nx + x;
                self.correction.data[k] = f64::NAN;
                self.correction_s.data[k] = f64::NAN;
                self.correction_ss.data[k] = f64::NAN;
            }
        }

        // ℰ_j = ℰ₀ + L_x D_j + [f(V₀+D_j) − f(V₀) − f′(V₀)D_j] − Σ χ_l ℰ_{l−1}
        let grid = &self.grid;
        let fields = &self.fields;
        let e0 = &self.levels[0].residual;
        let correction = &self.correction;
        let correction_s = &self.correction_s;
        let cutoff_residual = &*cutoff_residual;
        let mut residual = SpaceTimeField { ns, nx, data: vec![f64::NAN; ns * nx] };
        residual.data[..(top + 1) * nx].par_chunks_mut(nx).enumerate().for_each(|(i, slab)| {
            let s = sgrid.s(i);
            let d = correction.slice(i);
            let ds = correction_s.slice(i);
            for x in 0..nx {
                let mut lx = 0.0;
                if grid.is_interior(x) {
                    lx = grid.laplacian_at(d, x) + fields.lap_psi[x] * ds[x];
                    for a in 0..grid.dim {
                        lx += 2.0 * fields.grad_psi[x][a] * grid.partial_at(ds, x, a);
                    }
                }
                let v0 = profile.v0(s, x);
                slab[x] = e0.at(i, x) + lx + nonlin.f_remainder(v0, d[x]) - cutoff_residual.at(i, x);
            }
        });

        self.levels.push(Level { j, r, s_top, top, chi: chi_j, v, v_s, v_ss, residual });
        Ok(())
    }

    /// Direct discrete evaluation of the defining operator
    /// −(1−g)∂_ssV_j + 2∇ψ·∇∂_sV_j + (Δψ)∂_sV_j + ΔV_j + f(V_j) on slice i,
    /// with ∂_s, ∂_ss from log-grid differences of V_j and all spatial
    /// derivatives by grid differences. Boundary nodes get NaN.
    pub fn discrete_residual_slice(&self, i: usize) -> Vec<f64> {
        let nx = self.grid.len();
        let top = self.top();
        let nonlin = Nonlinearity::new(self.params.p);
        let lo = i.saturating_sub(2).min(top.saturating_sub(4));
        let hi = (lo + 4).min(top);
        let nodes: Vec<usize> = (lo..=hi).collect();
        let mut vj_slices: Vec<Vec<f64>> = Vec::new();
        for &k in &nodes {
            vj_slices.push((0..nx).map(|x| self.vj(k, x)).collect());
        }
        let sub = LogGrid { s_max: self.sgrid.s(hi), per_octave: self.sgrid.per_octave, octaves_steps: hi - lo };
        let local = i - lo;
        let mut vs = vec![0.0; nx];
        let mut vss = vec![0.0; nx];
        for x in 0..nx {
            let col: Vec<f64> = vj_slices.iter().map(|sl| sl[x]).collect();
            let (a, b) = sub.s_derivatives(&col);
            vs[x] = a[local];
            vss[x] = b[local];
        }
        let vj = &vj_slices[local];
        (0..nx)
            .map(|x| {
                if !self.grid.is_interior(x) {
                    return f64::NAN;
                }
                let f = &self.fields;
                let mut mixed = 0.0;
                for a in 0..self.grid.dim {
                    mixed += f.grad_psi[x][a] * self.grid.partial_at(&vs, x, a);
                }
                -(1.0 - f.g[x]) * vss[x]
                    + 2.0 * mixed
                    + f.lap_psi[x] * vs[x]
                    + self.grid.laplacian_at(vj, x)
                    + nonlin.f(vj[x])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bundle, Hypersurface, LocalizeConfig};

    fn flat_stack(n: usize, half_width: f64, s_min: f64, ppo: usize, levels: Option<usize>) -> AnsatzStack {
        let params = ModelParams::derive(1, 3.0).unwrap();
        let (bundle, _) = build_bundle(Hypersurface::Zero { dim: 1 }, &params, &LocalizeConfig::default(), 16).unwrap();
        let grid = SpatialGrid::new(1, n, half_width).unwrap();
        let sgrid = LogGrid::new(s_min, 1.0, ppo).unwrap();
        let cfg = AnsatzConfig { levels, ..Default::default() };
        AnsatzStack::build(&params, &bundle, &grid, &sgrid, &cfg).unwrap()
    }

    fn coarse() -> AnsatzStack {
        flat_stack(401, 4.0, 1e-4, 16, None)
    }

    #[test]
    fn vanishing_source_gives_vanishing_corrections() {
        // on |x| ≤ 0.9 the flat profile is x-independent, so ℰ₀ ≡ 0
        let st = flat_stack(91, 0.9, 1e-3, 8, Some(2));
        for l in &st.levels {
            assert_eq!(l.r, 1.0);
            assert_eq!(l.top, st.sgrid.len() - 1);
            assert!(l.residual.data.iter().all(|&e| e == 0.0));
            assert!(l.v.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn parameters_shrink_and_cutoffs_are_consistent() {
        let st = coarse();
        assert_eq!(st.depth(), 4);
        for w in st.levels.windows(2) {
            assert!(w[1].r <= w[0].r && w[1].s_top <= w[0].s_top);
            assert!(w[1].r >= 1e-6 && w[1].s_top > 0.0);
        }
        for l in &st.levels[1..] {
            for (x, &c) in l.chi.iter().enumerate() {
                let a = st.fields.a[x];
                if a <= l.r {
                    assert_eq!(c, 1.0);
                }
                if a >= 2.0 * l.r {
                    assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn far_field_is_frozen() {
        let st = coarse();
        let r_far = st.bundle.r_support;
        let top = st.top();
        for x in 0..st.grid.len() {
            if st.grid.point(x)[0].abs() <= r_far + 2.0 * st.grid.h() {
                continue;
            }
            for i in 0..=top {
                assert_eq!(st.vj(i, x), st.v0(i, x));
                assert_eq!(st.residual(i, x), st.levels[0].residual.at(i, x));
            }
        }
    }

    #[test]
    fn corrections_vanish_on_the_core() {
        let st = coarse();
        for x in 0..st.grid.len() {
            if st.grid.point(x)[0].abs() < 1.0 - (st.depth() + 1) as f64 * st.grid.h() {
                for i in 0..=st.top() {
                    assert_eq!(st.correction.at(i, x), 0.0);
                    assert_eq!(st.residual(i, x), 0.0);
                }
            }
        }
    }

    #[test]
    fn algebraic_residual_matches_direct_operator() {
        let st = flat_stack(801, 4.0, 1e-4, 32, None);
        let nx = st.grid.len();
        for i in [st.top() / 2, st.top() - 40] {
            let direct = st.discrete_residual_slice(i);
            let s = st.sgrid.s(i);
            let scale = (0..nx).map(|x| st.residual(i, x).abs()).fold(0.0, f64::max);
            let vscale = (0..nx).map(|x| st.v0(i, x).powf(3.0)).fold(0.0, f64::max);
            let worst = (0..nx)
                .filter(|&x| st.grid.is_interior(x))
                .map(|x| (direct[x] - st.residual(i, x)).abs())
                .fold(0.0, f64::max);
            // both are O(Δσ²) approximations of the same operator; the gap
            // is measured against the size of the cancelling terms
            assert!(worst <= 1e-2 * vscale.max(scale), "s={s} gap={worst:e} scale={scale:e} v^p={vscale:e}");
        }
    }

    #[test]
    fn v_converges_under_s_refinement() {
        let a = flat_stack(401, 4.0, 1e-4, 16, Some(1));
        let b = flat_stack(401, 4.0, 1e-4, 32, Some(1));
        assert_eq!(a.levels[1].top * 2, b.levels[1].top);
        let sup = |st: &AnsatzStack, stride: usize| {
            (0..=st.levels[1].top / stride)
                .flat_map(|i| (0..st.grid.len()).map(move |x| (i * stride, x)))
                .map(|(i, x)| st.levels[1].v.at(i, x).abs())
                .fold(0.0, f64::max)
        };
        let (va, vb) = (sup(&a, 1), sup(&b, 2));
        assert!((va - vb).abs() <= 0.01 * vb, "{va} vs {vb}");
    }

    #[test]
    fn build_is_deterministic() {
        let a = coarse();
        let b = coarse();
        assert_eq!(a.last().residual.data.len(), b.last().residual.data.len());
        assert!(a.last().residual.data.iter().zip(&b.last().residual.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sandwich_holds_by_construction() {
        let st = coarse();
        for rep in crate::ansatz::verify::sandwich_check(&st) {
            assert!(rep.holds(), "{rep:?}");
            assert!(rep.quarter_ratio <= 1.0 && rep.decay_ratio <= 1.0);
        }
    }

    #[test]
    fn correction_ode_is_satisfied() {
        let st = coarse();
        for j in 1..=2 {
            let r = crate::ansatz::verify::correction_ode_residual(&st, j).unwrap();
            assert!(r < 1e-2, "j={j} residual {r}");
        }
    }

    #[test]
    fn concentration_matches_core_oracle() {
        use crate::ansatz::verify::{concentration_exponent, dt_v0_concentration};
        let st = coarse();
        assert_eq!(concentration_exponent(1, 3.0), 1.5);
        // on the core ∂_sV₀ = −κ₀s^{−2}, so the series is κ₀√(2σ) for every s
        for sigma in [0.5, 0.9] {
            let s_list: Vec<f64> = (0..10).map(|i| 1e-3 * 10f64.powf(i as f64 / 9.0)).collect();
            let series = dt_v0_concentration(&st, &[0.1], sigma, &s_list).unwrap();
            let oracle = 2f64.sqrt() * (2.0 * sigma).sqrt();
            for (_, v) in &series {
                assert!((v - oracle).abs() <= 1e-12 * oracle);
            }
        }
        let small = dt_v0_concentration(&st, &[0.1], 0.5, &[0.5]).unwrap()[0].1;
        let large = dt_v0_concentration(&st, &[0.1], 0.9, &[0.5]).unwrap()[0].1;
        assert!(large >= small);
        assert!(dt_v0_concentration(&st, &[1.0], 0.5, &[0.1]).is_err());
        assert!(dt_v0_concentration(&st, &[0.5], 1.0, &[4.0]).is_err());
    }

    #[test]
    fn profile_identities_on_a_curved_surface() {
        let params = ModelParams::derive(1, 3.0).unwrap();
        let surf = Hypersurface::Quadratic { dim: 1, ell: 0.0, a: 0.05 };
        let (bundle, _) = build_bundle(surf, &params, &LocalizeConfig::default(), 16).unwrap();
        let grid = SpatialGrid::new(1, 101, 4.0).unwrap();
        let sgrid = LogGrid::new(1e-4, 1.0, 16).unwrap();
        let cfg = AnsatzConfig { levels: Some(0), ..Default::default() };
        let st = AnsatzStack::build(&params, &bundle, &grid, &sgrid, &cfg).unwrap();
        assert!(st.fields.max_grad_psi_sq() > 0.0);
        let rep = crate::ansatz::verify::profile_ode_check(&st, 1.0);
        assert!(rep.points > 2000);
        assert!(rep.analytic <= 1e-12, "{rep:?}");
        assert!(rep.first_order <= 1e-12, "{rep:?}");
        assert!(rep.discrete <= 1e-3, "{rep:?}");
    }
}
