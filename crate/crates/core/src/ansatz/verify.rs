//! Decay-law and envelope checks on a built stack.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stack::AnsatzStack;
use crate::error::{ForgeError, Result};
use crate::fit::{fit_exponent_short, ExponentFit};

/// A fitted power law in s together with what the theory predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub quantity: String,
    pub exponent: f64,
    /// Lower bound on the exponent implied by the decay estimate, if any.
    pub predicted: Option<f64>,
    pub rms: f64,
    pub window: (f64, f64),
    pub decades: f64,
    pub points: usize,
    /// Set when the window spans less than one decade.
    pub low_confidence: bool,
    pub prefactor: f64,
}

impl DecayFit {
    /// Fits y ~ s^γ over the samples with s in [lo, hi].
    pub fn from_series(quantity: &str, s: &[f64], y: &[f64], lo: f64, hi: f64, predicted: Option<f64>) -> Result<Self> {
        let (ws, wy): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(y)
            .filter(|(x, _)| **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12))
            .map(|(a, b)| (*a, *b))
            .unzip();
        let fit: ExponentFit = fit_exponent_short(&ws, &wy)?;
        Ok(Self {
            quantity: quantity.to_string(),
            exponent: fit.slope,
            predicted,
            rms: fit.rms,
            window: (ws[0], ws[ws.len() - 1]),
            decades: fit.decades,
            points: fit.points,
            low_confidence: fit.decades < 1.0,
            prefactor: fit.prefactor(),
        })
    }
}

/// Spatial weight applied before taking the L² norm in x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualWeight {
    None,
    /// Q^{1/2} with Q = (1 − χ(|x|) + V₀)^{p+1}.
    Q,
}

/// Which field of level j to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualField {
    Value,
    /// ∂_sℰ_j from log-grid differences.
    SDerivative,
}

/// (s_i, ‖w·ℰ_j(s_i)‖_{L²}) for every s-node up to s_j.
pub fn residual_series(
    stack: &AnsatzStack,
    j: usize,
    weight: ResidualWeight,
    field: ResidualField,
) -> Result<Vec<(f64, f64)>> {
    let level = stack.levels.get(j).ok_or_else(|| ForgeError::Ansatz {
        level: j,
        message: format!("level {j} not built (depth {})", stack.depth()),
    })?;
    let nx = stack.grid.len();
    let top = level.top;
    let profile = stack.profile();
    let derived = match field {
        ResidualField::Value => None,
        ResidualField::SDerivative => {
            let sub = crate::grid::LogGrid {
                s_max: stack.sgrid.s(top),
                per_octave: stack.sgrid.per_octave,
                octaves_steps: top,
            };
            let cols: Vec<Vec<f64>> = (0..nx)
                .into_par_iter()
                .map(|x| {
                    let col: Vec<f64> = (0..=top).map(|i| level.residual.at(i, x)).collect();
                    sub.s_derivatives(&col).0
                })
                .collect();
            Some(cols)
        }
    };
    Ok((0..=top)
        .into_par_iter()
        .map(|i| {
            let s = stack.sgrid.s(i);
            let sq = stack.grid.integrate(|x| {
                let e = match &derived {
                    None => level.residual.at(i, x),
                    Some(cols) => cols[x][i],
                };
                let w = match weight {
                    ResidualWeight::None => 1.0,
                    ResidualWeight::Q => profile.q(s, x).sqrt(),
                };
                (w * e) * (w * e)
            });
            (s, sq.sqrt())
        })
        .collect())
}

/// Log-log fit of the residual series over s ∈ [lo, hi]. The predicted lower
/// bound is −1 + λ.
pub fn residual_norm_series(
    stack: &AnsatzStack,
    j: usize,
    weight: ResidualWeight,
    field: ResidualField,
    window: (f64, f64),
) -> Result<DecayFit> {
    let series = residual_series(stack, j, weight, field)?;
    let (s, y): (Vec<f64>, Vec<f64>) = series.into_iter().unzip();
    let name = match (weight, field) {
        (ResidualWeight::None, ResidualField::Value) => format!("|E_{j}|_L2"),
        (ResidualWeight::Q, ResidualField::Value) => format!("|Q^1/2 E_{j}|_L2"),
        (ResidualWeight::None, ResidualField::SDerivative) => format!("|d_s E_{j}|_L2"),
        (ResidualWeight::Q, ResidualField::SDerivative) => format!("|Q^1/2 d_s E_{j}|_L2"),
    };
    DecayFit::from_series(&name, &s, &y, window.0, window.1, Some(-1.0 + stack.params.lambda))
}

/// Relative residual of (1−g)∂_ssv_j − f′(V₀)v_j − ℰ_{j−1} with ∂_ss taken
/// by second-order differences of the stored v_j samples in σ = ln s.
///
/// For each interior s-node the max over x of |residual| is divided by the
/// max over x of |(1−g)∂_ssv_j| + |f′(V₀)v_j| + |ℰ_{j−1}|; the worst slice is
/// returned. Slices where all three vanish are skipped.
pub fn correction_ode_residual(stack: &AnsatzStack, j: usize) -> Result<f64> {
    if j == 0 || j > stack.depth() {
        return Err(ForgeError::Ansatz { level: j, message: format!("no correction level {j}") });
    }
    let level = &stack.levels[j];
    let prev = &stack.levels[j - 1];
    let top = prev.top;
    let nx = stack.grid.len();
    let p = stack.params.p;
    let sub =
        crate::grid::LogGrid { s_max: stack.sgrid.s(top), per_octave: stack.sgrid.per_octave, octaves_steps: top };
    let vss: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|x| {
            let col: Vec<f64> = (0..=top).map(|i| level.v.at(i, x)).collect();
            sub.s_derivatives(&col).1
        })
        .collect();
    let profile = stack.profile();
    let worst = (1..top)
        .into_par_iter()
        .map(|i| {
            let s = stack.sgrid.s(i);
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for x in 0..nx {
                let g = stack.fields.g[x];
                let a = (1.0 - g) * vss[x][i];
                let b = p * profile.v0(s, x).powf(p - 1.0) * level.v.at(i, x);
                let e = prev.residual.at(i, x);
                num = num.max((a - b - e).abs());
                den = den.max(a.abs() + b.abs() + e.abs());
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Worst ratios in the two sandwich inequalities for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub level: usize,
    /// max |V_j − V₀| / (¼(1−2^{−j})V₀)
    pub quarter_ratio: f64,
    /// max |V_j − V₀| / ((1−2^{−j})(1+V₀)^{−(p−1)/4}V₀)
    pub decay_ratio: f64,
    pub points: usize,
    pub violations: usize,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks both sandwich inequalities on every grid node with s ≤ s_j, using
/// V_j − V₀ = Σ_{l≤j} χ_l v_l accumulated level by level.
pub fn sandwich_check(stack: &AnsatzStack) -> Vec<SandwichReport> {
    let nx = stack.grid.len();
    let p = stack.params.p;
    let mut out = Vec::new();
    for j in 1..=stack.depth() {
        let top = stack.levels[j].top;
        let fj = 1.0 - 0.5f64.powi(j as i32);
        let (q, d, viol) = (0..=top)
            .into_par_iter()
            .map(|i| {
                let mut q = 0.0f64;
                let mut d = 0.0f64;
                let mut viol = 0usize;
                for x in 0..nx {
                    let mut diff = 0.0;
                    for l in 1..=j {
                        let c = stack.levels[l].chi[x];
                        if c != 0.0 {
                            diff += c * stack.levels[l].v.at(i, x);
                        }
                    }
                    let v0 = stack.v0(i, x);
                    let rq = diff.abs() / (0.25 * fj * v0);
                    let rd = diff.abs() / (fj * (1.0 + v0).powf(-0.25 * (p - 1.0)) * v0);
                    if rq > 1.0 || rd > 1.0 {
                        viol += 1;
                    }
                    q = q.max(rq);
                    d = d.max(rd);
                }
                (q, d, viol)
            })
            .reduce(|| (0.0, 0.0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 + b.2));
        out.push(SandwichReport {
            level: j,
            quarter_ratio: q,
            decay_ratio: d,
            points: (top + 1) * nx,
            violations: viol,
        });
    }
    out
}

/// Fitted constant C in |LHS| ≤ C·envelope, as the max ratio over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstant {
    pub name: String,
    pub constant: f64,
    pub samples: usize,
}

/// Constants of one bound at two resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStability {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    /// max(coarse/fine, fine/coarse); 1 when both vanish.
    pub ratio: f64,
}

impl BoundStability {
    pub fn stable(&self) -> bool {
        self.ratio <= 2.0
    }
}

fn scan<F>(stack: &AnsatzStack, name: String, top: usize, region: Region, f: F) -> BoundConstant
where
    F: Fn(usize, usize, &[f64]) -> Option<f64> + Sync,
{
    let nx = stack.grid.len();
    let r_far = stack.bundle.r_support;
    let (c, n) = (0..=top)
        .into_par_iter()
        .map(|i| {
            let mut c = 0.0f64;
            let mut n = 0usize;
            for x in 0..nx {
                let pt = stack.grid.point(x);
                let r = pt[..stack.grid.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
                let inside = match region {
                    Region::All => true,
                    Region::Near => r <= r_far,
                    Region::Far => r > r_far,
                };
                if !inside || !stack.grid.is_interior(x) {
                    continue;
                }
                if let Some(v) = f(i, x, &pt[..stack.grid.dim]) {
                    if v.is_finite() {
                        c = c.max(v);
                        n += 1;
                    }
                }
            }
            (c, n)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    BoundConstant { name, constant: c, samples: n }
}

#[derive(Debug, Clone, Copy)]
enum Region {
    All,
    Near,
    Far,
}

/// Fitted constants of the pointwise bounds on V₀, ℰ₀, v_j, ℰ_j and
/// ∂_sV_J − ∂_sV₀ for derivative orders α ≤ 2, |β| ≤ 2 (|β| = 2 through the
/// Laplacian). Each constant is the max over the sampled nodes of
/// |LHS|/envelope.
pub fn envelope_bound_constants(stack: &AnsatzStack) -> Vec<BoundConstant> {
    let p = stack.params.p;
    let k = stack.params.k as f64;
    let a = 2.0 / (p - 1.0);
    let h = 0.5 * (p - 1.0);
    let pr = stack.profile();
    let sg = &stack.sgrid;
    let grid = &stack.grid;
    let n = grid.dim;
    let top0 = stack.levels[0].top;
    let norm = |g: &[f64; crate::grid::MAX_DIM]| g[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let rad = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = Vec::new();

    out.push(scan(stack, "V1 d_s V0".into(), top0, Region::All, |i, x, _| {
        let s = sg.s(i);
        Some(pr.ds(1, s, x).abs() / pr.v0(s, x).powf(1.0 + h))
    }));
    out.push(scan(stack, "V1 d_ss V0".into(), top0, Region::All, |i, x, _| {
        let s = sg.s(i);
        Some(pr.ds(2, s, x).abs() / pr.v0(s, x).powf(1.0 + 2.0 * h))
    }));
    out.push(scan(stack, "V1 grad V0".into(), top0, Region::Near, |i, x, _| {
        let s = sg.s(i);
        Some(norm(&pr.jet(0, s, x).grad) / pr.v0(s, x).powf(1.0 + h / k))
    }));
    out.push(scan(stack, "V1 lap V0".into(), top0, Region::Near, |i, x, _| {
        let s = sg.s(i);
        Some(pr.jet(0, s, x).lap.abs() / pr.v0(s, x).powf(1.0 + 2.0 * h / k))
    }));
    out.push(scan(stack, "V1 grad d_s V0".into(), top0, Region::Near, |i, x, _| {
        let s = sg.s(i);
        Some(norm(&pr.jet(1, s, x).grad) / pr.v0(s, x).powf(1.0 + (1.0 + 1.0 / k) * h))
    }));
    out.push(scan(stack, "V2 E0".into(), top0, Region::Near, |i, x, _| {
        let s = sg.s(i);
        Some(stack.levels[0].residual.at(i, x).abs() / pr.v0(s, x).powf(0.5 * (p + 1.0) + h / k))
    }));
    out.push(scan(stack, "V3 d_s V0".into(), top0, Region::Far, |i, x, pt| {
        Some(pr.ds(1, sg.s(i), x).abs() * rad(pt).powf((a + 1.0) * k))
    }));
    out.push(scan(stack, "V4 E0".into(), top0, Region::Far, |i, x, pt| {
        Some(stack.levels[0].residual.at(i, x).abs() * rad(pt).powf(a * k + 2.0))
    }));
    for j in 1..=stack.depth() {
        let lv = &stack.levels[j];
        let jf = j as f64;
        out.push(scan(stack, format!("v4 v_{j}"), lv.top, Region::All, |i, x, _| {
            let s = sg.s(i);
            Some(lv.v.at(i, x).abs() / pr.v0(s, x).powf(1.0 + (-jf + jf / k) * h))
        }));
        out.push(scan(stack, format!("v4 d_s v_{j}"), lv.top, Region::All, |i, x, _| {
            let s = sg.s(i);
            Some(lv.v_s.at(i, x).abs() / pr.v0(s, x).powf(1.0 + (1.0 - jf + jf / k) * h))
        }));
        out.push(scan(stack, format!("v1 E_{j}"), lv.top, Region::Near, |i, x, _| {
            let s = sg.s(i);
            Some(lv.residual.at(i, x).abs() / pr.v0(s, x).powf(0.5 * (p + 1.0) + (-jf + (1.0 + jf) / k) * h))
        }));
        out.push(scan(stack, format!("v3 E_{j}"), lv.top, Region::Far, |i, x, pt| {
            Some(lv.residual.at(i, x).abs() * rad(pt).powf(a * k + 2.0))
        }));
    }
    let top = stack.top();
    out.push(scan(stack, "v5bis d_s V_J".into(), top, Region::All, |i, x, _| {
        let s = sg.s(i);
        Some(stack.correction_s.at(i, x).abs() / pr.v0(s, x).powf(1.0 + h / k))
    }));
    out
}

/// Pairs constants by name and reports the refinement ratio.
pub fn compare_bounds(coarse: &[BoundConstant], fine: &[BoundConstant]) -> Vec<BoundStability> {
    coarse
        .iter()
        .filter_map(|c| {
            let f = fine.iter().find(|f| f.name == c.name)?;
            let ratio = if c.constant == 0.0 && f.constant == 0.0 {
                1.0
            } else if c.constant == 0.0 || f.constant == 0.0 {
                f64::INFINITY
            } else {
                (c.constant / f.constant).max(f.constant / c.constant)
            };
            Some(BoundStability { name: c.name.clone(), coarse: c.constant, fine: f.constant, ratio })
        })
        .collect()
}

/// sup_{|x|≤R} |v_j(s,·)| per s-node up to s_j, for the level-decay fits.
pub fn level_sup_series(stack: &AnsatzStack, j: usize) -> Vec<(f64, f64)> {
    let lv = &stack.levels[j];
    let r_far = stack.bundle.r_support;
    (0..=lv.top)
        .map(|i| {
            let m = (0..stack.grid.len())
                .filter(|&x| {
                    let pt = stack.grid.point(x);
                    pt[..stack.grid.dim].iter().map(|v| v * v).sum::<f64>().sqrt() <= r_far
                })
                .map(|x| lv.v.at(i, x).abs())
                .fold(0.0, f64::max);
            (stack.sgrid.s(i), m)
        })
        .collect()
}

/// Exponent e in s^e·‖∂_sV₀(s)‖_{L²(|x−x₀|<σs)}: (N+2−(N−2)p)/(2(p−1)).
pub fn concentration_exponent(dim: usize, p: f64) -> f64 {
    let n = dim as f64;
    (n + 2.0 - (n - 2.0) * p) / (2.0 * (p - 1.0))
}

/// s ↦ s^e·‖∂_sV₀(s)‖_{L²(B(x₀,σs))} with ∂_sV₀ evaluated pointwise (κ from
/// ∇ψ, A from the bump) and the ball integrated by tensor Gauss–Legendre
/// (exact interval for N = 1, indicator on the bounding cube otherwise).
pub fn dt_v0_concentration(stack: &AnsatzStack, x0: &[f64], sigma: f64, s_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = stack.params.dim;
    if x0.len() != n {
        return Err(ForgeError::Domain(format!("x0 has {} components, expected {n}", x0.len())));
    }
    let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r0 >= 1.0 {
        return Err(ForgeError::Domain(format!("|x0| = {r0} must be below 1")));
    }
    if !(sigma > 0.0) {
        return Err(ForgeError::Domain(format!("sigma must be positive (got {sigma})")));
    }
    let p = stack.params.p;
    let a = 2.0 / (p - 1.0);
    let e = concentration_exponent(n, p);
    let bump = crate::model::BumpA::new(stack.params.k);
    let kappa0 = stack.params.kappa0;
    let bundle = &stack.bundle;
    let gl = crate::quad::GaussLegendre::new(16);
    let panels = if n == 1 { 8 } else { 4 };
    s_list
        .par_iter()
        .map(|&s| {
            let rad = sigma * s;
            if x0.iter().any(|c| c.abs() + rad > stack.grid.half_width) {
                return Err(ForgeError::Domain(format!("ball of radius {rad} around x0 leaves the grid")));
            }
            let dsv = |x: &[f64]| -> Result<f64> {
                let jet = bundle.psi_jet(x)?;
                let g: f64 = jet.grad[..n].iter().map(|v| v * v).sum();
                let kappa = kappa0 * (1.0 - g).powf(1.0 / (p - 1.0));
                Ok(-a * kappa * (s + bump.value(x)).powf(-a - 1.0))
            };
            let sq = crate::quad::ball_integral(n, x0, rad, &gl, panels, &|x| dsv(x).map(|v| v * v))?;
            Ok((s, s.powf(e) * sq.sqrt()))
        })
        .collect()
}

/// Worst relative defects of (1−g)∂_ssV₀ = V₀^p over the stack's grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOdeReport {
    /// With the closed-form ∂_ssV₀.
    pub analytic: f64,
    /// With ∂_ssV₀ from the three-point formula on the s-nodes.
    pub discrete: f64,
    /// max |(1−g)^{1/2}∂_sV₀ + (2V₀^{p+1}/(p+1))^{1/2}| / V₀^{(p+1)/2}
    pub first_order: f64,
    pub points: usize,
}

/// Only nodes with A(x) ≤ `a_max` are used: beyond that V₀ varies with s by
/// a relative amount below the rounding level over one s-step, and any
/// difference quotient is noise.
pub fn profile_ode_check(stack: &AnsatzStack, a_max: f64) -> ProfileOdeReport {
    let p = stack.params.p;
    let pr = stack.profile();
    let sg = &stack.sgrid;
    let ns = sg.len();
    let nx = stack.grid.len();
    let nodes: Vec<usize> = (0..nx).filter(|&x| stack.fields.a[x] <= a_max).collect();
    let (analytic, discrete, first_order) = nodes
        .par_iter()
        .map(|&x| {
            let g = stack.fields.g[x];
            let col: Vec<f64> = (0..ns).map(|i| pr.v0(sg.s(i), x)).collect();
            let d2 = sg.s_second_nonuniform(&col);
            let mut out = (0.0f64, 0.0f64, 0.0f64);
            for i in 1..ns - 1 {
                let s = sg.s(i);
                let v = col[i];
                let vp = v.powf(p);
                out.0 = out.0.max(((1.0 - g) * pr.ds(2, s, x) - vp).abs() / vp);
                out.1 = out.1.max(((1.0 - g) * d2[i] - vp).abs() / vp);
                let first = (1.0 - g).sqrt() * pr.ds(1, s, x) + (2.0 * v.powf(p + 1.0) / (p + 1.0)).sqrt();
                out.2 = out.2.max(first.abs() / v.powf(0.5 * (p + 1.0)));
            }
            out
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)));
    ProfileOdeReport { analytic, discrete, first_order, points: nodes.len() * (ns - 2) }
}
