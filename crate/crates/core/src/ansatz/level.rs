//! One correction level: v_j from ℰ_{j−1} by variation of constants in s.

use crate::grid::LogGrid;
use crate::quad::{cumulative_uniform, power_law_tail};

/// v_j, ∂_sv_j, ∂_ssv_j on one spatial column, for s-nodes 0..=top.
#[derive(Debug, Clone, Default)]
pub struct ColumnSolution {
    pub v: Vec<f64>,
    pub v_s: Vec<f64>,
    pub v_ss: Vec<f64>,
}

/// Solves (1−g)∂_ss v − pV₀^{p−1}v = e on one column, with the decaying
/// homogeneous solutions P = V₀^{(p+1)/2}, M = V₀^{−p}:
///
/// v = c[P ∫₀^s M e + M ∫_s^{s_top} P e],  c = −√(2(p+1)/(1−g))/(3p+1).
///
/// `v0`, `v0_s`, `v0_ss` hold V₀ and its s-derivatives at nodes 0..=top; `e`
/// holds the source on the same nodes. The ∫₀^{s_min} piece uses the power
/// law through the first two samples.
pub fn solve_column(
    sgrid: &LogGrid,
    p: f64,
    g: f64,
    v0: &[f64],
    v0_s: &[f64],
    v0_ss: &[f64],
    e: &[f64],
) -> ColumnSolution {
    let n = e.len();
    if e.iter().all(|&x| x == 0.0) {
        return ColumnSolution { v: vec![0.0; n], v_s: vec![0.0; n], v_ss: vec![0.0; n] };
    }
    let c = -(2.0 * (p + 1.0) / (1.0 - g)).sqrt() / (3.0 * p + 1.0);
    let hp = 0.5 * (p + 1.0);
    let mut pm = Vec::with_capacity(n);
    for i in 0..n {
        let (v, v1, v2) = (v0[i], v0_s[i], v0_ss[i]);
        let big_p = v.powf(hp);
        let dp = hp * v.powf(hp - 1.0) * v1;
        let ddp = hp * ((hp - 1.0) * v.powf(hp - 2.0) * v1 * v1 + v.powf(hp - 1.0) * v2);
        let big_m = v.powf(-p);
        let dm = -p * v.powf(-p - 1.0) * v1;
        let ddm = -p * (-(p + 1.0) * v.powf(-p - 2.0) * v1 * v1 + v.powf(-p - 1.0) * v2);
        pm.push([big_p, dp, ddp, big_m, dm, ddm]);
    }
    let dsig = sgrid.dsig();
    let lower: Vec<f64> = (0..n).map(|i| pm[i][3] * e[i] * sgrid.s(i)).collect();
    let upper: Vec<f64> = (0..n).map(|i| pm[i][0] * e[i] * sgrid.s(i)).collect();
    let tail = if n >= 2 { power_law_tail(sgrid.s(0), pm[0][3] * e[0], sgrid.s(1), pm[1][3] * e[1]) } else { 0.0 };
    let cum_lower = cumulative_uniform(&lower, dsig);
    let cum_upper = cumulative_uniform(&upper, dsig);
    let total_upper = cum_upper[n - 1];
    let mut out = ColumnSolution { v: vec![0.0; n], v_s: vec![0.0; n], v_ss: vec![0.0; n] };
    for i in 0..n {
        let [big_p, dp, ddp, big_m, dm, ddm] = pm[i];
        let i1 = tail + cum_lower[i];
        let i2 = total_upper - cum_upper[i];
        out.v[i] = c * (big_p * i1 + big_m * i2);
        out.v_s[i] = c * (dp * i1 + dm * i2);
        out.v_ss[i] = c * (ddp * i1 + ddm * i2 + (dp * big_m - dm * big_p) * e[i]);
    }
    out
}

/// Per-column worst ratio of |v| to the admissible envelope over the s-nodes
/// 0..=i, i.e. a running maximum.
pub fn running_ratio(v: &[f64], envelope: &[f64]) -> Vec<f64> {
    let mut acc = 0.0f64;
    v.iter()
        .zip(envelope)
        .map(|(a, b)| {
            acc = acc.max(a.abs() / b);
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // V₀ = κ(s+A)^{−1} with κ = √2 (p = 3, g = 0).
    fn profile(sg: &LogGrid, a: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = 2f64.sqrt();
        let s = sg.nodes();
        (
            s.iter().map(|s| k / (s + a)).collect(),
            s.iter().map(|s| -k / (s + a).powi(2)).collect(),
            s.iter().map(|s| 2.0 * k / (s + a).powi(3)).collect(),
        )
    }

    #[test]
    fn zero_source_gives_zero() {
        let sg = LogGrid::new(1e-3, 1.0, 8).unwrap();
        let (v, v1, v2) = profile(&sg, 0.5);
        let sol = solve_column(&sg, 3.0, 0.0, &v, &v1, &v2, &vec![0.0; sg.len()]);
        assert!(sol.v.iter().chain(&sol.v_s).chain(&sol.v_ss).all(|&x| x == 0.0));
    }

    #[test]
    fn satisfies_the_linearized_ode() {
        let sg = LogGrid::new(1e-4, 1.0, 32).unwrap();
        let a = 0.3;
        let (v, v1, v2) = profile(&sg, a);
        let e: Vec<f64> = sg.nodes().iter().map(|s| (s + a).powf(-1.5)).collect();
        let sol = solve_column(&sg, 3.0, 0.0, &v, &v1, &v2, &e);
        for i in 0..sg.len() {
            let res = sol.v_ss[i] - 3.0 * v[i] * v[i] * sol.v[i] - e[i];
            assert!(res.abs() <= 1e-10 * e[i].abs().max(1.0), "i={i} res={res}");
        }
        let (fs, fss) = sg.s_derivatives(&sol.v);
        let scale = sol.v_s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in sg.index_at_or_below(1e-2).unwrap()..sg.len() - 4 {
            assert!((fs[i] - sol.v_s[i]).abs() <= 1e-3 * scale);
            assert!(
                (fss[i] - sol.v_ss[i]).abs() <= 1e-2 * sol.v_ss[i].abs().max(1.0),
                "i={i} {} {}",
                fss[i],
                sol.v_ss[i]
            );
        }
    }

    #[test]
    fn matches_direct_quadrature_oracle() {
        // ∫ by adaptive-free high-order Gauss–Legendre in s on the same formula.
        use crate::quad::GaussLegendre;
        let sg = LogGrid::new(1e-4, 1.0, 32).unwrap();
        let a = 0.3;
        let k = 2f64.sqrt();
        let (v, v1, v2) = profile(&sg, a);
        let src = |s: f64| (s + a).powf(-1.5);
        let e: Vec<f64> = sg.nodes().iter().map(|&s| src(s)).collect();
        let sol = solve_column(&sg, 3.0, 0.0, &v, &v1, &v2, &e);
        let gl = GaussLegendre::new(20);
        let c = -(8.0f64).sqrt() / 10.0;
        for &i in &[40, 200, sg.len() - 20] {
            let s = sg.s(i);
            let vv = |t: f64| k / (t + a);
            let i1 = gl.integrate_composite(0.0, s, 64, |t| vv(t).powi(-3) * src(t));
            let i2 = gl.integrate_composite(s, 1.0, 64, |t| vv(t).powi(2) * src(t));
            let oracle = c * (vv(s).powi(2) * i1 + vv(s).powi(-3) * i2);
            assert_relative_eq!(sol.v[i], oracle, max_relative = 1e-6);
        }
    }
}
