//! Quadrature: Gauss–Legendre rules and cumulative integration on log grids.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f with this rule mapped onto [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal sub-intervals of [a, b].
    pub fn integrate_composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + i as f64 * width;
                self.integrate(lo, lo + width, &mut f)
            })
            .sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cumulative integral of g over a uniform grid in σ with spacing `dsig`,
/// fourth-order accurate: out[i] = ∫_{σ_0}^{σ_i} g dσ.
///
/// Interior panels use the cubic rule (−1, 13, 13, −1)/24; the two end panels
/// use the one-sided weights (9, 19, −5, 1)/24.
pub fn cumulative_uniform(g: &[f64], dsig: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * dsig * (g[i - 1] + g[i]);
        }
        return out;
    }
    for i in 1..n {
        let lo = i - 1;
        let panel = if lo == 0 {
            9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]
        } else if i == n - 1 {
            9.0 * g[n - 1] + 19.0 * g[n - 2] - 5.0 * g[n - 3] + g[n - 4]
        } else {
            -g[lo - 1] + 13.0 * g[lo] + 13.0 * g[i] - g[i + 1]
        };
        out[i] = out[i - 1] + panel * dsig / 24.0;
    }
    out
}

/// Tail ∫_0^{s0} h(s) ds from two samples (s0, h0), (s1, h1) with s0 < s1,
/// assuming h ~ c·s^γ near 0. Falls back to the rectangle s0·h0 when the fit
/// is not integrable at 0 or the samples change sign.
pub fn power_law_tail(s0: f64, h0: f64, s1: f64, h1: f64) -> f64 {
    if h0 == 0.0 {
        return 0.0;
    }
    if h0.signum() == h1.signum() && h1 != 0.0 {
        let gamma = (h1 / h0).ln() / (s1 / s0).ln();
        if gamma > -0.9 && gamma.is_finite() {
            return h0 * s0 / (gamma + 1.0);
        }
    }
    h0 * s0
}

/// Composite trapezoid on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// ∫ over the ball B(center, rad) by a composite tensor rule on the bounding
/// cube with the indicator of the ball (exact interval for N = 1).
pub fn ball_integral(
    n: usize,
    center: &[f64],
    rad: f64,
    gl: &GaussLegendre,
    panels: usize,
    f: &(dyn Fn(&[f64]) -> crate::error::Result<f64> + Sync),
) -> crate::error::Result<f64> {
    let m = gl.nodes.len() * panels;
    let width = 2.0 * rad / panels as f64;
    let mut nodes = Vec::with_capacity(m);
    for pnl in 0..panels {
        let lo = -rad + pnl as f64 * width;
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push((lo + 0.5 * width * (t + 1.0), 0.5 * width * w));
        }
    }
    let mut idx = vec![0usize; n];
    let mut acc = 0.0;
    let mut x = vec![0.0; n];
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for d in 0..n {
            let (off, wd) = nodes[idx[d]];
            x[d] = center[d] + off;
            w *= wd;
            r2 += off * off;
        }
        if r2 < rad * rad {
            acc += w * f(&x)?;
        }
        let mut d = 0;
        loop {
            if d == n {
                return Ok(acc);
            }
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
