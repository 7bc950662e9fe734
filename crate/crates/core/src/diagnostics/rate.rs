use serde::{Deserialize, Serialize};

use super::pullback::{pullback_point, FieldSource};
use crate::error::{ForgeError, Result};
use crate::fit::{fit_exponent, ExponentFit};
use crate::geometry::LorentzGraphMap;

/// Fit of u(T − δ, x₀) against δ, T = τ₀ + φ̃(x₀).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRate {
    pub x0: Vec<f64>,
    pub blowup_time: f64,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: ExponentFit,
    /// −2/(p−1)
    pub predicted: f64,
    /// u grows as δ decreases over the whole window.
    pub monotone: bool,
}

pub fn blowup_rate<S: FieldSource + ?Sized>(
    src: &S,
    map: &LorentzGraphMap,
    p: f64,
    x0: &[f64],
    deltas: &[f64],
) -> Result<BlowupRate> {
    let big_t = map.tau0 + map.bundle.phi_tilde.value(x0);
    let mut values = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let (u, _) = pullback_point(src, map, big_t - d, x0)?
            .ok_or_else(|| ForgeError::Domain(format!("u(T − {d}, x0) is not covered by the source")))?;
        values.push(u);
    }
    let fit = fit_exponent(deltas, &values)?;
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let monotone = order.windows(2).all(|w| values[w[0]] > values[w[1]]);
    Ok(BlowupRate {
        x0: x0.to_vec(),
        blowup_time: big_t,
        deltas: deltas.to_vec(),
        values,
        fit,
        predicted: -2.0 / (p - 1.0),
        monotone,
    })
}

/// `count` log-spaced values covering [lo, hi].
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp()).collect()
}
