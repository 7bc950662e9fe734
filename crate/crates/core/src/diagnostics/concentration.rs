//! The averaged concentration of ∂_tu in shrinking cones:
//! (1/(T−t)) ∫_t^{T−δ} dt′ ∫_{|x−x₀|<σ(T−t′)} |∂_tu|² dx with T = τ₀ + φ̃(x₀),
//! cut at the last resolved time T − δ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pullback::{pullback_point, FieldSource};
use crate::error::{ForgeError, Result};
use crate::geometry::{InfluenceRegion, LorentzGraphMap};
use crate::quad::{ball_integral, GaussLegendre};

/// Time panels per factor of two in T − t′.
const PANELS_PER_OCTAVE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub value: f64,
    /// Quadrature nodes that fell outside the source.
    pub masked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSeries {
    pub sigma: f64,
    pub blowup_time: f64,
    pub cutoff: f64,
    pub rows: Vec<ConcentrationRow>,
    /// Minimum over rows with T − t within a decade of the closest one.
    pub final_decade_min: f64,
}

/// Validates σ ∈ (ℓ, 1] and |x₀| < min{ε₀/4, r}.
pub fn check_concentration_inputs(
    map: &LorentzGraphMap,
    region: &InfluenceRegion,
    x0: &[f64],
    sigma: f64,
) -> Result<()> {
    let ell = map.bundle.ell;
    if !(sigma > ell && sigma <= 1.0) {
        return Err(ForgeError::Domain(format!("sigma = {sigma} must lie in (ell, 1] with ell = {ell}")));
    }
    let eps = region.patch_radius(map.bundle.r);
    let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r0 >= eps {
        return Err(ForgeError::Domain(format!("|x0| = {r0} is outside the verifiable patch of radius {eps}")));
    }
    Ok(())
}

/// `cutoff` is δ: the t′-integral stops at T − δ.
pub fn concentration<S: FieldSource + ?Sized>(
    src: &S,
    map: &LorentzGraphMap,
    region: &InfluenceRegion,
    x0: &[f64],
    sigma: f64,
    t_list: &[f64],
    cutoff: f64,
) -> Result<ConcentrationSeries> {
    check_concentration_inputs(map, region, x0, sigma)?;
    let n = map.dim();
    let big_t = map.tau0 + map.bundle.phi_tilde.value(x0);
    if !(cutoff > 0.0) {
        return Err(ForgeError::Domain("cutoff must be positive".into()));
    }
    let gl_t = GaussLegendre::new(8);
    let gl_x = GaussLegendre::new(16);
    let x_panels = if n == 1 { 4 } else { 2 };
    let rows: Vec<ConcentrationRow> = t_list
        .par_iter()
        .map(|&t| {
            let span = big_t - t;
            if !(span > cutoff) {
                return Err(ForgeError::Domain(format!("t = {t} is beyond the cutoff T − {cutoff}")));
            }
            // panels geometric in τ = T − t′ from the cutoff up to T − t
            let octaves = (span / cutoff).log2();
            let panels = ((octaves * PANELS_PER_OCTAVE as f64).ceil() as usize).max(1);
            let ratio = (span / cutoff).powf(1.0 / panels as f64);
            let mut acc = 0.0;
            let mut masked = 0usize;
            for k in 0..panels {
                let a = cutoff * ratio.powi(k as i32);
                let b = if k + 1 == panels { span } else { a * ratio };
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for (z, w) in gl_t.nodes.iter().zip(&gl_t.weights) {
                    let tau = mid + half * z;
                    let tp = big_t - tau;
                    let miss = std::sync::atomic::AtomicUsize::new(0);
                    let inner = ball_integral(n, x0, sigma * tau, &gl_x, x_panels, &|x| {
                        Ok(match pullback_point(src, map, tp, x)? {
                            Some((_, u_t)) => u_t * u_t,
                            None => {
                                miss.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                0.0
                            }
                        })
                    })?;
                    masked += miss.into_inner();
                    acc += w * half * inner;
                }
            }
            Ok(ConcentrationRow { t, value: acc / span, masked })
        })
        .collect::<Result<_>>()?;
    let closest = rows.iter().map(|r| big_t - r.t).fold(f64::INFINITY, f64::min);
    let final_decade_min = rows
        .iter()
        .filter(|r| big_t - r.t <= 10.0 * closest * (1.0 + 1e-12))
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);
    Ok(ConcentrationSeries { sigma, blowup_time: big_t, cutoff, rows, final_decade_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bundle, Hypersurface, LocalizeConfig};
    use crate::ModelParams;

    /// v = κ₀ s^{−1} on every y (p = 3).
    struct Core(f64);

    impl FieldSource for Core {
        fn s_range(&self) -> (f64, f64) {
            (1e-8, 1.0)
        }
        fn eval(&self, s: f64, _y: &[f64]) -> Option<[f64; 3]> {
            (1e-8..=1.0).contains(&s).then(|| [self.0 / s, -self.0 / (s * s), 0.0])
        }
    }

    fn setup(ell: f64) -> (LorentzGraphMap, InfluenceRegion) {
        let params = ModelParams::derive(1, 3.0).unwrap();
        let surface = if ell == 0.0 { Hypersurface::Zero { dim: 1 } } else { Hypersurface::Linear { dim: 1, ell } };
        let (bundle, _) = build_bundle(surface, &params, &LocalizeConfig::default(), 16).unwrap();
        let region = InfluenceRegion::new(ell, 0.5).unwrap();
        (LorentzGraphMap::new(bundle, region.tau0), region)
    }

    #[test]
    fn matches_closed_form_on_the_core_profile() {
        let (m, reg) = setup(0.0);
        let k0 = 2.0f64.sqrt();
        let (sigma, d, t0) = (0.5, 1e-4, reg.tau0 - 1e-2);
        let s = concentration(&Core(k0), &m, &reg, &[0.0], sigma, &[t0], d).unwrap();
        // ∫_d^{T−t} 2σ τ κ₀² τ^{−4} dτ / (T−t)
        let span: f64 = 1e-2;
        let exact = sigma * k0 * k0 * (1.0 / (d * d) - 1.0 / (span * span)) / span;
        let got = s.rows[0].value;
        assert!((got / exact - 1.0).abs() < 1e-9, "{got} vs {exact}");
        assert_eq!(s.rows[0].masked, 0);
        // pinned regression value of the same quantity
        assert!((got - 9.999e9).abs() < 1e-3 * 9.999e9);
    }

    #[test]
    fn rejects_sigma_at_or_below_the_slope() {
        let (m, reg) = setup(0.3);
        assert!(concentration(&Core(1.0), &m, &reg, &[0.0], 0.3, &[0.0], 1e-3).is_err());
        assert!(concentration(&Core(1.0), &m, &reg, &[0.0], 1.2, &[0.0], 1e-3).is_err());
    }

    #[test]
    fn rejects_points_outside_the_patch() {
        let (m, reg) = setup(0.0);
        assert!(concentration(&Core(1.0), &m, &reg, &[0.5], 0.5, &[0.0], 1e-3).is_err());
    }

    #[test]
    fn far_from_the_surface_is_finite_and_positive() {
        let (m, reg) = setup(0.0);
        let s = concentration(&Core(2.0f64.sqrt()), &m, &reg, &[0.0], 0.9, &[0.0], 1e-3).unwrap();
        assert!(s.rows[0].value.is_finite() && s.rows[0].value > 0.0);
    }
}
