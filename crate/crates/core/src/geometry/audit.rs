//! Randomized round-trip checks of Λ and of the root solve for X₁.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::LorentzGraphMap;
use crate::error::Result;
use crate::grid::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapAudit {
    pub samples: usize,
    /// max |Λ⁻¹(Λ(t, x)) − (t, x)|_∞
    pub round_trip: f64,
    /// max ||det J_Λ| − 1|
    pub det_deviation: f64,
    /// max |Φ(X₁(y), ȳ) − y₁| / max(1, |y₁|)
    pub x1_residual: f64,
    pub x1_tol: f64,
}

/// Draws (t, x) with t ∈ [0, τ₀] and x in the cube of half width `extent`,
/// and y in the same cube.
pub fn audit_map(map: &LorentzGraphMap, samples: usize, seed: u64, extent: f64, det_step: f64) -> Result<MapAudit> {
    let n = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, [f64; MAX_DIM], [f64; MAX_DIM])> = (0..samples)
        .map(|_| {
            let t = rng.gen_range(0.0..=map.tau0.max(1e-12));
            let mut x = [0.0; MAX_DIM];
            let mut y = [0.0; MAX_DIM];
            for a in 0..n {
                x[a] = rng.gen_range(-extent..=extent);
                y[a] = rng.gen_range(-extent..=extent);
            }
            (t, x, y)
        })
        .collect();
    let tol = map.bundle.tol;
    let rows: Vec<[f64; 3]> = draws
        .par_iter()
        .map(|(t, x, y)| {
            let (s, yy) = map.forward(*t, &x[..n])?;
            let (tb, xb) = map.inverse(s, &yy[..n])?;
            let mut rt = (tb - t).abs();
            for a in 0..n {
                rt = rt.max((xb[a] - x[a]).abs());
            }
            let det = map.jacobian_det(*t, &x[..n], det_step)?;
            let x1 = map.bundle.solve_x1(&y[..n], tol)?;
            let res = (map.bundle.big_phi(x1, &y[1..n]) - y[0]).abs() / y[0].abs().max(1.0);
            Ok([rt, (det.abs() - 1.0).abs(), res])
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(MapAudit { samples, round_trip: worst(0), det_deviation: worst(1), x1_residual: worst(2), x1_tol: tol })
}
