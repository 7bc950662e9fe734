use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// Settings of one regularized run started at S_n = 1/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n: usize,
    /// Truncation level B_n; `None` takes sup |V_J| over [S_n, s_J].
    pub truncation: Option<f64>,
    pub cfl: f64,
    /// Δs is also capped at this fraction of S_n.
    pub step_fraction: f64,
    /// Final s; `None` runs to the top of the ansatz.
    pub s_end: Option<f64>,
    /// Smallness threshold for the audits.
    pub omega: f64,
    /// Abort when |w| on the two outer layers exceeds this fraction of max |w|.
    pub boundary_tolerance: f64,
    /// Drop fₙ(V_J+w) − fₙ(V_J) from the source.
    pub linear: bool,
    /// Store the state at these s-values (snapped to the nearest step).
    pub checkpoints: Vec<f64>,
    /// Also store every this many steps (0 disables).
    pub checkpoint_every: usize,
    /// Evaluate the functionals every this many steps.
    pub energy_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 100,
            truncation: None,
            cfl: 0.5,
            step_fraction: 0.02,
            s_end: None,
            omega: 0.1,
            boundary_tolerance: 1e-6,
            linear: false,
            checkpoints: Vec::new(),
            checkpoint_every: 0,
            energy_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn s_start(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ForgeError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl must lie in (0, 0.5] (got {})", self.cfl));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return bad(format!("step_fraction must lie in (0, 1] (got {})", self.step_fraction));
        }
        if let Some(b) = self.truncation {
            if !(b >= 1.0 && b.is_finite()) {
                return bad(format!("truncation level must be at least 1 (got {b})"));
            }
        }
        if let Some(e) = self.s_end {
            if !(e > self.s_start()) {
                return bad(format!("s_end = {e} must exceed S_n = {}", self.s_start()));
            }
        }
        if !(self.omega > 0.0) {
            return bad(format!("omega must be positive (got {})", self.omega));
        }
        if !(self.boundary_tolerance > 0.0) {
            return bad("boundary_tolerance must be positive".into());
        }
        if self.energy_every == 0 {
            return bad("energy_every must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = SolverConfig::default();
        for cfg in [
            SolverConfig { cfl: 0.7, ..base.clone() },
            SolverConfig { n: 0, ..base.clone() },
            SolverConfig { truncation: Some(0.5), ..base.clone() },
            SolverConfig { s_end: Some(0.001), ..base.clone() },
            SolverConfig { energy_every: 0, ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<SolverConfig>("n = 10\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
