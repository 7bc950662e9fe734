//! Declarative experiment configuration (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzConfig;
use crate::error::{ForgeError, Result};
use crate::geometry::{LocalizeConfig, SurfaceSpec};
use crate::grid::{LogGrid, SpatialGrid};
use crate::io::StackInputs;
use crate::model::ModelParams;
use crate::solver::{ConeConfig, MmsConfig, SolverConfig};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AnsatzVerify,
    Solve,
    Pullback,
    ConeTest,
    TaylorSample,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::AnsatzVerify,
        ExperimentKind::Solve,
        ExperimentKind::Pullback,
        ExperimentKind::ConeTest,
        ExperimentKind::TaylorSample,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub dim: usize,
    pub p: f64,
    pub k: Option<u32>,
    pub support_radius: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { dim: 1, p: 3.0, k: None, support_radius: None }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::derive(self.dim, self.p)?;
        if let Some(k) = self.k {
            p = p.with_k(k)?;
        }
        if let Some(r) = self.support_radius {
            p = p.with_support_radius(r)?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Nodes per axis (odd).
    pub nodes: usize,
    pub half_width: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub per_octave: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nodes: 801, half_width: 4.0, s_min: 1e-4, s_max: 1.0, per_octave: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// s-window of the residual decay fit.
    pub residual_window: [f64; 2],
    /// Points with A(x) above this are left out of the discrete profile check.
    pub profile_a_max: f64,
    /// Random samples for the map round-trip audit.
    pub map_samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { residual_window: [1e-3, 1e-1], profile_a_max: 1.0, map_samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// One run per entry, S_n = 1/n.
    pub n: Vec<usize>,
    /// δ₀ trial horizon: runs stop at min(S_n + delta0, s_J); also sets τ₀.
    pub delta0: f64,
    pub cfl: f64,
    pub step_fraction: f64,
    pub truncation: Option<f64>,
    pub omega: f64,
    pub boundary_tolerance: f64,
    pub energy_every: usize,
    pub checkpoint_every: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            n: vec![100, 200],
            delta0: 0.5,
            cfl: d.cfl,
            step_fraction: d.step_fraction,
            truncation: None,
            omega: d.omega,
            boundary_tolerance: d.boundary_tolerance,
            energy_every: d.energy_every,
            checkpoint_every: 10,
        }
    }
}

impl SolverSection {
    pub fn run_config(&self, n: usize, s_top: f64) -> SolverConfig {
        let s0 = 1.0 / n as f64;
        SolverConfig {
            n,
            truncation: self.truncation,
            cfl: self.cfl,
            step_fraction: self.step_fraction,
            s_end: Some((s0 + self.delta0).min(s_top)),
            omega: self.omega,
            boundary_tolerance: self.boundary_tolerance,
            linear: false,
            checkpoints: Vec::new(),
            checkpoint_every: self.checkpoint_every,
            energy_every: self.energy_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PullbackSource {
    /// V_J on the ansatz s-grid.
    Ansatz,
    /// Solver checkpoints of the first run.
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PullbackSection {
    pub source: PullbackSource,
    /// Base point; empty means the origin.
    pub x0: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Samples per decade in the rate and concentration series.
    pub per_decade: usize,
    /// The concentration t′-integral stops this factor above the first
    /// resolved s.
    pub cutoff_factor: f64,
    /// (t, x) sampling of the written field.
    pub times: usize,
    pub points: usize,
    pub half_width: f64,
}

impl PullbackSection {
    pub fn base_point(&self, dim: usize) -> Vec<f64> {
        if self.x0.is_empty() {
            vec![0.0; dim]
        } else {
            self.x0.clone()
        }
    }
}

impl Default for PullbackSection {
    fn default() -> Self {
        Self {
            source: PullbackSource::Ansatz,
            x0: Vec::new(),
            sigma: vec![0.5, 0.9],
            per_decade: 16,
            cutoff_factor: 2.0,
            times: 33,
            points: 41,
            half_width: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorSection {
    pub trials: usize,
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
}

impl Default for TaylorSection {
    fn default() -> Self {
        Self { trials: 100_000, u_range: [0.1, 10.0], v_range: [1e-3, 1e2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    pub output: Option<String>,
    pub experiments: Vec<ExperimentKind>,
    /// Also fail the run when an energy-method claim (growth law,
    /// coercivity audit, residual decay) does not hold.
    pub strict_claims: bool,
    pub model: ModelSection,
    pub surface: SurfaceSpec,
    pub localize: LocalizeConfig,
    pub grid: GridSection,
    pub ansatz: AnsatzConfig,
    pub verify: VerifySection,
    pub solver: SolverSection,
    pub pullback: PullbackSection,
    pub cone: ConeConfig,
    pub mms: MmsConfig,
    pub taylor: TaylorSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA,
            seed: 7,
            output: None,
            experiments: ExperimentKind::ALL.to_vec(),
            strict_claims: false,
            model: ModelSection::default(),
            surface: SurfaceSpec::Zero,
            localize: LocalizeConfig::default(),
            grid: GridSection::default(),
            ansatz: AnsatzConfig::default(),
            verify: VerifySection::default(),
            solver: SolverSection::default(),
            pullback: PullbackSection::default(),
            cone: ConeConfig::default(),
            mms: MmsConfig::default(),
            taylor: TaylorSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ForgeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ForgeError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(ForgeError::Config(format!(
                "schema {} is not supported (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        let params = self.model.params()?;
        self.surface.build(params.dim)?;
        let as_config = |e: ForgeError| ForgeError::Config(format!("[grid] {e}"));
        self.spatial_grid().map_err(as_config)?;
        self.log_grid().map_err(as_config)?;
        if !self.pullback.x0.is_empty() && self.pullback.x0.len() != params.dim {
            return Err(ForgeError::Config(format!(
                "pullback.x0 has {} entries for dim {}",
                self.pullback.x0.len(),
                params.dim
            )));
        }
        if !(self.solver.delta0 > 0.0 && self.solver.delta0 < 1.0) {
            return Err(ForgeError::Config(format!("solver.delta0 must lie in (0, 1) (got {})", self.solver.delta0)));
        }
        for &n in &self.solver.n {
            self.solver.run_config(n, 1.0).validate()?;
        }
        if self.pullback.per_decade < 8 {
            return Err(ForgeError::Config("pullback.per_decade must be at least 8".into()));
        }
        Ok(())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.model.dim, self.grid.nodes, self.grid.half_width)
    }

    pub fn log_grid(&self) -> Result<LogGrid> {
        LogGrid::new(self.grid.s_min, self.grid.s_max, self.grid.per_octave)
    }

    pub fn stack_inputs(&self) -> Result<StackInputs> {
        Ok(StackInputs {
            params: self.model.params()?,
            surface: self.surface.clone(),
            localize: self.localize,
            grid: self.spatial_grid()?,
            sgrid: self.log_grid()?,
            ansatz: self.ansatz.clone(),
        })
    }

    pub fn wants(&self, kind: ExperimentKind) -> bool {
        self.experiments.contains(&kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("[model]\ndim = 1\nwobble = 2\n").unwrap_err();
        assert!(err.to_string().contains("wobble"), "{err}");
    }

    #[test]
    fn dimension_five_is_rejected() {
        let err = ExperimentConfig::from_toml("[model]\ndim = 5\n").unwrap_err();
        assert!(err.to_string().contains("dim outside 1..4"), "{err}");
    }

    #[test]
    fn surface_kinds_parse() {
        let cfg = ExperimentConfig::from_toml("[surface]\nkind = \"quadratic\"\nell = 0.2\na = 0.1\n").unwrap();
        assert_eq!(cfg.surface, SurfaceSpec::Quadratic { ell: 0.2, a: 0.1 });
    }
}
