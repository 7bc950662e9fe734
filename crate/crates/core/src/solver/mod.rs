//! Time integration of the w-equation and its energy diagnostics.

pub mod audit;
pub mod cone;
pub mod config;
pub mod energy;
pub mod mms;
pub mod run;
pub mod sampler;
pub mod scheme;

pub use audit::{energy_step_audit, growth_fit, lower_bound_check, EnergyAudit, LowerBoundRow};
pub use cone::{cone_uniqueness_test, ConeConfig, ConeLevel, ConeReport};
pub use config::SolverConfig;
pub use energy::{energy_row, EnergyRow};
pub use mms::{manufactured_convergence, MmsConfig, MmsLevel, MmsReport};
pub use run::{solve, truncation_level, Checkpoint, SolveOutput};
pub use sampler::{AnsatzSampler, AnsatzSlice};
pub use scheme::{Coefficients, Forcing, NoForcing, SchemeState, WaveScheme};
