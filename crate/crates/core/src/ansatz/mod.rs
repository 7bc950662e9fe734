//! The approximate solution V_J: profile V₀, corrections v_j, residuals ℰ_j.

pub mod level;
pub mod profile;
pub mod stack;
pub mod verify;

pub use profile::{Profile, SpaceJet, SurfaceFields};
pub use stack::{AnsatzConfig, AnsatzStack, Level, SweepOrder};
pub use verify::{
    compare_bounds, concentration_exponent, correction_ode_residual, dt_v0_concentration, envelope_bound_constants,
    level_sup_series, profile_ode_check, residual_norm_series, residual_series, sandwich_check, BoundConstant,
    BoundStability, DecayFit, ProfileOdeReport, ResidualField, ResidualWeight, SandwichReport,
};
