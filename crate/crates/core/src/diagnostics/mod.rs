//! Pullback to (t, x), the concentration functional and power-law reports.

pub mod concentration;
pub mod pullback;
pub mod rate;

pub use concentration::{check_concentration_inputs, concentration, ConcentrationRow, ConcentrationSeries};
pub use pullback::{pullback, pullback_point, FieldSource, PullbackField, Trajectory};
pub use rate::{blowup_rate, log_spaced, BlowupRate};
