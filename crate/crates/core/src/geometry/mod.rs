//! Hypersurface localization, the flattened graph ψ, the map Λ and the
//! region 𝒯.

pub mod audit;
pub mod localize;
pub mod map;
pub mod psi;
pub mod region;
pub mod surface;

pub use audit::{audit_map, MapAudit};
pub use localize::{localize, Localization, LocalizeConfig, LocalizedSurface};
pub use map::LorentzGraphMap;
pub use psi::{build_bundle, PsiJet, PsiReport, SurfaceBundle};
pub use region::{cone_image_check, eta, sigma_prime, ConeCheck, InfluenceRegion};
pub use surface::{householder_to_e1, Hypersurface, SurfaceSpec, TabulatedSurface};
