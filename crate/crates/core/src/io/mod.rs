//! Artifact storage and CSV reports.

pub mod csv_out;
pub mod manifest;
pub mod store;

pub use csv_out::{csv_bytes, energy_table, write_csv, write_energy_csv};
pub use manifest::{sha256_hex, FileEntry, Manifest, MANIFEST_NAME, SCHEMA_VERSION};
pub use store::{cached_stack, load_checkpoints, load_stack, save_checkpoints, save_stack, StackInputs};
