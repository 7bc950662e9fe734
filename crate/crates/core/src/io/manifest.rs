//! Artifact directories: data files plus a JSON manifest of checksums.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ForgeError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: String,
    pub generator: String,
    pub files: Vec<FileEntry>,
    /// Kind-specific metadata.
    pub meta: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            generator: concat!("forge ", env!("CARGO_PKG_VERSION")).to_string(),
            files: Vec::new(),
            meta,
        }
    }

    /// Writes `bytes` to dir/name and records its checksum.
    pub fn add_file(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(dir.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_NAME), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let raw = fs::read(dir.join(MANIFEST_NAME))
            .map_err(|e| ForgeError::Store(format!("cannot read manifest in {}: {e}", dir.display())))?;
        let m: Manifest = serde_json::from_slice(&raw)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(ForgeError::Store(format!(
                "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    /// Reads a listed file and checks its digest.
    pub fn read_file(&self, dir: &Path, name: &str) -> Result<Vec<u8>> {
        let entry = self
            .files
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| ForgeError::Store(format!("{name} is not listed in the manifest")))?;
        let bytes = fs::read(dir.join(name))?;
        let digest = sha256_hex(&bytes);
        if digest != entry.sha256 {
            return Err(ForgeError::Store(format!("checksum mismatch for {name}")));
        }
        Ok(bytes)
    }

    /// Files whose digest does not match.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            match fs::read(dir.join(&f.name)) {
                Ok(b) if sha256_hex(&b) == f.sha256 => {}
                _ => bad.push(f.name.clone()),
            }
        }
        Ok(bad)
    }
}

/// Little-endian f64 packing.
pub fn pack(values: &[f64], out: &mut Vec<u8>) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Reads `count` f64 values starting at byte `*pos`.
pub fn unpack(bytes: &[u8], pos: &mut usize, count: usize) -> Result<Vec<f64>> {
    let end = *pos + count * 8;
    if end > bytes.len() {
        return Err(ForgeError::Store(format!("binary payload truncated at byte {}", bytes.len())));
    }
    let out = bytes[*pos..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    *pos = end;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("test", serde_json::json!({"a": 1}));
        m.add_file(dir.path(), "x.bin", &[1, 2, 3]).unwrap();
        m.write(dir.path()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("x.bin"), [1, 2, 4]).unwrap();
        assert_eq!(back.verify(dir.path()).unwrap(), vec!["x.bin".to_string()]);
        assert!(back.read_file(dir.path(), "x.bin").is_err());
    }

    #[test]
    fn packing_round_trips() {
        let v = [1.5, -0.0, f64::NAN, 1e-300];
        let mut b = Vec::new();
        pack(&v, &mut b);
        let mut pos = 0;
        let w = unpack(&b, &mut pos, 4).unwrap();
        assert_eq!(w[0], 1.5);
        assert!(w[2].is_nan());
        assert_eq!(pos, 32);
        assert!(unpack(&b, &mut pos, 1).is_err());
    }
}
