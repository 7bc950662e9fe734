//! On-disk ansatz stacks and solver checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{pack, sha256_hex, unpack, Manifest};
use crate::ansatz::{AnsatzConfig, AnsatzStack, Level, SurfaceFields};
use crate::error::{ForgeError, Result};
use crate::geometry::{build_bundle, LocalizeConfig, SurfaceBundle, SurfaceSpec};
use crate::grid::{LogGrid, SpaceTimeField, SpatialGrid};
use crate::model::ModelParams;
use crate::solver::Checkpoint;

const STACK_FILE: &str = "stack.bin";
const CHECKPOINT_FILE: &str = "checkpoints.bin";
/// Points per axis used when verifying ψ after localization.
const VERIFY_PER_AXIS: usize = 16;

/// Everything a stack is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackInputs {
    pub params: ModelParams,
    pub surface: SurfaceSpec,
    pub localize: LocalizeConfig,
    pub grid: SpatialGrid,
    pub sgrid: LogGrid,
    pub ansatz: AnsatzConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LevelMeta {
    j: usize,
    r: f64,
    s_top: f64,
    top: usize,
}

impl StackInputs {
    /// Content key for caching.
    pub fn key(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("inputs serialize"))[..16].to_string()
    }

    pub fn bundle(&self) -> Result<SurfaceBundle> {
        let (surface, _) = self.surface.build(self.params.dim)?.aligned();
        Ok(build_bundle(surface, &self.params, &self.localize, VERIFY_PER_AXIS)?.0)
    }

    pub fn build(&self) -> Result<AnsatzStack> {
        AnsatzStack::build(&self.params, &self.bundle()?, &self.grid, &self.sgrid, &self.ansatz)
    }
}

pub fn save_stack(dir: &Path, inputs: &StackInputs, stack: &AnsatzStack) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    for l in &stack.levels {
        pack(&l.chi, &mut bytes);
        for f in [&l.v, &l.v_s, &l.v_ss, &l.residual] {
            pack(&f.data, &mut bytes);
        }
    }
    for f in [&stack.correction, &stack.correction_s, &stack.correction_ss] {
        pack(&f.data, &mut bytes);
    }
    let levels: Vec<LevelMeta> =
        stack.levels.iter().map(|l| LevelMeta { j: l.j, r: l.r, s_top: l.s_top, top: l.top }).collect();
    let mut m = Manifest::new("ansatz_stack", serde_json::json!({ "inputs": inputs, "levels": levels }));
    m.add_file(dir, STACK_FILE, &bytes)?;
    m.write(dir)
}

pub fn load_stack(dir: &Path) -> Result<(StackInputs, AnsatzStack)> {
    let m = Manifest::read(dir)?;
    if m.kind != "ansatz_stack" {
        return Err(ForgeError::Store(format!("{} holds a {} artifact, not a stack", dir.display(), m.kind)));
    }
    let inputs: StackInputs = serde_json::from_value(m.meta["inputs"].clone())?;
    let levels: Vec<LevelMeta> = serde_json::from_value(m.meta["levels"].clone())?;
    let bytes = m.read_file(dir, STACK_FILE)?;
    let bundle = inputs.bundle()?;
    let fields = SurfaceFields::build(&inputs.params, &bundle, &inputs.grid, inputs.ansatz.fd_step)?;
    let (ns, nx) = (inputs.sgrid.len(), inputs.grid.len());
    let mut pos = 0;
    let field = |pos: &mut usize| -> Result<SpaceTimeField> {
        Ok(SpaceTimeField { ns, nx, data: unpack(&bytes, pos, ns * nx)? })
    };
    let mut out_levels = Vec::with_capacity(levels.len());
    for meta in &levels {
        let chi = unpack(&bytes, &mut pos, nx)?;
        let v = field(&mut pos)?;
        let v_s = field(&mut pos)?;
        let v_ss = field(&mut pos)?;
        let residual = field(&mut pos)?;
        out_levels.push(Level { j: meta.j, r: meta.r, s_top: meta.s_top, top: meta.top, chi, v, v_s, v_ss, residual });
    }
    let correction = field(&mut pos)?;
    let correction_s = field(&mut pos)?;
    let correction_ss = field(&mut pos)?;
    if pos != bytes.len() {
        return Err(ForgeError::Store(format!("{} trailing bytes in {STACK_FILE}", bytes.len() - pos)));
    }
    let stack = AnsatzStack {
        params: inputs.params.clone(),
        bundle,
        grid: inputs.grid.clone(),
        sgrid: inputs.sgrid.clone(),
        fields,
        levels: out_levels,
        correction,
        correction_s,
        correction_ss,
    };
    Ok((inputs, stack))
}

/// Loads the stack for `inputs` from `cache/<key>` or builds and stores it.
/// Returns the stack and whether it came from the cache.
pub fn cached_stack(inputs: &StackInputs, cache: Option<&Path>) -> Result<(AnsatzStack, bool)> {
    let Some(cache) = cache else {
        return Ok((inputs.build()?, false));
    };
    let dir: PathBuf = cache.join(format!("stack-{}", inputs.key()));
    if dir.join(super::manifest::MANIFEST_NAME).exists() {
        if let Ok((stored, stack)) = load_stack(&dir) {
            if &stored == inputs {
                return Ok((stack, true));
            }
        }
    }
    let stack = inputs.build()?;
    save_stack(&dir, inputs, &stack)?;
    Ok((stack, false))
}

pub fn save_checkpoints(dir: &Path, grid: &SpatialGrid, cps: &[Checkpoint]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    for c in cps {
        for f in [&c.w, &c.w_s, &c.v, &c.v_s] {
            pack(f, &mut bytes);
        }
    }
    let index: Vec<(usize, f64)> = cps.iter().map(|c| (c.step, c.s)).collect();
    let mut m = Manifest::new("checkpoints", serde_json::json!({ "grid": grid, "index": index }));
    m.add_file(dir, CHECKPOINT_FILE, &bytes)?;
    m.write(dir)
}

pub fn load_checkpoints(dir: &Path) -> Result<(SpatialGrid, Vec<Checkpoint>)> {
    let m = Manifest::read(dir)?;
    if m.kind != "checkpoints" {
        return Err(ForgeError::Store(format!("{} holds a {} artifact, not checkpoints", dir.display(), m.kind)));
    }
    let grid: SpatialGrid = serde_json::from_value(m.meta["grid"].clone())?;
    let index: Vec<(usize, f64)> = serde_json::from_value(m.meta["index"].clone())?;
    let bytes = m.read_file(dir, CHECKPOINT_FILE)?;
    let nx = grid.len();
    let mut pos = 0;
    let mut out = Vec::with_capacity(index.len());
    for (step, s) in index {
        out.push(Checkpoint {
            step,
            s,
            w: unpack(&bytes, &mut pos, nx)?,
            w_s: unpack(&bytes, &mut pos, nx)?,
            v: unpack(&bytes, &mut pos, nx)?,
            v_s: unpack(&bytes, &mut pos, nx)?,
        });
    }
    Ok((grid, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_inputs() -> StackInputs {
        StackInputs {
            params: ModelParams::derive(1, 3.0).unwrap(),
            surface: SurfaceSpec::Zero,
            localize: LocalizeConfig::default(),
            grid: SpatialGrid::new(1, 101, 4.0).unwrap(),
            sgrid: LogGrid::new(1e-3, 1.0, 8).unwrap(),
            ansatz: AnsatzConfig { levels: Some(2), ..Default::default() },
        }
    }

    #[test]
    fn stack_survives_a_store_cycle() {
        let inputs = small_inputs();
        let dir = tempfile::tempdir().unwrap();
        let (built, hit) = cached_stack(&inputs, Some(dir.path())).unwrap();
        assert!(!hit);
        let (loaded, hit) = cached_stack(&inputs, Some(dir.path())).unwrap();
        assert!(hit);
        let bits = |f: &SpaceTimeField| f.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(loaded.levels.len(), built.levels.len());
        assert_eq!(bits(&loaded.correction), bits(&built.correction));
        assert_eq!(bits(&loaded.last().residual), bits(&built.last().residual));
        assert_eq!(loaded.fields.kappa, built.fields.kappa);
    }

    #[test]
    fn corrupted_stack_is_rejected() {
        let inputs = small_inputs();
        let dir = tempfile::tempdir().unwrap();
        save_stack(dir.path(), &inputs, &inputs.build().unwrap()).unwrap();
        let path = dir.path().join(STACK_FILE);
        let mut b = fs::read(&path).unwrap();
        b[10] ^= 1;
        fs::write(&path, b).unwrap();
        assert!(load_stack(dir.path()).is_err());
    }
}
