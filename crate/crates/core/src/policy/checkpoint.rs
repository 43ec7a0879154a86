//! Binary checkpoint files for parameter snapshots.
//!
//! Byte layout (all integers little-endian):
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `b"JUNCNET1"`                          |
//! | 8      | 4    | format version (u32, currently 1)            |
//! | 12     | 8    | model version (u64)                          |
//! | 20     | 16   | config hash prefix (16 ASCII hex chars)      |
//! | 36     | 1    | mode: 0 decentralized, 1 centralized         |
//! | 37     | 4    | obs_dim (u32)                                |
//! | 41     | 4    | action_dim (u32)                             |
//! | 45     | 4    | layer count L (u32)                          |
//! | 49     | 9*L  | per layer: in_dim u32, out_dim u32, role u8  |
//! | ...    | 4*N  | parameter values (f32), layout order         |
//!
//! Roles: 0 hidden, 1 policy head, 2 log-std, 3 value head. N is implied by
//! the descriptors; any shortfall or excess bytes is a corruption error.

use super::net::{LayerDesc, LayerRole, Mode, ModelParameters};
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"JUNCNET1";
const FORMAT_VERSION: u32 = 1;
pub const HASH_PREFIX_LEN: usize = 16;

fn role_code(role: LayerRole) -> u8 {
    match role {
        LayerRole::Hidden => 0,
        LayerRole::PolicyHead => 1,
        LayerRole::LogStd => 2,
        LayerRole::ValueHead => 3,
    }
}

fn role_from_code(code: u8) -> Result<LayerRole> {
    Ok(match code {
        0 => LayerRole::Hidden,
        1 => LayerRole::PolicyHead,
        2 => LayerRole::LogStd,
        3 => LayerRole::ValueHead,
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown layer role code {other}"
            )))
        }
    })
}

pub fn save_checkpoint(
    params: &ModelParameters,
    config_hash: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    params.validate()?;
    if config_hash.len() < HASH_PREFIX_LEN || !config_hash.is_ascii() {
        return Err(Error::Checkpoint(format!(
            "config hash must be at least {HASH_PREFIX_LEN} ASCII chars"
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&params.version.to_le_bytes())?;
    w.write_all(&config_hash.as_bytes()[..HASH_PREFIX_LEN])?;
    w.write_all(&[match params.mode {
        Mode::Ctde => 0u8,
        Mode::Ctce => 1u8,
    }])?;
    w.write_all(&(params.obs_dim as u32).to_le_bytes())?;
    w.write_all(&(params.action_dim as u32).to_le_bytes())?;
    w.write_all(&(params.layout.len() as u32).to_le_bytes())?;
    for l in &params.layout {
        w.write_all(&(l.in_dim as u32).to_le_bytes())?;
        w.write_all(&(l.out_dim as u32).to_le_bytes())?;
        w.write_all(&[role_code(l.role)])?;
    }
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_corrupt(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint(format!("truncated checkpoint while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_corrupt(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Load a checkpoint, returning the parameters and the stored config hash
/// prefix for the caller to compare against its own config.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParameters, String)> {
    let mut r = BufReader::new(File::open(&path)?);
    let mut magic = [0u8; 8];
    read_exact_or_corrupt(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(
            "bad magic: not a network checkpoint file".into(),
        ));
    }
    let format = read_u32(&mut r, "format version")?;
    if format != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {format} (supported: {FORMAT_VERSION})"
        )));
    }
    let mut vbuf = [0u8; 8];
    read_exact_or_corrupt(&mut r, &mut vbuf, "model version")?;
    let version = u64::from_le_bytes(vbuf);
    let mut hash = [0u8; HASH_PREFIX_LEN];
    read_exact_or_corrupt(&mut r, &mut hash, "config hash")?;
    let hash = String::from_utf8(hash.to_vec())
        .map_err(|_| Error::Checkpoint("config hash is not valid ASCII".into()))?;
    let mut mode_b = [0u8; 1];
    read_exact_or_corrupt(&mut r, &mut mode_b, "mode")?;
    let mode = match mode_b[0] {
        0 => Mode::Ctde,
        1 => Mode::Ctce,
        m => return Err(Error::Checkpoint(format!("unknown mode code {m}"))),
    };
    let obs_dim = read_u32(&mut r, "obs_dim")? as usize;
    let action_dim = read_u32(&mut r, "action_dim")? as usize;
    let layer_count = read_u32(&mut r, "layer count")? as usize;
    if layer_count > 1024 {
        return Err(Error::Checkpoint(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut layout = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let in_dim = read_u32(&mut r, "layer in_dim")? as usize;
        let out_dim = read_u32(&mut r, "layer out_dim")? as usize;
        let mut role = [0u8; 1];
        read_exact_or_corrupt(&mut r, &mut role, "layer role")?;
        let role = role_from_code(role[0])
            .map_err(|e| Error::Checkpoint(format!("layer {i}: {e}")))?;
        layout.push(LayerDesc {
            in_dim,
            out_dim,
            role,
        });
    }
    let n_values = ModelParameters::expected_len(&layout);
    let mut values = Vec::with_capacity(n_values);
    for _ in 0..n_values {
        let mut b = [0u8; 4];
        read_exact_or_corrupt(&mut r, &mut b, "parameter values")?;
        values.push(f32::from_le_bytes(b));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint(
            "trailing bytes after parameter values".into(),
        ));
    }
    let params = ModelParameters {
        values,
        layout,
        mode,
        obs_dim,
        action_dim,
        version,
    };
    params.validate().map_err(|e| match e {
        Error::Net(m) => Error::Checkpoint(m),
        other => other,
    })?;
    Ok((params, hash))
}
