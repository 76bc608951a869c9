//! Parameter checkpoints.
//!
//! Binary layout (little-endian): magic `AEWTS001`, version u32, 32-byte
//! SHA-256 of the canonical architecture-config JSON, then each parameter
//! slice in network order as `len:u64` followed by `len` f64 values. A
//! checkpoint only loads into a network built from a config with the same
//! hash.

use super::{Network, NetworkConfig};
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AEWTS001";
const CHECKPOINT_VERSION: u32 = 1;

/// Hex SHA-256 of the canonical (serde-ordered) config JSON.
pub fn config_hash(cfg: &NetworkConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    hex(&digest)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(net: &Network, cfg: &NetworkConfig, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let json = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(json.as_bytes());
    w.write_all(&digest)?;
    let mut err = None;
    net.for_each_param(|slice| {
        if err.is_some() {
            return;
        }
        if let Err(e) = (|| -> Result<()> {
            w.write_all(&(slice.len() as u64).to_le_bytes())?;
            let mut buf = Vec::with_capacity(slice.len() * 8);
            for v in slice {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
            Ok(())
        })() {
            err = Some(e);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    w.flush()?;
    Ok(())
}

/// Load checkpoint parameters into a network built from `cfg`. Refuses a
/// checkpoint whose stored config hash differs, printing both hashes.
pub fn load_checkpoint(net: &mut Network, cfg: &NetworkConfig, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 8 + 4 + 32 {
        return Err(Error::Format("checkpoint too short for its header".into()));
    }
    if &buf[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf[..8]),
            String::from_utf8_lossy(CHECKPOINT_MAGIC)
        )));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let stored_hash = hex(&buf[12..44]);
    let expected = config_hash(cfg);
    if stored_hash != expected {
        return Err(Error::Format(format!(
            "checkpoint was written for a different architecture: \
             checkpoint hash {stored_hash}, this config hashes to {expected}"
        )));
    }
    let mut pos = 44usize;
    let mut failure = None;
    net.for_each_param_mut(|slice| {
        if failure.is_some() {
            return;
        }
        if pos + 8 > buf.len() {
            failure = Some(format!("truncated at offset {pos}: missing slice length"));
            return;
        }
        let len = u64::from_le_bytes(buf[pos..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        if len != slice.len() {
            failure = Some(format!(
                "parameter slice length {len} does not match network slot of {}",
                slice.len()
            ));
            return;
        }
        if pos + len * 8 > buf.len() {
            failure = Some(format!("truncated at offset {pos}: payload needs {} bytes", len * 8));
            return;
        }
        for (i, v) in slice.iter_mut().enumerate() {
            *v = f64::from_le_bytes(buf[pos + i * 8..pos + i * 8 + 8].try_into().unwrap());
        }
        pos += len * 8;
    });
    if let Some(msg) = failure {
        return Err(Error::Format(msg));
    }
    if pos != buf.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} trailing bytes after the last parameter",
            buf.len() - pos
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::{build, Activation, LayerSpec, NetworkKind};
    use crate::numerics::SeededRng;

    fn small_cfg() -> NetworkConfig {
        NetworkConfig {
            input_dim: 4,
            latent_dim: 2,
            kind: NetworkKind::Ae,
            activation: Activation::Tanh,
            encoder: vec![
                LayerSpec::Dense { width: 3 },
                LayerSpec::BatchNorm,
                LayerSpec::Activation,
                LayerSpec::Dense { width: 2 },
            ],
            decoder: vec![LayerSpec::Dense { width: 4 }],
        }
    }

    #[test]
    fn roundtrip_restores_parameters() {
        let dir = std::env::temp_dir().join(format!("latentlens-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = small_cfg();
        let net = build(&cfg, &mut SeededRng::new(9)).unwrap();
        let path = dir.join("net.aewts");
        save_checkpoint(&net, &cfg, &path).unwrap();
        let mut other = build(&cfg, &mut SeededRng::new(1234)).unwrap();
        load_checkpoint(&mut other, &cfg, &path).unwrap();
        let mut a = Vec::new();
        net.for_each_param(|s| a.extend_from_slice(s));
        let mut b = Vec::new();
        other.for_each_param(|s| b.extend_from_slice(s));
        assert_eq!(a, b);
    }

    #[test]
    fn refuses_mismatched_architecture_printing_both_hashes() {
        let dir = std::env::temp_dir().join(format!("latentlens-ckpt2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = small_cfg();
        let net = build(&cfg, &mut SeededRng::new(9)).unwrap();
        let path = dir.join("net.aewts");
        save_checkpoint(&net, &cfg, &path).unwrap();
        let mut other_cfg = cfg.clone();
        other_cfg.decoder.push(LayerSpec::Activation);
        let mut other = build(&other_cfg, &mut SeededRng::new(0)).unwrap();
        let err = load_checkpoint(&mut other, &other_cfg, &path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&config_hash(&cfg)), "{msg}");
        assert!(msg.contains(&config_hash(&other_cfg)), "{msg}");
    }
}
