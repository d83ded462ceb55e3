//! `VTM1` parameter checkpoints.
//!
//! Layout: magic `VTM1`, a little-endian `u32` length followed by that many
//! bytes of JSON descriptor (caller-defined header plus the slot table),
//! a little-endian `u64` value count, then the values as little-endian `f64`
//! in store order.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::params::{ParameterStore, Slot};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VTM1";

#[derive(Serialize, Deserialize)]
struct Descriptor<H> {
    header: H,
    slots: Vec<Slot>,
}

pub fn encode_checkpoint<H: Serialize>(header: &H, store: &ParameterStore) -> Vec<u8> {
    let descriptor = serde_json::to_vec(&Descriptor {
        header,
        slots: store.slots().to_vec(),
    })
    .expect("descriptor serializes");
    let mut buf = Vec::with_capacity(16 + descriptor.len() + store.len() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
    buf.extend_from_slice(&descriptor);
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for v in store.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Decoded checkpoint: header, slot table (names and shapes) and values.
pub struct Checkpoint<H> {
    pub header: H,
    pub slots: Vec<Slot>,
    pub values: Vec<f64>,
}

impl<H> Checkpoint<H> {
    /// Copies the values into `store` after checking that the slot table
    /// matches the store's layout exactly.
    pub fn restore_into(self, store: &mut ParameterStore, path: &Path) -> Result<H> {
        let same = self.slots.len() == store.slots().len()
            && self
                .slots
                .iter()
                .zip(store.slots())
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if !same {
            return Err(Error::format(
                "checkpoint",
                path,
                "parameter shapes do not match the model spec",
            ));
        }
        store.load_values(self.values)?;
        Ok(self.header)
    }
}

pub fn decode_checkpoint<H: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<Checkpoint<H>> {
    let bad = |m: &str| Error::format("checkpoint", path, m);
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing VTM1 header"));
    }
    let desc_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rest = &bytes[8..];
    if rest.len() < desc_len + 8 {
        return Err(bad("truncated descriptor"));
    }
    let descriptor: Descriptor<H> =
        serde_json::from_slice(&rest[..desc_len]).map_err(|e| bad(&e.to_string()))?;
    let count = u64::from_le_bytes(rest[desc_len..desc_len + 8].try_into().unwrap()) as usize;
    let body = &rest[desc_len + 8..];
    let expected: usize = descriptor.slots.iter().map(Slot::len).sum();
    if count != expected || body.len() != count * 8 {
        return Err(bad("value count does not match the slot table"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Checkpoint {
        header: descriptor.header,
        slots: descriptor.slots,
        values,
    })
}

pub fn write_checkpoint<H: Serialize>(path: &Path, header: &H, store: &ParameterStore) -> Result<()> {
    fs::write(path, encode_checkpoint(header, store)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<H: DeserializeOwned>(path: &Path) -> Result<Checkpoint<H>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
