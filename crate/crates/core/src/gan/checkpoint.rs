//! `GANC` checkpoint files.
//!
//! ```text
//! magic "GANC" | u32 version (1) | u64 iteration
//! | u32 len | len bytes UTF-8 JSON architecture descriptor
//! | u32 tensor count | per tensor: u32 rank, rank × u32 dims, f32 data
//! ```
//!
//! All integers and floats are little-endian. Tensors are ordered trunk,
//! heads by track, discriminator; each layer contributes its weight matrix
//! `[out, in]` followed by its bias `[out]`.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ArchDescriptor, ComponentArch, ComposerGan};
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GANC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub arch: ArchDescriptor,
    pub tensors: Vec<Tensor>,
}

fn expected_dims(arch: &ArchDescriptor) -> Vec<Vec<u32>> {
    let layer_dims = |c: &ComponentArch| -> Vec<Vec<u32>> {
        c.dims
            .windows(2)
            .flat_map(|d| [vec![d[1] as u32, d[0] as u32], vec![d[1] as u32]])
            .collect()
    };
    let mut out = layer_dims(&arch.trunk);
    for _ in 0..arch.shape.tracks {
        out.extend(layer_dims(&arch.head));
    }
    out.extend(layer_dims(&arch.discriminator));
    out
}

impl Checkpoint {
    /// Snapshot of a model's parameters (narrowed to `f32`).
    pub fn capture(gan: &ComposerGan, iteration: u64) -> Self {
        let tensors = gan
            .all_layers()
            .flat_map(|l| {
                [
                    Tensor {
                        dims: vec![l.out_dim() as u32, l.in_dim() as u32],
                        data: l.weights.iter().map(|&w| w as f32).collect(),
                    },
                    Tensor {
                        dims: vec![l.out_dim() as u32],
                        data: l.bias.iter().map(|&b| b as f32).collect(),
                    },
                ]
            })
            .collect();
        Checkpoint {
            iteration,
            arch: gan.arch(),
            tensors,
        }
    }

    /// Checks that the tensors are exactly those the descriptor implies.
    pub fn validate(&self) -> Result<()> {
        self.arch.shape.validate()?;
        let arch = &self.arch;
        for c in [&arch.trunk, &arch.head, &arch.discriminator] {
            if c.dims.len() < 2 || c.activations.len() != c.dims.len() - 1 {
                return Err(Error::ArchitectureMismatch("malformed component layout".into()));
            }
        }
        let expected = expected_dims(arch);
        if expected.len() != self.tensors.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "descriptor implies {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (i, (dims, t)) in expected.iter().zip(&self.tensors).enumerate() {
            if *dims != t.dims {
                return Err(Error::ArchitectureMismatch(format!(
                    "tensor {i}: expected dims {dims:?}, found {:?}",
                    t.dims
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds the model this checkpoint was captured from.
    pub fn to_model(&self) -> Result<ComposerGan> {
        self.validate()?;
        let mut tensors = self.tensors.iter();
        let mut build = |c: &ComponentArch| -> Result<Mlp> {
            let layers = c
                .dims
                .windows(2)
                .zip(&c.activations)
                .map(|(d, &act)| {
                    let w = tensors.next().unwrap();
                    let b = tensors.next().unwrap();
                    DenseLayer::from_parts(
                        d[0],
                        d[1],
                        w.data.iter().map(|&v| v as f64).collect(),
                        b.data.iter().map(|&v| v as f64).collect(),
                        act,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Mlp::new(layers)
        };
        let trunk = build(&self.arch.trunk)?;
        let heads = (0..self.arch.shape.tracks)
            .map(|_| build(&self.arch.head))
            .collect::<Result<Vec<_>>>()?;
        let discriminator = build(&self.arch.discriminator)?;
        let gan = ComposerGan::from_parts(self.arch.shape, trunk, heads, discriminator)?;
        if gan.arch() != self.arch {
            return Err(Error::ArchitectureMismatch("descriptor is inconsistent".into()));
        }
        Ok(gan)
    }
}

impl ComposerGan {
    /// Overwrites this model's parameters; the checkpoint must describe the
    /// same architecture.
    pub fn load_weights(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.arch != self.arch() {
            return Err(Error::ArchitectureMismatch(
                "checkpoint describes a different network".into(),
            ));
        }
        *self = ckpt.to_model()?;
        Ok(())
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let arch = serde_json::to_vec(&ckpt.arch)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    // Writes into a Vec cannot fail.
    out.write_u32::<LittleEndian>(CHECKPOINT_VERSION).unwrap();
    out.write_u64::<LittleEndian>(ckpt.iteration).unwrap();
    out.write_u32::<LittleEndian>(arch.len() as u32).unwrap();
    out.extend_from_slice(&arch);
    out.write_u32::<LittleEndian>(ckpt.tensors.len() as u32).unwrap();
    for t in &ckpt.tensors {
        out.write_u32::<LittleEndian>(t.dims.len() as u32).unwrap();
        for &d in &t.dims {
            out.write_u32::<LittleEndian>(d).unwrap();
        }
        for &v in &t.data {
            out.write_f32::<LittleEndian>(v).unwrap();
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedCheckpoint);
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let truncated = |_| Error::TruncatedCheckpoint;

    let version = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let iteration = cur.read_u64::<LittleEndian>().map_err(truncated)?;
    let arch_len = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let remaining = bytes.len() - 4 - cur.position() as usize;
    if arch_len > remaining {
        return Err(Error::TruncatedCheckpoint);
    }
    let mut arch_buf = vec![0u8; arch_len];
    cur.read_exact(&mut arch_buf).map_err(truncated)?;
    let arch: ArchDescriptor = serde_json::from_slice(&arch_buf)
        .map_err(|e| Error::ArchitectureMismatch(format!("unreadable descriptor: {e}")))?;

    let count = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rank = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let dims = (0..rank)
            .map(|_| cur.read_u32::<LittleEndian>().map_err(truncated))
            .collect::<Result<Vec<u32>>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or(Error::TruncatedCheckpoint)?;
        let remaining = bytes.len() - 4 - cur.position() as usize;
        if len.checked_mul(4).is_none_or(|n| n > remaining) {
            return Err(Error::TruncatedCheckpoint);
        }
        let mut data = vec![0f32; len];
        cur.read_f32_into::<LittleEndian>(&mut data).map_err(truncated)?;
        tensors.push(Tensor { dims, data });
    }
    if (cur.position() as usize) + 4 != bytes.len() {
        return Err(Error::TrailingBytes);
    }
    let ckpt = Checkpoint {
        iteration,
        arch,
        tensors,
    };
    ckpt.validate()?;
    Ok(ckpt)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
