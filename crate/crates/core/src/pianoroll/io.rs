//! `PRD1` dataset files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "PRD1" | u32 version (1) | u32 count | u32 tracks | u32 bars
//! | u32 steps_per_bar | u32 pitches | i32 base_midi_pitch
//! | count × ceil(cells / 8) bytes, MSB-first bit-packed cells
//! ```
//!
//! Roll ids and the generating style live in an optional `<stem>.meta.json`
//! sidecar; without it ids default to `0..count`.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{Dataset, Pianoroll, PianorollShape, StyleParams};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"PRD1";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    ids: Vec<u64>,
    style: Option<StyleParams>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn encode_dataset(dataset: &Dataset) -> Vec<u8> {
    let shape = dataset.shape();
    let roll_bytes = shape.cells().div_ceil(8);
    let mut out = Vec::with_capacity(HEADER_LEN + roll_bytes * dataset.len());
    out.extend_from_slice(DATASET_MAGIC);
    // Writes into a Vec cannot fail.
    for v in [
        DATASET_VERSION,
        dataset.len() as u32,
        shape.tracks as u32,
        shape.bars as u32,
        shape.steps_per_bar as u32,
        shape.pitches as u32,
    ] {
        out.write_u32::<LittleEndian>(v).unwrap();
    }
    out.write_i32::<LittleEndian>(shape.base_midi_pitch).unwrap();
    for roll in dataset.rolls() {
        let start = out.len();
        out.resize(start + roll_bytes, 0);
        for k in 0..shape.cells() {
            if roll.get_flat(k) {
                out[start + k / 8] |= 0x80 >> (k % 8);
            }
        }
    }
    out
}

/// Parses the binary body. Ids are `0..count`; no sidecar is consulted.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedDataset);
    }
    if &bytes[..4] != DATASET_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let mut next = || cur.read_u32::<LittleEndian>().map_err(|_| Error::TruncatedDataset);
    let version = next()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = next()? as usize;
    let dims = [next()?, next()?, next()?, next()?];
    let base = next()? as i32;
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let shape = PianorollShape::with_base_pitch(
        dims[0] as usize,
        dims[1] as usize,
        dims[2] as usize,
        dims[3] as usize,
        base,
    )?;

    let roll_bytes = shape.cells().div_ceil(8);
    let body = &bytes[HEADER_LEN..];
    let expected = roll_bytes
        .checked_mul(count)
        .ok_or(Error::TruncatedDataset)?;
    if body.len() < expected {
        return Err(Error::TruncatedDataset);
    }
    if body.len() > expected {
        return Err(Error::TrailingBytes);
    }
    let rolls = body
        .chunks_exact(roll_bytes)
        .map(|chunk| {
            let mut roll = Pianoroll::zeros(shape);
            for k in 0..shape.cells() {
                if chunk[k / 8] & (0x80 >> (k % 8)) != 0 {
                    roll.set_flat(k, true);
                }
            }
            roll
        })
        .collect();
    Dataset::from_rolls(shape, rolls)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(dataset)).map_err(|e| Error::io(path, e))?;
    let meta = Sidecar {
        ids: dataset.ids().to_vec(),
        style: dataset.style().cloned(),
    };
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let dataset = decode_dataset(&bytes)?;

    let meta_path = sidecar_path(path);
    if !meta_path.exists() {
        return Ok(dataset);
    }
    let raw = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Sidecar = serde_json::from_slice(&raw).map_err(|e| Error::Metadata(e.to_string()))?;
    if meta.ids.len() != dataset.len() {
        return Err(Error::Metadata(format!(
            "sidecar lists {} ids for {} rolls",
            meta.ids.len(),
            dataset.len()
        )));
    }
    let shape = *dataset.shape();
    Ok(Dataset::with_ids(shape, dataset.rolls, meta.ids)?.with_style(meta.style))
}
