//! Field persistence and tabular output.
//!
//! A field on disk is a pair of files sharing one stem: `<stem>.json` (the
//! sidecar: grid, kind, encoding, payload length) and `<stem>.bin` (the
//! payload: little-endian `f64` samples, row-major, time level slowest;
//! complex fields interleave re/im pairs). The decoder is a pure function of
//! the two byte buffers so it can be driven directly by a fuzzer, and it
//! validates sizes against the sidecar before allocating.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::{Field, FieldKind};
use crate::grid::{GridSpec, MAX_TOTAL_SAMPLES};
use crate::{Error, Result};

/// The one payload encoding this crate writes.
pub const ENCODING_F64LE: &str = "f64le";

/// Sidecar metadata stored as JSON next to the binary payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub grid: GridSpec,
    pub kind: FieldKind,
    /// Payload encoding tag; only [`ENCODING_F64LE`] is understood.
    pub encoding: String,
    /// Exact payload size in bytes.
    pub payload_len: usize,
}

/// Number of `f64` lanes per sample for a kind.
fn lanes(kind: FieldKind) -> usize {
    match kind {
        FieldKind::Real => 1,
        FieldKind::Complex => 2,
    }
}

/// Build the sidecar + payload for a field.
pub fn encode_field(field: &Field) -> (FieldSidecar, Vec<u8>) {
    let kind = field.kind();
    let mut payload = Vec::with_capacity(field.values().len() * lanes(kind) * 8);
    for v in field.values() {
        payload.extend_from_slice(&v.re.to_le_bytes());
        if kind == FieldKind::Complex {
            payload.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    let sidecar = FieldSidecar {
        grid: field.grid().clone(),
        kind,
        encoding: ENCODING_F64LE.to_string(),
        payload_len: payload.len(),
    };
    (sidecar, payload)
}

/// Parse a sidecar from its JSON bytes.
pub fn parse_sidecar(bytes: &[u8]) -> Result<FieldSidecar> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Codec(format!("sidecar not UTF-8: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let sidecar: FieldSidecar = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Codec(format!("sidecar parse failed at {}: {}", e.path(), e.inner())))?;
    Ok(sidecar)
}

/// Decode a field from sidecar + payload. Pure; validates every size before
/// allocating and re-checks sample finiteness through the field constructor.
pub fn decode_field_bytes(sidecar: &FieldSidecar, payload: &[u8]) -> Result<Field> {
    sidecar.grid.validate()?;
    if sidecar.encoding != ENCODING_F64LE {
        return Err(Error::Codec(format!(
            "unknown payload encoding {:?} (expected {:?})",
            sidecar.encoding, ENCODING_F64LE
        )));
    }
    let total = sidecar.grid.total_len();
    if total > MAX_TOTAL_SAMPLES {
        return Err(Error::Codec(format!(
            "declared grid carries {total} samples, above the cap {MAX_TOTAL_SAMPLES}"
        )));
    }
    let expected = total
        .checked_mul(lanes(sidecar.kind))
        .and_then(|w| w.checked_mul(8))
        .ok_or_else(|| Error::Codec("payload size overflows".into()))?;
    if sidecar.payload_len != expected {
        return Err(Error::Codec(format!(
            "sidecar declares {} payload bytes, grid needs {expected}",
            sidecar.payload_len
        )));
    }
    if payload.len() != expected {
        return Err(Error::Codec(format!(
            "payload has {} bytes, sidecar declares {expected}",
            payload.len()
        )));
    }
    let mut values = Vec::with_capacity(total);
    let mut chunks = payload.chunks_exact(8);
    for _ in 0..total {
        let re = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
        let im = if sidecar.kind == FieldKind::Complex {
            f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap())
        } else {
            0.0
        };
        values.push(Complex64::new(re, im));
    }
    Field::from_values(sidecar.grid.clone(), sidecar.kind, values)
}

fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

fn payload_path(stem: &Path) -> PathBuf {
    stem.with_extension("bin")
}

/// Write bytes atomically: to `<path>.tmp` first, then rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write a text document atomically (temp + rename).
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Persist a field as `<stem>.json` + `<stem>.bin` (both written atomically).
pub fn write_field(stem: &Path, field: &Field) -> Result<()> {
    let (sidecar, payload) = encode_field(field);
    let json = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| Error::Codec(format!("sidecar serialize failed: {e}")))?;
    write_atomic(&payload_path(stem), &payload)?;
    write_atomic(&sidecar_path(stem), &json)?;
    Ok(())
}

/// Load a field written by [`write_field`].
pub fn read_field(stem: &Path) -> Result<Field> {
    let sidecar = parse_sidecar(&fs::read(sidecar_path(stem))?)?;
    let payload = fs::read(payload_path(stem))?;
    decode_field_bytes(&sidecar, &payload)
}

/// Write a CSV table with full-precision floats (`{:.16e}`), atomically.
pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::ShapeMismatch(format!(
                "csv row has {} cells, header has {}",
                row.len(),
                headers.len()
            )));
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
