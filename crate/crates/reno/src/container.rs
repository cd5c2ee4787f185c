//! The "RNO1" binary container: magic bytes, a version word, a record
//! type word, a length-prefixed JSON metadata block, and an f64
//! little-endian payload. Self-describing and trivially parseable from
//! any language.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::frames::{AmbientSpace, Frame, PeriodicFunction};

pub const MAGIC: [u8; 4] = *b"RNO1";
pub const VERSION: u32 = 1;

pub const RECORD_FRAME: u32 = 1;
pub const RECORD_SAMPLE_VECTOR: u32 = 2;
pub const RECORD_PERIODIC_FUNCTION: u32 = 3;
pub const RECORD_MODEL_CHECKPOINT: u32 = 4;
pub const RECORD_DATASET: u32 = 5;

/// One container record. The JSON metadata carries every shape field
/// (k_max, element counts, layer sizes); the payload is a flat list of
/// doubles whose layout the metadata describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub record_type: u32,
    pub metadata: Value,
    pub payload: Vec<f64>,
}

impl Record {
    pub fn new(record_type: u32, metadata: Value, payload: Vec<f64>) -> Self {
        Record {
            record_type,
            metadata,
            payload,
        }
    }

    /// Integer metadata field lookup with a typed error.
    pub fn meta_usize(&self, key: &str) -> Result<usize> {
        self.metadata
            .get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::Format(format!("missing metadata field {key}")))
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format(format!("missing metadata field {key}")))
    }
}

/// Writes one record.
pub fn write_record(w: &mut impl Write, record: &Record) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&record.record_type.to_le_bytes())?;
    let meta = serde_json::to_string(&record.metadata)
        .map_err(|e| Error::Format(format!("metadata encode: {e}")))?;
    let meta_bytes = meta.as_bytes();
    w.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
    w.write_all(meta_bytes)?;
    w.write_all(&(record.payload.len() as u64).to_le_bytes())?;
    for v in &record.payload {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Reads one record, validating magic and version.
pub fn read_record(r: &mut impl Read) -> Result<Record> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = read_exact_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let record_type = read_exact_u32(r)?;
    let meta_len = read_exact_u32(r)? as usize;
    let mut meta_buf = vec![0u8; meta_len];
    r.read_exact(&mut meta_buf)?;
    let meta_str = std::str::from_utf8(&meta_buf)
        .map_err(|_| Error::Format("metadata is not utf-8".into()))?;
    let metadata: Value = serde_json::from_str(meta_str)
        .map_err(|e| Error::Format(format!("metadata decode: {e}")))?;
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf)?;
    let payload_len = u64::from_le_bytes(len_buf) as usize;
    let mut payload = Vec::with_capacity(payload_len);
    let mut val_buf = [0u8; 8];
    for _ in 0..payload_len {
        r.read_exact(&mut val_buf)?;
        payload.push(f64::from_le_bytes(val_buf));
    }
    Ok(Record {
        record_type,
        metadata,
        payload,
    })
}

pub fn write_record_file(path: &std::path::Path, record: &Record) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_record(&mut f, record)?;
    f.flush()?;
    Ok(())
}

pub fn read_record_file(path: &std::path::Path) -> Result<Record> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_record(&mut f)
}

/// Interleaves complex coefficients as (re, im) pairs.
pub fn interleave(coeffs: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * coeffs.len());
    for z in coeffs {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

pub fn deinterleave(payload: &[f64]) -> Result<Vec<Complex64>> {
    if !payload.len().is_multiple_of(2) {
        return Err(Error::Format("odd interleaved payload length".into()));
    }
    Ok(payload
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect())
}

pub fn function_to_record(f: &PeriodicFunction) -> Record {
    Record::new(
        RECORD_PERIODIC_FUNCTION,
        serde_json::json!({ "k_max": f.space().k_max() }),
        interleave(f.coeffs()),
    )
}

pub fn function_from_record(record: &Record) -> Result<PeriodicFunction> {
    if record.record_type != RECORD_PERIODIC_FUNCTION {
        return Err(Error::Format("record is not a periodic function".into()));
    }
    let k_max = record.meta_usize("k_max")?;
    let coeffs = deinterleave(&record.payload)?;
    PeriodicFunction::new(AmbientSpace::new(k_max), coeffs)
}

pub fn frame_to_record(frame: &Frame) -> Record {
    let mut payload = Vec::new();
    for v in frame.vectors() {
        payload.extend(interleave(v.coeffs()));
    }
    Record::new(
        RECORD_FRAME,
        serde_json::json!({
            "k_max": frame.space().k_max(),
            "elements": frame.len(),
        }),
        payload,
    )
}

pub fn frame_from_record(record: &Record) -> Result<Frame> {
    if record.record_type != RECORD_FRAME {
        return Err(Error::Format("record is not a frame".into()));
    }
    let k_max = record.meta_usize("k_max")?;
    let elements = record.meta_usize("elements")?;
    let space = AmbientSpace::new(k_max);
    let per = 2 * space.dim();
    if record.payload.len() != elements * per {
        return Err(Error::Format("frame payload length mismatch".into()));
    }
    let mut vectors = Vec::with_capacity(elements);
    for chunk in record.payload.chunks_exact(per) {
        vectors.push(PeriodicFunction::new(space, deinterleave(chunk)?)?);
    }
    Frame::new(vectors)
}
