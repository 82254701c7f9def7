//! Field serialization.
//!
//! Binary layout: `dim: u32`, `points: u32`, `half_extent: f64`, all little
//! endian, followed by `points^dim` samples as interleaved `re, im` f64
//! values in row-major order.
//!
//! CSV layout: a `dim,points,half_extent` header row and its values, then a
//! `re,im` header row and one row per sample.

use num_complex::Complex64;

use super::{Field, GridSpec};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 16;

/// Largest sample count a decoder will accept.
pub const MAX_SAMPLES: usize = 1 << 24;

pub fn encode_binary(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_extent().to_le_bytes());
    for z in field.samples() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn decoded_grid(dim: usize, points: usize, half_extent: f64) -> Result<GridSpec> {
    let grid = GridSpec::new(dim, half_extent, points).map_err(|e| Error::Decode(e.to_string()))?;
    match points.checked_pow(dim as u32) {
        Some(n) if n <= MAX_SAMPLES => Ok(grid),
        _ => Err(Error::Decode(format!(
            "grid {points}^{dim} exceeds the {MAX_SAMPLES} sample cap"
        ))),
    }
}

fn read_f64(bytes: &[u8]) -> f64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(bytes);
    f64::from_le_bytes(b)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode(format!("header needs {HEADER_LEN} bytes, got {}", bytes.len())));
    }
    let dim = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let points = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let half_extent = read_f64(&bytes[8..16]);
    let grid = decoded_grid(dim, points, half_extent)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 16 * grid.len() {
        return Err(Error::Decode(format!(
            "body has {} bytes, grid needs {}",
            body.len(),
            16 * grid.len()
        )));
    }
    let samples: Vec<Complex64> = body
        .chunks_exact(16)
        .map(|c| Complex64::new(read_f64(&c[..8]), read_f64(&c[8..])))
        .collect();
    if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Decode("non-finite sample".into()));
    }
    Field::new(grid, samples)
}

pub fn encode_csv(field: &Field) -> Result<String> {
    let g = field.grid();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Decode(e.to_string());
    w.write_record(["dim", "points", "half_extent"]).map_err(io)?;
    w.write_record([g.dim().to_string(), g.points().to_string(), format!("{:e}", g.half_extent())])
        .map_err(io)?;
    w.write_record(["re", "im"]).map_err(io)?;
    for z in field.samples() {
        w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Decode(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Decode(e.to_string()))
}

fn field_of<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Decode(format!("bad or missing {what}")))
}

pub fn decode_csv(text: &str) -> Result<Field> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let mut next = |what: &str| -> Result<csv::StringRecord> {
        records
            .next()
            .ok_or_else(|| Error::Decode(format!("missing {what}")))?
            .map_err(|e| Error::Decode(e.to_string()))
    };
    let head = next("grid header")?;
    if head.iter().map(str::trim).ne(["dim", "points", "half_extent"]) {
        return Err(Error::Decode("expected dim,points,half_extent header".into()));
    }
    let vals = next("grid values")?;
    let dim: usize = field_of(&vals, 0, "dim")?;
    let points: usize = field_of(&vals, 1, "points")?;
    let half_extent: f64 = field_of(&vals, 2, "half_extent")?;
    let grid = decoded_grid(dim, points, half_extent)?;
    let cols = next("sample header")?;
    if cols.iter().map(str::trim).ne(["re", "im"]) {
        return Err(Error::Decode("expected re,im header".into()));
    }
    let mut samples = Vec::with_capacity(grid.len().min(1 << 16));
    for rec in records {
        let rec = rec.map_err(|e| Error::Decode(e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::Decode(format!("sample row has {} columns", rec.len())));
        }
        let re: f64 = field_of(&rec, 0, "re")?;
        let im: f64 = field_of(&rec, 1, "im")?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Decode("non-finite sample".into()));
        }
        samples.push(Complex64::new(re, im));
        if samples.len() > grid.len() {
            break;
        }
    }
    if samples.len() != grid.len() {
        return Err(Error::Decode(format!(
            "expected {} samples, found {}",
            grid.len(),
            samples.len()
        )));
    }
    Field::new(grid, samples)
}
