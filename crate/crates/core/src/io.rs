//! The MFLD field file format.
//!
//! A file is one UTF-8 JSON header line
//! `{"magic":"MFLD1","kind":...,"rows":R,"cols":C,"components":[...],"extra":{...}}`
//! followed by the raw little-endian f64 payload: each component in turn,
//! row-major. Scalar fields have one component, tensors have `xx, yy, xy`,
//! and sinograms have `y, path_length, valid` with the angles and grid size
//! in `extra`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::{check_finite, ScalarField, ShapeMask, TensorField2D};
use crate::geometry::Geometry;
use crate::sinogram::StrainSinogram;

pub const MAGIC: &str = "MFLD1";

/// Longest header line accepted on read.
const MAX_HEADER_BYTES: u64 = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scalar,
    Tensor,
    Sinogram,
}

impl Kind {
    fn components(self) -> &'static [&'static str] {
        match self {
            Kind::Scalar => &["value"],
            Kind::Tensor => &["xx", "yy", "xy"],
            Kind::Sinogram => &["y", "path_length", "valid"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub magic: String,
    pub kind: Kind,
    pub rows: usize,
    pub cols: usize,
    pub components: Vec<String>,
    #[serde(default)]
    pub extra: Value,
}

/// A decoded file: header plus one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct MfldFile {
    pub header: Header,
    pub data: Vec<Array2<f64>>,
}

fn encode_into<W: Write>(mut w: W, kind: Kind, parts: &[&Array2<f64>], extra: Value) -> Result<()> {
    let (rows, cols) = parts[0].dim();
    debug_assert!(parts.iter().all(|p| p.dim() == (rows, cols)));
    let header = Header {
        magic: MAGIC.to_string(),
        kind,
        rows,
        cols,
        components: kind.components().iter().map(|s| s.to_string()).collect(),
        extra,
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    for p in parts {
        for v in p.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Decodes a whole file from a reader, checking structure and finiteness.
pub fn decode<R: BufRead>(mut r: R) -> Result<MfldFile> {
    let mut line = Vec::new();
    (&mut r).take(MAX_HEADER_BYTES).read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::CorruptHeader("missing header terminator".into()));
    }
    line.pop();
    let header: Header = serde_json::from_slice(&line).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    if header.magic != MAGIC {
        return Err(Error::CorruptHeader(format!("bad magic {:?}", header.magic)));
    }
    let expected = header.kind.components();
    if header.components.len() != expected.len() || header.components.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::CorruptHeader(format!(
            "components {:?} do not match kind {:?}",
            header.components, header.kind
        )));
    }
    let per = header
        .rows
        .checked_mul(header.cols)
        .ok_or_else(|| Error::CorruptHeader("rows x cols overflows".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let want = per as u128 * expected.len() as u128 * 8;
    if payload.len() as u128 != want {
        return Err(Error::DimensionMismatch(format!(
            "header declares {} component(s) of {}x{} ({} bytes), payload has {} bytes",
            expected.len(),
            header.rows,
            header.cols,
            want,
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(expected.len());
    for (k, chunk) in payload.chunks_exact(per * 8).enumerate() {
        let values: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let a = Array2::from_shape_vec((header.rows, header.cols), values).expect("length checked");
        check_finite(&a, &format!("component {}", expected[k]))?;
        data.push(a);
    }
    Ok(MfldFile { header, data })
}

fn expect_kind(file: &MfldFile, kind: Kind) -> Result<()> {
    if file.header.kind != kind {
        return Err(Error::CorruptHeader(format!(
            "expected a {kind:?} file, found {:?}",
            file.header.kind
        )));
    }
    Ok(())
}

fn write_file(path: &Path, kind: Kind, parts: &[&Array2<f64>], extra: Value) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    encode_into(w, kind, parts, extra)
}

pub fn read_file(path: &Path) -> Result<MfldFile> {
    decode(BufReader::new(File::open(path)?))
}

/// Serialized bytes of a tensor field.
pub fn encode_tensor(t: &TensorField2D) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    encode_into(&mut buf, Kind::Tensor, &t.components(), json!({}))?;
    Ok(buf)
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    write_file(path, Kind::Scalar, &[f.values()], json!({}))
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let mut file = read_file(path)?;
    expect_kind(&file, Kind::Scalar)?;
    ScalarField::new(file.data.remove(0))
}

/// Masks are scalar files holding only 0 and 1.
pub fn write_mask(path: &Path, m: &ShapeMask) -> Result<()> {
    write_file(path, Kind::Scalar, &[&m.to_f64()], json!({"mask": true}))
}

pub fn read_mask(path: &Path) -> Result<ShapeMask> {
    ShapeMask::from_f64(read_scalar(path)?.values())
}

pub fn write_tensor(path: &Path, t: &TensorField2D) -> Result<()> {
    write_file(path, Kind::Tensor, &t.components(), json!({}))
}

pub fn read_tensor(path: &Path) -> Result<TensorField2D> {
    let file = read_file(path)?;
    expect_kind(&file, Kind::Tensor)?;
    let [xx, yy, xy]: [Array2<f64>; 3] = file.data.try_into().expect("three components checked");
    TensorField2D::new(xx, yy, xy)
}

pub fn write_sinogram(path: &Path, s: &StrainSinogram) -> Result<()> {
    let g = s.geometry();
    let extra = json!({
        "angles": g.angles(),
        "grid_rows": g.grid_rows(),
        "grid_cols": g.grid_cols(),
    });
    write_file(path, Kind::Sinogram, &[s.y(), s.path_lengths(), &s.valid_f64()], extra)
}

pub fn read_sinogram(path: &Path) -> Result<StrainSinogram> {
    let file = read_file(path)?;
    expect_kind(&file, Kind::Sinogram)?;
    let extra = &file.header.extra;
    let field = |k: &str| {
        extra
            .get(k)
            .ok_or_else(|| Error::CorruptHeader(format!("sinogram header lacks `{k}`")))
    };
    let angles: Vec<f64> =
        serde_json::from_value(field("angles")?.clone()).map_err(|e| Error::CorruptHeader(format!("angles: {e}")))?;
    let dim = |k: &str| -> Result<usize> {
        field(k)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::CorruptHeader(format!("`{k}` is not a count")))
    };
    let geometry = Geometry::new(dim("grid_rows")?, dim("grid_cols")?, file.header.cols, angles)?;
    if geometry.num_views() != file.header.rows {
        return Err(Error::DimensionMismatch(format!(
            "{} angles for {} sinogram rows",
            geometry.num_views(),
            file.header.rows
        )));
    }
    let [y, lengths, valid]: [Array2<f64>; 3] = file.data.try_into().expect("three components checked");
    let valid = ShapeMask::from_f64(&valid)?.values().clone();
    StrainSinogram::from_parts(geometry, y, lengths, valid)
}
