//! The PATB container and figure/report exports.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PATB" | version u32 = 1 | section count u32
//! per section:
//!   name [u8; 16] (ASCII, zero padded) | kind u32 (0 = f64 tensor, 1 = UTF-8)
//!   rank u32 | dims u32 × rank | payload | payload byte length u64
//! ```
//!
//! Tensors are row-major `f64`; metadata sections have rank 1 with the byte
//! count as their only dimension.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::forward::{Part, WaveData};
use crate::geometry::Fingerprint;
use crate::metrics::ErrorReport;
use crate::phantoms::{GridSpec, ImageField};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PATB";
pub const VERSION: u32 = 1;
const NAME_LEN: usize = 16;
const KIND_TENSOR: u32 = 0;
const KIND_META: u32 = 1;
/// Elements read per chunk, so a corrupt header cannot force a huge
/// allocation before the data runs out.
const READ_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload<'a> {
    Tensor {
        dims: Vec<usize>,
        data: Cow<'a, [f64]>,
    },
    Meta(Cow<'a, str>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section<'a> {
    pub name: String,
    pub payload: Payload<'a>,
}

impl<'a> Section<'a> {
    pub fn tensor(name: &str, dims: Vec<usize>, data: impl Into<Cow<'a, [f64]>>) -> Self {
        Section {
            name: name.to_string(),
            payload: Payload::Tensor {
                dims,
                data: data.into(),
            },
        }
    }

    pub fn matrix(name: &str, m: ArrayView2<'a, f64>) -> Self {
        let dims = vec![m.nrows(), m.ncols()];
        match m.to_slice() {
            Some(s) => Self::tensor(name, dims, s),
            None => Self::tensor(name, dims, m.iter().copied().collect::<Vec<_>>()),
        }
    }

    pub fn meta(name: &str, text: impl Into<Cow<'a, str>>) -> Self {
        Section {
            name: name.to_string(),
            payload: Payload::Meta(text.into()),
        }
    }

    pub fn into_owned(self) -> Section<'static> {
        let payload = match self.payload {
            Payload::Tensor { dims, data } => Payload::Tensor {
                dims,
                data: Cow::Owned(data.into_owned()),
            },
            Payload::Meta(s) => Payload::Meta(Cow::Owned(s.into_owned())),
        };
        Section {
            name: self.name,
            payload,
        }
    }
}

fn encode_name(name: &str) -> Result<[u8; NAME_LEN]> {
    if !name.is_ascii() || name.len() > NAME_LEN || name.bytes().any(|b| b == 0) {
        return Err(Error::container(format!(
            "section name '{name}' must be 1..=16 ASCII bytes"
        )));
    }
    let mut out = [0u8; NAME_LEN];
    out[..name.len()].copy_from_slice(name.as_bytes());
    Ok(out)
}

fn u32_dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::container(format!("dimension {v} does not fit in u32")))
}

pub fn write_container_to<W: Write>(w: &mut W, sections: &[Section]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_dim(sections.len())?.to_le_bytes())?;
    for s in sections {
        w.write_all(&encode_name(&s.name)?)?;
        match &s.payload {
            Payload::Tensor { dims, data } => {
                let count = element_count(dims)?;
                if count != data.len() {
                    return Err(Error::container(format!(
                        "section '{}': dims {:?} describe {count} values, payload has {}",
                        s.name,
                        dims,
                        data.len()
                    )));
                }
                w.write_all(&KIND_TENSOR.to_le_bytes())?;
                w.write_all(&u32_dim(dims.len())?.to_le_bytes())?;
                for &d in dims {
                    w.write_all(&u32_dim(d)?.to_le_bytes())?;
                }
                let mut buf = Vec::with_capacity(8 * READ_CHUNK.min(data.len()));
                for chunk in data.chunks(READ_CHUNK) {
                    buf.clear();
                    for v in chunk {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
                w.write_all(&(8 * data.len() as u64).to_le_bytes())?;
            }
            Payload::Meta(text) => {
                w.write_all(&KIND_META.to_le_bytes())?;
                w.write_all(&1u32.to_le_bytes())?;
                w.write_all(&u32_dim(text.len())?.to_le_bytes())?;
                w.write_all(text.as_bytes())?;
                w.write_all(&(text.len() as u64).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_container(sections: &[Section]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_container_to(&mut out, sections)?;
    Ok(out)
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8).map(|_| n))
        .ok_or_else(|| Error::container(format!("dimensions {dims:?} overflow")))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::container(format!("truncated while reading {what}"))
        }
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_container_from<R: Read>(r: &mut R) -> Result<Vec<Section<'static>>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::container("bad magic, not a PATB file"));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(Error::container(format!("unsupported version {version}")));
    }
    let count = read_u32(r, "section count")?;
    let mut sections = Vec::new();
    for _ in 0..count {
        let mut raw = [0u8; NAME_LEN];
        read_exact(r, &mut raw, "section name")?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        if raw[end..].iter().any(|&b| b != 0) || !raw[..end].is_ascii() || end == 0 {
            return Err(Error::container("malformed section name"));
        }
        let name = String::from_utf8_lossy(&raw[..end]).into_owned();
        let kind = read_u32(r, "section kind")?;
        let rank = read_u32(r, "rank")? as usize;
        if rank > 8 {
            return Err(Error::container(format!(
                "section '{name}': rank {rank} too large"
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(r, "dimension")? as usize);
        }
        let (payload, bytes) = match kind {
            KIND_TENSOR => {
                let count = element_count(&dims)?;
                let mut data = Vec::new();
                let mut buf = vec![0u8; 8 * READ_CHUNK.min(count)];
                let mut left = count;
                while left > 0 {
                    let take = left.min(READ_CHUNK);
                    read_exact(r, &mut buf[..8 * take], "tensor payload")?;
                    data.extend(
                        buf[..8 * take]
                            .chunks_exact(8)
                            .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
                    );
                    left -= take;
                }
                (
                    Payload::Tensor {
                        dims,
                        data: Cow::Owned(data),
                    },
                    8 * count as u64,
                )
            }
            KIND_META => {
                if rank != 1 {
                    return Err(Error::container(format!(
                        "metadata section '{name}' must have rank 1"
                    )));
                }
                let mut text = Vec::new();
                let got = r.by_ref().take(dims[0] as u64).read_to_end(&mut text)?;
                if got != dims[0] {
                    return Err(Error::container("truncated while reading metadata"));
                }
                let text = String::from_utf8(text).map_err(|_| {
                    Error::container(format!("metadata section '{name}' is not UTF-8"))
                })?;
                (Payload::Meta(Cow::Owned(text)), dims[0] as u64)
            }
            other => {
                return Err(Error::container(format!(
                    "section '{name}': unknown kind {other}"
                )))
            }
        };
        let declared = read_u64(r, "byte length")?;
        if declared != bytes {
            return Err(Error::container(format!(
                "section '{name}': declared {declared} payload bytes, dims give {bytes}"
            )));
        }
        sections.push(Section { name, payload });
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::container("trailing bytes after the last section"));
    }
    Ok(sections)
}

pub fn read_container(mut bytes: &[u8]) -> Result<Vec<Section<'static>>> {
    read_container_from(&mut bytes)
}

pub fn write_file(path: impl AsRef<Path>, sections: &[Section]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_container_to(&mut w, sections)?;
    w.flush()?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<Section<'static>>> {
    read_container_from(&mut BufReader::new(File::open(path)?))
}

/// Looks up a section by name.
pub fn find<'s, 'a>(sections: &'s [Section<'a>], name: &str) -> Result<&'s Section<'a>> {
    sections
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::container(format!("missing section '{name}'")))
}

pub fn take_matrix(sections: &mut Vec<Section<'static>>, name: &str) -> Result<Array2<f64>> {
    let pos = sections
        .iter()
        .position(|s| s.name == name)
        .ok_or_else(|| Error::container(format!("missing section '{name}'")))?;
    match sections.swap_remove(pos).payload {
        Payload::Tensor { dims, data } if dims.len() == 2 => {
            Array2::from_shape_vec((dims[0], dims[1]), data.into_owned())
                .map_err(|e| Error::container(format!("section '{name}': {e}")))
        }
        _ => Err(Error::container(format!(
            "section '{name}' is not a matrix"
        ))),
    }
}

pub fn take_vector(sections: &mut Vec<Section<'static>>, name: &str) -> Result<Vec<f64>> {
    let pos = sections
        .iter()
        .position(|s| s.name == name)
        .ok_or_else(|| Error::container(format!("missing section '{name}'")))?;
    match sections.swap_remove(pos).payload {
        Payload::Tensor { dims, data } if dims.len() == 1 => Ok(data.into_owned()),
        _ => Err(Error::container(format!(
            "section '{name}' is not a vector"
        ))),
    }
}

pub fn meta_text<'s>(sections: &'s [Section], name: &str) -> Result<&'s str> {
    match &find(sections, name)?.payload {
        Payload::Meta(s) => Ok(s),
        _ => Err(Error::container(format!(
            "section '{name}' is not metadata"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct WaveMeta {
    kind: String,
    part: Part,
    node_idx: Vec<usize>,
    dt: f64,
    n_time: usize,
    fingerprint: String,
}

pub fn wave_sections(u: &WaveData) -> Result<Vec<Section<'_>>> {
    let meta = WaveMeta {
        kind: "wave".into(),
        part: u.part,
        node_idx: u.node_idx.clone(),
        dt: u.dt,
        n_time: u.n_time,
        fingerprint: u.fingerprint.to_hex(),
    };
    Ok(vec![
        Section::meta("meta", serde_json::to_string(&meta)?),
        Section::matrix("samples", u.samples.view()),
    ])
}

pub fn save_wave_data(u: &WaveData, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, &wave_sections(u)?)
}

pub fn wave_from_sections(mut sections: Vec<Section<'static>>) -> Result<WaveData> {
    let meta: WaveMeta = serde_json::from_str(meta_text(&sections, "meta")?)?;
    if meta.kind != "wave" {
        return Err(Error::container(format!(
            "expected wave data, found '{}'",
            meta.kind
        )));
    }
    let samples = take_matrix(&mut sections, "samples")?;
    if samples.dim() != (meta.node_idx.len(), meta.n_time) {
        return Err(Error::container(
            "sample matrix does not match the node list and time grid",
        ));
    }
    Ok(WaveData {
        part: meta.part,
        node_idx: meta.node_idx,
        dt: meta.dt,
        n_time: meta.n_time,
        samples,
        fingerprint: Fingerprint::from_hex(&meta.fingerprint)?,
    })
}

pub fn load_wave_data(path: impl AsRef<Path>) -> Result<WaveData> {
    wave_from_sections(read_file(path)?)
}

#[derive(Serialize, Deserialize)]
struct ImageMeta {
    kind: String,
    grid: GridSpec,
}

pub fn save_image(field: &ImageField, path: impl AsRef<Path>) -> Result<()> {
    let meta = ImageMeta {
        kind: "image".into(),
        grid: field.grid,
    };
    let mask: Vec<f64> = field
        .mask
        .iter()
        .map(|&m| if m { 1.0 } else { 0.0 })
        .collect();
    write_file(
        path,
        &[
            Section::meta("meta", serde_json::to_string(&meta)?),
            Section::matrix("values", field.values.view()),
            Section::tensor("mask", vec![field.grid.nx, field.grid.ny], mask),
        ],
    )
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageField> {
    let mut sections = read_file(path)?;
    let meta: ImageMeta = serde_json::from_str(meta_text(&sections, "meta")?)?;
    if meta.kind != "image" {
        return Err(Error::container(format!(
            "expected an image, found '{}'",
            meta.kind
        )));
    }
    let values = take_matrix(&mut sections, "values")?;
    let mask = take_matrix(&mut sections, "mask")?.mapv(|v| v != 0.0);
    let dim = (meta.grid.nx, meta.grid.ny);
    if values.dim() != dim || mask.dim() != dim {
        return Err(Error::container("image arrays do not match the grid"));
    }
    Ok(ImageField {
        grid: meta.grid,
        values,
        mask,
    })
}

/// 16-bit binary PGM; `[lo, hi]` maps affinely onto `[0, 65535]` with
/// clamping and masked-out cells are mid-gray. The top image row is the
/// largest `y`.
pub fn pgm_bytes(field: &ImageField, lo: f64, hi: f64) -> Result<Vec<u8>> {
    if !(hi > lo) {
        return Err(Error::param(format!(
            "grey range needs hi > lo, got [{lo}, {hi}]"
        )));
    }
    let (nx, ny) = (field.grid.nx, field.grid.ny);
    let mut out = format!("P5\n{nx} {ny}\n65535\n").into_bytes();
    out.reserve(2 * nx * ny);
    for r in 0..ny {
        let j = ny - 1 - r;
        for i in 0..nx {
            let level = if field.mask[[i, j]] {
                let s = ((field.values[[i, j]] - lo) / (hi - lo)).clamp(0.0, 1.0);
                (s * 65535.0).round() as u16
            } else {
                32768
            };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn export_pgm(field: &ImageField, lo: f64, hi: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, pgm_bytes(field, lo, hi)?)?;
    Ok(())
}

/// 16-bit PGM of wave data: one image row per node in stored order, one
/// column per time sample, same grey mapping as [`pgm_bytes`].
pub fn wave_pgm_bytes(u: &WaveData, lo: f64, hi: f64) -> Result<Vec<u8>> {
    if !(hi > lo) {
        return Err(Error::param(format!(
            "grey range needs hi > lo, got [{lo}, {hi}]"
        )));
    }
    let (rows, cols) = u.samples.dim();
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(2 * rows * cols);
    for v in u.samples.iter() {
        let s = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        out.extend_from_slice(&((s * 65535.0).round() as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn export_wave_pgm(u: &WaveData, lo: f64, hi: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, wave_pgm_bytes(u, lo, hi)?)?;
    Ok(())
}

pub fn csv_string(report: &ErrorReport) -> String {
    let mut out = String::from("variant,n,E2,E_n\n");
    for row in report.rows() {
        let n = row.n.map(|n| n.to_string()).unwrap_or_default();
        let e_n = row.e_n.map(|v| format!("{v:.17e}")).unwrap_or_default();
        out.push_str(&format!("{},{},{:.17e},{}\n", row.variant, n, row.e2, e_n));
    }
    out
}

pub fn export_csv(report: &ErrorReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}
