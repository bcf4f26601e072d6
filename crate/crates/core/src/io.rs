//! File formats.
//!
//! Series and trajectories share one little-endian binary layout:
//!
//! ```text
//! magic      4 bytes   "L96S" (resolved series) or "L96R" (reduced trajectory)
//! version    u32       1
//! K          u32
//! N          u64
//! interval   f64       time between rows
//! config     32 bytes  SHA-256 of the generating configuration
//! x          N*K f64   row-major
//! b          N*K f64   row-major
//! ```
//!
//! Models are JSON files wrapping a [`Parameterization`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::reduced::Parameterization;
use crate::series::{RowMatrix, SampleSeries};
use crate::varx::CompanionSpectrum;

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Series,
    Trajectory,
}

impl FileKind {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            FileKind::Series => b"L96S",
            FileKind::Trajectory => b"L96R",
        }
    }

    fn from_magic(m: &[u8]) -> Result<Self> {
        match m {
            b"L96S" => Ok(FileKind::Series),
            b"L96R" => Ok(FileKind::Trajectory),
            _ => Err(Error::Format(format!(
                "unknown magic {:?}",
                String::from_utf8_lossy(m)
            ))),
        }
    }
}

pub fn write_data<W: Write>(mut w: W, kind: FileKind, series: &SampleSeries) -> Result<()> {
    w.write_all(kind.magic())?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(series.width() as u32).to_le_bytes())?;
    w.write_all(&(series.len() as u64).to_le_bytes())?;
    w.write_all(&series.sample_interval.to_le_bytes())?;
    w.write_all(&series.config_id)?;
    for block in [&series.x, &series.b] {
        for v in block.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_block<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<RowMatrix> {
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("block size overflows".into()))?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
        _ => Error::Io(e),
    })?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RowMatrix::from_vec(rows, cols, data)
}

pub fn read_data<R: Read>(mut r: R) -> Result<(FileKind, SampleSeries)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("file is shorter than the header".into()))?;
    let kind = FileKind::from_magic(&header[0..4])?;
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let k = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let interval = f64::from_le_bytes(header[20..28].try_into().unwrap());
    let config_id: [u8; 32] = header[28..60].try_into().unwrap();
    let x = read_block(&mut r, n, k)?;
    let b = read_block(&mut r, n, k)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after data blocks".into()));
    }
    Ok((kind, SampleSeries::new(x, b, interval, config_id)?))
}

pub fn save_data(path: &Path, kind: FileKind, series: &SampleSeries) -> Result<()> {
    write_data(BufWriter::new(File::create(path)?), kind, series)
}

pub fn load_data(path: &Path) -> Result<(FileKind, SampleSeries)> {
    read_data(BufReader::new(File::open(path)?))
}

/// Plain-text export with columns `x_1..x_K, b_1..b_K`.
pub fn write_csv<W: Write>(w: W, series: &SampleSeries) -> Result<()> {
    let mut w = BufWriter::new(w);
    let k = series.width();
    let header: Vec<String> = (1..=k)
        .map(|i| format!("x_{i}"))
        .chain((1..=k).map(|i| format!("b_{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for n in 0..series.len() {
        let fields: Vec<String> = series
            .x
            .row(n)
            .iter()
            .chain(series.b.row(n))
            .map(|v| v.to_string())
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Model file: the surrogate plus enough context to audit and reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub model: Parameterization,
    /// Hex SHA-256 of the configuration that produced the training series.
    pub source_config: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<CompanionSpectrum>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

pub const MODEL_FORMAT: &str = "l96-model/1";

impl ModelFile {
    pub fn new(model: Parameterization, source_config: String) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            model,
            source_config,
            config: None,
            stability: None,
            summary: serde_json::Value::Null,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let m: ModelFile = read_json(path)?;
    if m.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "unsupported model format {:?}",
            m.format
        )));
    }
    Ok(m)
}
