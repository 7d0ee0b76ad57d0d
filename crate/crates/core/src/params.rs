//! Named parameter groups and the flat little-endian f32 parameter format.
//!
//! Layout: 4-byte magic, `u32` format version, `u32` number of dims, the dims
//! as `u32`, `u64` value count, then every group's values as `f32` in group
//! order. All integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A model whose trainable values can be visited as named flat slices.
/// Gradients use the same type, so groups line up one to one.
pub trait ParamGroups {
    fn groups(&self) -> Vec<(&'static str, &[f64])>;
    fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    fn num_values(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }

    fn fill(&mut self, value: f64) {
        for (_, g) in self.groups_mut() {
            g.fill(value);
        }
    }

    fn global_norm(&self) -> f64 {
        self.groups()
            .iter()
            .flat_map(|(_, g)| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for (_, g) in self.groups_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let theirs = other.groups();
        for ((_, mine), (_, theirs)) in self.groups_mut().into_iter().zip(theirs) {
            mine.iter_mut().zip(theirs).for_each(|(a, b)| *a += b);
        }
    }
}

pub(crate) fn flat2(a: &Array2<f64>) -> &[f64] {
    a.as_slice()
        .expect("parameters are stored in standard layout")
}

pub(crate) fn flat2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut()
        .expect("parameters are stored in standard layout")
}

pub(crate) fn flat1(a: &Array1<f64>) -> &[f64] {
    a.as_slice()
        .expect("parameters are stored in standard layout")
}

pub(crate) fn flat1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut()
        .expect("parameters are stored in standard layout")
}

pub fn write_params<P: ParamGroups>(
    path: impl AsRef<Path>,
    magic: &[u8; 4],
    dims: &[u32],
    models: &[&P],
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    out.write_all(magic).map_err(io)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION).map_err(io)?;
    out.write_u32::<LittleEndian>(dims.len() as u32)
        .map_err(io)?;
    for &d in dims {
        out.write_u32::<LittleEndian>(d).map_err(io)?;
    }
    let count: usize = models.iter().map(|m| m.num_values()).sum();
    out.write_u64::<LittleEndian>(count as u64).map_err(io)?;
    for model in models {
        for (_, group) in model.groups() {
            for &v in group {
                out.write_f32::<LittleEndian>(v as f32).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Reads the header; returns the dims and a reader positioned at the values.
pub fn read_header(path: impl AsRef<Path>, magic: &[u8; 4]) -> Result<(Vec<u32>, ValueReader)> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadParamFile {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut found = [0u8; 4];
    input
        .read_exact(&mut found)
        .map_err(|e| bad(e.to_string()))?;
    if &found != magic {
        return Err(bad(format!("bad magic {found:?}, expected {magic:?}")));
    }
    let version = input
        .read_u32::<LittleEndian>()
        .map_err(|e| bad(e.to_string()))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let ndims = input
        .read_u32::<LittleEndian>()
        .map_err(|e| bad(e.to_string()))?;
    if ndims > 64 {
        return Err(bad(format!("implausible dim count {ndims}")));
    }
    let dims = (0..ndims)
        .map(|_| input.read_u32::<LittleEndian>())
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| bad(e.to_string()))?;
    let remaining = input
        .read_u64::<LittleEndian>()
        .map_err(|e| bad(e.to_string()))?;
    Ok((
        dims,
        ValueReader {
            path: path.to_path_buf(),
            input,
            remaining,
        },
    ))
}

pub struct ValueReader {
    path: std::path::PathBuf,
    input: BufReader<File>,
    remaining: u64,
}

impl ValueReader {
    pub fn fill<P: ParamGroups>(&mut self, model: &mut P) -> Result<()> {
        let needed = model.num_values() as u64;
        if needed > self.remaining {
            return Err(self.bad(format!(
                "file holds {} values, model needs {needed}",
                self.remaining
            )));
        }
        for (_, group) in model.groups_mut() {
            for v in group.iter_mut() {
                *v = self
                    .input
                    .read_f32::<LittleEndian>()
                    .map_err(|e| Error::BadParamFile {
                        path: self.path.clone(),
                        reason: e.to_string(),
                    })? as f64;
            }
        }
        self.remaining -= needed;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        if self.remaining != 0 {
            return Err(self.bad(format!("{} trailing values", self.remaining)));
        }
        Ok(())
    }

    fn bad(&self, reason: String) -> Error {
        Error::BadParamFile {
            path: self.path.clone(),
            reason,
        }
    }
}
