use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use tensorwino::{avx_aware_size, default_points, synthesize_transforms, DenseTensor, Scalar, TransformSet};

/// A check ran to completion and did not hold (exit status 1).
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl Precision {
    pub fn default_tolerance(self) -> f64 {
        match self {
            Precision::F32 => 1e-4,
            Precision::F64 => 1e-10,
        }
    }
}

pub fn load_transform(path: &Path) -> Result<TransformSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TransformSet::from_document(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Transforms sized for `W = 8`, falling back to two outputs per tile when
/// no such size exists.
pub fn auto_transform(g: usize, ndim: usize) -> Result<TransformSet> {
    let s = match avx_aware_size(g, ndim, 8) {
        Ok((_, s)) => s,
        Err(_) if g == 1 => 1,
        Err(_) => 2,
    };
    Ok(synthesize_transforms(s, g, &default_points(s + g - 1))?)
}

/// Writes to `path`, or stdout when absent.
pub fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// First 16 hex digits of the SHA-256 of the little-endian element bytes.
pub fn checksum<T: Scalar>(tensors: &[DenseTensor<T>]) -> String {
    let mut hasher = Sha256::new();
    let mut buf = Vec::new();
    for t in tensors {
        buf.clear();
        for &v in t.as_slice() {
            v.write_le(&mut buf);
        }
        hasher.update(&buf);
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Parses `"1024x1024"` or `"32,32,32"`.
pub fn parse_dims(text: &str) -> Result<Vec<usize>> {
    let dims = text
        .split(['x', 'X', ','])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .with_context(|| format!("bad extent '{p}' in '{text}'"))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.contains(&0) {
        bail!("dimensions must be positive: '{text}'");
    }
    Ok(dims)
}

pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    let items = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .with_context(|| format!("bad count '{p}' in '{text}'"))
        })
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() || items.contains(&0) {
        bail!("counts must be positive: '{text}'");
    }
    Ok(items)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Fast,
    Direct,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fast => "fast",
            Mode::Direct => "direct",
        })
    }
}
