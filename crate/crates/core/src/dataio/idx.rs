//! IDX reader/writer (the MNIST distribution format).
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! images: u32 magic = 0x00000803 | u32 count | u32 rows | u32 cols | count*rows*cols u8 pixels
//! labels: u32 magic = 0x00000801 | u32 count | count u8 labels
//! ```
//!
//! Files starting with the gzip signature are decompressed transparently.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{DataMatrix, Labels};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::file(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(format!("{}: truncated IDX header", path.display())))
}

fn parse_images(bytes: &[u8], path: &Path) -> Result<DataMatrix> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(format!(
            "{}: bad IDX image magic {magic:#010x}",
            path.display()
        )));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let dims = rows * cols;
    let body = &bytes[16..];
    if count == 0 || dims == 0 {
        return Err(Error::format(format!("{}: empty IDX image file", path.display())));
    }
    if body.len() != count * dims {
        return Err(Error::format(format!(
            "{}: expected {} pixel bytes for {count} images of {rows}x{cols}, found {}",
            path.display(),
            count * dims,
            body.len()
        )));
    }
    let values = body.iter().map(|&p| f64::from(p) / 255.0).collect();
    DataMatrix::new(count, dims, values)
}

fn parse_labels(bytes: &[u8], path: &Path) -> Result<Labels> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(format!(
            "{}: bad IDX label magic {magic:#010x}",
            path.display()
        )));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::format(format!(
            "{}: expected {count} label bytes, found {}",
            path.display(),
            body.len()
        )));
    }
    let values: Vec<i64> = body.iter().map(|&b| i64::from(b)).collect();
    Ok(Labels::from_values(&values))
}

/// Loads an IDX image file (pixels scaled to `[0, 1]`) and an optional label file.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<(DataMatrix, Option<Labels>)> {
    let images_path = images_path.as_ref();
    let data = parse_images(&read_all(images_path)?, images_path)?;
    let labels = match labels_path {
        Some(path) => {
            let labels = parse_labels(&read_all(path)?, path)?;
            if labels.len() != data.rows() {
                return Err(Error::Consistency(format!(
                    "{} images but {} labels",
                    data.rows(),
                    labels.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    Ok((data, labels))
}

/// Writes images as uncompressed IDX, mapping values in `[0, 1]` to bytes.
pub fn write_idx_images(path: impl AsRef<Path>, data: &DataMatrix, rows: usize, cols: usize) -> Result<()> {
    let path = path.as_ref();
    if rows * cols != data.dims() {
        return Err(Error::argument(format!(
            "{rows}x{cols} images do not match {} features",
            data.dims()
        )));
    }
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    out.write_all(&(data.rows() as u32).to_be_bytes())?;
    out.write_all(&(rows as u32).to_be_bytes())?;
    out.write_all(&(cols as u32).to_be_bytes())?;
    let pixels: Vec<u8> = data
        .values()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &Labels) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    let bytes: Vec<u8> = (0..labels.len())
        .map(|i| u8::try_from(labels.value(i)).unwrap_or(u8::MAX))
        .collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}
