//! On-disk neighbor cache.
//!
//! ```text
//! offset  size      field
//! 0       8         magic "IVHDNN1\0"
//! 8       2         format version (u16 LE) = 1
//! 10      1         metric id (0 euclidean, 1 cosine)
//! 11      8         point count M (u64 LE)
//! 19      2         neighbors per point nn (u16 LE)
//! 21      32        SHA-256 checksum of the source data matrix
//! 53      4*M*nn    neighbor indices, u32 LE, row-major
//! ...     4*M*nn    neighbor distances, f32 LE, row-major
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::metric::Metric;
use super::search::NeighborGraph;
use crate::dataio::DataMatrix;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"IVHDNN1\0";
pub const CACHE_VERSION: u16 = 1;
pub const CACHE_HEADER_LEN: usize = 53;

pub fn save_neighbor_cache(graph: &NeighborGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&[graph.metric().id()])?;
    out.write_all(&(graph.len() as u64).to_le_bytes())?;
    out.write_all(&(graph.nn() as u16).to_le_bytes())?;
    out.write_all(graph.source_hash())?;
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in graph.indices().chunks(1 << 14) {
        buf.clear();
        chunk.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        out.write_all(&buf)?;
    }
    for chunk in graph.distances().chunks(1 << 14) {
        buf.clear();
        chunk.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// Header fields of a cache file, readable without loading the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheHeader {
    pub metric: Metric,
    pub m: usize,
    pub nn: usize,
    pub source_hash: [u8; 32],
}

fn parse_header(bytes: &[u8]) -> Result<CacheHeader> {
    if bytes.len() < CACHE_HEADER_LEN {
        return Err(Error::Cache("file shorter than the header".into()));
    }
    if &bytes[..8] != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let metric = Metric::from_id(bytes[10]).ok_or_else(|| Error::Cache(format!("unknown metric id {}", bytes[10])))?;
    let m = u64::from_le_bytes(bytes[11..19].try_into().expect("8 bytes"));
    let nn = u16::from_le_bytes([bytes[19], bytes[20]]) as usize;
    let m = usize::try_from(m).map_err(|_| Error::Cache("point count overflows".into()))?;
    let mut source_hash = [0u8; 32];
    source_hash.copy_from_slice(&bytes[21..53]);
    Ok(CacheHeader {
        metric,
        m,
        nn,
        source_hash,
    })
}

pub fn read_cache_header(path: impl AsRef<Path>) -> Result<CacheHeader> {
    let path = path.as_ref();
    let mut head = Vec::with_capacity(CACHE_HEADER_LEN);
    File::open(path)
        .map_err(|e| Error::file(path, e))?
        .take(CACHE_HEADER_LEN as u64)
        .read_to_end(&mut head)?;
    parse_header(&head)
}

/// Loads a cache file, optionally verifying that it was built from `expected`.
///
/// Either the whole graph is returned or an error; truncated or corrupt files
/// never yield a partial graph.
pub fn load_neighbor_cache(path: impl AsRef<Path>, expected: Option<&DataMatrix>) -> Result<NeighborGraph> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::file(path, e))?;
    let header = parse_header(&bytes)?;
    if let Some(data) = expected {
        if data.rows() != header.m || data.checksum() != header.source_hash {
            return Err(Error::ChecksumMismatch);
        }
    }
    let count = header
        .m
        .checked_mul(header.nn)
        .ok_or_else(|| Error::Cache("size overflows".into()))?;
    let expected_len = CACHE_HEADER_LEN + 8 * count;
    if bytes.len() != expected_len {
        return Err(Error::Cache(format!(
            "expected {expected_len} bytes, file has {}",
            bytes.len()
        )));
    }
    let body = &bytes[CACHE_HEADER_LEN..];
    let (idx_bytes, dist_bytes) = body.split_at(4 * count);
    let indices = idx_bytes
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let distances = dist_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    NeighborGraph::from_parts(
        header.m,
        header.nn,
        indices,
        distances,
        header.metric,
        header.source_hash,
    )
    .map_err(|e| Error::Cache(e.to_string()))
}
