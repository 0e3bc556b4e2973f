//! CSV artifacts: embeddings (`id,x,y,label`) and stress traces (`iter,stress`).
//!
//! Every file starts with `#` comment lines carrying the effective configuration.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dataio::Labels;
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(BufWriter::new(file))
}

fn write_comments(out: &mut dyn Write, comments: &[String]) -> Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Writes one row per point with ids `0..M`; the label column is -1 when `labels` is `None`.
pub fn write_embedding(
    out: &mut dyn Write,
    positions: &[[f64; 2]],
    labels: Option<&Labels>,
    comments: &[String],
) -> Result<()> {
    let ids: Vec<u32> = (0..positions.len() as u32).collect();
    write_embedding_ids(out, &ids, positions, labels, comments)
}

/// Like [`write_embedding`] with explicit point ids (e.g. after points were removed).
pub fn write_embedding_ids(
    out: &mut dyn Write,
    ids: &[u32],
    positions: &[[f64; 2]],
    labels: Option<&Labels>,
    comments: &[String],
) -> Result<()> {
    if ids.len() != positions.len() {
        return Err(Error::Consistency(format!(
            "{} ids for {} positions",
            ids.len(),
            positions.len()
        )));
    }
    if let Some(l) = labels {
        l.check_len(positions.len())?;
    }
    write_comments(out, comments)?;
    writeln!(out, "id,x,y,label")?;
    for (i, (id, p)) in ids.iter().zip(positions).enumerate() {
        let label = labels.map_or(-1, |l| l.value(i));
        writeln!(out, "{id},{},{},{label}", p[0], p[1])?;
    }
    Ok(())
}

pub fn save_embedding(
    path: impl AsRef<Path>,
    positions: &[[f64; 2]],
    labels: Option<&Labels>,
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    write_embedding(&mut out, positions, labels, comments)?;
    out.flush().map_err(|e| Error::file(path, e))
}

pub fn write_trace(out: &mut dyn Write, trace: &[(u64, f64)], comments: &[String]) -> Result<()> {
    write_comments(out, comments)?;
    writeln!(out, "iter,stress")?;
    for (iter, stress) in trace {
        writeln!(out, "{iter},{stress}")?;
    }
    Ok(())
}

pub fn save_trace(path: impl AsRef<Path>, trace: &[(u64, f64)], comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    write_trace(&mut out, trace, comments)?;
    out.flush().map_err(|e| Error::file(path, e))
}

/// An embedding read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub ids: Vec<u64>,
    pub positions: Vec<[f64; 2]>,
    /// `None` when every label is -1.
    pub labels: Option<Labels>,
    pub comments: Vec<String>,
}

/// Reads a file written by [`save_embedding`]. Ids must be unique.
pub fn load_embedding(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut ids = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut positions = Vec::new();
    let mut raw_labels = Vec::new();
    let mut comments = Vec::new();
    let mut seen_header = false;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        let line_no = n as u64 + 1;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim_start().to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != "id,x,y,label" {
                return Err(Error::format(format!(
                    "{}: expected header id,x,y,label, found {line:?}",
                    path.display()
                )));
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(Error::format(format!(
                "{}: line {line_no} has {} fields, expected 4",
                path.display(),
                cells.len()
            )));
        }
        let parse_err = |column: usize, what: &str| Error::Parse {
            line: line_no,
            column,
            message: format!("invalid {what} {:?}", cells[column]),
        };
        let id: u64 = cells[0].parse().map_err(|_| parse_err(0, "id"))?;
        if !seen.insert(id) {
            return Err(Error::format(format!(
                "{}: line {line_no} repeats id {id}",
                path.display()
            )));
        }
        let x: f64 = cells[1].parse().map_err(|_| parse_err(1, "coordinate"))?;
        let y: f64 = cells[2].parse().map_err(|_| parse_err(2, "coordinate"))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Domain(format!("line {line_no}: non-finite position")));
        }
        let label: i64 = cells[3].parse().map_err(|_| parse_err(3, "label"))?;
        ids.push(id);
        positions.push([x, y]);
        raw_labels.push(label);
    }
    if positions.is_empty() {
        return Err(Error::format(format!("{}: no embedding rows", path.display())));
    }
    let labels = if raw_labels.iter().all(|&l| l == -1) {
        None
    } else {
        Some(Labels::from_values(&raw_labels))
    };
    Ok(EmbeddingFile {
        ids,
        positions,
        labels,
        comments,
    })
}
