//! Dense CSV datasets: optional header row, `#` comment lines, one sample per row.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{DataMatrix, Labels};
use crate::error::{Error, Result};

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::file(path, e),
        other => Error::format(format!("{}: {other:?}", path.display())),
    }
}

/// Loads a rectangular numeric table.
///
/// The first record is treated as a header when any of its cells is not a number.
/// `label_column` names a header column, or gives a zero-based column index when
/// the file has no header. That column must hold integers and is excluded from
/// the features.
pub fn load_dense_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<(DataMatrix, Option<Labels>)> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let mut records = reader.records();

    let first = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::format(format!("{}: empty CSV file", path.display()))),
    };
    let has_header = first.iter().any(|cell| cell.parse::<f64>().is_err());
    let width = first.len();

    let label_idx = match label_column {
        None => None,
        Some(name) => {
            let by_name = has_header.then(|| first.iter().position(|h| h == name)).flatten();
            let idx = by_name.or_else(|| name.parse::<usize>().ok().filter(|&i| i < width));
            Some(idx.ok_or_else(|| Error::argument(format!("{}: no label column `{name}`", path.display())))?)
        }
    };
    let feature_dims = width - usize::from(label_idx.is_some());
    if feature_dims == 0 {
        return Err(Error::format(format!("{}: no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut label_values = Vec::new();
    let mut rows = 0usize;
    let pending = if has_header { None } else { Some(Ok(first)) };
    for record in pending.into_iter().chain(records) {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::format(format!(
                "{}: line {line} has {} cells, expected {width}",
                path.display(),
                record.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_idx {
                let label = cell.parse::<i64>().map_err(|_| Error::Parse {
                    line,
                    column: col,
                    message: format!("label `{cell}` is not an integer"),
                })?;
                label_values.push(label);
            } else {
                let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: col,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        column: col,
                        message: format!("`{cell}` is not finite"),
                    });
                }
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::format(format!("{}: no data rows", path.display())));
    }
    let data = DataMatrix::new(rows, feature_dims, values)?;
    let labels = label_idx.map(|_| Labels::from_values(&label_values));
    Ok((data, labels))
}

/// Writes `f0..f{N-1}[,label]` with a header row.
///
/// Values use the shortest representation that parses back to the same `f64`,
/// so reading the file again reproduces the matrix bit for bit.
pub fn write_dense_csv(
    path: impl AsRef<Path>,
    data: &DataMatrix,
    labels: Option<&Labels>,
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    if let Some(labels) = labels {
        labels.check_len(data.rows())?;
    }
    let mut file = std::io::BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?);
    for line in comments {
        writeln!(file, "# {line}")?;
    }
    let mut header: Vec<String> = (0..data.dims()).map(|j| format!("f{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(file, "{}", header.join(","))?;
    let mut line = String::new();
    for (i, row) in data.iter_rows().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        if let Some(labels) = labels {
            line.push(',');
            line.push_str(&labels.value(i).to_string());
        }
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}
