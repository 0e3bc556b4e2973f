//! Dataset types, loaders, generators and PCA preprocessing.

mod csv;
mod idx;
mod pca;
mod synth;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use self::csv::{load_dense_csv, write_dense_csv};
pub use self::idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use self::pca::{pca_reduce, PcaOutput};
pub use self::synth::{synth_blobs, synth_simplex_pair, DEFAULT_SIMPLEX_SEPARATION};

/// Dense row-major matrix of `rows` feature vectors with `dims` components each.
///
/// Every value is finite. The matrix is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    dims: usize,
    values: Vec<f64>,
    name: Option<String>,
}

impl DataMatrix {
    pub fn new(rows: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || dims == 0 {
            return Err(Error::argument(format!(
                "data matrix must be non-empty (got {rows}x{dims})"
            )));
        }
        if values.len() != rows * dims {
            return Err(Error::Consistency(format!(
                "{} values do not fill a {rows}x{dims} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at row {}, column {}",
                pos / dims,
                pos % dims
            )));
        }
        Ok(Self {
            rows,
            dims,
            values,
            name: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::format(format!(
                    "row {i} has {} values, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dims, values)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dims)
    }

    /// Rows `indices` in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::argument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(indices.len(), self.dims, values)?;
        out.name = self.name.clone();
        Ok(out)
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &DataMatrix) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Consistency(format!(
                "cannot stack {}-dimensional rows onto {}-dimensional rows",
                other.dims, self.dims
            )));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        let mut out = Self::new(self.rows + other.rows, self.dims, values)?;
        out.name = self.name.clone();
        Ok(out)
    }

    /// SHA-256 over the shape and the little-endian bit patterns of all values.
    pub fn checksum(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.dims as u64).to_le_bytes());
        let mut buf = Vec::with_capacity(8 * 4096);
        for chunk in self.values.chunks(4096) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            hasher.update(&buf);
        }
        let digest = hasher.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }
}

/// Dense class ids in `[0, class_count)`, one per data row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    ids: Vec<u32>,
    class_count: usize,
    /// Original label value for each dense class id.
    names: Vec<i64>,
}

impl Labels {
    /// Labels that are already dense ids; `class_count` is one past the largest id.
    pub fn from_ids(ids: Vec<u32>) -> Self {
        let class_count = ids.iter().max().map_or(0, |&m| m as usize + 1);
        let names = (0..class_count as i64).collect();
        Self {
            ids,
            class_count,
            names,
        }
    }

    /// Maps arbitrary integer labels onto dense ids ordered by label value.
    pub fn from_values(values: &[i64]) -> Self {
        let mut names: Vec<i64> = values.to_vec();
        names.sort_unstable();
        names.dedup();
        let ids = values
            .iter()
            .map(|v| names.binary_search(v).expect("value present") as u32)
            .collect();
        Self {
            ids,
            class_count: names.len(),
            names,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.ids[i]
    }

    /// Original label value of row `i`.
    pub fn value(&self, i: usize) -> i64 {
        self.names[self.ids[i] as usize]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &id in &self.ids {
            sizes[id as usize] += 1;
        }
        sizes
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            class_count: self.class_count,
            names: self.names.clone(),
        }
    }

    pub fn concat(&self, other: &Labels) -> Self {
        let values: Vec<i64> = (0..self.len())
            .map(|i| self.value(i))
            .chain((0..other.len()).map(|i| other.value(i)))
            .collect();
        Self::from_values(&values)
    }

    pub(crate) fn check_len(&self, rows: usize) -> Result<()> {
        if self.ids.len() != rows {
            return Err(Error::Consistency(format!(
                "{} labels for {rows} data rows",
                self.ids.len()
            )));
        }
        Ok(())
    }
}

/// Class-stratified subsample of about `target` rows.
///
/// Each class keeps `round(size * target / rows)` members chosen by a seeded shuffle,
/// and the selected rows keep their original relative order.
pub fn stratified_subsample(labels: &Labels, target: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let total = labels.len();
    if target >= total {
        return (0..total).collect();
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.class_count()];
    for (i, &id) in labels.ids().iter().enumerate() {
        by_class[id as usize].push(i);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(target);
    for members in &mut by_class {
        let keep = ((members.len() * target) as f64 / total as f64).round() as usize;
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..keep.min(members.len())]);
    }
    picked.sort_unstable();
    picked
}
