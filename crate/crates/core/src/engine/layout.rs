use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};

/// Positions and momentum accumulators of all points.
#[derive(Debug, Clone)]
pub struct LayoutState {
    pub(crate) positions: Vec<[f64; 2]>,
    pub(crate) deltas: Vec<[f64; 2]>,
    pub(crate) iteration: u64,
    pub(crate) last_stress: f64,
}

// NaN-aware: a fresh state (stress still NaN) equals its clone.
impl PartialEq for LayoutState {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions
            && self.deltas == other.deltas
            && self.iteration == other.iteration
            && self.last_stress.to_bits() == other.last_stress.to_bits()
    }
}

/// Positions i.i.d. uniform in `[-1, 1]^2`, zero momentum.
pub fn init_layout(m: usize, seed: u64) -> Result<LayoutState> {
    if m == 0 {
        return Err(Error::argument("layout needs at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..m)
        .map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
        .collect();
    Ok(LayoutState {
        positions,
        deltas: vec![[0.0; 2]; m],
        iteration: 0,
        last_stress: f64::NAN,
    })
}

impl LayoutState {
    /// A state at iteration 0 with the given positions and zero momentum.
    pub fn from_positions(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::argument("layout needs at least one point"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite position".into()));
        }
        let m = positions.len();
        Ok(Self {
            positions,
            deltas: vec![[0.0; 2]; m],
            iteration: 0,
            last_stress: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn deltas(&self) -> &[[f64; 2]] {
        &self.deltas
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Stress of the layout the most recent step started from (NaN before the first step).
    pub fn last_stress(&self) -> f64 {
        self.last_stress
    }

    /// Moves every point by `offset`.
    pub fn translate(&mut self, offset: [f64; 2]) {
        for p in &mut self.positions {
            p[0] += offset[0];
            p[1] += offset[1];
        }
    }

    /// Keeps the points whose flag is set, preserving order.
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        let mut k = keep.iter();
        self.positions.retain(|_| *k.next().expect("length checked"));
        let mut k = keep.iter();
        self.deltas.retain(|_| *k.next().expect("length checked"));
    }

    /// Positions as an `M x 2` data matrix.
    pub fn to_matrix(&self) -> DataMatrix {
        let values = self.positions.iter().flatten().copied().collect();
        DataMatrix::new(self.len(), 2, values).expect("layout positions are finite")
    }

    /// Mean position.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.len() as f64;
        let mut c = [0.0; 2];
        for p in &self.positions {
            c[0] += p[0] / n;
            c[1] += p[1] / n;
        }
        c
    }
}
