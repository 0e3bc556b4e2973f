use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 - a.b / (|a| |b|)`; undefined for zero vectors.
    Cosine,
}

impl Metric {
    /// Identifier stored in the neighbor cache header.
    pub fn id(self) -> u8 {
        match self {
            Metric::Euclidean => 0,
            Metric::Cosine => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Metric::Euclidean),
            1 => Some(Metric::Cosine),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::argument(format!("unknown metric `{other}`"))),
        }
    }
}

// The kernels below fix the summation order (four interleaved partial sums), so
// every caller that goes through them gets bit-identical, symmetric results.

/// Independent partial sums per kernel; the fixed order keeps results reproducible.
const LANES: usize = 8;

#[inline]
fn lane_sum(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ca, ra) = a.split_at(a.len() - a.len() % LANES);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(LANES).zip(cb.chunks_exact(LANES)) {
        for k in 0..LANES {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    lane_sum(&acc) + tail
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ca, ra) = a.split_at(a.len() - a.len() % LANES);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(LANES).zip(cb.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    lane_sum(&acc) + tail
}

#[inline]
pub(crate) fn cosine_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    (1.0 - dot / (sq_norm_a * sq_norm_b).sqrt()).max(0.0)
}

/// Distance between two vectors of equal length.
pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::argument(format!(
            "vectors of length {} and {} are not comparable",
            a.len(),
            b.len()
        )));
    }
    match metric {
        Metric::Euclidean => Ok(squared_euclidean(a, b).sqrt()),
        Metric::Cosine => {
            let na = dot(a, a);
            let nb = dot(b, b);
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Domain("cosine distance of a zero vector".into()));
            }
            Ok(cosine_from_parts(dot(a, b), na, nb))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        assert_eq!(distance(Metric::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(distance(Metric::Cosine, &[2.0, 7.0], &[2.0, 7.0]).unwrap(), 0.0);
        // 1 - 1/sqrt(2)
        let expected = 0.292_893_218_813_452_54;
        let got = distance(Metric::Cosine, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn cosine_rejects_zero_vectors_and_length_mismatch() {
        assert!(matches!(
            distance(Metric::Cosine, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(distance(Metric::Euclidean, &[0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ids_and_names_round_trip() {
        for m in [Metric::Euclidean, Metric::Cosine] {
            assert_eq!(Metric::from_id(m.id()), Some(m));
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!(Metric::from_id(9).is_none());
        assert!("manhattan".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn distances_are_symmetric_and_nonnegative(
            a in proptest::collection::vec(-100.0f64..100.0, 1..19),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.random_range(-100.0..100.0)).collect();
            for metric in [Metric::Euclidean, Metric::Cosine] {
                let (Ok(ab), Ok(ba)) = (distance(metric, &a, &b), distance(metric, &b, &a)) else {
                    continue;
                };
                prop_assert_eq!(ab.to_bits(), ba.to_bits());
                prop_assert!(ab >= 0.0);
            }
            prop_assert_eq!(distance(Metric::Euclidean, &a, &a).unwrap(), 0.0);
        }
    }
}
