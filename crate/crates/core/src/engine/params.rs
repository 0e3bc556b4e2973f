use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::knngraph::ResampleMode;

/// Minimization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedParams {
    /// Momentum retention ("friction"), in `[0, 1]`; 1 means no dissipation.
    pub a: f64,
    /// Force scale (combined step size).
    pub b: f64,
    /// Weight of random-neighbor edges.
    pub c: f64,
    /// Nearest neighbors used per point.
    pub use_nn: usize,
    /// Random neighbors per point.
    pub rn: usize,
    /// Target distance of nearest-neighbor edges.
    pub d_nn: f64,
    /// Target distance of random edges.
    pub d_rn: f64,
    pub max_iters: u64,
    /// Relative stress change over the convergence window that stops the run.
    pub tol: f64,
    pub seed: u64,
    /// Floor for distances used as divisors.
    pub epsilon: f64,
    pub resample: ResampleMode,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            a: 0.9,
            b: 0.01,
            c: 0.1,
            use_nn: 3,
            rn: 1,
            d_nn: 0.0,
            d_rn: 1.0,
            max_iters: 3000,
            tol: 1e-5,
            seed: 0,
            epsilon: 1e-9,
            resample: ResampleMode::Fixed,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::argument(what.to_string()));
        if !(0.0..=1.0).contains(&self.a) {
            return bad(&format!("a = {} must lie in [0, 1]", self.a));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(&format!("b = {} must be positive", self.b));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(&format!("c = {} must be positive", self.c));
        }
        if !(self.d_nn.is_finite() && self.d_rn.is_finite() && self.d_nn >= 0.0 && self.d_nn < self.d_rn) {
            return bad(&format!(
                "target distances must satisfy 0 <= d_nn < d_rn (got {} and {})",
                self.d_nn, self.d_rn
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return bad("tol must be nonnegative");
        }
        if self.rn == 0 {
            return bad("rn must be at least 1");
        }
        Ok(())
    }

    pub fn from_preset(preset: Preset) -> Self {
        let mut p = Self::default();
        preset.apply(&mut p);
        p
    }
}

/// Named parameter sets for the datasets the method is usually demonstrated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// nn=3, rn=1, c=0.1: works for most data.
    Universal,
    /// nn=2, rn=1, c=0.005.
    Mnist,
    /// nn=10, rn=1, c=0.01.
    Norb,
    /// nn=5, rn=3, c=0.1 (twenty newsgroups after PCA to 30 dims).
    Newsgroups,
    /// nn=20, rn=3, c=0.05 (RCV1 after PCA to 30 dims).
    Rcv1,
    /// nn=2, rn=1, c=0.1 with D_nn=0.5, for the two-simplex example.
    Toy,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Universal,
        Preset::Mnist,
        Preset::Norb,
        Preset::Newsgroups,
        Preset::Rcv1,
        Preset::Toy,
    ];

    /// `(use_nn, rn, c, d_nn)`
    fn values(self) -> (usize, usize, f64, f64) {
        match self {
            Preset::Universal => (3, 1, 0.1, 0.0),
            Preset::Mnist => (2, 1, 0.005, 0.0),
            Preset::Norb => (10, 1, 0.01, 0.0),
            Preset::Newsgroups => (5, 3, 0.1, 0.0),
            Preset::Rcv1 => (20, 3, 0.05, 0.0),
            Preset::Toy => (2, 1, 0.1, 0.5),
        }
    }

    pub fn apply(self, params: &mut EmbedParams) {
        let (use_nn, rn, c, d_nn) = self.values();
        params.use_nn = use_nn;
        params.rn = rn;
        params.c = c;
        params.d_nn = d_nn;
    }

    /// The preset as `key=value` pairs, in the config file vocabulary.
    pub fn entries(self) -> Vec<(&'static str, String)> {
        let (use_nn, rn, c, d_nn) = self.values();
        vec![
            ("nn", use_nn.to_string()),
            ("rn", rn.to_string()),
            ("c", c.to_string()),
            ("d_nn", d_nn.to_string()),
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Universal => "universal",
            Preset::Mnist => "mnist",
            Preset::Norb => "norb",
            Preset::Newsgroups => "20ng",
            Preset::Rcv1 => "rcv1",
            Preset::Toy => "toy",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown preset `{s}`")))
    }
}
