//! Two-dimensional embedding of large high-dimensional datasets through their
//! nearest-neighbor graphs.
//!
//! Each sample is joined to a few nearest neighbors (target distance `D_nn`,
//! usually 0) and a few random samples (target distance `D_rn`, usually 1). The
//! layout minimizes the squared mismatch over those edges only, using a
//! momentum-driven particle system, so time and memory per iteration are linear
//! in the number of samples.
//!
//! ```no_run
//! use ivhd::prelude::*;
//!
//! let (data, labels) = synth_blobs(5_000, 20, 5, 1.0, 7)?;
//! let params = EmbedParams::from_preset(Preset::Universal);
//! let graph = knn_exact(&data, params.use_nn, Metric::Euclidean)?;
//! let edges = augment(&graph, params.rn, params.use_nn, params.resample, params.seed)?;
//! let mut engine = Engine::new(edges, params)?;
//! engine.run(&mut ())?;
//! let report = cf(&engine.state().to_matrix(), &labels, 30, Metric::Euclidean)?;
//! println!("cf = {:.3}", report.cf);
//! # Ok::<(), ivhd::Error>(())
//! ```

pub mod config;
pub mod dataio;
pub mod engine;
mod error;
pub mod knngraph;
pub mod metrics;
pub mod output;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::dataio::{
        load_dense_csv, load_idx, pca_reduce, synth_blobs, synth_simplex_pair, DataMatrix, Labels,
    };
    pub use crate::engine::{init_layout, reduced_stress, EmbedParams, Engine, LayoutState, Observer, Preset};
    pub use crate::knngraph::{
        augment, knn_exact, load_neighbor_cache, save_neighbor_cache, AugmentedEdges, Metric, NeighborGraph,
        ResampleMode,
    };
    pub use crate::metrics::{cf, cf_nn, knn_recovery, QualityReport};
    pub use crate::{Error, Result};
}
