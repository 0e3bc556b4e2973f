//! The force-directed minimizer.

mod forces;
mod layout;
mod mds;
mod params;
mod run;

pub use self::forces::{force, forces, reduced_stress, step, GRADIENT_SCALE};
pub use self::layout::{init_layout, LayoutState};
pub use self::mds::{classical_mds_reference, distance_matrix, full_stress, MDS_POINT_LIMIT};
pub use self::params::{EmbedParams, Preset};
pub use self::run::{Engine, Observer, RunReport, StopReason, CONVERGENCE_WINDOW};
