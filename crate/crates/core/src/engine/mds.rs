//! Full-matrix metric MDS with the same momentum dynamics, for small inputs.

use super::layout::{init_layout, LayoutState};
use super::params::EmbedParams;
use super::run::{RunReport, StopReason, CONVERGENCE_WINDOW};
use crate::error::{Error, Result};

/// Largest input accepted without an explicit override (quadratic memory and time).
pub const MDS_POINT_LIMIT: usize = 2000;

/// `sum over i < j of (D_ij - d_ij)^2`.
pub fn full_stress(distances: &[f64], positions: &[[f64; 2]]) -> f64 {
    let m = positions.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let r = distances[i * m + j] - (dx * dx + dy * dy).sqrt();
            total += r * r;
        }
    }
    total
}

fn check_matrix(distances: &[f64], m: usize) -> Result<()> {
    if distances.len() != m * m {
        return Err(Error::Consistency(format!(
            "{} entries do not form a {m}x{m} distance matrix",
            distances.len()
        )));
    }
    for i in 0..m {
        if distances[i * m + i] != 0.0 {
            return Err(Error::argument(format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..m {
            let (a, b) = (distances[i * m + j], distances[j * m + i]);
            if a != b || !a.is_finite() || a < 0.0 {
                return Err(Error::argument(format!("entry ({i}, {j}) is not a symmetric distance")));
            }
        }
    }
    Ok(())
}

/// Embeds a full `m x m` distance matrix by momentum minimization of the full stress.
///
/// The force on a point is the average over its `m - 1` partners of
/// `(D_ij - d_ij) * (x_i - x_j) / d_ij`, so the reduced-mode `a` and `b` stay
/// stable regardless of `m`. Inputs above [`MDS_POINT_LIMIT`] points need
/// `allow_large`.
pub fn classical_mds_reference(
    distances: &[f64],
    m: usize,
    params: &EmbedParams,
    allow_large: bool,
) -> Result<(LayoutState, RunReport)> {
    if m > MDS_POINT_LIMIT && !allow_large {
        return Err(Error::argument(format!(
            "full MDS on {m} points exceeds the {MDS_POINT_LIMIT}-point guard"
        )));
    }
    if m < 2 {
        return Err(Error::argument("full MDS needs at least two points"));
    }
    params.validate()?;
    check_matrix(distances, m)?;

    let mut state = init_layout(m, params.seed)?;
    let mut force = vec![[0.0f64; 2]; m];
    let norm = 1.0 / (m - 1) as f64;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIters;
    while state.iteration < params.max_iters {
        force.iter_mut().for_each(|f| *f = [0.0; 2]);
        let mut stress = 0.0;
        let x = &state.positions;
        for i in 0..m {
            for j in i + 1..m {
                let dx = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
                let d = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
                let r = distances[i * m + j] - d;
                stress += r * r;
                let s = norm * r / d.max(params.epsilon);
                force[i][0] += s * dx[0];
                force[i][1] += s * dx[1];
                force[j][0] -= s * dx[0];
                force[j][1] -= s * dx[1];
            }
        }
        for (i, ((p, v), f)) in state
            .positions
            .iter_mut()
            .zip(state.deltas.iter_mut())
            .zip(&force)
            .enumerate()
        {
            v[0] = params.a * v[0] + params.b * f[0];
            v[1] = params.a * v[1] + params.b * f[1];
            p[0] += v[0];
            p[1] += v[1];
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::Divergence {
                    iteration: state.iteration,
                    point: i,
                    b: params.b,
                });
            }
        }
        trace.push((state.iteration, stress));
        state.iteration += 1;
        state.last_stress = stress;
        if trace.len() > CONVERGENCE_WINDOW {
            let earlier = trace[trace.len() - 1 - CONVERGENCE_WINDOW].1;
            if stress == 0.0 || (earlier - stress).abs() <= params.tol * stress {
                stop = StopReason::Converged;
                break;
            }
        }
    }
    trace.push((state.iteration, full_stress(distances, &state.positions)));
    Ok((state, RunReport { trace, stop }))
}

/// Euclidean distance matrix of the rows of `data`.
pub fn distance_matrix(data: &crate::dataio::DataMatrix) -> Vec<f64> {
    let m = data.rows();
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = crate::knngraph::distance(crate::knngraph::Metric::Euclidean, data.row(i), data.row(j))
                .expect("rows of one matrix have equal length");
            out[i * m + j] = d;
            out[j * m + i] = d;
        }
    }
    out
}
