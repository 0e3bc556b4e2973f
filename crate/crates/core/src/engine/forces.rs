//! Reduced stress over the augmented edge set and its force field.
//!
//! Every directed edge `(i, j)` with weight `w` and target distance `D`
//! contributes `w * (D - d_ij)^2` to the stress, with weight 1 for nearest
//! neighbors and `c` for random neighbors. The force on a point is
//! `-GRADIENT_SCALE * dE/dx_i`, so an edge pushes both of its endpoints:
//!
//! ```text
//! g = w * (D - d) / max(d, eps) * (x_i - x_j)     f_i += g,  f_j -= g
//! ```
//!
//! For `D = 0` this is the plain spring `-w * (x_i - x_j)`. Random edges repel
//! while shorter than `D_rn` and attract while longer.

use super::layout::LayoutState;
use super::params::EmbedParams;
use crate::error::{Error, Result};
use crate::knngraph::AugmentedEdges;

/// Forces are this multiple of the negative stress gradient.
pub const GRADIENT_SCALE: f64 = 0.5;

#[inline]
fn edge_term(xi: [f64; 2], xj: [f64; 2], weight: f64, target: f64, eps: f64) -> (f64, [f64; 2]) {
    let dx = [xi[0] - xj[0], xi[1] - xj[1]];
    let d = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
    let residual = target - d;
    let energy = weight * residual * residual;
    let scale = if target == 0.0 {
        -weight
    } else {
        weight * residual / d.max(eps)
    };
    (energy, [scale * dx[0], scale * dx[1]])
}

/// Reduced stress of `positions` over all nearest and random edges.
fn stress_of(positions: &[[f64; 2]], edges: &AugmentedEdges, params: &EmbedParams) -> f64 {
    let mut total = 0.0;
    for (i, &xi) in positions.iter().enumerate() {
        let mut local = 0.0;
        for &j in edges.nn(i) {
            local += edge_term(xi, positions[j as usize], 1.0, params.d_nn, params.epsilon).0;
        }
        for &k in edges.rn(i) {
            local += edge_term(xi, positions[k as usize], params.c, params.d_rn, params.epsilon).0;
        }
        total += local;
    }
    total
}

pub fn reduced_stress(state: &LayoutState, edges: &AugmentedEdges, params: &EmbedParams) -> f64 {
    stress_of(&state.positions, edges, params)
}

/// Random neighbors are scattered over the whole layout; fetching them this
/// many points early hides most of the memory latency once the layout
/// outgrows the cache.
const PREFETCH_AHEAD: usize = 32;

#[inline(always)]
fn prefetch<T>(p: &T) {
    #[cfg(target_arch = "x86_64")]
    // SAFETY: prefetching is a hint and never faults.
    unsafe {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        _mm_prefetch::<_MM_HINT_T0>((p as *const T).cast());
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = p;
}

/// Writes the force on every point into `out` and returns the stress.
///
/// Points are visited in index order and each point's own edges in list
/// order, so the result is bit-reproducible.
pub(crate) fn accumulate_forces(
    positions: &[[f64; 2]],
    edges: &AugmentedEdges,
    params: &EmbedParams,
    out: &mut [[f64; 2]],
) -> f64 {
    out.iter_mut().for_each(|f| *f = [0.0; 2]);
    let mut total = 0.0;
    for (i, &xi) in positions.iter().enumerate() {
        if i + PREFETCH_AHEAD < positions.len() {
            let ahead = i + PREFETCH_AHEAD;
            for &k in edges.nn(ahead).iter().chain(edges.rn(ahead)) {
                prefetch(&positions[k as usize]);
                prefetch(&out[k as usize]);
            }
        }
        let mut local = 0.0;
        let groups = [(edges.nn(i), 1.0, params.d_nn), (edges.rn(i), params.c, params.d_rn)];
        for (targets, weight, target) in groups {
            for &j in targets {
                let j = j as usize;
                let (e, g) = edge_term(xi, positions[j], weight, target, params.epsilon);
                local += e;
                out[i][0] += g[0];
                out[i][1] += g[1];
                out[j][0] -= g[0];
                out[j][1] -= g[1];
            }
        }
        total += local;
    }
    total
}

/// Forces on all points.
pub fn forces(state: &LayoutState, edges: &AugmentedEdges, params: &EmbedParams) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; state.len()];
    accumulate_forces(&state.positions, edges, params, &mut out);
    out
}

/// Force on point `i`: its own edges plus every edge that points at it.
///
/// Scans all edges; use [`forces`] when more than a few points are needed.
pub fn force(i: usize, state: &LayoutState, edges: &AugmentedEdges, params: &EmbedParams) -> [f64; 2] {
    let p = &state.positions;
    let mut f = [0.0; 2];
    let mut add = |from: usize, to: usize, weight: f64, target: f64| {
        let (_, g) = edge_term(p[from], p[to], weight, target, params.epsilon);
        let sign = if from == i { 1.0 } else { -1.0 };
        f[0] += sign * g[0];
        f[1] += sign * g[1];
    };
    for src in 0..p.len() {
        for &j in edges.nn(src) {
            if src == i || j as usize == i {
                add(src, j as usize, 1.0, params.d_nn);
            }
        }
        for &k in edges.rn(src) {
            if src == i || k as usize == i {
                add(src, k as usize, params.c, params.d_rn);
            }
        }
    }
    f
}

/// Scratch buffer reused across steps.
#[derive(Debug, Default, Clone)]
pub(crate) struct ForceBuffer(pub(crate) Vec<[f64; 2]>);

/// One synchronous momentum update.
///
/// All forces are evaluated at the pre-step positions, then every point moves:
/// `delta <- a * delta + b * f`, `x <- x + delta`. Returns the stress of the
/// pre-step layout.
pub(crate) fn step_with(
    state: &mut LayoutState,
    edges: &mut AugmentedEdges,
    params: &EmbedParams,
    buffer: &mut ForceBuffer,
) -> Result<f64> {
    edges.prepare_iteration(state.iteration);
    buffer.0.resize(state.len(), [0.0; 2]);
    let stress = accumulate_forces(&state.positions, edges, params, &mut buffer.0);
    let (a, b) = (params.a, params.b);
    // Check first so a diverging step leaves the layout untouched.
    let next = |x: [f64; 2], dx: [f64; 2], f: [f64; 2]| {
        let d = [a * dx[0] + b * f[0], a * dx[1] + b * f[1]];
        (d, [x[0] + d[0], x[1] + d[1]])
    };
    let bad = (0..state.len()).find(|&i| {
        let (_, x) = next(state.positions[i], state.deltas[i], buffer.0[i]);
        !(x[0].is_finite() && x[1].is_finite())
    });
    if let Some(point) = bad {
        return Err(Error::Divergence {
            iteration: state.iteration,
            point,
            b,
        });
    }
    for ((x, dx), &f) in state.positions.iter_mut().zip(state.deltas.iter_mut()).zip(&buffer.0) {
        (*dx, *x) = next(*x, *dx, f);
    }
    state.iteration += 1;
    state.last_stress = stress;
    Ok(stress)
}

/// One synchronous momentum update; see [`super::Engine`] for repeated stepping.
pub fn step(state: &mut LayoutState, edges: &mut AugmentedEdges, params: &EmbedParams) -> Result<f64> {
    step_with(state, edges, params, &mut ForceBuffer::default())
}
