use super::forces::{reduced_stress, step_with, ForceBuffer};
use super::layout::{init_layout, LayoutState};
use super::params::EmbedParams;
use crate::error::{Error, Result};
use crate::knngraph::AugmentedEdges;

/// Number of iterations over which the relative stress change is measured.
pub const CONVERGENCE_WINDOW: usize = 50;

/// Callbacks invoked while a run progresses.
pub trait Observer {
    /// Stress of the layout at `iteration` (before that iteration's update).
    fn on_stress(&mut self, _iteration: u64, _stress: f64) {}

    /// Called every [`Observer::snapshot_every`] iterations with the current positions.
    fn on_snapshot(&mut self, _iteration: u64, _positions: &[[f64; 2]]) {}

    /// Snapshot stride; 0 disables snapshots.
    fn snapshot_every(&self) -> u64 {
        0
    }
}

impl Observer for () {}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxIters,
    Converged,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// `(iteration, stress)`; the last entry is the stress of the final layout.
    pub trace: Vec<(u64, f64)>,
    pub stop: StopReason,
}

impl RunReport {
    pub fn final_stress(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |&(_, e)| e)
    }
}

/// A layout being minimized over a fixed edge set.
///
/// Parameters may be changed between iterations; the engine has a single writer.
#[derive(Debug, Clone)]
pub struct Engine {
    edges: AugmentedEdges,
    params: EmbedParams,
    state: LayoutState,
    buffer: ForceBuffer,
}

impl Engine {
    /// Starts from a seeded uniform layout.
    pub fn new(edges: AugmentedEdges, params: EmbedParams) -> Result<Self> {
        let state = init_layout(edges.len(), params.seed)?;
        Self::with_state(edges, params, state)
    }

    pub fn with_state(edges: AugmentedEdges, params: EmbedParams, state: LayoutState) -> Result<Self> {
        params.validate()?;
        if state.len() != edges.len() {
            return Err(Error::Consistency(format!(
                "layout has {} points, edges cover {}",
                state.len(),
                edges.len()
            )));
        }
        Ok(Self {
            edges,
            params,
            state,
            buffer: ForceBuffer::default(),
        })
    }

    pub fn state(&self) -> &LayoutState {
        &self.state
    }

    pub fn edges(&self) -> &AugmentedEdges {
        &self.edges
    }

    pub fn params(&self) -> &EmbedParams {
        &self.params
    }

    /// Replaces the parameters; takes effect at the next iteration.
    pub fn set_params(&mut self, params: EmbedParams) -> Result<()> {
        params.validate()?;
        if params.rn != self.edges.rn_count() {
            self.edges.set_rn(params.rn)?;
        }
        self.params = params;
        Ok(())
    }

    /// Swaps in a new edge set and layout of matching size.
    pub fn replace(&mut self, edges: AugmentedEdges, state: LayoutState) -> Result<()> {
        if state.len() != edges.len() {
            return Err(Error::Consistency("layout and edges differ in size".into()));
        }
        self.edges = edges;
        self.state = state;
        Ok(())
    }

    pub fn into_state(self) -> LayoutState {
        self.state
    }

    pub fn stress(&self) -> f64 {
        reduced_stress(&self.state, &self.edges, &self.params)
    }

    /// One synchronous momentum update. Returns the pre-step stress.
    pub fn step(&mut self) -> Result<f64> {
        step_with(&mut self.state, &mut self.edges, &self.params, &mut self.buffer)
    }

    /// Steps until `max_iters` total iterations or until the stress changes by less
    /// than `tol` (relative) over [`CONVERGENCE_WINDOW`] iterations.
    pub fn run(&mut self, observer: &mut dyn Observer) -> Result<RunReport> {
        let stride = observer.snapshot_every();
        let mut trace: Vec<(u64, f64)> = Vec::new();
        let mut stop = StopReason::MaxIters;
        if stride > 0 && self.state.iteration.is_multiple_of(stride) {
            observer.on_snapshot(self.state.iteration, &self.state.positions);
        }
        while self.state.iteration < self.params.max_iters {
            let iteration = self.state.iteration;
            let stress = self.step()?;
            trace.push((iteration, stress));
            observer.on_stress(iteration, stress);
            if stride > 0 && self.state.iteration.is_multiple_of(stride) {
                observer.on_snapshot(self.state.iteration, &self.state.positions);
            }
            if trace.len() > CONVERGENCE_WINDOW {
                let earlier = trace[trace.len() - 1 - CONVERGENCE_WINDOW].1;
                if stress == 0.0 || (earlier - stress).abs() <= self.params.tol * stress {
                    stop = StopReason::Converged;
                    break;
                }
            }
        }
        let final_stress = self.stress();
        trace.push((self.state.iteration, final_stress));
        observer.on_stress(self.state.iteration, final_stress);
        if stride > 0 && stop == StopReason::Converged && !self.state.iteration.is_multiple_of(stride) {
            observer.on_snapshot(self.state.iteration, &self.state.positions);
        }
        Ok(RunReport { trace, stop })
    }
}
