//! The synchronous part of a session: one engine, its controls and its frames.
//!
//! Nothing here touches the network or threads, so the steering semantics can
//! be tested step by step.

use std::collections::BTreeMap;
use std::sync::Arc;

use ivhd::config::{neighbor_graph, prepare_dataset, ConfigMap, RunConfig, KEYS};
use ivhd::dataio::Labels;
use ivhd::engine::{init_layout, EmbedParams, Engine};
use ivhd::knngraph::{augment, AugmentedEdges, NeighborGraph};
use ivhd::metrics::{cf, default_nn_max};
use ivhd::output::write_embedding_ids;

use crate::protocol::{encode_frame, Ack, Control, EvalView, FrameHeader, ParamsView};

/// Config key holding the frame stride; not part of the batch configuration.
pub const STRIDE_KEY: &str = "frame_stride";

/// Parameters a running session accepts through `set_param`.
pub const MUTABLE_PARAMS: [&str; 5] = ["a", "b", "c", "rn", "stride"];

/// A frame ready for subscribers. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Header without ids; subscribers add them when `ids_version` is new to them.
    pub header: FrameHeader,
    pub ids: Arc<Vec<u32>>,
    pub payload: Arc<Vec<u8>>,
}

pub struct SessionEngine {
    /// Neighbor cache over the original point ids; deeper entries backfill removals.
    graph: NeighborGraph,
    /// Indexed by original id.
    labels: Option<Labels>,
    /// Original id of each live point, ascending.
    alive: Vec<u32>,
    engine: Engine,
    stride: u64,
    running: bool,
    ids_version: u64,
    eval: Option<EvalView>,
    error: Option<String>,
    echo: Vec<String>,
}

fn json_to_config(config: &BTreeMap<String, serde_json::Value>) -> Result<(ConfigMap, Option<u64>), String> {
    let mut flags = ConfigMap::new();
    let mut stride = None;
    for (key, value) in config {
        let text = match value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Bool(b) => b.to_string(),
            other => return Err(format!("unsupported value for `{key}`: {other}")),
        };
        if key == STRIDE_KEY {
            stride = Some(text.parse().map_err(|_| format!("invalid frame stride `{text}`"))?);
        } else {
            flags.set(key, text).map_err(|e| e.to_string())?;
        }
    }
    let merged = ConfigMap::merge(None, &flags).map_err(|e| e.to_string())?;
    Ok((merged, stride))
}

impl SessionEngine {
    /// Loads the dataset described by `config` (flat key/value pairs) and starts paused.
    pub fn from_config(config: &BTreeMap<String, serde_json::Value>, default_stride: u64) -> Result<Self, String> {
        let (map, stride) = json_to_config(config)?;
        let run = RunConfig::from_map(&map).map_err(|e| e.to_string())?;
        let spec = run.dataset().map_err(|e| e.to_string())?;
        let (data, labels) = prepare_dataset(spec).map_err(|e| e.to_string())?;
        let (graph, _) = neighbor_graph(spec, &data, run.params.use_nn).map_err(|e| e.to_string())?;
        let mut session = Self::from_graph(graph, labels, run.params.clone(), stride.unwrap_or(default_stride))?;
        session.echo = run.echo();
        Ok(session)
    }

    pub fn from_graph(
        graph: NeighborGraph,
        labels: Option<Labels>,
        params: EmbedParams,
        stride: u64,
    ) -> Result<Self, String> {
        if stride == 0 {
            return Err("frame stride must be at least 1".into());
        }
        if let Some(l) = &labels {
            if l.len() != graph.len() {
                return Err(format!("{} labels for {} points", l.len(), graph.len()));
            }
        }
        let edges =
            augment(&graph, params.rn, params.use_nn, params.resample, params.seed).map_err(|e| e.to_string())?;
        let engine = Engine::new(edges, params).map_err(|e| e.to_string())?;
        Ok(Self {
            alive: (0..graph.len() as u32).collect(),
            graph,
            labels,
            engine,
            stride,
            running: false,
            ids_version: 0,
            eval: None,
            error: None,
            echo: Vec::new(),
        })
    }

    pub fn count(&self) -> usize {
        self.alive.len()
    }

    pub fn iteration(&self) -> u64 {
        self.engine.state().iteration()
    }

    pub fn running(&self) -> bool {
        self.running
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn params(&self) -> &EmbedParams {
        self.engine.params()
    }

    pub fn alive_ids(&self) -> &[u32] {
        &self.alive
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        self.engine.state().positions()
    }

    fn ack(&self, result: Result<(), String>) -> Ack {
        let (ok, reason) = match result {
            Ok(()) => (true, None),
            Err(r) => (false, Some(r)),
        };
        Ack {
            ok,
            reason,
            iteration: self.iteration(),
            count: self.count(),
            eval: None,
        }
    }

    /// Applies one control; a rejected control leaves the session unchanged.
    pub fn apply(&mut self, control: Control) -> Ack {
        let result = match control {
            Control::Load { config } => match Self::from_config(&config, self.stride) {
                Ok(fresh) => {
                    let version = self.ids_version + 1;
                    *self = fresh;
                    self.ids_version = version;
                    Ok(())
                }
                Err(e) => Err(e),
            },
            Control::Start | Control::Resume => {
                self.running = true;
                self.error = None;
                Ok(())
            }
            Control::Pause => {
                self.running = false;
                Ok(())
            }
            Control::SetParam { name, value } => self.set_param(&name, value),
            Control::RemovePoints { ids } => self.remove_points(&ids),
            Control::Restart { seed } => self.restart(seed),
            Control::RequestEval { nn_max } => {
                return match self.evaluate(nn_max) {
                    Ok(view) => {
                        self.eval = Some(view.clone());
                        Ack {
                            eval: Some(view),
                            ..self.ack(Ok(()))
                        }
                    }
                    Err(e) => self.ack(Err(e)),
                };
            }
        };
        self.ack(result)
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !value.is_finite() {
            return Err(format!("value for `{name}` must be finite"));
        }
        let whole = || -> Result<u64, String> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as u64)
            } else {
                Err(format!("`{name}` must be a positive integer"))
            }
        };
        let mut params = self.engine.params().clone();
        match name {
            "a" => params.a = value,
            "b" => params.b = value,
            "c" => params.c = value,
            "rn" => params.rn = whole()? as usize,
            "stride" => {
                self.stride = whole()?;
                return Ok(());
            }
            _ if KEYS.contains(&name) || name == "use_nn" || name == "dataset" => {
                return Err(format!("`{name}` is structural; load a new configuration instead"));
            }
            _ => return Err(format!("unknown parameter `{name}`")),
        }
        self.engine.set_params(params).map_err(|e| e.to_string())
    }

    /// Nearest lists of the live points, remapped to live indices, backfilled from deeper cached neighbors.
    fn live_edges(&self, alive: &[u32], params: &EmbedParams, seed: u64) -> Result<AugmentedEdges, String> {
        let mut index_of = vec![u32::MAX; self.graph.len()];
        for (k, &id) in alive.iter().enumerate() {
            index_of[id as usize] = k as u32;
        }
        let lists: Vec<Vec<u32>> = alive
            .iter()
            .map(|&id| {
                self.graph
                    .neighbors(id as usize)
                    .iter()
                    .map(|&j| index_of[j as usize])
                    .filter(|&k| k != u32::MAX)
                    .take(params.use_nn)
                    .collect()
            })
            .collect();
        AugmentedEdges::from_nn_lists(&lists, params.rn, params.resample, seed).map_err(|e| e.to_string())
    }

    fn remove_points(&mut self, ids: &[u32]) -> Result<(), String> {
        if ids.is_empty() {
            return Ok(());
        }
        let mut keep = vec![true; self.alive.len()];
        for &id in ids {
            let at = self
                .alive
                .binary_search(&id)
                .map_err(|_| format!("unknown point id {id}"))?;
            keep[at] = false;
        }
        let alive: Vec<u32> = self
            .alive
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&id, _)| id)
            .collect();
        let params = self.engine.params().clone();
        let edges = self.live_edges(&alive, &params, params.seed)?;
        let mut state = self.engine.state().clone();
        state.retain(&keep);
        self.engine.replace(edges, state).map_err(|e| e.to_string())?;
        self.alive = alive;
        self.ids_version += 1;
        self.eval = None;
        Ok(())
    }

    fn restart(&mut self, seed: u64) -> Result<(), String> {
        let mut params = self.engine.params().clone();
        params.seed = seed;
        let edges = self.live_edges(&self.alive, &params, seed)?;
        let state = init_layout(self.alive.len(), seed).map_err(|e| e.to_string())?;
        self.engine = Engine::with_state(edges, params, state).map_err(|e| e.to_string())?;
        self.eval = None;
        self.error = None;
        Ok(())
    }

    fn evaluate(&self, nn_max: Option<usize>) -> Result<EvalView, String> {
        let labels = self.labels.as_ref().ok_or("the dataset has no labels")?;
        let live = labels.select(&self.alive.iter().map(|&i| i as usize).collect::<Vec<_>>());
        let nn_max = nn_max
            .unwrap_or_else(|| default_nn_max(&live))
            .min(self.count().saturating_sub(1));
        let report = cf(
            &self.engine.state().to_matrix(),
            &live,
            nn_max,
            ivhd::knngraph::Metric::Euclidean,
        )
        .map_err(|e| e.to_string())?;
        Ok(EvalView {
            cf: report.cf,
            nn_max: report.nn_max,
            curve: report.curve,
        })
    }

    /// Runs one iteration if running. Returns true when a frame is due.
    pub fn advance(&mut self) -> bool {
        if !self.running {
            return false;
        }
        let max_iters = self.engine.params().max_iters;
        if self.iteration() >= max_iters {
            self.running = false;
            return true;
        }
        if let Err(e) = self.engine.step() {
            self.running = false;
            self.error = Some(e.to_string());
            return true;
        }
        if self.iteration() >= max_iters {
            self.running = false;
            return true;
        }
        self.iteration().is_multiple_of(self.stride)
    }

    pub fn frame(&self, heartbeat: bool) -> Frame {
        let params = self.engine.params();
        let stress = self.engine.stress();
        Frame {
            header: FrameHeader {
                iteration: self.iteration(),
                stress,
                count: self.count(),
                running: self.running,
                heartbeat,
                params: ParamsView {
                    a: params.a,
                    b: params.b,
                    c: params.c,
                    rn: params.rn,
                    stride: self.stride,
                    use_nn: params.use_nn,
                    max_iters: params.max_iters,
                },
                ids_version: self.ids_version,
                ids: None,
                eval: self.eval.clone(),
                error: self.error.clone(),
            },
            ids: Arc::new(self.alive.clone()),
            payload: Arc::new(encode_frame(self.iteration(), stress, self.positions())),
        }
    }

    /// Current layout as an embedding CSV keyed by original ids.
    pub fn snapshot_csv(&self) -> String {
        let labels = self
            .labels
            .as_ref()
            .map(|l| l.select(&self.alive.iter().map(|&i| i as usize).collect::<Vec<_>>()));
        let mut comments = self.echo.clone();
        comments.push(format!("iteration={}", self.iteration()));
        let mut out = Vec::new();
        write_embedding_ids(&mut out, &self.alive, self.positions(), labels.as_ref(), &comments)
            .expect("writing to memory cannot fail");
        String::from_utf8(out).expect("CSV is UTF-8")
    }
}
