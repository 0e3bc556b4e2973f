//! Run configuration: flat `key=value` text merged as
//! flags > config file > preset > defaults, plus the dataset and neighbor-graph
//! preparation every command shares.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataio::{load_dense_csv, load_idx, pca_reduce, synth_blobs, synth_simplex_pair, DataMatrix, Labels};
use crate::engine::{EmbedParams, Preset};
use crate::error::{Error, Result};
use crate::knngraph::{
    knn_exact, load_neighbor_cache, read_cache_header, save_neighbor_cache, Metric, NeighborGraph, ResampleMode,
};

/// Depth of the neighbor cache when none is configured.
pub const DEFAULT_CACHE_NN: usize = 100;

/// Every key the configuration understands, in echo order.
pub const KEYS: &[&str] = &[
    "preset",
    "data",
    "format",
    "labels",
    "label_column",
    "generate",
    "gen_m",
    "gen_dims",
    "gen_k",
    "gen_spread",
    "gen_separation",
    "gen_seed",
    "metric",
    "pca_dims",
    "cache",
    "cache_nn",
    "a",
    "b",
    "c",
    "nn",
    "rn",
    "d_nn",
    "d_rn",
    "max_iters",
    "tol",
    "seed",
    "epsilon",
    "resample",
    "out",
    "trace",
    "threads",
];

/// Ordered `key=value` pairs from one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n as u64 + 1,
                column: 0,
                message: format!("expected key=value, found {line:?}"),
            })?;
            map.set(key.trim(), value.trim())?;
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    /// Sets a key, rejecting unknown ones.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::argument(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Entries of `other` override those of `self`.
    pub fn overlay(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// `flags > file > preset > defaults`. The preset may be named in either layer.
    pub fn merge(file: Option<&ConfigMap>, flags: &ConfigMap) -> Result<Self> {
        let preset = flags.get("preset").or_else(|| file.and_then(|f| f.get("preset")));
        let mut merged = ConfigMap::new();
        if let Some(name) = preset {
            let preset: Preset = name.parse()?;
            for (k, v) in preset.entries() {
                merged.set(k, v)?;
            }
            merged.set("preset", name)?;
        }
        if let Some(file) = file {
            merged.overlay(file);
        }
        merged.overlay(flags);
        Ok(merged)
    }
}

/// What to embed.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: Option<String>,
    },
    Idx {
        images: PathBuf,
        labels: Option<PathBuf>,
    },
    Blobs {
        m: usize,
        dims: usize,
        k: usize,
        spread: f64,
        seed: u64,
    },
    SimplexPair {
        dims: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub metric: Metric,
    pub pca_dims: Option<usize>,
    pub cache: Option<PathBuf>,
    pub cache_nn: usize,
}

/// Fully resolved configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub dataset: Option<DatasetSpec>,
    pub params: EmbedParams,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Worker cap; 0 means one per core.
    pub threads: usize,
}

fn parse_value<T: FromStr>(map: &ConfigMap, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::argument(format!("invalid value `{v}` for `{key}`")))
        })
        .transpose()
}

fn parse_or<T: FromStr>(map: &ConfigMap, key: &str, default: T) -> Result<T> {
    Ok(parse_value(map, key)?.unwrap_or(default))
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let d = EmbedParams::default();
        let params = EmbedParams {
            a: parse_or(map, "a", d.a)?,
            b: parse_or(map, "b", d.b)?,
            c: parse_or(map, "c", d.c)?,
            use_nn: parse_or(map, "nn", d.use_nn)?,
            rn: parse_or(map, "rn", d.rn)?,
            d_nn: parse_or(map, "d_nn", d.d_nn)?,
            d_rn: parse_or(map, "d_rn", d.d_rn)?,
            max_iters: parse_or(map, "max_iters", d.max_iters)?,
            tol: parse_or(map, "tol", d.tol)?,
            seed: parse_or(map, "seed", d.seed)?,
            epsilon: parse_or(map, "epsilon", d.epsilon)?,
            resample: parse_or::<ResampleMode>(map, "resample", d.resample)?,
        };
        params.validate()?;
        if params.use_nn == 0 {
            return Err(Error::argument("nn must be at least 1"));
        }
        let config = RunConfig {
            preset: parse_value(map, "preset")?,
            dataset: dataset_spec(map, params.use_nn)?,
            params,
            out: map.get("out").map(PathBuf::from),
            trace: map.get("trace").map(PathBuf::from),
            threads: parse_or(map, "threads", 0)?,
        };
        Ok(config)
    }

    /// The effective configuration as `key=value` lines, enough to rerun the command.
    pub fn echo(&self) -> Vec<String> {
        let p = &self.params;
        let mut lines = Vec::new();
        if let Some(preset) = self.preset {
            lines.push(format!("preset={preset}"));
        }
        if let Some(ds) = &self.dataset {
            match &ds.source {
                DataSource::Csv { path, label_column } => {
                    lines.push(format!("data={}", path.display()));
                    lines.push("format=csv".into());
                    if let Some(col) = label_column {
                        lines.push(format!("label_column={col}"));
                    }
                }
                DataSource::Idx { images, labels } => {
                    lines.push(format!("data={}", images.display()));
                    lines.push("format=idx".into());
                    if let Some(l) = labels {
                        lines.push(format!("labels={}", l.display()));
                    }
                }
                DataSource::Blobs {
                    m,
                    dims,
                    k,
                    spread,
                    seed,
                } => {
                    lines.push("generate=blobs".into());
                    lines.push(format!("gen_m={m}"));
                    lines.push(format!("gen_dims={dims}"));
                    lines.push(format!("gen_k={k}"));
                    lines.push(format!("gen_spread={spread}"));
                    lines.push(format!("gen_seed={seed}"));
                }
                DataSource::SimplexPair { dims, separation, seed } => {
                    lines.push("generate=simplex".into());
                    lines.push(format!("gen_dims={dims}"));
                    lines.push(format!("gen_separation={separation}"));
                    lines.push(format!("gen_seed={seed}"));
                }
            }
            lines.push(format!("metric={}", ds.metric));
            if let Some(k) = ds.pca_dims {
                lines.push(format!("pca_dims={k}"));
            }
            if let Some(c) = &ds.cache {
                lines.push(format!("cache={}", c.display()));
            }
            lines.push(format!("cache_nn={}", ds.cache_nn));
        }
        lines.extend([
            format!("a={}", p.a),
            format!("b={}", p.b),
            format!("c={}", p.c),
            format!("nn={}", p.use_nn),
            format!("rn={}", p.rn),
            format!("d_nn={}", p.d_nn),
            format!("d_rn={}", p.d_rn),
            format!("max_iters={}", p.max_iters),
            format!("tol={}", p.tol),
            format!("seed={}", p.seed),
            format!("epsilon={}", p.epsilon),
            format!("resample={}", p.resample),
        ]);
        if let Some(o) = &self.out {
            lines.push(format!("out={}", o.display()));
        }
        if let Some(t) = &self.trace {
            lines.push(format!("trace={}", t.display()));
        }
        lines.push(format!("threads={}", self.threads));
        lines
    }

    pub fn dataset(&self) -> Result<&DatasetSpec> {
        self.dataset
            .as_ref()
            .ok_or_else(|| Error::argument("no dataset given (set `data` or `generate`)"))
    }
}

fn dataset_spec(map: &ConfigMap, use_nn: usize) -> Result<Option<DatasetSpec>> {
    let gen_seed = parse_or(map, "gen_seed", 0u64)?;
    let source = match (map.get("data"), map.get("generate")) {
        (Some(_), Some(_)) => return Err(Error::argument("`data` and `generate` are mutually exclusive")),
        (None, None) => return Ok(None),
        (Some(path), None) => {
            let path = PathBuf::from(path);
            let format = match map.get("format") {
                Some(f) => f.to_string(),
                None => infer_format(&path),
            };
            match format.as_str() {
                "csv" => DataSource::Csv {
                    path,
                    label_column: map.get("label_column").map(str::to_string),
                },
                "idx" => DataSource::Idx {
                    images: path,
                    labels: map.get("labels").map(PathBuf::from),
                },
                other => return Err(Error::argument(format!("unknown data format `{other}`"))),
            }
        }
        (None, Some("blobs")) => DataSource::Blobs {
            m: parse_or(map, "gen_m", 1000)?,
            dims: parse_or(map, "gen_dims", 10)?,
            k: parse_or(map, "gen_k", 5)?,
            spread: parse_or(map, "gen_spread", 1.0)?,
            seed: gen_seed,
        },
        (None, Some("simplex")) => DataSource::SimplexPair {
            dims: parse_or(map, "gen_dims", 7)?,
            separation: parse_or(map, "gen_separation", crate::dataio::DEFAULT_SIMPLEX_SEPARATION)?,
            seed: gen_seed,
        },
        (None, Some(other)) => return Err(Error::argument(format!("unknown generator `{other}`"))),
    };
    let cache_nn = parse_or(map, "cache_nn", DEFAULT_CACHE_NN.max(use_nn))?;
    if cache_nn < use_nn {
        return Err(Error::argument(format!("cache_nn = {cache_nn} is below nn = {use_nn}")));
    }
    Ok(Some(DatasetSpec {
        source,
        metric: parse_or(map, "metric", Metric::Euclidean)?,
        pca_dims: parse_value(map, "pca_dims")?,
        cache: map.get("cache").map(PathBuf::from),
        cache_nn,
    }))
}

fn infer_format(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if name.contains("idx") || name.contains("ubyte") {
        "idx".into()
    } else {
        "csv".into()
    }
}

/// Loads or generates the data and applies the optional PCA step.
pub fn prepare_dataset(spec: &DatasetSpec) -> Result<(DataMatrix, Option<Labels>)> {
    let (data, labels) = match &spec.source {
        DataSource::Csv { path, label_column } => {
            if !path.exists() {
                return Err(Error::argument(format!("dataset {} does not exist", path.display())));
            }
            load_dense_csv(path, label_column.as_deref())?
        }
        DataSource::Idx { images, labels } => {
            if !images.exists() {
                return Err(Error::argument(format!("dataset {} does not exist", images.display())));
            }
            load_idx(images, labels.as_deref())?
        }
        DataSource::Blobs {
            m,
            dims,
            k,
            spread,
            seed,
        } => {
            let (d, l) = synth_blobs(*m, *dims, *k, *spread, *seed)?;
            (d, Some(l))
        }
        DataSource::SimplexPair { dims, separation, seed } => {
            let (d, l) = synth_simplex_pair(*dims, *separation, *seed)?;
            (d, Some(l))
        }
    };
    let data = match spec.pca_dims {
        Some(k) if k < data.dims() => pca_reduce(&data, k)?.data,
        _ => data,
    };
    Ok((data, labels))
}

/// How [`neighbor_graph`] obtained its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOrigin {
    Cache,
    Built,
}

/// Loads the cache when it is valid for `data`, otherwise searches and saves it.
///
/// A cache built from other data is an error rather than silently rebuilt.
pub fn neighbor_graph(spec: &DatasetSpec, data: &DataMatrix, min_nn: usize) -> Result<(NeighborGraph, GraphOrigin)> {
    let depth = spec.cache_nn.max(min_nn).min(data.rows().saturating_sub(1));
    if let Some(path) = &spec.cache {
        if path.exists() {
            let header = read_cache_header(path)?;
            if header.metric == spec.metric && header.nn >= min_nn {
                let graph = load_neighbor_cache(path, Some(data))?;
                return Ok((graph, GraphOrigin::Cache));
            }
            log::info!(
                "cache {} has metric {} and depth {}; rebuilding",
                path.display(),
                header.metric,
                header.nn
            );
        }
    }
    let graph = knn_exact(data, depth, spec.metric)?;
    if let Some(path) = &spec.cache {
        save_neighbor_cache(&graph, path)?;
    }
    Ok((graph, GraphOrigin::Built))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> ConfigMap {
        let mut m = ConfigMap::new();
        for (k, v) in pairs {
            m.set(k, *v).unwrap();
        }
        m
    }

    #[test]
    fn parse_skips_comments_and_rejects_junk() {
        let m = ConfigMap::parse("# hello\n\na = 0.8\nseed=4\n").unwrap();
        assert_eq!(m.get("a"), Some("0.8"));
        assert_eq!(m.get("seed"), Some("4"));
        assert!(ConfigMap::parse("a 0.8").is_err());
        assert!(ConfigMap::parse("bogus=1").is_err());
    }

    #[test]
    fn precedence_is_flags_file_preset_defaults() {
        let file = ConfigMap::parse("preset=mnist\nc=0.02\nb=0.005\n").unwrap();
        let cli = flags(&[("b", "0.002")]);
        let merged = ConfigMap::merge(Some(&file), &cli).unwrap();
        let cfg = RunConfig::from_map(&merged).unwrap();
        assert_eq!(cfg.params.b, 0.002);
        assert_eq!(cfg.params.c, 0.02);
        assert_eq!(cfg.params.use_nn, 2);
        assert_eq!(cfg.params.a, 0.9);
        assert_eq!(cfg.preset, Some(Preset::Mnist));

        let cli = flags(&[("preset", "universal")]);
        let cfg = RunConfig::from_map(&ConfigMap::merge(Some(&file), &cli).unwrap()).unwrap();
        assert_eq!(cfg.params.use_nn, 3);
        assert_eq!(cfg.params.c, 0.02);
    }

    #[test]
    fn echo_reproduces_the_config() {
        let cli = flags(&[
            ("preset", "toy"),
            ("generate", "blobs"),
            ("gen_m", "300"),
            ("pca_dims", "4"),
            ("seed", "9"),
            ("resample", "per_iteration"),
            ("out", "e.csv"),
        ]);
        let cfg = RunConfig::from_map(&ConfigMap::merge(None, &cli).unwrap()).unwrap();
        let text = cfg.echo().join("\n");
        let again = RunConfig::from_map(&ConfigMap::parse(&text).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_values_are_reported() {
        assert!(RunConfig::from_map(&flags(&[("a", "fast")])).is_err());
        assert!(RunConfig::from_map(&flags(&[("nn", "0")])).is_err());
        assert!(RunConfig::from_map(&flags(&[("generate", "spiral")])).is_err());
        assert!(RunConfig::from_map(&flags(&[("data", "x.csv"), ("generate", "blobs")])).is_err());
        assert!(RunConfig::from_map(&flags(&[("generate", "blobs"), ("nn", "5"), ("cache_nn", "3")])).is_err());
        assert!(ConfigMap::merge(None, &flags(&[("preset", "nope")])).is_err());
    }

    #[test]
    fn missing_file_is_an_argument_error() {
        let cfg = RunConfig::from_map(&flags(&[("data", "/nonexistent/x.csv")])).unwrap();
        assert!(matches!(
            prepare_dataset(cfg.dataset().unwrap()),
            Err(Error::Argument(_))
        ));
        let empty = RunConfig::from_map(&ConfigMap::new()).unwrap();
        assert!(empty.dataset().is_err());
    }

    #[test]
    fn cache_is_built_once_then_reused() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("g.nnc");
        let cli = flags(&[
            ("generate", "blobs"),
            ("gen_m", "200"),
            ("cache", cache.to_str().unwrap()),
            ("cache_nn", "10"),
        ]);
        let cfg = RunConfig::from_map(&cli).unwrap();
        let spec = cfg.dataset().unwrap();
        let (data, labels) = prepare_dataset(spec).unwrap();
        assert_eq!(labels.unwrap().len(), 200);
        let (g1, o1) = neighbor_graph(spec, &data, 3).unwrap();
        let (g2, o2) = neighbor_graph(spec, &data, 3).unwrap();
        assert_eq!((o1, o2), (GraphOrigin::Built, GraphOrigin::Cache));
        assert_eq!(g1.indices(), g2.indices());
        assert_eq!(g1.nn(), 10);

        let other = synth_blobs(200, 10, 5, 1.0, 99).unwrap().0;
        assert!(matches!(neighbor_graph(spec, &other, 3), Err(Error::ChecksumMismatch)));
    }
}
