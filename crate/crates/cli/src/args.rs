//! Every configuration key doubles as a `--flag` (underscores become dashes).

use std::path::PathBuf;

use clap::{value_parser, Arg, ArgMatches, Args, Command, FromArgMatches};
use ivhd::config::{ConfigMap, RunConfig, KEYS};

#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub file: Option<PathBuf>,
    pub flags: ConfigMap,
}

impl ConfigArgs {
    /// Merges flags over the config file over the preset over defaults.
    pub fn resolve(&self) -> ivhd::Result<RunConfig> {
        let file = self.file.as_ref().map(ConfigMap::load).transpose()?;
        let merged = ConfigMap::merge(file.as_ref(), &self.flags)?;
        RunConfig::from_map(&merged)
    }
}

fn help(key: &str) -> &'static str {
    match key {
        "preset" => "parameter preset: universal, mnist or toy",
        "data" => "dataset file (dense CSV or IDX images)",
        "format" => "dataset format: csv or idx (inferred from the name)",
        "labels" => "IDX label file",
        "label_column" => "CSV column holding class labels",
        "generate" => "synthetic dataset instead of a file: blobs or simplex",
        "gen_m" => "blobs: number of points",
        "gen_dims" => "generator dimensionality",
        "gen_k" => "blobs: number of clusters",
        "gen_spread" => "blobs: within-cluster standard deviation",
        "gen_separation" => "simplex: distance between the two simplices",
        "gen_seed" => "generator seed",
        "metric" => "euclidean or cosine",
        "pca_dims" => "reduce the data to this many principal components first",
        "cache" => "neighbor cache file",
        "cache_nn" => "neighbors stored per point in the cache",
        "a" => "momentum retention in [0, 1]",
        "b" => "force scale",
        "c" => "weight of random-neighbor edges",
        "nn" => "nearest neighbors per point used by the embedding",
        "rn" => "random neighbors per point",
        "d_nn" => "target distance of nearest-neighbor edges",
        "d_rn" => "target distance of random edges",
        "max_iters" => "iteration cap",
        "tol" => "relative stress change that counts as converged",
        "seed" => "layout and random-edge seed",
        "epsilon" => "distance floor",
        "resample" => "random edges: fixed or per-iteration",
        "out" => "output file (stdout when omitted, where supported)",
        "trace" => "stress trace output file",
        "threads" => "worker threads, 0 for one per core",
        _ => "",
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("key=value configuration file"),
        );
        for key in KEYS {
            cmd = cmd.arg(
                Arg::new(*key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE")
                    .help(help(key)),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut flags = ConfigMap::new();
        for key in KEYS {
            if let Some(v) = m.get_one::<String>(key) {
                flags.set(key, v.clone()).expect("every flag is a known key");
            }
        }
        Ok(Self {
            file: m.get_one::<PathBuf>("config").cloned(),
            flags,
        })
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}
