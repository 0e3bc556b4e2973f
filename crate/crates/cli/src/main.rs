use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use ivhd::config::{neighbor_graph, prepare_dataset, GraphOrigin, RunConfig};
use ivhd::dataio::{write_dense_csv, DataMatrix};
use ivhd::engine::{EmbedParams, Engine, Observer, StopReason};
use ivhd::knngraph::{
    augment, knn_exact, load_neighbor_cache, read_cache_header, save_neighbor_cache, Metric, NeighborGraph,
};
use ivhd::metrics::{cf, default_nn_max, Space};
use ivhd::output::{load_embedding, write_embedding, write_trace};
use ivhd::Error;

mod args;

use args::ConfigArgs;

#[derive(Parser)]
#[command(
    name = "ivhd",
    version,
    about = "Two-dimensional embedding of large datasets through nearest-neighbor graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the neighbor cache of a dataset (skipped when a valid one exists)
    Knn(ConfigArgs),
    /// Embed a dataset and write `id,x,y,label` rows
    Embed(ConfigArgs),
    /// Class-consistency report of an embedding, or of the source data without --embedding
    Eval(EvalArgs),
    /// Write a synthetic dataset as CSV
    Gen(ConfigArgs),
    /// Per-iteration time over a range of sizes on synthetic neighbor graphs
    Bench(BenchArgs),
    /// Serve interactive sessions over HTTP and WebSocket
    Serve(ServeArgs),
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Embedding CSV to score; labels come from its label column or from the dataset
    #[arg(long, value_name = "FILE")]
    embedding: Option<PathBuf>,
    /// Largest neighborhood size (default: smallest class - 1, at most 100)
    #[arg(long)]
    nn_max: Option<usize>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Point counts, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [25_000usize, 50_000, 100_000])]
    sizes: Vec<usize>,
    /// Iterations per timed burst
    #[arg(long, default_value_t = 10)]
    iters: u32,
    /// Bursts per size; the fastest counts
    #[arg(long, default_value_t = 5)]
    repeats: u32,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Iterations between frames for sessions that do not set `frame_stride`
    #[arg(long, default_value_t = 10)]
    frame_stride: u64,
    #[arg(long, default_value_t = 4)]
    max_sessions: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 2,
        Error::Format(_) | Error::Parse { .. } | Error::Consistency(_) | Error::Domain(_) => 3,
        Error::Divergence { .. } => 4,
        Error::Cache(_) | Error::ChecksumMismatch => 5,
        Error::File { .. } | Error::Io(_) => 1,
    }
}

fn setup(config: &RunConfig) {
    if config.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    for line in config.echo() {
        log::info!("{line}");
    }
}

/// Writes to `path`, or to stdout when there is none.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> ivhd::Result<()>) -> ivhd::Result<()> {
    match path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::File {
                path: path.to_path_buf(),
                source: e,
            })?;
            let mut out = std::io::BufWriter::new(file);
            f(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            f(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn cmd_knn(args: &ConfigArgs) -> ivhd::Result<()> {
    let config = args.resolve()?;
    setup(&config);
    let spec = config.dataset()?;
    let path = spec
        .cache
        .as_ref()
        .ok_or_else(|| Error::Argument("knn needs an output path (--cache)".into()))?;
    let (data, _) = prepare_dataset(spec)?;
    let depth = spec.cache_nn.min(data.rows().saturating_sub(1));
    if path.exists() {
        let header = read_cache_header(path)?;
        if header.metric == spec.metric && header.nn >= depth && header.source_hash == data.checksum() {
            load_neighbor_cache(path, Some(&data))?;
            eprintln!(
                "{} already holds {} neighbors for these {} points; skipping",
                path.display(),
                header.nn,
                header.m
            );
            return Ok(());
        }
        eprintln!("{} does not match this dataset and metric; rebuilding", path.display());
    }
    let start = Instant::now();
    let graph = knn_exact(&data, depth, spec.metric)?;
    save_neighbor_cache(&graph, path)?;
    eprintln!(
        "{} x {} neighbor cache built in {:.2} s -> {}",
        graph.len(),
        graph.nn(),
        start.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

struct Progress;

impl Observer for Progress {
    fn on_stress(&mut self, iteration: u64, stress: f64) {
        if iteration.is_multiple_of(500) {
            log::info!("iteration {iteration}: stress {stress:.6e}");
        }
    }
}

fn cmd_embed(args: &ConfigArgs) -> ivhd::Result<()> {
    let config = args.resolve()?;
    setup(&config);
    let spec = config.dataset()?;
    let params = &config.params;
    let start = Instant::now();
    let (data, labels) = prepare_dataset(spec)?;
    let (graph, origin) = neighbor_graph(spec, &data, params.use_nn)?;
    if origin == GraphOrigin::Cache {
        log::info!("neighbors loaded from cache");
    }
    let prepared = start.elapsed();
    let edges = augment(&graph, params.rn, params.use_nn, params.resample, params.seed)?;
    drop(graph);
    let mut engine = Engine::new(edges, params.clone())?;
    let report = engine.run(&mut Progress)?;
    let iterations = engine.state().iteration();
    let stop = match report.stop {
        StopReason::Converged => "converged",
        StopReason::MaxIters => "max_iters",
    };
    eprintln!(
        "{stop} after {iterations} iterations, stress {:.6e} (neighbors {:.2} s, minimization {:.2} s)",
        report.final_stress(),
        prepared.as_secs_f64(),
        (start.elapsed() - prepared).as_secs_f64()
    );
    let mut comments = config.echo();
    comments.push(format!("iterations={iterations} stop={stop}"));
    with_output(config.out.as_deref(), |out| {
        write_embedding(out, engine.state().positions(), labels.as_ref(), &comments)
    })?;
    if let Some(path) = &config.trace {
        with_output(Some(path), |out| write_trace(out, &report.trace, &comments))?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> ivhd::Result<()> {
    let config = args.config.resolve()?;
    setup(&config);
    let source = config.dataset.as_ref().map(prepare_dataset).transpose()?;
    let (points, labels, metric, space) = match &args.embedding {
        Some(path) => {
            let file = load_embedding(path)?;
            let labels = match (file.labels, &source) {
                (Some(l), _) => l,
                (None, Some((_, Some(all)))) => {
                    let idx: Vec<usize> = file.ids.iter().map(|&i| i as usize).collect();
                    if let Some(&bad) = idx.iter().find(|&&i| i >= all.len()) {
                        return Err(Error::Consistency(format!("embedding id {bad} is outside the dataset")));
                    }
                    all.select(&idx)
                }
                _ => {
                    return Err(Error::Argument(
                        "the embedding has no labels and no labeled dataset is given".into(),
                    ))
                }
            };
            let flat: Vec<f64> = file.positions.iter().flatten().copied().collect();
            let points = DataMatrix::new(file.positions.len(), 2, flat)?;
            (points, labels, Metric::Euclidean, Space::Target)
        }
        None => {
            let (data, labels) = source.ok_or_else(|| Error::Argument("give --embedding or a dataset".into()))?;
            let labels = labels.ok_or_else(|| Error::Argument("the dataset has no labels".into()))?;
            let metric = config.dataset()?.metric;
            (data, labels, metric, Space::Source)
        }
    };
    let nn_max = args.nn_max.unwrap_or_else(|| default_nn_max(&labels));
    let report = cf(&points, &labels, nn_max, metric)?.in_space(space);
    eprintln!("cf = {:.4} over nn = 1..{} ({space} space)", report.cf, report.nn_max);
    let mut comments = config.echo();
    if let Some(path) = &args.embedding {
        comments.push(format!("embedding={}", path.display()));
    }
    with_output(config.out.as_deref(), |out| report.write_csv(out, &comments))
}

fn cmd_gen(args: &ConfigArgs) -> ivhd::Result<()> {
    let config = args.resolve()?;
    setup(&config);
    let spec = config.dataset()?;
    let path = config
        .out
        .as_ref()
        .ok_or_else(|| Error::Argument("gen needs an output path (--out)".into()))?;
    let (data, labels) = prepare_dataset(spec)?;
    write_dense_csv(path, &data, labels.as_ref(), &config.echo())?;
    eprintln!("{} x {} -> {}", data.rows(), data.dims(), path.display());
    Ok(())
}

/// Each point joined to the next `nn` points around a cycle: fixed degree, no search cost.
fn ring_graph(m: usize, nn: usize) -> ivhd::Result<NeighborGraph> {
    let indices = (0..m)
        .flat_map(|i| (1..=nn).map(move |k| ((i + k) % m) as u32))
        .collect();
    NeighborGraph::from_parts(m, nn, indices, vec![1.0; m * nn], Metric::Euclidean, [0; 32])
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn time_iteration(m: usize, params: &EmbedParams, iters: u32, repeats: u32) -> ivhd::Result<Duration> {
    let graph = ring_graph(m, params.use_nn)?;
    let edges = augment(&graph, params.rn, params.use_nn, params.resample, params.seed)?;
    let mut engine = Engine::new(edges, params.clone())?;
    engine.step()?;
    let mut best = Duration::MAX;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        for _ in 0..iters.max(1) {
            engine.step()?;
        }
        best = best.min(start.elapsed() / iters.max(1));
    }
    Ok(best)
}

fn cmd_bench(args: &BenchArgs) -> ivhd::Result<()> {
    let config = args.config.resolve()?;
    setup(&config);
    let mut sizes = args.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::Argument("no sizes given".into()));
    }
    let mut rows = Vec::new();
    for &m in &sizes {
        let t = time_iteration(m, &config.params, args.iters, args.repeats)?;
        eprintln!("M = {m}: {:.3} ms per iteration", t.as_secs_f64() * 1e3);
        rows.push((m, t.as_secs_f64()));
    }
    let mut comments = config.echo();
    comments.push(format!("iters={} repeats={}", args.iters, args.repeats));
    with_output(config.out.as_deref(), |out| {
        for line in &comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "m,seconds_per_iter,ns_per_point")?;
        for &(m, t) in &rows {
            writeln!(out, "{m},{t:.6e},{:.3}", t * 1e9 / m as f64)?;
        }
        if rows.len() >= 2 {
            let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
            writeln!(out, "# linear fit R^2={:.4}", r_squared(&xs, &ys))?;
        }
        Ok(())
    })
}

fn cmd_serve(args: &ServeArgs) -> ivhd::Result<()> {
    if args.frame_stride == 0 || args.max_sessions == 0 {
        return Err(Error::Argument(
            "frame stride and session limit must be positive".into(),
        ));
    }
    let config = ivhd_server::ServerConfig {
        frame_stride: args.frame_stride,
        max_sessions: args.max_sessions,
        ..Default::default()
    };
    let addr = SocketAddr::new(args.host, args.port);
    eprintln!("serving on http://{addr}");
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(ivhd_server::serve(addr, config))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Knn(a) => cmd_knn(a),
        Cmd::Embed(a) => cmd_embed(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
