//! `mss`: build snapshot artifacts, run the accuracy benchmark and serve an
//! artifact over HTTP.
//!
//! Every flag can also be set through an `MSS_`-prefixed environment
//! variable, e.g. `MSS_PORT=8080`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mss_core::artifact::{cmd_build, Artifact};
use mss_core::config::BuildConfig;
use mss_core::layout::LayoutAlgorithm;
use mss_core::service::Service;
use mss_core::EmbeddingMethod;
use mss_cli::{router, run_eval, EvalConfig};

#[derive(Debug, Parser)]
#[command(name = "mss", version, about = "Multiscale temporal snapshots of dynamic graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest an edge stream and write a complete artifact directory.
    Build(BuildArgs),
    /// Run the k-NN accuracy benchmark and write the accuracy table as CSV.
    Eval(EvalArgs),
    /// Serve an artifact over the HTTP/JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, clap::Args)]
struct BuildArgs {
    #[arg(long, env = "MSS_CONFIG")]
    config: PathBuf,
    /// Overrides the input edge file.
    #[arg(long, env = "MSS_INPUT")]
    input: Option<PathBuf>,
    /// Overrides the output directory.
    #[arg(long, env = "MSS_OUTPUT")]
    output: Option<PathBuf>,
    /// Seed for embedding training, index construction and layout.
    #[arg(long, env = "MSS_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MSS_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long, env = "MSS_DIMS")]
    dims: Option<usize>,
    /// fgsd, wl_doc or wl_doc_line.
    #[arg(long, env = "MSS_METHOD", value_parser = parse_method)]
    method: Option<EmbeddingMethod>,
    #[arg(long, env = "MSS_BUCKET_WIDTH")]
    bucket_width: Option<u64>,
    /// fruchterman_reingold (fr) or kamada_kawai (kk).
    #[arg(long, env = "MSS_LAYOUT")]
    layout: Option<LayoutAlgorithm>,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long, env = "MSS_EVAL_CONFIG")]
    config: PathBuf,
    #[arg(long, env = "MSS_EVAL_OUT")]
    out: PathBuf,
    #[arg(long, env = "MSS_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MSS_EPOCHS")]
    epochs: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long, env = "MSS_ARTIFACT")]
    artifact: PathBuf,
    #[arg(long, env = "MSS_PORT", default_value_t = 8000)]
    port: u16,
    #[arg(long, env = "MSS_BIND", default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Allowed cross-origin caller; any origin when unset.
    #[arg(long, env = "MSS_CORS_ORIGIN")]
    cors_origin: Option<String>,
    /// Idle time after which a session is discarded.
    #[arg(long, env = "MSS_SESSION_TTL_SECS", default_value_t = 3600)]
    session_ttl_secs: u64,
}

fn parse_method(s: &str) -> Result<EmbeddingMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| format!("unknown method {s:?}"))
}

fn build(args: BuildArgs) -> anyhow::Result<()> {
    let mut cfg = BuildConfig::load(&args.config)?;
    if let Some(input) = args.input {
        cfg.input = input;
    }
    if let Some(output) = args.output {
        cfg.output = output;
    }
    if let Some(seed) = args.seed {
        cfg.embedding.doc.seed = seed;
        cfg.index.seed = seed;
        cfg.layout.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.embedding.doc.epochs = epochs;
    }
    if let Some(dims) = args.dims {
        cfg.embedding.doc.dims = dims;
    }
    if let Some(method) = args.method {
        cfg.embedding.method = method;
    }
    if let Some(width) = args.bucket_width {
        cfg.bucket_width = width;
    }
    if let Some(layout) = args.layout {
        cfg.layout.algorithm = layout;
    }
    cfg.validate()?;
    tracing::info!(input = %cfg.input.display(), output = %cfg.output.display(), "building artifact");
    let manifest = cmd_build(&cfg)?;
    let c = &manifest.counts;
    println!(
        "wrote {}: {} buckets, {} nodes, {} edges ({} malformed lines), {} intervals, {} embedding records",
        cfg.output.display(),
        c.buckets,
        c.nodes,
        c.edges_ingested,
        c.malformed_lines,
        c.intervals,
        c.embedding_records
    );
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let mut cfg = EvalConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.experiment.doc.epochs = epochs;
    }
    tracing::info!(methods = cfg.methods.len(), "running accuracy benchmark");
    let outcome = run_eval(&cfg)?;
    std::fs::write(&args.out, outcome.table.to_csv()).with_context(|| format!("cannot write {}", args.out.display()))?;
    print!("{}", outcome.table.to_text());
    for (l, mean, sd) in outcome.chance {
        println!("chance L={l}: mean {mean:.4}, mean + 2 sigma {:.4}", mean + 2.0 * sd);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let artifact = Artifact::load(&args.artifact)?;
    tracing::info!(dir = %args.artifact.display(), buckets = artifact.hierarchy.buckets(), "artifact loaded");
    let svc = Arc::new(Service::new(artifact, Duration::from_secs(args.session_ttl_secs)));
    let app = router(svc, args.cors_origin.as_deref())?;
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(%addr, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("MSS_LOG").unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Build(args) => build(args),
        Command::Eval(args) => eval(args),
        Command::Serve(args) => tokio::runtime::Runtime::new()?.block_on(serve(args)),
    }
}
