use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use jitterlab_studio::{router, AppState, StudioConfig, CALIBRATION_LEN};

/// Rating, scoring and search service over a dataset directory.
#[derive(Debug, Parser)]
#[command(name = "jitterlab-studio", version)]
struct Args {
    #[arg(long, env = "STUDIO_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "STUDIO_HOST", default_value = "127.0.0.1")]
    host: String,
    /// Dataset directory holding samples.jsonl, pairs.jsonl and images/.
    #[arg(long, env = "STUDIO_DATA_DIR")]
    data_dir: PathBuf,
    /// Model checkpoint used by /api/score and /api/search.
    #[arg(long, env = "STUDIO_MODEL")]
    model: Option<PathBuf>,
    /// Embedding index directory used by /api/search.
    #[arg(long, env = "STUDIO_INDEX")]
    index: Option<PathBuf>,
    /// JSON Lines file of `{a, b[, pair_id]}` calibration pairs.
    #[arg(long, env = "STUDIO_CALIBRATION")]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = CALIBRATION_LEN)]
    calibration_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::from_default_env().add_directive("info".parse()?))
        .init();
    let args = Args::parse();
    let config = StudioConfig {
        data_dir: args.data_dir,
        model: args.model,
        index: args.index,
        calibration: args.calibration,
        calibration_len: args.calibration_len,
        seed: args.seed,
    };
    let state = AppState::open(&config).context("opening studio state")?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .context("bad listen address")?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
