use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use chrono_tz::Tz;
use clap::{Parser, Subcommand, ValueEnum};
use gaia_api::platform::DEPLOYMENT_FILE;
use gaia_api::{open_platform, ApiConfig, AppState};
use gaia_cli::{
    export_csv, replay_file, run_sim, seed_demo, write_demo_definitions, ReplayOptions,
};
use gaia_core::Metric;
use gaia_gateway::HttpUpstream;
use gaia_sim::demo::demo_config;
use gaia_sim::SimConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "gaia", version, about = "School energy-awareness platform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the sensor fleet and write a replay file
    Sim {
        /// Simulation config; the bundled demo fleet when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        hours: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP API
    Serve(ServeArgs),
    /// Write demo definitions and a simulated day of telemetry into storage
    SeedDemo {
        #[arg(long, env = "GAIA_STORAGE", default_value = gaia_api::config::DEFAULT_STORAGE)]
        storage: PathBuf,
        #[arg(long, default_value_t = 24)]
        hours: u32,
    },
    /// Push a replay file through a gateway to a running server
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
        /// Server base URL, e.g. http://127.0.0.1:8080
        #[arg(long)]
        endpoint: String,
        #[arg(long, env = "GAIA_GATEWAY_TOKEN", default_value = gaia_api::config::DEFAULT_GATEWAY_TOKEN)]
        token: String,
        #[arg(long, default_value = "gw-replay")]
        gateway_id: String,
        /// Fixed gateway clock in unix seconds; defaults to the newest frame time
        #[arg(long)]
        now: Option<u64>,
    },
    /// Export one room's readings
    Export {
        #[arg(long)]
        room: String,
        #[arg(long)]
        metric: Metric,
        /// Inclusive start, unix seconds
        #[arg(long)]
        from: i64,
        /// Exclusive end, unix seconds
        #[arg(long)]
        to: i64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, env = "GAIA_STORAGE", default_value = gaia_api::config::DEFAULT_STORAGE)]
        storage: PathBuf,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seed the demo storage, then serve it
    Demo {
        #[command(flatten)]
        serve: ServeArgs,
        #[arg(long, default_value_t = 24)]
        hours: u32,
    },
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Storage directory (GAIA_STORAGE)
    #[arg(long)]
    storage: Option<PathBuf>,
    /// Listen address (GAIA_LISTEN)
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Gateway token (GAIA_GATEWAY_TOKEN)
    #[arg(long)]
    token: Option<String>,
    /// IANA zone for civil-day queries (GAIA_TZ)
    #[arg(long)]
    tz: Option<Tz>,
    /// Directory served under /app (GAIA_STATIC_DIR)
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Sim { config, hours, out } => {
            let config = match config {
                Some(path) => SimConfig::load(&path)?,
                None => demo_config(),
            };
            let report = run_sim(config, hours, &out)?;
            println!(
                "wrote {} frames ({} bytes) to {}",
                report.frames,
                report.bytes,
                out.display()
            );
        }
        Command::Serve(args) => serve(args)?,
        Command::SeedDemo { storage, hours } => seed(&storage, hours)?,
        Command::Replay {
            input,
            endpoint,
            token,
            gateway_id,
            now,
        } => {
            let mut upstream = HttpUpstream::new(&endpoint, token);
            let opts = ReplayOptions {
                now,
                ..ReplayOptions::new(gateway_id)
            };
            let report = replay_file(&input, &mut upstream, &opts)?;
            let c = &report.gateway;
            println!(
                "replayed {} frames: {} batches acknowledged, {} frames rejected, {} upload failures",
                report.frames,
                report.batches,
                c.rejected.values().sum::<u64>(),
                c.upload_failures,
            );
        }
        Command::Export {
            room,
            metric,
            from,
            to,
            format: Format::Csv,
            storage,
            out,
        } => {
            let rows = match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    export_csv(&storage, &room, metric, from, to, io::BufWriter::new(file))?
                }
                None => export_csv(&storage, &room, metric, from, to, io::stdout().lock())?,
            };
            tracing::info!(rows, "exported");
        }
        Command::Demo { serve: args, hours } => {
            let config = api_config(&args)?;
            seed(&config.storage, hours)?;
            serve(args)?;
        }
    }
    Ok(())
}

fn seed(storage: &std::path::Path, hours: u32) -> Result<()> {
    let report = seed_demo(storage, hours)?;
    println!(
        "seeded {} with {} readings from {} frames in {:.1} s",
        storage.display(),
        report.stored,
        report.frames,
        report.elapsed.as_secs_f64()
    );
    Ok(())
}

fn api_config(args: &ServeArgs) -> Result<ApiConfig> {
    let mut config = ApiConfig::from_env()?;
    if let Some(v) = &args.storage {
        config.storage = v.clone();
    }
    if let Some(v) = args.listen {
        config.listen = v;
    }
    if let Some(v) = &args.token {
        config.gateway_token = v.clone();
    }
    if let Some(v) = args.tz {
        config.timezone = v;
    }
    if let Some(v) = &args.static_dir {
        config.static_dir = Some(v.clone());
    }
    Ok(config)
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = api_config(&args)?;
    if !config.storage.join(DEPLOYMENT_FILE).exists() {
        let written = write_demo_definitions(&config.storage, false)?;
        tracing::warn!(storage = %config.storage.display(), ?written, "no deployment found, wrote demo definitions");
    }
    let platform = open_platform(&config.storage, config.timezone)?;
    let listen = config.listen;
    let state = AppState::new(platform, config);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        io::stdout().flush()?;
        gaia_api::serve(listener, state, shutdown_signal()).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    rt.shutdown_timeout(Duration::from_secs(5));
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
