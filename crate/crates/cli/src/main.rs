use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use provoscope::{app, live_provider, AppConfig};
use provoscope_core::replay::{Mode, Scenario};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "provoscope", version, about = "Critical shortlisting over CSV tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the REST API (and the UI bundle, if given).
    Serve(ServeArgs),
    /// Run one query end to end and print the global shortlist as JSON.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Live,
    Record,
    Replay,
}

#[derive(Args)]
struct Common {
    /// Directory of scenario manifests.
    #[arg(long, env = "PROVOSCOPE_SCENARIO_DIR")]
    scenario_dir: Option<PathBuf>,
    /// Scenario bound to new sessions.
    #[arg(long)]
    scenario: Option<String>,
    /// Ad hoc scenario mode. Overrides `--scenario`.
    #[arg(long, value_enum, requires = "cache_dir")]
    mode: Option<CliMode>,
    /// Response cache used with `--mode`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// OpenAI-compatible endpoint, e.g. http://localhost:11434/v1.
    #[arg(long, env = "PROVOSCOPE_LLM_BASE_URL", default_value = "http://localhost:11434/v1")]
    llm_base_url: String,
    #[arg(long, env = "PROVOSCOPE_MODEL", default_value = "gpt-4o-mini")]
    model: String,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Write a snapshot of every session here and reload them at startup.
    #[arg(long)]
    persist: Option<PathBuf>,
    /// Built UI bundle to serve at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// CSV to load. Optional when the scenario uploads one itself.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    query: String,
}

impl Common {
    fn config(&self) -> anyhow::Result<AppConfig> {
        let mut config = AppConfig {
            scenario_dir: self.scenario_dir.clone(),
            default_scenario: self.scenario.clone(),
            model: self.model.clone(),
            live: Some(live_provider(&self.llm_base_url, &self.model)?),
            ..Default::default()
        };
        if let Some(mode) = self.mode {
            let scenario = Scenario {
                display_name: "command-line".into(),
                mode: match mode {
                    CliMode::Live => Mode::Live,
                    CliMode::Record => Mode::Record,
                    CliMode::Replay => Mode::Replay,
                },
                cache_dir: self.cache_dir.clone(),
                ..Default::default()
            };
            config.default_scenario = Some(scenario.display_name.clone());
            config.extra_scenarios.push(scenario);
        }
        Ok(config)
    }
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve(args) => serve(args).await,
        Command::Run(args) => run(args).await,
    }
}

async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = AppConfig {
        persist_dir: args.persist,
        ui_dir: args.ui_dir,
        ..args.common.config()?
    };
    let (_, router) = app(config)?;
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn run(args: RunArgs) -> anyhow::Result<()> {
    let (state, _) = app(args.common.config()?)?;
    let handle = state.create_session().await.map_err(|e| anyhow::anyhow!(e.body.message))?;
    let mut session = handle.lock().await;
    if let Some(path) = &args.csv {
        let bytes = tokio::fs::read(path)
            .await
            .with_context(|| format!("cannot read {}", path.display()))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        session.load_csv(&bytes, &name)?;
    }
    let gateway = state.gateway(&session.scenario).map_err(|e| anyhow::anyhow!(e.body.message))?;
    let outcome = session.run_query(&gateway, &args.query).await?;
    for w in outcome.warnings.iter().chain(&session.analyze_all(&gateway).await) {
        tracing::warn!("{w}");
    }
    let shortlist = session.compute_shortlist()?;
    println!("{}", serde_json::to_string_pretty(shortlist)?);
    Ok(())
}
