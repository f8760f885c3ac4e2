//! Command-line entry points for the `counsel` binary.

use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use counsel_core::annotation::{pretag_turn, write_annotations};
use counsel_core::metrics::{linguistic_metrics, self_disclosure};
use counsel_core::prompt::{Scaffold, VariantId};
use counsel_core::session::{load_transcripts, DEFAULT_WINDOW};
use counsel_core::{Role, Turn};
use counsel_llm::{CompletionBackend, HttpBackend, MockBackend};
use serde_json::json;

use crate::competition::{load_run, run_competition, write_run, CompetitionOptions, DEFAULT_PARALLELISM};
use crate::config::ConfigFile;
use crate::error::{read_text, HarnessError};
use crate::evaluate::{evaluate_run, load_lexicons, write_report};
use crate::scenario::{default_scenarios, load_scenarios};
use crate::service::{router, AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "counsel", version, about = "MI counseling agent: model competition, evaluation and chat service")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the chat HTTP service.
    Serve(ServeArgs),
    /// Send every scenario to every variant and store the responses.
    Compete(CompeteArgs),
    /// Build metric and annotation reports for a competition run.
    Evaluate(EvaluateArgs),
    /// Self-disclosure and linguistic metrics for transcript files.
    Metrics(MetricsArgs),
    /// Seed an annotation file for a run with heuristic MI pre-tags.
    Pretag(PretagArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub backend_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Answer with the deterministic mock backend.
    #[arg(long, conflicts_with = "backend_url")]
    pub mock: bool,
    #[arg(long)]
    pub scaffold: Option<PathBuf>,
    /// Messages of history sent with each request.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompeteArgs {
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Comma-separated variant ids, e.g. `0,1,2,3,4`.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<u8>>,
    #[arg(long)]
    pub backend_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, conflicts_with = "backend_url")]
    pub mock: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub scaffold: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretagArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, HarnessError> {
    value.ok_or_else(|| HarnessError::Config(format!("--{flag} is required (flag or config file)")))
}

fn scaffold(path: Option<&Path>) -> Result<Scaffold, HarnessError> {
    match path {
        Some(p) => Ok(Scaffold::load(p)?),
        None => Ok(Scaffold::bundled()),
    }
}

fn backend(
    cfg: &ConfigFile,
    mock: bool,
    url: Option<String>,
    model: Option<String>,
) -> Result<Arc<dyn CompletionBackend>, HarnessError> {
    if mock {
        return Ok(Arc::new(MockBackend));
    }
    let url = required(url, "backend-url")?;
    let model = required(model, "model")?;
    Ok(Arc::new(HttpBackend::new(cfg.endpoint(&url, &model)?)?))
}

pub async fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Serve(a) => serve(&cfg, a).await,
        Command::Compete(a) => compete(&cfg, a).await,
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Metrics(a) => metrics(&cfg, a),
        Command::Pretag(a) => pretag(a),
    }
}

async fn serve(cfg: &ConfigFile, a: ServeArgs) -> Result<(), HarnessError> {
    let s = &cfg.serve;
    let mock = a.mock || s.mock.unwrap_or(false);
    let backend = backend(
        cfg,
        mock,
        a.backend_url.or_else(|| s.backend_url.clone()),
        a.model.or_else(|| s.model.clone()),
    )?;
    let window = a.window.or(s.window).unwrap_or(DEFAULT_WINDOW);
    let window = NonZeroUsize::new(window).ok_or_else(|| HarnessError::Config("--window must be at least 1".into()))?;
    let config = ServiceConfig {
        window,
        scaffold: scaffold(a.scaffold.as_deref().or(s.scaffold.as_deref()))?,
        generation: cfg.generation(),
        exemplar_seed: s.exemplar_seed.unwrap_or(0),
        k_per_subprocess: s.exemplars_per_subprocess,
        data_dir: a.data_dir.or_else(|| s.data_dir.clone()).unwrap_or_else(|| PathBuf::from("counsel-data")),
        lexicons: load_lexicons(a.lexicons.as_deref().or(s.lexicons.as_deref()))?,
    };
    let host = a.host.or_else(|| s.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(s.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| HarnessError::Config(format!("bad listen address {host}:{port}: {e}")))?;
    let state = AppState::new(config, backend.clone())?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| HarnessError::Config(format!("cannot listen on {addr}: {e}")))?;
    tracing::info!(%addr, backend = %backend.describe(), window = window.get(), "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| HarnessError::Run(e.to_string()))
}

async fn compete(cfg: &ConfigFile, a: CompeteArgs) -> Result<(), HarnessError> {
    let c = &cfg.compete;
    let scenarios = match a.scenarios.or_else(|| c.scenarios.clone()) {
        Some(p) => load_scenarios(&p)?,
        None => default_scenarios(),
    };
    let variants = a
        .variants
        .or_else(|| c.variants.clone())
        .unwrap_or_else(|| VariantId::all().map(|v| v.get()).collect())
        .into_iter()
        .map(VariantId::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mock = a.mock || c.mock.unwrap_or(false);
    let backend = backend(
        cfg,
        mock,
        a.backend_url.or_else(|| c.backend_url.clone()),
        a.model.or_else(|| c.model.clone()),
    )?;
    let out = required(a.out.or_else(|| c.out.clone()), "out")?;
    let options = CompetitionOptions {
        seed: a.seed.or(c.seed).unwrap_or(0),
        parallelism: a.parallelism.or(c.parallelism).unwrap_or(DEFAULT_PARALLELISM),
        k_per_subprocess: c.exemplars_per_subprocess,
        generation: cfg.generation(),
    };
    let scaffold = scaffold(a.scaffold.as_deref().or(c.scaffold.as_deref()))?;
    let run = run_competition(&scenarios, &variants, backend, &scaffold, &options).await?;
    write_run(&run, &out)?;
    println!(
        "run {}: {} responses, {} errors -> {}",
        run.manifest.run_id,
        run.manifest.cells - run.manifest.errors,
        run.manifest.errors,
        out.display()
    );
    Ok(())
}

fn evaluate(cfg: &ConfigFile, a: EvaluateArgs) -> Result<(), HarnessError> {
    let e = &cfg.evaluate;
    let run_dir = required(a.run_dir.or_else(|| e.run_dir.clone()), "run-dir")?;
    let out = a.out.or_else(|| e.out.clone()).unwrap_or_else(|| run_dir.join("report"));
    let lexicons = load_lexicons(a.lexicons.as_deref().or(e.lexicons.as_deref()))?;
    let annotations = a
        .annotations
        .or_else(|| e.annotations.clone())
        .map(|p| read_text(&p))
        .transpose()?;
    let run = load_run(&run_dir)?;
    let report = evaluate_run(&run, annotations.as_deref(), &lexicons)?;
    for path in write_report(&report, &out)? {
        println!("{}", path.display());
    }
    if report.annotations.as_ref().is_some_and(|s| s.provisional) {
        eprintln!("note: report is provisional; heuristic pre-tags were used");
    }
    Ok(())
}

fn metrics(cfg: &ConfigFile, a: MetricsArgs) -> Result<(), HarnessError> {
    let m = &cfg.metrics;
    let path = required(a.transcript.or_else(|| m.transcript.clone()), "transcript")?;
    let lexicons = load_lexicons(a.lexicons.as_deref().or(m.lexicons.as_deref()))?;
    let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
    for session in load_transcripts(&bytes)? {
        let disclosure = self_disclosure(session.turns(), &lexicons.valence).ok();
        let agent: Vec<&Turn> = session.turns().iter().filter(|t| t.role == Role::Agent).collect();
        let agent_metrics = agent
            .iter()
            .map(|t| linguistic_metrics(&t.text, &lexicons).ok())
            .collect::<Vec<_>>();
        let line = json!({
            "session_id": session.id(),
            "condition": session.condition(),
            "topic": session.topic(),
            "turns": session.turns().len(),
            "self_disclosure": disclosure,
            "agent_turn_metrics": agent_metrics,
        });
        println!("{line}");
    }
    Ok(())
}

fn pretag(a: PretagArgs) -> Result<(), HarnessError> {
    let run = load_run(&a.run_dir)?;
    let rows: Vec<_> = run
        .responses()
        .filter_map(|(cell, r)| {
            let turn = Turn {
                index: 1,
                role: Role::Agent,
                text: r.text.clone(),
                timestamp_ms: 0,
            };
            pretag_turn(&cell.session_id(), &turn)
        })
        .collect();
    std::fs::write(&a.out, write_annotations(&rows)).map_err(|e| HarnessError::io(&a.out, e))?;
    println!("{} heuristic rows -> {}", rows.len(), a.out.display());
    Ok(())
}
