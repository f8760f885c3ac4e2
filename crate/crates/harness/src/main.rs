use clap::Parser;
use counsel_harness::cli::{run, Cli};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("error [{}]: {e}", e.code());
        std::process::exit(match e.code() {
            "configuration" => 2,
            "parse" | "validation" => 3,
            _ => 1,
        });
    }
}
