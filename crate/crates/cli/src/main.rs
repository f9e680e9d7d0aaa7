use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prefmf_client::Client;
use prefmf_core::api::{CreateSessionRequest, Winner};
use prefmf_core::session::SessionDocument;

#[derive(Parser)]
#[command(name = "prefmf", version, about = "Multi-fidelity preference-based Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a benchmark manifest locally and write regret.csv, trace.jsonl and diagnostics.json.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run only this seed instead of the manifest's seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory for session files; sessions are kept in memory only if omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Talk to a running session server.
    Session {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        server: String,
        #[command(subcommand)]
        action: SessionAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Choice {
    A,
    B,
}

#[derive(Subcommand)]
enum SessionAction {
    /// Create a session from a JSON config file.
    Create {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fetch the current query pair.
    Next { id: String },
    /// Answer the outstanding pair.
    Prefer {
        id: String,
        #[arg(long, value_enum)]
        winner: Choice,
    },
    Status { id: String },
    /// Print (or write) the session export document.
    Export {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Import a previously exported session document.
    Import { file: PathBuf },
}

fn print<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

async fn session(server: &str, action: SessionAction) -> Result<(), String> {
    let c = Client::new(server);
    match action {
        SessionAction::Create { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let req: CreateSessionRequest = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", config.display()))?;
            print(&c.create_session(&req).await.map_err(|e| e.to_string())?);
        }
        SessionAction::Next { id } => print(&c.next_query(&id).await.map_err(|e| e.to_string())?),
        SessionAction::Prefer { id, winner } => {
            let w = match winner {
                Choice::A => Winner::A,
                Choice::B => Winner::B,
            };
            print(&c.post_preference(&id, w).await.map_err(|e| e.to_string())?);
        }
        SessionAction::Status { id } => print(&c.status(&id).await.map_err(|e| e.to_string())?),
        SessionAction::Export { id, out } => {
            let doc = c.export(&id).await.map_err(|e| e.to_string())?;
            match out {
                Some(path) => std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("serializable"))
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => print(&doc),
            }
        }
        SessionAction::Import { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let doc: SessionDocument = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            print(&c.import(&doc).await.map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { manifest, out, seed } => ExitCode::from(prefmf_core::manifest::run_manifest(&manifest, &out, seed) as u8),
        Command::Serve { port, host, data_dir } => {
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(prefmf_server::serve(SocketAddr::new(host, port), data_dir)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Session { server, action } => {
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(session(&server, action)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
