use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gestgait_core::config::{EngineConfig, CONFIG_ENV};
use gestgait_core::engine::{commands, replay, write_log};
use gestgait_core::metrics::{read_records, MetricsReport};
use gestgait_core::rules::GestureLabel;
use gestgait_core::trace::read_trace;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "gestgait", version, about = "Gesture-driven gait control for a simulated exoskeleton")]
struct Cli {
    /// Engine configuration (JSON). Falls back to the GESTGAIT_CONFIG
    /// environment variable, then to built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the WebSocket control server.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Replay a landmark trace and write the event log.
    Replay {
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
        /// Event log path; stdout if omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print the gesture label of every frame in a trace.
    Classify {
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
    },
    /// Score evaluation records (JSON lines) per gesture.
    Eval {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn load_config(explicit: Option<&Path>) -> Result<EngineConfig> {
    EngineConfig::resolve(explicit).with_context(|| match explicit {
        Some(p) => format!("loading config {}", p.display()),
        None => format!("loading config from {CONFIG_ENV}"),
    })
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { port, host } => serve(cfg, SocketAddr::new(host, port)),
        Command::Replay { trace, out } => replay_cmd(&cfg, &trace, out.as_deref()),
        Command::Classify { trace } => classify(&cfg, &trace),
        Command::Eval { records, json } => eval(&records, json),
    }
}

fn serve(cfg: EngineConfig, addr: SocketAddr) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        gestgait_service::serve(listener, cfg, shutdown).await?;
        Ok(())
    })
}

fn replay_cmd(cfg: &EngineConfig, trace: &Path, out: Option<&Path>) -> Result<()> {
    let t = read_trace(trace).with_context(|| format!("reading {}", trace.display()))?;
    if t.resorted {
        tracing::warn!("frames were out of order and have been sorted by t_ms");
    }
    let records = replay(&t, cfg)?;
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_log(BufWriter::new(f), &records)?;
        }
        None => write_log(io::stdout().lock(), &records)?,
    }
    let cmds = commands(&records);
    let accepted = cmds.iter().filter(|c| c.accepted).count();
    eprintln!(
        "{} frames, {} commands ({accepted} accepted)",
        t.frames.len(),
        cmds.len()
    );
    Ok(())
}

fn classify(cfg: &EngineConfig, trace: &Path) -> Result<()> {
    let t = read_trace(trace).with_context(|| format!("reading {}", trace.display()))?;
    let classifier = gestgait_core::Classifier::new(cfg.rule_table(), cfg.rules.mirror_u);
    let dims = t.header.dims();
    let mut out = BufWriter::new(io::stdout().lock());
    let mut recognized = 0;
    for f in &t.frames {
        match f.to_hand_frame(dims) {
            Ok(h) => {
                let label = classifier.classify(&h);
                recognized += usize::from(label != GestureLabel::Unrecognized);
                writeln!(out, "{}\t{label}", f.t_ms)?;
            }
            Err(e) => writeln!(out, "{}\terror: {e}", f.t_ms)?,
        }
    }
    out.flush()?;
    eprintln!("{} frames, {recognized} recognized", t.frames.len());
    Ok(())
}

fn eval(records: &Path, json: bool) -> Result<()> {
    let f = File::open(records).with_context(|| format!("opening {}", records.display()))?;
    let recs = read_records(BufReader::new(f))?;
    let report = MetricsReport::compute(&recs, &GestureLabel::DEFINED);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}
