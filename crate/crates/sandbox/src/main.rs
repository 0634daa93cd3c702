use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use sew_core::{ArmPair, RobotArmModel, WristType};
use sew_sandbox::server::{router, serve, DEFAULT_PORT, PORT_ENV};

#[derive(Parser)]
#[command(
    name = "sew-sandbox",
    version,
    about = "WebSocket service for the retargeting sandbox"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Serve the UI's built assets from this directory.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Wrist::Perpendicular)]
    wrist: Wrist,
    /// Left arm description: a file path or a bundled name.
    #[arg(long, requires = "model_right")]
    model_left: Option<String>,
    /// Right arm description: a file path or a bundled name.
    #[arg(long, requires = "model_left")]
    model_right: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Wrist {
    Parallel,
    Perpendicular,
}

fn load_model(spec: &str) -> sew_core::Result<RobotArmModel> {
    if sew_core::model::bundled_source(spec).is_some() {
        return RobotArmModel::bundled(spec);
    }
    RobotArmModel::load(spec)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let pair = match (&args.model_left, &args.model_right) {
        (Some(l), Some(r)) => ArmPair::new(load_model(l)?, load_model(r)?)?,
        _ => ArmPair::bundled(match args.wrist {
            Wrist::Parallel => WristType::Parallel,
            Wrist::Perpendicular => WristType::Perpendicular,
        })?,
    };
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "sew-sandbox listening on ws://{}/ws",
        listener.local_addr()?
    );
    serve(listener, router(Arc::new(pair), args.static_dir)).await?;
    Ok(())
}
