use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use faime_cli::commands::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "faime",
    version,
    about = "Run and inspect AI-assisted music devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a device config: graph rules and taxonomy codes.
    Validate { config: PathBuf },
    /// Run a device from a replay file or live from the WebSocket bridge.
    Run(RunArgs),
    /// Train a nearest-centroid model from labelled samples.
    Train {
        /// JSON Lines of {"label": ..., "features": [...]}.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send one OSC message. Arguments are i:<int>, f:<float> or s:<text>.
    OscSend {
        address: String,
        args: Vec<String>,
        #[arg(long)]
        target: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// JSON Lines stimulus trace.
    #[arg(long, required_unless_present = "live", conflicts_with = "live")]
    replay: Option<PathBuf>,
    /// Serve the WebSocket bridge until interrupted.
    #[arg(long)]
    live: bool,
    /// host:port for OSC output.
    #[arg(long)]
    target: Option<String>,
    /// WebSocket port for live mode; 0 picks a free one.
    #[arg(long)]
    ws_port: Option<u16>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FAIME_LOG", "warn")).init();
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr());
    let code = match cli.command {
        Command::Validate { config } => commands::cmd_validate(&config, &mut out, &mut err),
        Command::Run(run) => {
            let opts = RunOptions {
                config: &run.config,
                replay: run.replay.as_deref(),
                target: run.target.as_deref(),
                ws_port: run.ws_port,
            };
            commands::cmd_run(&opts, &mut out, &mut err)
        }
        Command::Train {
            data,
            tau,
            out: model,
        } => commands::cmd_train(&data, tau, &model, &mut out, &mut err),
        Command::OscSend {
            address,
            args,
            target,
        } => commands::cmd_osc_send(&address, &args, target.as_deref(), &mut out, &mut err),
    };
    std::process::exit(code);
}
