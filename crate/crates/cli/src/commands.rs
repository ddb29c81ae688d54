use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;

use faime_core::learning::{CentroidModel, LabeledSample};
use faime_core::osc::{self, OscMessage, OscValue};
use faime_core::pipeline::{read_replay_file, run_replay};
use faime_core::transport::{Endpoint, DEFAULT_TARGET_PORT};

use crate::config::{self, ConfigError};
use crate::{EXIT_BIND, EXIT_INVALID, EXIT_IO, EXIT_OK};

/// Print every problem with the config; 0 iff there are none.
pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match config::load(path) {
        Ok(device) => {
            let codes: Vec<String> = device
                .descriptor
                .codes
                .iter()
                .map(|c| format!("{c} ({})", c.name()))
                .collect();
            let _ = writeln!(out, "device: {}", device.descriptor.name);
            let _ = writeln!(out, "codes: {}", codes.join(", "));
            let _ = writeln!(
                out,
                "stages: {}",
                device.descriptor.graph.stage_ids().count()
            );
            let _ = writeln!(out, "status: ok");
            EXIT_OK
        }
        Err(ConfigError::Invalid(problems)) => {
            for p in &problems {
                let _ = writeln!(err, "violation: {p}");
            }
            let _ = writeln!(out, "status: invalid");
            let _ = writeln!(out, "violations: {}", problems.len());
            EXIT_INVALID
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}

fn resolve(target: &str) -> Option<SocketAddr> {
    target.to_socket_addrs().ok()?.next()
}

pub struct RunOptions<'a> {
    pub config: &'a Path,
    pub replay: Option<&'a Path>,
    pub target: Option<&'a str>,
    pub ws_port: Option<u16>,
}

pub fn cmd_run(opts: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let device = match config::load(opts.config) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let target_text = opts.target.unwrap_or(&device.target).to_owned();
    let Some(target) = resolve(&target_text) else {
        let _ = writeln!(err, "error: cannot resolve target {target_text:?}");
        return EXIT_INVALID;
    };
    let bind = if target.is_ipv4() {
        "0.0.0.0:0"
    } else {
        "[::]:0"
    };
    let endpoint = match Endpoint::open(bind) {
        Ok(ep) => ep,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_BIND;
        }
    };

    let Some(replay) = opts.replay else {
        return run_live(device, endpoint, target, opts.ws_port, out, err);
    };
    let events = match read_replay_file(replay) {
        Ok(events) => events,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", replay.display());
            return EXIT_IO;
        }
    };
    let produced = match run_replay(&device.descriptor.graph, &events) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    for e in &produced {
        let message = e.control().expect("replay yields control events").clone();
        if let Err(e) = endpoint.send(&message.into(), target) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_IO;
        }
    }
    let _ = writeln!(out, "device: {}", device.descriptor.name);
    let _ = writeln!(out, "target: {target}");
    let _ = writeln!(out, "events_in: {}", events.len());
    let _ = writeln!(out, "events_out: {}", produced.len());
    EXIT_OK
}

fn run_live(
    device: config::LoadedDevice,
    endpoint: Endpoint,
    target: SocketAddr,
    ws_port: Option<u16>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let runtime = match tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_IO;
        }
    };
    let port = ws_port.unwrap_or(device.ws_port);
    runtime.block_on(async {
        let listener = match tokio::net::TcpListener::bind(("127.0.0.1", port)).await {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(err, "error: cannot bind websocket port {port}: {e}");
                return EXIT_BIND;
            }
        };
        let bound = listener.local_addr().map(|a| a.port()).unwrap_or(port);
        let _ = writeln!(out, "device: {}", device.descriptor.name);
        let _ = writeln!(out, "target: {target}");
        let _ = writeln!(out, "ws_port: {bound}");
        let _ = out.flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match crate::bridge::serve(device, listener, endpoint, target, shutdown).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_INVALID
            }
        }
    })
}

/// Train a model from JSON Lines of `{"label": ..., "features": [...]}`.
pub fn cmd_train(
    data: &Path,
    tau: f64,
    model_out: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let file = match std::fs::File::open(data) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", data.display());
            return EXIT_IO;
        }
    };
    let mut samples = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(err, "error: {}: {e}", data.display());
                return EXIT_IO;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LabeledSample>(&line) {
            Ok(s) => samples.push(s),
            Err(e) => {
                let _ = writeln!(err, "error: {}:{}: {e}", data.display(), n + 1);
                return EXIT_IO;
            }
        }
    }
    let model = match CentroidModel::train(&samples, tau) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let json = serde_json::to_string_pretty(&model).expect("model serializes");
    if let Err(e) = std::fs::write(model_out, json + "\n") {
        let _ = writeln!(err, "error: {}: {e}", model_out.display());
        return EXIT_IO;
    }
    let _ = writeln!(out, "samples: {}", samples.len());
    let _ = writeln!(out, "classes: {}", model.centroids().len());
    let _ = writeln!(out, "dim: {}", model.dim());
    let _ = writeln!(out, "out: {}", model_out.display());
    EXIT_OK
}

/// Parse `i:<int>`, `f:<float>` or `s:<text>`.
pub fn parse_arg(token: &str) -> Result<OscValue, String> {
    let bad = || format!("bad argument {token:?}, expected i:<int>, f:<float> or s:<text>");
    let (kind, value) = token.split_once(':').ok_or_else(bad)?;
    match kind {
        "i" => value.parse().map(OscValue::Int).map_err(|_| bad()),
        "f" => value.parse().map(OscValue::Float).map_err(|_| bad()),
        "s" => Ok(OscValue::Str(value.to_owned())),
        _ => Err(bad()),
    }
}

pub fn cmd_osc_send(
    address: &str,
    args: &[String],
    target: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let args: Result<Vec<OscValue>, String> = args.iter().map(|a| parse_arg(a)).collect();
    let args = match args {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let packet = OscMessage::new(address, args).into();
    let bytes = match osc::encode(&packet) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let default_target = format!("127.0.0.1:{DEFAULT_TARGET_PORT}");
    let target_text = target.unwrap_or(&default_target);
    let Some(dest) = resolve(target_text) else {
        let _ = writeln!(err, "error: cannot resolve target {target_text:?}");
        return EXIT_IO;
    };
    let bind = if dest.is_ipv4() {
        "0.0.0.0:0"
    } else {
        "[::]:0"
    };
    let sent = Endpoint::open(bind).and_then(|ep| ep.send_raw(&bytes, dest).map(|_| ()));
    match sent {
        Ok(()) => {
            let _ = writeln!(out, "target: {dest}");
            let _ = writeln!(out, "bytes: {}", bytes.len());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}
