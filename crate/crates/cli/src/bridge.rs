//! WebSocket bridge: browser controllers feed stimuli and gestures into a
//! running device and watch its class decisions and OSC output.
//!
//! Frames are JSON text, one [`BridgeMessage`] each, tagged by `"type"`.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use faime_core::osc::{OscMessage, OscValue};
use faime_core::pipeline::{Coalescer, Event, Payload, Scheduler};
use faime_core::transport::Endpoint;
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio_tungstenite::tungstenite::Message;

use crate::config::LoadedDevice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BridgeMessage {
    // client -> server
    Stimulus {
        channel: String,
        value: f64,
    },
    Gesture {
        features: Vec<f64>,
    },
    // server -> client
    Class {
        label: String,
        confidence: f64,
    },
    OscOut {
        address: String,
        args: Vec<serde_json::Value>,
        t_us: u64,
    },
    Status {
        device: String,
        version: String,
    },
    Error {
        message: String,
    },
}

impl BridgeMessage {
    pub fn osc_out(message: &OscMessage, t_us: u64) -> Self {
        BridgeMessage::OscOut {
            address: message.addr.clone(),
            args: message.args.iter().map(arg_json).collect(),
            t_us,
        }
    }

    pub fn to_frame(&self) -> String {
        serde_json::to_string(self).expect("bridge messages always serialize")
    }
}

fn arg_json(v: &OscValue) -> serde_json::Value {
    match v {
        OscValue::Int(i) => (*i).into(),
        OscValue::Float(f) => {
            serde_json::Number::from_f64(f64::from(*f)).map_or(serde_json::Value::Null, Into::into)
        }
        OscValue::Str(s) => s.as_str().into(),
        OscValue::Blob(b) => b.iter().map(|&x| serde_json::Value::from(x)).collect(),
    }
}

/// Turn a client frame into a payload, or explain why not.
pub fn parse_client_frame(text: &str, gesture_dim: Option<usize>) -> Result<Payload, String> {
    let msg: BridgeMessage = serde_json::from_str(text).map_err(|e| format!("bad frame: {e}"))?;
    match msg {
        BridgeMessage::Stimulus { channel, value } => {
            if !(0.0..=1.0).contains(&value) {
                return Err(format!("stimulus value {value} outside [0, 1]"));
            }
            Ok(Payload::stimulus(channel, value))
        }
        BridgeMessage::Gesture { features } => {
            if features.iter().any(|f| !f.is_finite()) {
                return Err("gesture features must be finite".into());
            }
            match gesture_dim {
                None => Err("this device takes no gestures".into()),
                Some(dim) if dim != features.len() => Err(format!(
                    "expected {dim} gesture features, got {}",
                    features.len()
                )),
                Some(_) => Ok(Payload::Gesture { features }),
            }
        }
        other => Err(format!(
            "clients may not send {:?} frames",
            frame_type(&other)
        )),
    }
}

fn frame_type(m: &BridgeMessage) -> &'static str {
    match m {
        BridgeMessage::Stimulus { .. } => "stimulus",
        BridgeMessage::Gesture { .. } => "gesture",
        BridgeMessage::Class { .. } => "class",
        BridgeMessage::OscOut { .. } => "osc_out",
        BridgeMessage::Status { .. } => "status",
        BridgeMessage::Error { .. } => "error",
    }
}

/// Stamps arrivals with (t, seq) and queues them for the device task. The
/// lock makes stamp order and queue order the same.
struct Stamper {
    start: Instant,
    state: Mutex<(u64, u64)>,
    queue: mpsc::UnboundedSender<Event>,
}

impl Stamper {
    fn ingest(&self, payload: Payload) -> bool {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let now = self.start.elapsed().as_micros() as u64;
        let t = now.max(state.0);
        let seq = state.1;
        *state = (t, seq + 1);
        self.queue.send(Event::ingest(t, seq, payload)).is_ok()
    }
}

/// Run the bridge on an already bound listener until `shutdown` resolves.
pub async fn serve(
    device: LoadedDevice,
    listener: TcpListener,
    endpoint: Endpoint,
    target: SocketAddr,
    shutdown: impl std::future::Future<Output = ()>,
) -> std::io::Result<()> {
    let scheduler = Scheduler::new(&device.descriptor.graph)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    let coalescer = Coalescer::for_graph(&device.descriptor.graph);
    let (queue, events) = mpsc::unbounded_channel();
    let (frames, _) = broadcast::channel::<String>(1024);
    let start = Instant::now();
    let stamper = Arc::new(Stamper {
        start,
        state: Mutex::new((0, 0)),
        queue,
    });
    let status = BridgeMessage::Status {
        device: device.descriptor.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
    }
    .to_frame();
    let gesture_dim = device.gesture_dim();

    let device_task = tokio::spawn(run_device(
        scheduler,
        coalescer,
        events,
        frames.clone(),
        endpoint,
        target,
        start,
    ));

    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => {
                let (stream, peer) = match accepted {
                    Ok(a) => a,
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        continue;
                    }
                };
                log::info!("controller connected from {peer}");
                tokio::spawn(handle_client(stream, stamper.clone(), frames.subscribe(), status.clone(), gesture_dim));
            }
        }
    }
    device_task.abort();
    Ok(())
}

async fn run_device(
    mut scheduler: Scheduler,
    mut coalescer: Coalescer,
    mut events: mpsc::UnboundedReceiver<Event>,
    frames: broadcast::Sender<String>,
    endpoint: Endpoint,
    target: SocketAddr,
    start: Instant,
) {
    let emit = |batch: Vec<Event>| {
        for e in batch {
            let Some(message) = e.control() else { continue };
            if let Err(err) = endpoint.send(&message.clone().into(), target) {
                log::warn!("osc send failed: {err}");
            }
            // No receivers is fine.
            let _ = frames.send(BridgeMessage::osc_out(message, e.t).to_frame());
        }
    };
    loop {
        let deadline = coalescer.next_deadline();
        let sleep = async {
            match deadline {
                Some(t) => {
                    tokio::time::sleep_until((start + Duration::from_micros(t)).into()).await
                }
                None => std::future::pending().await,
            }
        };
        tokio::select! {
            _ = sleep => {
                let now = start.elapsed().as_micros() as u64;
                emit(coalescer.release_due(now.max(deadline.unwrap_or(0))));
            }
            next = events.recv() => {
                let Some(event) = next else { break };
                emit(coalescer.release_due(event.t));
                match scheduler.step(&event) {
                    Ok(outputs) => {
                        for out in outputs {
                            match &out.payload {
                                Payload::Class { label, confidence } => {
                                    let frame = BridgeMessage::Class { label: label.clone(), confidence: *confidence };
                                    let _ = frames.send(frame.to_frame());
                                }
                                Payload::Control { .. } => coalescer.offer(out),
                                _ => {}
                            }
                        }
                    }
                    Err(e) => {
                        log::error!("{e}");
                        let _ = frames.send(BridgeMessage::Error { message: e.to_string() }.to_frame());
                    }
                }
            }
        }
    }
    emit(coalescer.release_all());
}

async fn handle_client(
    stream: TcpStream,
    stamper: Arc<Stamper>,
    mut frames: broadcast::Receiver<String>,
    status: String,
    gesture_dim: Option<usize>,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("websocket handshake failed: {e}");
            return;
        }
    };
    let (mut tx, mut rx) = ws.split();
    if tx.send(Message::Text(status.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(Message::Binary(_))) => {
                        let reply = BridgeMessage::Error { message: "binary frames are not supported".into() };
                        if tx.send(Message::Text(reply.to_frame().into())).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(_)) => continue,
                };
                match parse_client_frame(text.as_str(), gesture_dim) {
                    Ok(payload) => {
                        if !stamper.ingest(payload) {
                            break;
                        }
                    }
                    Err(message) => {
                        log::debug!("rejected frame: {message}");
                        let reply = BridgeMessage::Error { message }.to_frame();
                        if tx.send(Message::Text(reply.into())).await.is_err() {
                            break;
                        }
                    }
                }
            }
            frame = frames.recv() => match frame {
                Ok(frame) => {
                    if tx.send(Message::Text(frame.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagging, {n} frames dropped"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    log::info!("controller disconnected");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_schema() {
        let m: BridgeMessage =
            serde_json::from_str(r#"{"type":"stimulus","channel":"pitch","value":0.5}"#).unwrap();
        assert_eq!(
            m,
            BridgeMessage::Stimulus {
                channel: "pitch".into(),
                value: 0.5
            }
        );
        let out = BridgeMessage::osc_out(
            &OscMessage::new(
                "/x",
                vec![OscValue::Float(0.5), "saw".into(), OscValue::Int(3)],
            ),
            42,
        );
        assert_eq!(
            out.to_frame(),
            r#"{"type":"osc_out","address":"/x","args":[0.5,"saw",3],"t_us":42}"#
        );
        let status = BridgeMessage::Status {
            device: "theralmin".into(),
            version: "0.1.0".into(),
        };
        assert_eq!(
            status.to_frame(),
            r#"{"type":"status","device":"theralmin","version":"0.1.0"}"#
        );
    }

    #[test]
    fn client_frame_validation() {
        assert!(parse_client_frame(r#"{"type":"??"}"#, Some(3)).is_err());
        assert!(parse_client_frame("not json", Some(3)).is_err());
        assert!(
            parse_client_frame(r#"{"type":"stimulus","channel":"pitch","value":1.5}"#, None)
                .is_err()
        );
        assert!(parse_client_frame(r#"{"type":"gesture","features":[1,2]}"#, Some(3)).is_err());
        assert!(parse_client_frame(r#"{"type":"gesture","features":[1,2]}"#, None).is_err());
        assert!(
            parse_client_frame(r#"{"type":"class","label":"x","confidence":1}"#, Some(3)).is_err()
        );
        assert_eq!(
            parse_client_frame(r#"{"type":"gesture","features":[1,2,3]}"#, Some(3)).unwrap(),
            Payload::Gesture {
                features: vec![1.0, 2.0, 3.0]
            }
        );
        assert_eq!(
            parse_client_frame(r#"{"type":"stimulus","channel":"volume","value":1}"#, None)
                .unwrap(),
            Payload::stimulus("volume", 1.0)
        );
    }
}
