use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Coalescer, DeviceGraph, Event, Payload, PipelineError, Scheduler};

/// Run a recorded stream through a fresh instance of `graph` in simulated
/// time and return the rate-limited control events, in emission order.
///
/// The result depends only on the graph and the stream.
pub fn run_replay(graph: &DeviceGraph, stream: &[Event]) -> Result<Vec<Event>, PipelineError> {
    if let Some(index) = stream
        .windows(2)
        .position(|w| w[0].order_key() >= w[1].order_key())
    {
        return Err(PipelineError::UnsortedStream { index: index + 1 });
    }
    let mut scheduler = Scheduler::new(graph)?;
    let mut coalescer = Coalescer::for_graph(graph);
    let mut out = Vec::new();
    for event in stream {
        out.extend(coalescer.release_due(event.t));
        for produced in scheduler.step(event)? {
            if matches!(produced.payload, Payload::Control { .. }) {
                coalescer.offer(produced);
            }
        }
    }
    out.extend(coalescer.release_all());
    Ok(out)
}

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReplayLine {
    Stimulus {
        channel: String,
        value: f64,
        t_us: u64,
    },
    Gesture {
        features: Vec<f64>,
        t_us: u64,
    },
}

impl ReplayLine {
    pub fn t_us(&self) -> u64 {
        match self {
            ReplayLine::Stimulus { t_us, .. } | ReplayLine::Gesture { t_us, .. } => *t_us,
        }
    }

    pub fn into_event(self, seq: u64) -> Event {
        match self {
            ReplayLine::Stimulus {
                channel,
                value,
                t_us,
            } => Event::stimulus(t_us, seq, channel, value),
            ReplayLine::Gesture { features, t_us } => Event::gesture(t_us, seq, features),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: t_us goes backwards")]
    Unsorted { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse JSON Lines into events, numbering them in file order. Blank lines
/// are skipped.
pub fn parse_replay(reader: impl BufRead) -> Result<Vec<Event>, ReplayError> {
    let mut events: Vec<Event> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReplayLine =
            serde_json::from_str(&line).map_err(|source| ReplayError::Parse {
                line: n + 1,
                source,
            })?;
        if events.last().is_some_and(|prev| prev.t > parsed.t_us()) {
            return Err(ReplayError::Unsorted { line: n + 1 });
        }
        events.push(parsed.into_event(events.len() as u64));
    }
    Ok(events)
}

pub fn read_replay_file(path: &Path) -> Result<Vec<Event>, ReplayError> {
    parse_replay(BufReader::new(std::fs::File::open(path)?))
}

/// Write ingestable events as JSON Lines. Other payloads are skipped.
pub fn write_replay<'a>(
    mut w: impl Write,
    events: impl IntoIterator<Item = &'a Event>,
) -> std::io::Result<()> {
    for e in events {
        let line = match &e.payload {
            Payload::Stimulus { channel, value } => ReplayLine::Stimulus {
                channel: channel.0.clone(),
                value: *value,
                t_us: e.t,
            },
            Payload::Gesture { features } => ReplayLine::Gesture {
                features: features.clone(),
                t_us: e.t,
            },
            _ => continue,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
