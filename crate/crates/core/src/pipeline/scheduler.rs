use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use super::graph::{Behavior, BindingSource, ParamSpec, ProductionSpec, StageLogic};
use super::{ChannelId, DeviceGraph, Event, Payload, PipelineError, StageId, StageKind};
use crate::learning::CentroidModel;
use crate::osc::{OscMessage, OscValue};

#[derive(Debug, Clone)]
enum Runtime {
    Capture {
        channels: BTreeSet<ChannelId>,
        gestures: bool,
    },
    Passthrough,
    Classify(CentroidModel),
    Production(ProductionState),
    Sink,
    Custom(Box<dyn StageLogic>),
}

#[derive(Debug, Clone)]
struct ProductionState {
    address: String,
    params: Vec<ParamSpec>,
    values: Vec<Option<Vec<OscValue>>>,
    /// (param index, source) pairs.
    bindings: Vec<(usize, BindingSource)>,
}

impl ProductionState {
    fn new(spec: &ProductionSpec, bindings: Vec<(usize, BindingSource)>) -> Self {
        ProductionState {
            address: spec.address.clone(),
            values: spec.params.iter().map(|p| p.initial.clone()).collect(),
            params: spec.params.clone(),
            bindings,
        }
    }

    fn update(&mut self, event: &Event) -> Option<OscMessage> {
        let mut changed = false;
        for (idx, source) in &self.bindings {
            let relevant = match (source, &event.payload) {
                (BindingSource::StimulusChannel(ch), Payload::Stimulus { channel, .. }) => {
                    ch == channel
                }
                (
                    BindingSource::LearningOutput(stage),
                    Payload::Class { .. } | Payload::Control { .. },
                ) => event.learned_from.as_ref() == Some(stage),
                _ => false,
            };
            if !relevant {
                continue;
            }
            if let Some(args) = self.params[*idx].transform.args_for(&event.payload) {
                if self.values[*idx].as_ref() != Some(&args) {
                    self.values[*idx] = Some(args);
                    changed = true;
                }
            }
        }
        if !changed || self.values.iter().any(Option::is_none) {
            return None;
        }
        let args = self.values.iter().flatten().flatten().cloned().collect();
        Some(OscMessage::new(self.address.clone(), args))
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: StageId,
    kind: StageKind,
    runtime: Runtime,
    successors: Vec<usize>,
}

/// Runtime state of one device: stage states laid out in topological order.
///
/// Single owner; feed it events in `(t, seq)` order.
#[derive(Debug, Clone)]
pub struct Scheduler {
    nodes: Vec<Node>,
    next_seq: u64,
    last: Option<(u64, u64)>,
}

impl Scheduler {
    pub fn new(graph: &DeviceGraph) -> Result<Scheduler, PipelineError> {
        graph.validate().map_err(PipelineError::InvalidGraph)?;
        let order = graph.topo_order();
        let position = |id: &StageId| order.iter().position(|o| o == id).expect("stage in order");
        let nodes = order
            .iter()
            .map(|id| {
                let node = &graph.stages[id];
                let runtime = match &node.behavior {
                    Behavior::Capture { channels, gestures } => Runtime::Capture {
                        channels: channels.clone(),
                        gestures: *gestures,
                    },
                    Behavior::Passthrough => Runtime::Passthrough,
                    Behavior::Classify(model) => Runtime::Classify(model.clone()),
                    Behavior::Sink => Runtime::Sink,
                    Behavior::Custom(logic) => Runtime::Custom(logic.clone()),
                    Behavior::Production(spec) => {
                        let bindings = graph
                            .bindings
                            .iter()
                            .filter(|b| &b.stage == id)
                            .map(|b| {
                                let idx = spec
                                    .params
                                    .iter()
                                    .position(|p| p.name == b.param)
                                    .expect("validated");
                                (idx, b.source.clone())
                            })
                            .collect();
                        Runtime::Production(ProductionState::new(spec, bindings))
                    }
                };
                let successors = graph
                    .edges
                    .iter()
                    .filter(|(from, _)| from == id)
                    .map(|(_, to)| position(to))
                    .collect();
                Node {
                    id: id.clone(),
                    kind: node.kind,
                    runtime,
                    successors,
                }
            })
            .collect();
        Ok(Scheduler {
            nodes,
            next_seq: 0,
            last: None,
        })
    }

    /// Deliver one ingested event and return the observable outputs: class
    /// decisions from learning stages and control messages from production
    /// stages, in the order they were produced.
    pub fn step(&mut self, event: &Event) -> Result<Vec<Event>, PipelineError> {
        if self.last.is_some_and(|last| event.order_key() <= last) {
            return Err(PipelineError::UnsortedStream { index: 0 });
        }
        self.last = Some(event.order_key());

        let mut inbox: Vec<Vec<Event>> = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind != StageKind::StimulusCapture {
                continue;
            }
            let wanted = match (&node.runtime, &event.payload) {
                (Runtime::Capture { channels, .. }, Payload::Stimulus { channel, .. }) => {
                    channels.contains(channel)
                }
                (Runtime::Capture { gestures, .. }, Payload::Gesture { .. }) => *gestures,
                (Runtime::Capture { .. }, _) => false,
                _ => true,
            };
            if wanted {
                inbox[i].push(event.clone());
            }
        }

        let mut outputs = Vec::new();
        for i in 0..self.nodes.len() {
            let received = std::mem::take(&mut inbox[i]);
            for input in received {
                let produced = self.process(i, &input)?;
                let node = &self.nodes[i];
                for payload in produced {
                    let out = Event {
                        t: input.t,
                        seq: self.next_seq,
                        payload,
                        source: Some(node.id.clone()),
                        learned_from: if node.kind == StageKind::Learning {
                            Some(node.id.clone())
                        } else {
                            input.learned_from.clone()
                        },
                    };
                    self.next_seq += 1;
                    let observable = matches!(
                        (node.kind, &out.payload),
                        (StageKind::Learning, Payload::Class { .. })
                            | (StageKind::Production, Payload::Control { .. })
                    );
                    for &s in &node.successors {
                        inbox[s].push(out.clone());
                    }
                    if observable {
                        outputs.push(out);
                    }
                }
            }
        }
        Ok(outputs)
    }

    fn process(&mut self, i: usize, input: &Event) -> Result<Vec<Payload>, PipelineError> {
        let node = &mut self.nodes[i];
        let fail = |reason: String| PipelineError::StageFailure {
            stage: node.id.clone(),
            reason,
        };
        match &mut node.runtime {
            Runtime::Capture { .. } | Runtime::Passthrough => Ok(vec![input.payload.clone()]),
            Runtime::Classify(model) => match &input.payload {
                Payload::Gesture { features } => {
                    let c = model.classify(features).map_err(|e| fail(e.to_string()))?;
                    Ok(vec![Payload::Class {
                        label: c.label,
                        confidence: c.confidence,
                    }])
                }
                _ => Ok(vec![]),
            },
            Runtime::Production(state) => Ok(state
                .update(input)
                .map(|message| Payload::Control { message })
                .into_iter()
                .collect()),
            Runtime::Sink => {
                log::debug!("feedback {}: {:?}", node.id, input.payload);
                Ok(vec![])
            }
            Runtime::Custom(logic) => {
                match catch_unwind(AssertUnwindSafe(|| logic.process(&input.payload))) {
                    Ok(result) => result.map_err(fail),
                    Err(panic) => {
                        let msg = panic
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| panic.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "unknown panic".into());
                        Err(fail(format!("panicked: {msg}")))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ParamTransform, Throttle};

    fn passthrough_graph() -> DeviceGraph {
        let mut g = DeviceGraph::new();
        g.add_stage(
            "capture",
            StageKind::StimulusCapture,
            Behavior::capture(["x"], false),
        )
        .add_stage(
            "adapt",
            StageKind::StimulusAdaptation,
            Behavior::Passthrough,
        )
        .add_stage(
            "out",
            StageKind::Production,
            Behavior::Production(ProductionSpec {
                address: "/x".into(),
                params: vec![ParamSpec::new("value", ParamTransform::Linear)],
                throttle: Throttle::default(),
            }),
        )
        .connect("capture", "adapt")
        .connect("adapt", "out")
        .bind("out", "value", BindingSource::StimulusChannel("x".into()));
        g
    }

    #[test]
    fn single_path_passthrough() {
        let mut s = Scheduler::new(&passthrough_graph()).unwrap();
        let out = s.step(&Event::stimulus(5, 0, "x", 0.5)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t, 5);
        assert_eq!(out[0].source, Some("out".into()));
        assert_eq!(
            out[0].control().unwrap(),
            &OscMessage::new("/x", vec![OscValue::Float(0.5)])
        );
    }

    #[test]
    fn unsubscribed_channel_is_ignored() {
        let mut s = Scheduler::new(&passthrough_graph()).unwrap();
        assert!(s.step(&Event::stimulus(0, 0, "y", 0.5)).unwrap().is_empty());
        assert!(s.step(&Event::gesture(1, 1, vec![1.0])).unwrap().is_empty());
    }

    #[test]
    fn repeated_value_emits_once() {
        let mut s = Scheduler::new(&passthrough_graph()).unwrap();
        assert_eq!(s.step(&Event::stimulus(0, 0, "x", 0.5)).unwrap().len(), 1);
        assert!(s.step(&Event::stimulus(1, 1, "x", 0.5)).unwrap().is_empty());
    }

    #[test]
    fn equal_timestamps_follow_seq() {
        let run = || {
            let mut s = Scheduler::new(&passthrough_graph()).unwrap();
            let mut out = s.step(&Event::stimulus(7, 0, "x", 0.1)).unwrap();
            out.extend(s.step(&Event::stimulus(7, 1, "x", 0.2)).unwrap());
            out
        };
        let a = run();
        assert_eq!(a.len(), 2);
        assert!(a[0].seq < a[1].seq);
        assert_eq!(a[1].control().unwrap().args, [OscValue::Float(0.2)]);
        assert_eq!(a, run());
    }

    #[test]
    fn out_of_order_event_is_rejected() {
        let mut s = Scheduler::new(&passthrough_graph()).unwrap();
        s.step(&Event::stimulus(7, 3, "x", 0.1)).unwrap();
        assert!(matches!(
            s.step(&Event::stimulus(7, 2, "x", 0.1)),
            Err(PipelineError::UnsortedStream { .. })
        ));
    }

    #[test]
    fn invalid_graph_is_refused() {
        assert!(matches!(
            Scheduler::new(&DeviceGraph::new()),
            Err(PipelineError::InvalidGraph(_))
        ));
    }

    #[derive(Debug, Clone)]
    struct Boom;

    impl StageLogic for Boom {
        fn process(&mut self, _: &Payload) -> Result<Vec<Payload>, String> {
            panic!("kaboom")
        }

        fn clone_box(&self) -> Box<dyn StageLogic> {
            Box::new(self.clone())
        }
    }

    #[test]
    fn stage_panic_names_the_stage() {
        let mut g = passthrough_graph();
        g.add_stage(
            "boom",
            StageKind::StimulusAdaptation,
            Behavior::Custom(Box::new(Boom)),
        )
        .connect("capture", "boom");
        let mut s = Scheduler::new(&g).unwrap();
        match s.step(&Event::stimulus(0, 0, "x", 0.5)) {
            Err(PipelineError::StageFailure { stage, reason }) => {
                assert_eq!(stage.as_str(), "boom");
                assert!(reason.contains("kaboom"));
            }
            other => panic!("expected stage failure, got {other:?}"),
        }
    }
}
