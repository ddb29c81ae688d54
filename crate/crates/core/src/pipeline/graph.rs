use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{ChannelId, Payload, StageId, StageKind, Throttle};
use crate::learning::CentroidModel;
use crate::osc::OscValue;

/// Device-specific stage logic plugged into the graph.
///
/// `process` must be a deterministic function of the stage's own state and
/// the input payload.
pub trait StageLogic: fmt::Debug + Send {
    fn process(&mut self, input: &Payload) -> Result<Vec<Payload>, String>;

    fn clone_box(&self) -> Box<dyn StageLogic>;
}

impl Clone for Box<dyn StageLogic> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

#[derive(Debug, Clone)]
pub enum Behavior {
    /// Entry point for ingested events on the listed channels, plus gesture
    /// frames when `gestures` is set.
    Capture {
        channels: BTreeSet<ChannelId>,
        gestures: bool,
    },
    Passthrough,
    /// Gesture features in, class decision out.
    Classify(CentroidModel),
    /// Assembles bound parameters into one OSC message.
    Production(ProductionSpec),
    /// Terminal stage that logs what reaches it.
    Sink,
    Custom(Box<dyn StageLogic>),
}

impl Behavior {
    pub fn capture<I, C>(channels: I, gestures: bool) -> Behavior
    where
        I: IntoIterator<Item = C>,
        C: Into<ChannelId>,
    {
        Behavior::Capture {
            channels: channels.into_iter().map(Into::into).collect(),
            gestures,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Capture { .. } => "capture",
            Behavior::Passthrough => "passthrough",
            Behavior::Classify(_) => "classify",
            Behavior::Production(_) => "production",
            Behavior::Sink => "sink",
            Behavior::Custom(_) => "custom",
        }
    }

    fn allowed_in(&self, kind: StageKind) -> bool {
        match self {
            Behavior::Capture { .. } => kind == StageKind::StimulusCapture,
            Behavior::Classify(_) => kind == StageKind::Learning,
            Behavior::Production(_) => kind == StageKind::Production,
            Behavior::Passthrough | Behavior::Sink | Behavior::Custom(_) => {
                kind != StageKind::Production
            }
        }
    }
}

/// How a bound value becomes OSC arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamTransform {
    /// Stimulus value passed through as a float.
    Linear,
    /// `min^(1-v) * max^v`: equal ratios per equal step, exact endpoints.
    Exponential { min: f64, max: f64 },
}

impl ParamTransform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ParamTransform::Linear => v,
            ParamTransform::Exponential { min, max } => min.powf(1.0 - v) * max.powf(v),
        }
    }

    /// Arguments contributed by `payload`, or `None` if it carries no value.
    pub(crate) fn args_for(self, payload: &Payload) -> Option<Vec<OscValue>> {
        match payload {
            Payload::Stimulus { value, .. } => {
                Some(vec![OscValue::Float(self.apply(*value) as f32)])
            }
            Payload::Control { message } => Some(message.args.clone()),
            Payload::Class { label, .. } => Some(vec![OscValue::Str(label.clone())]),
            Payload::Gesture { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub transform: ParamTransform,
    /// Value used until the first bound update arrives.
    pub initial: Option<Vec<OscValue>>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, transform: ParamTransform) -> Self {
        ParamSpec {
            name: name.into(),
            transform,
            initial: None,
        }
    }

    pub fn with_initial(mut self, initial: Vec<OscValue>) -> Self {
        self.initial = Some(initial);
        self
    }
}

/// A production stage emits `address` with its parameters' arguments
/// concatenated in declaration order, once every parameter has a value and
/// whenever one of them changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionSpec {
    pub address: String,
    pub params: Vec<ParamSpec>,
    pub throttle: Throttle,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum BindingSource {
    StimulusChannel(ChannelId),
    LearningOutput(StageId),
}

impl fmt::Display for BindingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingSource::StimulusChannel(c) => write!(f, "channel {c}"),
            BindingSource::LearningOutput(s) => write!(f, "learning output of {s}"),
        }
    }
}

/// Ties one production parameter to the only thing allowed to drive it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Binding {
    pub stage: StageId,
    pub param: String,
    pub source: BindingSource,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    DuplicateStage(StageId),
    /// Stages lying on at least one directed cycle, sorted.
    Cycle(Vec<StageId>),
    BackwardEdge {
        from: StageId,
        to: StageId,
        from_kind: StageKind,
        to_kind: StageKind,
    },
    NoProductionStage,
    DanglingEdge {
        from: StageId,
        to: StageId,
    },
    BehaviorMismatch {
        stage: StageId,
        kind: StageKind,
        behavior: &'static str,
    },
    DanglingBinding {
        binding: String,
        reason: &'static str,
    },
    DuplicateBinding {
        stage: StageId,
        param: String,
    },
    UnboundParameter {
        stage: StageId,
        param: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateStage(s) => write!(f, "stage {s} defined twice"),
            Violation::Cycle(stages) => {
                let names: Vec<_> = stages.iter().map(StageId::as_str).collect();
                write!(f, "cycle through {}", names.join(", "))
            }
            Violation::BackwardEdge {
                from,
                to,
                from_kind,
                to_kind,
            } => write!(
                f,
                "backward edge {from} ({from_kind:?}) -> {to} ({to_kind:?})"
            ),
            Violation::NoProductionStage => write!(f, "no production stage"),
            Violation::DanglingEdge { from, to } => {
                write!(f, "edge {from} -> {to} references a missing stage")
            }
            Violation::BehaviorMismatch {
                stage,
                kind,
                behavior,
            } => {
                write!(
                    f,
                    "stage {stage}: {behavior} behavior not allowed in {kind:?}"
                )
            }
            Violation::DanglingBinding { binding, reason } => {
                write!(f, "binding {binding}: {reason}")
            }
            Violation::DuplicateBinding { stage, param } => {
                write!(f, "parameter {stage}.{param} bound more than once")
            }
            Violation::UnboundParameter { stage, param } => {
                write!(
                    f,
                    "parameter {stage}.{param} has no binding and no initial value"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Violations {}

#[derive(Debug, Clone)]
pub(crate) struct StageNode {
    pub kind: StageKind,
    pub behavior: Behavior,
}

/// Stages, edges and parameter bindings of one device.
#[derive(Debug, Clone, Default)]
pub struct DeviceGraph {
    pub(crate) stages: BTreeMap<StageId, StageNode>,
    pub(crate) edges: BTreeSet<(StageId, StageId)>,
    pub(crate) bindings: Vec<Binding>,
    duplicates: Vec<StageId>,
}

impl DeviceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a stage. Re-using an id is reported by [`validate`](Self::validate).
    pub fn add_stage(
        &mut self,
        id: impl Into<StageId>,
        kind: StageKind,
        behavior: Behavior,
    ) -> &mut Self {
        let id = id.into();
        match self.stages.entry(id) {
            std::collections::btree_map::Entry::Occupied(e) => self.duplicates.push(e.key().clone()),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(StageNode { kind, behavior });
            }
        }
        self
    }

    pub fn connect(&mut self, from: impl Into<StageId>, to: impl Into<StageId>) -> &mut Self {
        self.edges.insert((from.into(), to.into()));
        self
    }

    pub fn bind(
        &mut self,
        stage: impl Into<StageId>,
        param: impl Into<String>,
        source: BindingSource,
    ) -> &mut Self {
        self.bindings.push(Binding {
            stage: stage.into(),
            param: param.into(),
            source,
        });
        self
    }

    pub fn stage_ids(&self) -> impl Iterator<Item = &StageId> {
        self.stages.keys()
    }

    pub fn kind(&self, id: &StageId) -> Option<StageKind> {
        self.stages.get(id).map(|s| s.kind)
    }

    pub fn behavior(&self, id: &StageId) -> Option<&Behavior> {
        self.stages.get(id).map(|s| &s.behavior)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&StageId, &StageId)> {
        self.edges.iter().map(|(a, b)| (a, b))
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    /// Every binding that drives `stage.param`.
    pub fn sources_of(&self, stage: &StageId, param: &str) -> Vec<&BindingSource> {
        self.bindings
            .iter()
            .filter(|b| &b.stage == stage && b.param == param)
            .map(|b| &b.source)
            .collect()
    }

    /// Ids of production stages, in id order.
    pub fn production_stages(&self) -> impl Iterator<Item = (&StageId, &ProductionSpec)> {
        self.stages.iter().filter_map(|(id, s)| match &s.behavior {
            Behavior::Production(spec) => Some((id, spec)),
            _ => None,
        })
    }

    /// Every violation of the graph rules; `Ok` iff there are none.
    pub fn validate(&self) -> Result<(), Violations> {
        let mut out: Vec<Violation> = self
            .duplicates
            .iter()
            .cloned()
            .map(Violation::DuplicateStage)
            .collect();

        let ids: Vec<&StageId> = self.stages.keys().collect();
        let index_of = |id: &StageId| ids.binary_search(&id).ok();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for (from, to) in &self.edges {
            let (Some(u), Some(v)) = (index_of(from), index_of(to)) else {
                out.push(Violation::DanglingEdge {
                    from: from.clone(),
                    to: to.clone(),
                });
                continue;
            };
            let (from_kind, to_kind) = (self.stages[from].kind, self.stages[to].kind);
            if from_kind.index() > to_kind.index() {
                out.push(Violation::BackwardEdge {
                    from: from.clone(),
                    to: to.clone(),
                    from_kind,
                    to_kind,
                });
            }
            succ[u].push(v);
        }

        let on_cycle = cycle_members(&succ);
        if !on_cycle.is_empty() {
            out.push(Violation::Cycle(
                on_cycle.into_iter().map(|i| ids[i].clone()).collect(),
            ));
        }

        if !self
            .stages
            .values()
            .any(|s| s.kind == StageKind::Production)
        {
            out.push(Violation::NoProductionStage);
        }

        for (id, node) in &self.stages {
            if !node.behavior.allowed_in(node.kind) {
                out.push(Violation::BehaviorMismatch {
                    stage: id.clone(),
                    kind: node.kind,
                    behavior: node.behavior.name(),
                });
            }
        }

        self.check_bindings(&mut out);

        if out.is_empty() {
            Ok(())
        } else {
            Err(Violations(out))
        }
    }

    fn check_bindings(&self, out: &mut Vec<Violation>) {
        let captured: BTreeSet<&ChannelId> = self
            .stages
            .values()
            .filter_map(|s| match &s.behavior {
                Behavior::Capture { channels, .. } => Some(channels.iter()),
                _ => None,
            })
            .flatten()
            .collect();

        let mut seen = BTreeSet::new();
        for b in &self.bindings {
            let dangling = |reason| Violation::DanglingBinding {
                binding: format!("{}.{} <- {}", b.stage, b.param, b.source),
                reason,
            };
            match self.stages.get(&b.stage).map(|s| &s.behavior) {
                None => out.push(dangling("no such stage")),
                Some(Behavior::Production(spec)) => {
                    if !spec.params.iter().any(|p| p.name == b.param) {
                        out.push(dangling("no such parameter"));
                    }
                }
                Some(_) => out.push(dangling("target is not a production stage")),
            }
            match &b.source {
                BindingSource::StimulusChannel(ch) if !captured.contains(ch) => {
                    out.push(dangling("channel is not captured by any stage"))
                }
                BindingSource::LearningOutput(src) => match self.stages.get(src) {
                    None => out.push(dangling("no such source stage")),
                    Some(s) if s.kind != StageKind::Learning => {
                        out.push(dangling("source is not a learning stage"))
                    }
                    Some(_) => {}
                },
                BindingSource::StimulusChannel(_) => {}
            }
            if !seen.insert((&b.stage, &b.param)) {
                out.push(Violation::DuplicateBinding {
                    stage: b.stage.clone(),
                    param: b.param.clone(),
                });
            }
        }

        for (id, spec) in self.production_stages() {
            for p in &spec.params {
                if p.initial.is_none() && !seen.contains(&(id, &p.name)) {
                    out.push(Violation::UnboundParameter {
                        stage: id.clone(),
                        param: p.name.clone(),
                    });
                }
            }
        }
    }

    /// Topological order, breaking ties by stage id. Assumes a valid graph.
    pub(crate) fn topo_order(&self) -> Vec<StageId> {
        let mut indegree: BTreeMap<&StageId, usize> = self.stages.keys().map(|k| (k, 0)).collect();
        for (_, to) in &self.edges {
            *indegree.get_mut(to).expect("validated") += 1;
        }
        let mut ready: BTreeSet<&StageId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.stages.len());
        while let Some(next) = ready.pop_first() {
            order.push(next.clone());
            for (_, to) in self
                .edges
                .range((next.clone(), StageId(String::new()))..)
                .take_while(|(f, _)| f == next)
            {
                let d = indegree.get_mut(to).expect("validated");
                *d -= 1;
                if *d == 0 {
                    ready.insert(to);
                }
            }
        }
        order
    }
}

/// Nodes that can reach themselves through at least one edge.
fn cycle_members(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    // Kahn's algorithm strips everything that is not upstream of or on a cycle.
    let mut indegree = vec![0usize; n];
    for targets in succ {
        for &v in targets {
            indegree[v] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(u) = stack.pop() {
        removed[u] = true;
        for &v in &succ[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                stack.push(v);
            }
        }
    }
    (0..n)
        .filter(|&start| !removed[start])
        .filter(|&start| {
            let mut seen = vec![false; n];
            let mut stack = succ[start].clone();
            while let Some(u) = stack.pop() {
                if u == start {
                    return true;
                }
                if !removed[u] && !std::mem::replace(&mut seen[u], true) {
                    stack.extend(&succ[u]);
                }
            }
            false
        })
        .collect()
}
