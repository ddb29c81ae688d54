use std::collections::BTreeMap;

use super::{Event, Payload, StageId};

pub const DEFAULT_MAX_RATE: f64 = 100.0;

/// Per-address output rate limit of a production stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throttle {
    max_per_second: f64,
}

impl Default for Throttle {
    fn default() -> Self {
        Throttle {
            max_per_second: DEFAULT_MAX_RATE,
        }
    }
}

impl Throttle {
    pub fn new(max_per_second: f64) -> Option<Throttle> {
        (max_per_second > 0.0 && max_per_second.is_finite()).then_some(Throttle { max_per_second })
    }

    pub fn max_per_second(&self) -> f64 {
        self.max_per_second
    }

    /// Window length in microseconds, rounded up so the rate is never exceeded.
    pub fn window_us(&self) -> u64 {
        ((1e6 / self.max_per_second).ceil() as u64).max(1)
    }
}

#[derive(Debug, Clone)]
struct Pending {
    window_end: u64,
    event: Event,
}

/// Keep-latest coalescing of production output on a fixed time grid.
///
/// Simulated time is cut into windows of [`Throttle::window_us`] starting at
/// t = 0. Every control message offered inside a window replaces the
/// previous one for the same (stage, address); at the window's end the
/// survivor is released stamped with the window end time. Release times
/// depend only on which windows saw traffic, never on which parameter
/// caused it.
#[derive(Debug, Clone, Default)]
pub struct Coalescer {
    windows: BTreeMap<StageId, u64>,
    pending: BTreeMap<(StageId, String), Pending>,
}

impl Coalescer {
    pub fn new(windows: BTreeMap<StageId, u64>) -> Self {
        Coalescer {
            windows,
            pending: BTreeMap::new(),
        }
    }

    pub fn for_graph(graph: &super::DeviceGraph) -> Self {
        Self::new(
            graph
                .production_stages()
                .map(|(id, spec)| (id.clone(), spec.throttle.window_us()))
                .collect(),
        )
    }

    /// Queue a control event. Callers must have released everything due at
    /// or before `event.t` first.
    pub fn offer(&mut self, event: Event) {
        let Payload::Control { message } = &event.payload else {
            return;
        };
        let stage = event
            .source
            .clone()
            .unwrap_or_else(|| StageId(String::new()));
        let window = self
            .windows
            .get(&stage)
            .copied()
            .unwrap_or_else(|| Throttle::default().window_us());
        let window_end = (event.t / window + 1) * window;
        let key = (stage, message.addr.clone());
        debug_assert!(self
            .pending
            .get(&key)
            .is_none_or(|p| p.window_end == window_end));
        self.pending.insert(key, Pending { window_end, event });
    }

    pub fn next_deadline(&self) -> Option<u64> {
        self.pending.values().map(|p| p.window_end).min()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Release every window that has closed by `now`, ordered by (t, seq).
    pub fn release_due(&mut self, now: u64) -> Vec<Event> {
        self.release_where(|p| p.window_end <= now)
    }

    pub fn release_all(&mut self) -> Vec<Event> {
        self.release_where(|_| true)
    }

    fn release_where(&mut self, due: impl Fn(&Pending) -> bool) -> Vec<Event> {
        let keys: Vec<_> = self
            .pending
            .iter()
            .filter(|(_, p)| due(p))
            .map(|(k, _)| k.clone())
            .collect();
        let mut out: Vec<Event> = keys
            .into_iter()
            .filter_map(|k| self.pending.remove(&k))
            .map(|p| Event {
                t: p.window_end,
                ..p.event
            })
            .collect();
        out.sort_by_key(Event::order_key);
        out
    }
}
