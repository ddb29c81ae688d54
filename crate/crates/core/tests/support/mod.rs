//! Independent reference implementations and generators shared by the
//! property suites and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use faime_core::devices::{build_theralmin, TherAlminConfig, Timbre};
use faime_core::learning::{CentroidModel, LabeledSample};
use faime_core::osc::{OscBundle, OscMessage, OscPacket, OscValue, TimeTag};
use faime_core::pipeline::{
    Behavior, DeviceGraph, Event, ParamSpec, ParamTransform, ProductionSpec, StageId, StageKind,
    Throttle, Violation,
};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- OSC

const ADDR_CHARS: &[u8] = b"abcxyz019_-.";

fn random_text(rng: &mut impl Rng, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.1) {
                // Some multi-byte characters to exercise UTF-8 padding.
                ['é', 'λ', '♪'][rng.gen_range(0..3)]
            } else {
                char::from(rng.gen_range(0x20u8..0x7f))
            }
        })
        .collect()
}

pub fn random_address(rng: &mut impl Rng) -> String {
    let parts = rng.gen_range(1..=4);
    let mut addr = String::new();
    for _ in 0..parts {
        addr.push('/');
        for _ in 0..rng.gen_range(0..=7) {
            addr.push(char::from(*ADDR_CHARS.choose(rng).unwrap()));
        }
    }
    addr
}

pub fn random_value(rng: &mut impl Rng) -> OscValue {
    match rng.gen_range(0..4) {
        0 => OscValue::Int(rng.gen()),
        1 => OscValue::Float(f32::from_bits(rng.gen())),
        2 => OscValue::Str(random_text(rng, 9)),
        _ => {
            let len = rng.gen_range(0..=9);
            OscValue::Blob((0..len).map(|_| rng.gen()).collect())
        }
    }
}

pub fn random_message(rng: &mut impl Rng) -> OscMessage {
    let n = rng.gen_range(0..=6);
    OscMessage::new(
        random_address(rng),
        (0..n).map(|_| random_value(rng)).collect(),
    )
}

/// A valid packet whose bundles nest at most `depth` levels.
pub fn random_packet(rng: &mut impl Rng, depth: usize) -> OscPacket {
    if depth == 0 || rng.gen_bool(0.6) {
        return random_message(rng).into();
    }
    let timetag = if rng.gen_bool(0.3) {
        TimeTag::IMMEDIATE
    } else {
        TimeTag::from_raw(rng.gen())
    };
    let n = rng.gen_range(0..=3);
    OscPacket::Bundle(OscBundle {
        timetag,
        content: (0..n).map(|_| random_packet(rng, depth - 1)).collect(),
    })
}

pub fn bundle_depth(p: &OscPacket) -> usize {
    match p {
        OscPacket::Message(_) => 0,
        OscPacket::Bundle(b) => 1 + b.content.iter().map(bundle_depth).max().unwrap_or(0),
    }
}

/// Hand-written byte layout, independent of the library encoder.
pub fn reference_encode(p: &OscPacket) -> Vec<u8> {
    fn pad(out: &mut Vec<u8>) {
        while out.len() % 4 != 0 {
            out.push(0);
        }
    }
    fn string(out: &mut Vec<u8>, s: &str) {
        out.extend_from_slice(s.as_bytes());
        out.push(0);
        pad(out);
    }
    let mut out = Vec::new();
    match p {
        OscPacket::Message(m) => {
            string(&mut out, &m.addr);
            let tags: String = std::iter::once(',')
                .chain(m.args.iter().map(|a| a.tag()))
                .collect();
            string(&mut out, &tags);
            for a in &m.args {
                match a {
                    OscValue::Int(i) => out.extend_from_slice(&i.to_be_bytes()),
                    OscValue::Float(f) => out.extend_from_slice(&f.to_bits().to_be_bytes()),
                    OscValue::Str(s) => string(&mut out, s),
                    OscValue::Blob(b) => {
                        out.extend_from_slice(&(b.len() as i32).to_be_bytes());
                        out.extend_from_slice(b);
                        pad(&mut out);
                    }
                }
            }
        }
        OscPacket::Bundle(b) => {
            out.extend_from_slice(b"#bundle\0");
            out.extend_from_slice(&b.timetag.to_raw().to_be_bytes());
            for e in &b.content {
                let inner = reference_encode(e);
                out.extend_from_slice(&(inner.len() as i32).to_be_bytes());
                out.extend_from_slice(&inner);
            }
        }
    }
    out
}

// ------------------------------------------------------------ patterns

/// Expand every `{a,b}` group into separate patterns.
pub fn expand_alternations(pattern: &str) -> Vec<String> {
    let Some(open) = pattern.find('{') else {
        return vec![pattern.to_owned()];
    };
    let close = open + pattern[open..].find('}').expect("validated pattern");
    let (head, body, tail) = (
        &pattern[..open],
        &pattern[open + 1..close],
        &pattern[close + 1..],
    );
    body.split(',')
        .flat_map(|alt| expand_alternations(&format!("{head}{alt}{tail}")))
        .collect()
}

enum Tok {
    Lit(char),
    Any,
    Star,
    Class(Vec<char>, bool),
}

fn tokenize(pattern: &str) -> Vec<Tok> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '?' => toks.push(Tok::Any),
            '*' => toks.push(Tok::Star),
            '[' => {
                let mut j = i + 1;
                let negated = chars.get(j) == Some(&'!');
                if negated {
                    j += 1;
                }
                let mut members = Vec::new();
                while chars[j] != ']' {
                    if chars.get(j + 1) == Some(&'-') && chars.get(j + 2).is_some_and(|&c| c != ']')
                    {
                        // A reversed range is empty.
                        members.extend(chars[j]..=chars[j + 2]);
                        j += 3;
                    } else {
                        members.push(chars[j]);
                        j += 1;
                    }
                }
                toks.push(Tok::Class(members, negated));
                i = j;
            }
            c => toks.push(Tok::Lit(c)),
        }
        i += 1;
    }
    toks
}

/// Table-driven matcher for an alternation-free pattern.
fn dp_match(pattern: &str, address: &str) -> bool {
    let toks = tokenize(pattern);
    let s: Vec<char> = address.chars().collect();
    // m[i][j]: first i tokens match first j chars.
    let mut m = vec![vec![false; s.len() + 1]; toks.len() + 1];
    m[0][0] = true;
    for i in 1..=toks.len() {
        for j in 0..=s.len() {
            m[i][j] = match &toks[i - 1] {
                Tok::Star => m[i - 1][j] || (j > 0 && s[j - 1] != '/' && m[i][j - 1]),
                tok => {
                    j > 0
                        && m[i - 1][j - 1]
                        && match tok {
                            Tok::Lit(c) => s[j - 1] == *c,
                            Tok::Any => s[j - 1] != '/',
                            Tok::Class(set, neg) => {
                                s[j - 1] != '/' && set.contains(&s[j - 1]) != *neg
                            }
                            Tok::Star => unreachable!(),
                        }
                }
            };
        }
    }
    m[toks.len()][s.len()]
}

pub fn reference_match(pattern: &str, address: &str) -> bool {
    expand_alternations(pattern)
        .iter()
        .any(|p| dp_match(p, address))
}

// ------------------------------------------------------------ learning

/// Brute-force nearest centroid: full scan over every centroid, keep the
/// smallest label among equal distances.
pub fn reference_classify(centroids: &[(String, Vec<f64>)], tau: f64, x: &[f64]) -> (String, f64) {
    let dist = |c: &[f64]| -> f64 {
        c.iter()
            .zip(x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut best: Option<(&str, f64)> = None;
    for (label, c) in centroids {
        let d = dist(c);
        best = match best {
            Some((bl, bd)) if bd < d || (bd == d && bl < label.as_str()) => Some((bl, bd)),
            _ => Some((label, d)),
        };
    }
    let (label, d_min) = best.expect("non-empty");
    let confidence = (-d_min).exp() / centroids.iter().map(|(_, c)| (-dist(c)).exp()).sum::<f64>();
    let label = if d_min > tau { "background" } else { label };
    (label.to_owned(), confidence)
}

/// Random labelled centroids on a small integer lattice, so exact ties
/// and exact tau boundaries occur often.
pub fn random_centroids(rng: &mut impl Rng) -> (Vec<(String, Vec<f64>)>, usize) {
    let dim = rng.gen_range(1..=16);
    let k = rng.gen_range(1..=10);
    let mut labels: Vec<String> = (0..k)
        .map(|i| format!("c{}", (b'a' + i as u8) as char))
        .collect();
    labels.shuffle(rng);
    let centroids = labels
        .into_iter()
        .map(|l| {
            (
                l,
                (0..dim)
                    .map(|_| f64::from(rng.gen_range(-3i8..=3)))
                    .collect(),
            )
        })
        .collect();
    (centroids, dim)
}

pub fn model_from(centroids: &[(String, Vec<f64>)], tau: f64) -> CentroidModel {
    let dim = centroids[0].1.len();
    CentroidModel::new(
        dim,
        tau,
        "background",
        centroids.iter().cloned().collect::<BTreeMap<_, _>>(),
    )
    .unwrap()
}

// --------------------------------------------------------------- graphs

pub const KINDS: [StageKind; 6] = StageKind::ALL;

/// A graph over `kinds.len()` stages named s0, s1, ... with the given
/// edges. Production stages get a parameterless production behaviour,
/// every other stage a passthrough.
pub fn plain_graph(kinds: &[StageKind], edges: &[(usize, usize)]) -> DeviceGraph {
    let mut g = DeviceGraph::new();
    for (i, &kind) in kinds.iter().enumerate() {
        let behavior = if kind == StageKind::Production {
            Behavior::Production(ProductionSpec {
                address: format!("/s{i}"),
                params: vec![],
                throttle: Throttle::default(),
            })
        } else {
            Behavior::Passthrough
        };
        g.add_stage(format!("s{i}"), kind, behavior);
    }
    for &(u, v) in edges {
        g.connect(format!("s{u}"), format!("s{v}"));
    }
    g
}

/// What the rules demand for a plain graph, computed by transitive closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub on_cycle: Vec<usize>,
    pub backward: Vec<(usize, usize)>,
    pub no_production: bool,
}

pub fn reference_check(kinds: &[StageKind], edges: &[(usize, usize)]) -> Expected {
    let n = kinds.len();
    let mut reach = vec![vec![false; n]; n];
    for &(u, v) in edges {
        reach[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let mut backward: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(u, v)| kinds[u] as u8 > kinds[v] as u8)
        .collect();
    backward.sort();
    Expected {
        on_cycle: (0..n).filter(|&i| reach[i][i]).collect(),
        backward,
        no_production: !kinds.contains(&StageKind::Production),
    }
}

/// Reduce the library's verdict on a plain graph to the same facts.
pub fn observed(kinds: &[StageKind], edges: &[(usize, usize)]) -> Expected {
    let index = |id: &StageId| id.as_str()[1..].parse::<usize>().unwrap();
    let mut got = Expected {
        on_cycle: vec![],
        backward: vec![],
        no_production: false,
    };
    if let Err(violations) = plain_graph(kinds, edges).validate() {
        for v in violations.0 {
            match v {
                Violation::Cycle(ids) => got.on_cycle = ids.iter().map(index).collect(),
                Violation::BackwardEdge { from, to, .. } => {
                    got.backward.push((index(&from), index(&to)))
                }
                Violation::NoProductionStage => got.no_production = true,
                other => panic!("unexpected violation {other}"),
            }
        }
    }
    got.on_cycle.sort();
    got.backward.sort();
    got
}

// ------------------------------------------------------------ TherAlmin

pub fn gesture_model() -> CentroidModel {
    CentroidModel::train(
        &[
            LabeledSample::new("fist", vec![1.0, 0.0, 0.0]),
            LabeledSample::new("open", vec![0.0, 1.0, 0.0]),
            LabeledSample::new("point", vec![0.0, 0.0, 1.0]),
        ],
        0.5,
    )
    .unwrap()
}

/// Every label, background included, maps to a distinct timbre.
pub fn distinct_timbre_config() -> TherAlminConfig {
    TherAlminConfig {
        timbre_table: [
            ("fist".to_owned(), Timbre::new("saw", vec![("cutoff", 0.3)])),
            ("open".to_owned(), Timbre::new("tri", vec![])),
            (
                "point".to_owned(),
                Timbre::new("square", vec![("reverb", 0.6), ("drive", 0.2)]),
            ),
        ]
        .into(),
        default_timbre: Timbre::new("sine", vec![]),
        ..TherAlminConfig::default()
    }
}

pub fn theralmin_graph() -> DeviceGraph {
    build_theralmin(&distinct_timbre_config(), &gesture_model())
        .unwrap()
        .graph
}

/// A gesture near one of the trained centroids, or far from all of them.
pub fn random_gesture(rng: &mut impl Rng) -> (Vec<f64>, &'static str) {
    let which = rng.gen_range(0..4);
    let jitter = |rng: &mut dyn rand::RngCore| rng.gen_range(-0.1..0.1);
    if which == 3 {
        return (vec![5.0 + jitter(rng), 5.0, 5.0], "background");
    }
    let mut f = vec![jitter(rng), jitter(rng), jitter(rng)];
    f[which] += 1.0;
    (f, ["fist", "open", "point"][which])
}

/// Pitch/volume readings at random times in [0, span_us), sorted.
pub fn random_stimuli(rng: &mut impl Rng, n: usize, span_us: u64) -> Vec<(u64, &'static str, f64)> {
    let mut v: Vec<(u64, &'static str, f64)> = (0..n)
        .map(|_| {
            let ch = if rng.gen_bool(0.5) { "pitch" } else { "volume" };
            (
                rng.gen_range(0..span_us),
                ch,
                f64::from(rng.gen_range(0u16..=1000)) / 1000.0,
            )
        })
        .collect();
    v.sort_by_key(|s| s.0);
    v
}

/// Interleave stimuli and gestures by time (stimuli first on equal t) and
/// number them.
pub fn merge_streams(stimuli: &[(u64, &str, f64)], gestures: &[(u64, Vec<f64>)]) -> Vec<Event> {
    let mut tagged: Vec<(u64, u8, usize)> = stimuli
        .iter()
        .enumerate()
        .map(|(i, s)| (s.0, 0, i))
        .chain(gestures.iter().enumerate().map(|(i, g)| (g.0, 1, i)))
        .collect();
    tagged.sort();
    tagged
        .into_iter()
        .enumerate()
        .map(|(seq, (t, which, i))| match which {
            0 => Event::stimulus(t, seq as u64, stimuli[i].1, stimuli[i].2),
            _ => Event::gesture(t, seq as u64, gestures[i].1.clone()),
        })
        .collect()
}

/// (freq, amp) bit patterns of each emitted note, with consecutive repeats
/// removed.
pub fn freq_amp_trace(out: &[Event]) -> Vec<(u32, u32)> {
    let mut trace: Vec<(u32, u32)> = Vec::new();
    for e in out {
        let args = &e.control().expect("control event").args;
        let pair = (
            args[0].as_f32().unwrap().to_bits(),
            args[1].as_f32().unwrap().to_bits(),
        );
        if trace.last() != Some(&pair) {
            trace.push(pair);
        }
    }
    trace
}

pub fn timbre_args(e: &Event) -> Vec<OscValue> {
    e.control().expect("control event").args[2..].to_vec()
}

/// A single-parameter production graph: capture "x" -> production "/x".
pub fn single_param_graph(rate: f64) -> DeviceGraph {
    let mut g = DeviceGraph::new();
    g.add_stage(
        "capture",
        StageKind::StimulusCapture,
        Behavior::capture(["x"], false),
    )
    .add_stage(
        "out",
        StageKind::Production,
        Behavior::Production(ProductionSpec {
            address: "/x".into(),
            params: vec![ParamSpec::new("value", ParamTransform::Linear)],
            throttle: Throttle::new(rate).unwrap(),
        }),
    )
    .connect("capture", "out")
    .bind(
        "out",
        "value",
        faime_core::pipeline::BindingSource::StimulusChannel("x".into()),
    );
    g
}
