//! OSC 1.0 packets: the wire unit of the production layer.
//!
//! Only the four core argument types (`i`, `f`, `s`, `b`) are supported.
//! Decoding is strict: anything that is not the exact image of [`encode`]
//! is rejected with a [`Malformed`] reason.

mod codec;
mod pattern;

use std::fmt;

pub use codec::{decode, encode, MAX_BUNDLE_DEPTH};
pub use pattern::match_address;

/// A single OSC argument.
///
/// Equality on `Float` compares bit patterns, so NaN payloads and signed
/// zeros survive a round trip and compare equal to themselves.
#[derive(Debug, Clone)]
pub enum OscValue {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscValue {
    /// The type-tag character for this argument.
    pub fn tag(&self) -> char {
        match self {
            OscValue::Int(_) => 'i',
            OscValue::Float(_) => 'f',
            OscValue::Str(_) => 's',
            OscValue::Blob(_) => 'b',
        }
    }

    pub fn as_f32(&self) -> Option<f32> {
        match self {
            OscValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            OscValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl PartialEq for OscValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OscValue::Int(a), OscValue::Int(b)) => a == b,
            (OscValue::Float(a), OscValue::Float(b)) => a.to_bits() == b.to_bits(),
            (OscValue::Str(a), OscValue::Str(b)) => a == b,
            (OscValue::Blob(a), OscValue::Blob(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for OscValue {}

impl From<i32> for OscValue {
    fn from(v: i32) -> Self {
        OscValue::Int(v)
    }
}

impl From<f32> for OscValue {
    fn from(v: f32) -> Self {
        OscValue::Float(v)
    }
}

impl From<&str> for OscValue {
    fn from(v: &str) -> Self {
        OscValue::Str(v.to_owned())
    }
}

impl From<String> for OscValue {
    fn from(v: String) -> Self {
        OscValue::Str(v)
    }
}

impl From<Vec<u8>> for OscValue {
    fn from(v: Vec<u8>) -> Self {
        OscValue::Blob(v)
    }
}

impl fmt::Display for OscValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OscValue::Int(v) => write!(f, "{v}"),
            OscValue::Float(v) => write!(f, "{v}"),
            OscValue::Str(v) => write!(f, "{v:?}"),
            OscValue::Blob(v) => write!(f, "<blob {} bytes>", v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscMessage {
    pub addr: String,
    pub args: Vec<OscValue>,
}

impl OscMessage {
    pub fn new(addr: impl Into<String>, args: Vec<OscValue>) -> Self {
        OscMessage {
            addr: addr.into(),
            args,
        }
    }

    /// The `,`-prefixed type-tag string derived from the arguments.
    pub fn type_tags(&self) -> String {
        std::iter::once(',')
            .chain(self.args.iter().map(OscValue::tag))
            .collect()
    }
}

impl fmt::Display for OscMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.addr)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        Ok(())
    }
}

/// NTP-style bundle timestamp: seconds since 1900 plus a 2^-32 fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeTag {
    pub seconds: u32,
    pub fraction: u32,
}

impl TimeTag {
    /// Raw value 1: execute immediately.
    pub const IMMEDIATE: TimeTag = TimeTag {
        seconds: 0,
        fraction: 1,
    };

    pub fn from_raw(raw: u64) -> Self {
        TimeTag {
            seconds: (raw >> 32) as u32,
            fraction: raw as u32,
        }
    }

    pub fn to_raw(self) -> u64 {
        (u64::from(self.seconds) << 32) | u64::from(self.fraction)
    }

    pub fn is_immediate(self) -> bool {
        self == Self::IMMEDIATE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscBundle {
    pub timetag: TimeTag,
    pub content: Vec<OscPacket>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OscPacket {
    Message(OscMessage),
    Bundle(OscBundle),
}

impl From<OscMessage> for OscPacket {
    fn from(m: OscMessage) -> Self {
        OscPacket::Message(m)
    }
}

impl From<OscBundle> for OscPacket {
    fn from(b: OscBundle) -> Self {
        OscPacket::Bundle(b)
    }
}

/// Why an outgoing packet could not be encoded.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("address {0:?} does not begin with '/'")]
    BadAddress(String),
    #[error("interior NUL byte in {0}")]
    InteriorNul(&'static str),
    #[error("blob of {0} bytes exceeds the int32 size field")]
    BlobTooLarge(usize),
    #[error("bundle nesting exceeds {MAX_BUNDLE_DEPTH}")]
    NestingTooDeep,
}

/// Why an incoming byte sequence is not a valid OSC packet.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Malformed {
    #[error("length {0} is not a multiple of 4")]
    Length(usize),
    #[error("empty packet")]
    Empty,
    #[error("address does not start with '/'")]
    Address,
    #[error("missing ',' type-tag string")]
    MissingTypeTags,
    #[error("unknown type tag {0:?}")]
    UnknownTag(char),
    #[error("string is not NUL terminated")]
    UnterminatedString,
    #[error("non-zero padding byte")]
    Padding,
    #[error("string is not valid UTF-8")]
    Utf8,
    #[error("argument truncated")]
    TruncatedArgument,
    #[error("negative blob size")]
    NegativeBlobSize,
    #[error("{0} trailing bytes after message arguments")]
    TrailingBytes(usize),
    #[error("bad bundle header")]
    BundleHeader,
    #[error("bundle element size mismatch")]
    ElementSize,
    #[error("bundle nesting exceeds {MAX_BUNDLE_DEPTH}")]
    NestingTooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OscError {
    #[error("invariant violation: {0}")]
    InvariantViolation(#[from] InvariantViolation),
    #[error("malformed packet: {0}")]
    MalformedPacket(#[from] Malformed),
    #[error("bad address pattern {pattern:?}: {reason}")]
    BadPattern {
        pattern: String,
        reason: &'static str,
    },
}
