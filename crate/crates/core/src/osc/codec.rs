use super::{
    InvariantViolation, Malformed, OscBundle, OscError, OscMessage, OscPacket, OscValue, TimeTag,
};

/// Maximum number of bundles on any path from the root packet to a message.
pub const MAX_BUNDLE_DEPTH: usize = 8;

const BUNDLE_TAG: &[u8; 8] = b"#bundle\0";

/// Encode a packet into its OSC 1.0 byte representation.
pub fn encode(packet: &OscPacket) -> Result<Vec<u8>, OscError> {
    let mut buf = Vec::with_capacity(64);
    write_packet(&mut buf, packet, 0)?;
    debug_assert_eq!(buf.len() % 4, 0);
    Ok(buf)
}

fn write_packet(
    buf: &mut Vec<u8>,
    packet: &OscPacket,
    depth: usize,
) -> Result<(), InvariantViolation> {
    match packet {
        OscPacket::Message(msg) => write_message(buf, msg),
        OscPacket::Bundle(bundle) => write_bundle(buf, bundle, depth + 1),
    }
}

fn write_message(buf: &mut Vec<u8>, msg: &OscMessage) -> Result<(), InvariantViolation> {
    if !msg.addr.starts_with('/') {
        return Err(InvariantViolation::BadAddress(msg.addr.clone()));
    }
    write_str(buf, &msg.addr, "address")?;
    write_str(buf, &msg.type_tags(), "type tags")?;
    for arg in &msg.args {
        match arg {
            OscValue::Int(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscValue::Float(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscValue::Str(s) => write_str(buf, s, "string argument")?,
            OscValue::Blob(data) => {
                let len = i32::try_from(data.len())
                    .map_err(|_| InvariantViolation::BlobTooLarge(data.len()))?;
                buf.extend_from_slice(&len.to_be_bytes());
                buf.extend_from_slice(data);
                pad(buf);
            }
        }
    }
    Ok(())
}

fn write_bundle(
    buf: &mut Vec<u8>,
    bundle: &OscBundle,
    depth: usize,
) -> Result<(), InvariantViolation> {
    if depth > MAX_BUNDLE_DEPTH {
        return Err(InvariantViolation::NestingTooDeep);
    }
    buf.extend_from_slice(BUNDLE_TAG);
    buf.extend_from_slice(&bundle.timetag.to_raw().to_be_bytes());
    for element in &bundle.content {
        let size_at = buf.len();
        buf.extend_from_slice(&[0; 4]);
        write_packet(buf, element, depth)?;
        let size = i32::try_from(buf.len() - size_at - 4)
            .map_err(|_| InvariantViolation::BlobTooLarge(buf.len()))?;
        buf[size_at..size_at + 4].copy_from_slice(&size.to_be_bytes());
    }
    Ok(())
}

fn write_str(buf: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), InvariantViolation> {
    if s.as_bytes().contains(&0) {
        return Err(InvariantViolation::InteriorNul(what));
    }
    buf.extend_from_slice(s.as_bytes());
    buf.push(0);
    pad(buf);
    Ok(())
}

fn pad(buf: &mut Vec<u8>) {
    while !buf.len().is_multiple_of(4) {
        buf.push(0);
    }
}

/// Decode exactly one packet occupying the whole of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<OscPacket, OscError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Malformed::Length(bytes.len()).into());
    }
    Ok(read_packet(bytes, 0)?)
}

fn read_packet(bytes: &[u8], depth: usize) -> Result<OscPacket, Malformed> {
    match bytes.first() {
        None => Err(Malformed::Empty),
        Some(b'#') => read_bundle(bytes, depth + 1).map(OscPacket::Bundle),
        Some(b'/') => read_message(bytes).map(OscPacket::Message),
        Some(_) => Err(Malformed::Address),
    }
}

fn read_bundle(bytes: &[u8], depth: usize) -> Result<OscBundle, Malformed> {
    if bytes.len() < 16 || &bytes[..8] != BUNDLE_TAG {
        return Err(Malformed::BundleHeader);
    }
    if depth > MAX_BUNDLE_DEPTH {
        return Err(Malformed::NestingTooDeep);
    }
    let timetag = TimeTag::from_raw(u64::from_be_bytes(bytes[8..16].try_into().unwrap()));
    let mut content = Vec::new();
    let mut rest = &bytes[16..];
    while !rest.is_empty() {
        let size = i32::from_be_bytes(rest[..4].try_into().unwrap());
        rest = &rest[4..];
        let size = usize::try_from(size).map_err(|_| Malformed::ElementSize)?;
        if size == 0 || size % 4 != 0 || size > rest.len() {
            return Err(Malformed::ElementSize);
        }
        content.push(read_packet(&rest[..size], depth)?);
        rest = &rest[size..];
    }
    Ok(OscBundle { timetag, content })
}

fn read_message(bytes: &[u8]) -> Result<OscMessage, Malformed> {
    let mut cur = Reader { bytes, pos: 0 };
    let addr = cur.string()?;
    if cur.is_empty() {
        return Err(Malformed::MissingTypeTags);
    }
    let tags = cur.string()?;
    let tags = tags.strip_prefix(',').ok_or(Malformed::MissingTypeTags)?;
    let mut args = Vec::with_capacity(tags.len());
    for tag in tags.chars() {
        let arg = match tag {
            'i' => OscValue::Int(i32::from_be_bytes(cur.word()?)),
            'f' => OscValue::Float(f32::from_be_bytes(cur.word()?)),
            's' => OscValue::Str(cur.string()?),
            'b' => OscValue::Blob(cur.blob()?),
            other => return Err(Malformed::UnknownTag(other)),
        };
        args.push(arg);
    }
    if !cur.is_empty() {
        return Err(Malformed::TrailingBytes(bytes.len() - cur.pos));
    }
    Ok(OscMessage { addr, args })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&[u8], Malformed> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(Malformed::TruncatedArgument)?;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or(Malformed::TruncatedArgument)?;
        self.pos = end;
        Ok(out)
    }

    fn word(&mut self) -> Result<[u8; 4], Malformed> {
        Ok(self.take(4)?.try_into().unwrap())
    }

    fn skip_padding(&mut self, consumed: usize) -> Result<(), Malformed> {
        let padding = (4 - consumed % 4) % 4;
        if self.take(padding)?.iter().any(|&b| b != 0) {
            return Err(Malformed::Padding);
        }
        Ok(())
    }

    fn string(&mut self) -> Result<String, Malformed> {
        let rest = &self.bytes[self.pos..];
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or(Malformed::UnterminatedString)?;
        let s = std::str::from_utf8(&rest[..nul])
            .map_err(|_| Malformed::Utf8)?
            .to_owned();
        self.pos += nul + 1;
        self.skip_padding(nul + 1)?;
        Ok(s)
    }

    fn blob(&mut self) -> Result<Vec<u8>, Malformed> {
        let len = i32::from_be_bytes(self.word()?);
        let len = usize::try_from(len).map_err(|_| Malformed::NegativeBlobSize)?;
        let data = self.take(len)?.to_vec();
        self.skip_padding(len)?;
        Ok(data)
    }
}
