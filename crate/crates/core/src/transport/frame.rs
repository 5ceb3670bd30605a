use crate::error::{Error, Result};

/// Bytes of framing in front of every payload.
pub const FRAME_HEADER_BYTES: usize = 6;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Phase {
    Offline = 0,
    Online = 1,
}

impl Phase {
    pub const ALL: [Phase; 2] = [Phase::Offline, Phase::Online];

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Phase::Offline),
            1 => Ok(Phase::Online),
            _ => Err(Error::Protocol(format!("unknown phase tag {v}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Offline => "offline",
            Phase::Online => "online",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    Handshake = 0,
    Elements = 1,
    Barrier = 2,
    Digest = 3,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(MessageKind::Handshake),
            1 => Ok(MessageKind::Elements),
            2 => Ok(MessageKind::Barrier),
            3 => Ok(MessageKind::Digest),
            _ => Err(Error::Protocol(format!("unknown message kind {v}"))),
        }
    }
}

/// `u32 length | u8 phase | u8 kind | payload`, little-endian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub phase: Phase,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(phase: Phase, kind: MessageKind, payload: Vec<u8>) -> Self {
        Frame {
            phase,
            kind,
            payload,
        }
    }

    pub fn wire_len(&self) -> usize {
        FRAME_HEADER_BYTES + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.phase as u8);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_BYTES {
            return Err(Error::Protocol("truncated frame header".into()));
        }
        let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        if bytes.len() != FRAME_HEADER_BYTES + len {
            return Err(Error::Protocol(format!(
                "frame length field {len} does not match {} payload bytes",
                bytes.len() - FRAME_HEADER_BYTES
            )));
        }
        Ok(Frame {
            phase: Phase::from_u8(bytes[4])?,
            kind: MessageKind::from_u8(bytes[5])?,
            payload: bytes[FRAME_HEADER_BYTES..].to_vec(),
        })
    }

    /// Parses the fixed header, returning the payload length.
    pub fn header_payload_len(header: &[u8; FRAME_HEADER_BYTES]) -> usize {
        u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize
    }
}
