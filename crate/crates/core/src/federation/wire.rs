//! Frame codec.
//!
//! ```text
//! [4 total length][1 version][1 type][1 sender len][sender]
//! [8 sequence][3 payload len][payload][32 HMAC-SHA256 tag]
//! ```
//!
//! All integers are big-endian, the total length counts the whole frame
//! and the tag covers every byte before it. Payloads are JSON.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read};

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{IxpId, ObservationClaim};
use crate::filter::Whitelist;
use crate::model::IpPrefix;

type HmacSha256 = Hmac<Sha256>;

pub const VERSION: u8 = 1;
pub const TAG_LEN: usize = 32;
pub const MAX_PAYLOAD: usize = (1 << 24) - 1;
/// Smallest possible frame: one-octet sender, empty payload.
pub const MIN_FRAME: usize = 4 + 1 + 1 + 1 + 1 + 8 + 3 + TAG_LEN;
pub const MAX_FRAME: usize = 4 + 1 + 1 + 1 + IxpId::MAX_LEN + 8 + 3 + MAX_PAYLOAD + TAG_LEN;

//------------ Key -----------------------------------------------------------

/// Pre-shared 32-octet key for one peer pair.
#[derive(Clone, PartialEq, Eq)]
pub struct Key([u8; 32]);

impl Key {
    pub fn new(bytes: [u8; 32]) -> Self {
        Key(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self, String> {
        let bytes = hex::decode(text.trim()).map_err(|e| format!("bad hex key: {e}"))?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| format!("key must be 32 octets, got {}", v.len()))?;
        Ok(Key(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.0).expect("HMAC takes keys of any length")
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("Key(..)")
    }
}

//------------ Messages ------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Query = 1,
    Response = 2,
    ObservationPush = 3,
    WhitelistDigest = 4,
    WhitelistSync = 5,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => MessageType::Query,
            2 => MessageType::Response,
            3 => MessageType::ObservationPush,
            4 => MessageType::WhitelistDigest,
            5 => MessageType::WhitelistSync,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBody {
    pub prefix: IpPrefix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseBody {
    pub prefix: IpPrefix,
    pub claims: Vec<ObservationClaim>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushBody {
    pub claims: Vec<ObservationClaim>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestBody {
    #[serde(with = "hex_digest")]
    pub digest: [u8; 32],
    pub version: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncBody {
    pub whitelist: Whitelist,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Query(QueryBody),
    Response(ResponseBody),
    ObservationPush(PushBody),
    WhitelistDigest(DigestBody),
    WhitelistSync(SyncBody),
}

impl Payload {
    pub fn msg_type(&self) -> MessageType {
        match self {
            Payload::Query(_) => MessageType::Query,
            Payload::Response(_) => MessageType::Response,
            Payload::ObservationPush(_) => MessageType::ObservationPush,
            Payload::WhitelistDigest(_) => MessageType::WhitelistDigest,
            Payload::WhitelistSync(_) => MessageType::WhitelistSync,
        }
    }

    fn to_json(&self) -> Vec<u8> {
        let out = match self {
            Payload::Query(b) => serde_json::to_vec(b),
            Payload::Response(b) => serde_json::to_vec(b),
            Payload::ObservationPush(b) => serde_json::to_vec(b),
            Payload::WhitelistDigest(b) => serde_json::to_vec(b),
            Payload::WhitelistSync(b) => serde_json::to_vec(b),
        };
        out.expect("payload bodies always serialize")
    }

    fn from_json(ty: MessageType, bytes: &[u8]) -> Result<Self, serde_json::Error> {
        Ok(match ty {
            MessageType::Query => Payload::Query(serde_json::from_slice(bytes)?),
            MessageType::Response => Payload::Response(serde_json::from_slice(bytes)?),
            MessageType::ObservationPush => Payload::ObservationPush(serde_json::from_slice(bytes)?),
            MessageType::WhitelistDigest => Payload::WhitelistDigest(serde_json::from_slice(bytes)?),
            MessageType::WhitelistSync => Payload::WhitelistSync(serde_json::from_slice(bytes)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FederationMessage {
    pub sender: IxpId,
    pub sequence: u64,
    pub payload: Payload,
}

#[derive(Debug, thiserror::Error)]
pub enum FederationError {
    #[error("authentication tag mismatch")]
    AuthFailure,
    #[error("unsupported frame version {0}")]
    BadVersion(u8),
    #[error("truncated frame")]
    Truncated,
    #[error("replayed frame from {sender}: sequence {sequence} not above {last}")]
    ReplayDetected { sender: IxpId, sequence: u64, last: u64 },
    #[error("payload of {0} octets exceeds the 24-bit length field")]
    PayloadTooLarge(usize),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("frame length field {declared} does not match {actual} octets")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("invalid sender id")]
    BadSender,
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unknown peer {0}")]
    UnknownPeer(String),
    #[error("unexpected reply: {0}")]
    UnexpectedReply(String),
    #[error("no peer answered")]
    Unavailable,
    #[error(transparent)]
    Io(#[from] io::Error),
}

//------------ Encoding ------------------------------------------------------

pub fn encode_message(msg: &FederationMessage, key: &Key) -> Result<Vec<u8>, FederationError> {
    encode_frame(msg.payload.msg_type() as u8, &msg.sender, msg.sequence, &msg.payload.to_json(), key)
}

/// Frames an arbitrary payload. `encode_message` is the typed front end.
pub fn encode_frame(
    msg_type: u8,
    sender: &IxpId,
    sequence: u64,
    payload: &[u8],
    key: &Key,
) -> Result<Vec<u8>, FederationError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FederationError::PayloadTooLarge(payload.len()));
    }
    let sender = sender.as_str().as_bytes();
    let total = 4 + 3 + sender.len() + 8 + 3 + payload.len() + TAG_LEN;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&(total as u32).to_be_bytes());
    out.push(VERSION);
    out.push(msg_type);
    out.push(sender.len() as u8);
    out.extend_from_slice(sender);
    out.extend_from_slice(&sequence.to_be_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes()[1..]);
    out.extend_from_slice(payload);
    let mut mac = key.mac();
    mac.update(&out);
    out.extend_from_slice(&mac.finalize().into_bytes());
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

//------------ Decoding ------------------------------------------------------

/// Verifies and decodes one frame. The tag is checked before any field is
/// trusted, so corruption anywhere reads as `AuthFailure`.
pub fn decode_message(bytes: &[u8], key: &Key) -> Result<FederationMessage, FederationError> {
    if bytes.len() < MIN_FRAME {
        return Err(FederationError::Truncated);
    }
    let (body, tag) = bytes.split_at(bytes.len() - TAG_LEN);
    let mut mac = key.mac();
    mac.update(body);
    mac.verify_slice(tag).map_err(|_| FederationError::AuthFailure)?;

    let declared = u32::from_be_bytes(body[0..4].try_into().unwrap()) as usize;
    if declared != bytes.len() {
        return Err(FederationError::LengthMismatch { declared, actual: bytes.len() });
    }
    if body[4] != VERSION {
        return Err(FederationError::BadVersion(body[4]));
    }
    let ty = MessageType::from_u8(body[5]).ok_or(FederationError::UnknownType(body[5]))?;
    let sender_len = body[6] as usize;
    let rest = &body[7..];
    if rest.len() < sender_len + 8 + 3 {
        return Err(FederationError::Truncated);
    }
    let sender = std::str::from_utf8(&rest[..sender_len])
        .ok()
        .and_then(|s| IxpId::new(s).ok())
        .ok_or(FederationError::BadSender)?;
    let rest = &rest[sender_len..];
    let sequence = u64::from_be_bytes(rest[..8].try_into().unwrap());
    let payload_len = u32::from_be_bytes([0, rest[8], rest[9], rest[10]]) as usize;
    let payload = &rest[11..];
    if payload.len() != payload_len {
        return Err(FederationError::LengthMismatch { declared: payload_len, actual: payload.len() });
    }
    let payload = Payload::from_json(ty, payload).map_err(|e| FederationError::MalformedPayload(e.to_string()))?;
    Ok(FederationMessage { sender, sequence, payload })
}

/// Reads the sender field without authenticating it, so the receiver can
/// pick the key. Never trust the result beyond key selection.
pub fn peek_sender(bytes: &[u8]) -> Result<IxpId, FederationError> {
    if bytes.len() < MIN_FRAME {
        return Err(FederationError::Truncated);
    }
    let len = bytes[6] as usize;
    let raw = bytes.get(7..7 + len).ok_or(FederationError::Truncated)?;
    std::str::from_utf8(raw).ok().and_then(|s| IxpId::new(s).ok()).ok_or(FederationError::BadSender)
}

/// Total frame length announced by a 4-octet prefix, bounds-checked.
pub fn frame_length(header: [u8; 4]) -> Result<usize, FederationError> {
    let len = u32::from_be_bytes(header) as usize;
    if !(MIN_FRAME..=MAX_FRAME).contains(&len) {
        return Err(FederationError::Truncated);
    }
    Ok(len)
}

/// Reads one frame from a blocking stream. `Ok(None)` on clean EOF.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<Vec<u8>>, FederationError> {
    let mut header = [0u8; 4];
    match reader.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = frame_length(header)?;
    let mut frame = vec![0u8; len];
    frame[..4].copy_from_slice(&header);
    reader.read_exact(&mut frame[4..]).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FederationError::Truncated,
        _ => e.into(),
    })?;
    Ok(Some(frame))
}

//------------ Session -------------------------------------------------------

/// Replay guard: sequence numbers must strictly increase per sender.
#[derive(Clone, Debug, Default)]
pub struct Session {
    last_seen: HashMap<IxpId, u64>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes and enforces sequence order. A rejected frame does not
    /// advance the session.
    pub fn accept(&mut self, bytes: &[u8], key: &Key) -> Result<FederationMessage, FederationError> {
        let msg = decode_message(bytes, key)?;
        if let Some(&last) = self.last_seen.get(&msg.sender) {
            if msg.sequence <= last {
                return Err(FederationError::ReplayDetected {
                    sender: msg.sender,
                    sequence: msg.sequence,
                    last,
                });
            }
        }
        self.last_seen.insert(msg.sender.clone(), msg.sequence);
        Ok(msg)
    }
}

mod hex_digest {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(D::Error::custom)?;
        bytes.try_into().map_err(|_| D::Error::custom("digest must be 32 octets"))
    }
}

//============ Tests =========================================================
