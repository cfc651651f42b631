//! Wire grammar and byte framing. This module is the normative wire spec.
//!
//! Every message is one frame:
//!
//! ```text
//!   +--------+----------------------+------------------------+
//!   | type   | payload bit length   | payload                |
//!   | 1 byte | 4 bytes, little end. | ceil(bits/8) bytes     |
//!   +--------+----------------------+------------------------+
//! ```
//!
//! Payload bits are packed MSB-first within each byte; pad bits of the last
//! byte are zero. Integer fields inside a payload are fixed-width bit fields
//! appended MSB-first. Metering counts payload bits only; the 5 framing bytes
//! and the padding are accounted separately.
//!
//! Message sequence of a session (A holds X, B holds Y):
//!
//! ```text
//!   A -> B  PIVOTS        (k-1)·L_P bits, pivots in index order
//!   B -> A  MATCH_BITMAP  k-1 bits, bit i-1 set iff pivot i was matched
//!   per gap j = 1..k' in ascending order:
//!     B -> A  GAP_HEADER  {gap index: 32, |gap_j in Y|: 32}
//!     ... recovery exchange, see below ...
//!     B -> A  GAP_DONE    (empty)
//!   A -> B  ECC_HEADER    {n: 32, m: 32, code seed: 64, perm seed: 64,
//!                          crossover: 64 (f64 bits)}
//!   A -> B  PARITY        m bits
//!   B -> A  DONE          {status: 2} (0 = decode converged, 1 = not)
//! ```
//!
//! Recovery exchange for one (sub)range with x on A's side, y on B's side,
//! d = |x| − |y| (B learns |x| from the message type and fields, never ahead
//! of time):
//!
//! ```text
//!   WHOLESALE    A -> B   |x| bits; closes the range.
//!   VERIFY_HASH  A -> B   h bits of hash(x)          (d = 0)
//!   VERIFY_HASH  B -> A   h bits of hash(y); closes the range.
//!   VT_SYN       A -> B   {syndrome: ceil(log2(|x|+1)), hash(x): h};
//!                         closes the range (B decodes or falls back).
//!   ANCHOR       A -> B   {d: width(floor(|y|/3)), anchor: anchor_len bits}
//!   SPLIT_REPLY  B -> A   {deletions left of anchor: ceil(log2(d+1))};
//!                         both sides recurse left then right.
//!   SPLIT_FAIL   B -> A   {code: 2} (1 = no anchor match, 2 = ambiguous);
//!                         A answers with WHOLESALE for this range.
//! ```

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Frame type tags. Values are part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[repr(u8)]
pub enum MessageType {
    Pivots = 1,
    MatchBitmap = 2,
    GapHeader = 3,
    VerifyHash = 4,
    VtSyn = 5,
    Anchor = 6,
    SplitReply = 7,
    SplitFail = 8,
    Wholesale = 9,
    GapDone = 10,
    EccHeader = 11,
    Parity = 12,
    Done = 13,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Result<Self> {
        use MessageType::*;
        Ok(match v {
            1 => Pivots,
            2 => MatchBitmap,
            3 => GapHeader,
            4 => VerifyHash,
            5 => VtSyn,
            6 => Anchor,
            7 => SplitReply,
            8 => SplitFail,
            9 => Wholesale,
            10 => GapDone,
            11 => EccHeader,
            12 => Parity,
            13 => Done,
            _ => return Err(Error::ProtocolAbort(format!("unknown message type {v}"))),
        })
    }

    /// Protocol stage the message belongs to (1 = matching, 2 = deletion
    /// recovery, 3 = error correction).
    pub fn stage(self) -> usize {
        use MessageType::*;
        match self {
            Pivots => 1,
            MatchBitmap | GapHeader | VerifyHash | VtSyn | Anchor | SplitReply | SplitFail
            | Wholesale | GapDone => 2,
            EccHeader | Parity | Done => 3,
        }
    }
}

/// A parsed frame: type tag plus raw payload bits. Field interpretation is up
/// to the receiving state machine (widths depend on protocol state).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub msg_type: MessageType,
    pub payload: BitString,
}

pub fn encode_frame(msg_type: MessageType, payload: &BitString) -> Vec<u8> {
    assert!(payload.len() < u32::MAX as usize, "payload too large to frame");
    let mut out = Vec::with_capacity(5 + payload.packed_bytes().len());
    out.push(msg_type as u8);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload.packed_bytes());
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < 5 {
        return Err(Error::ProtocolAbort(format!("short frame ({} bytes)", bytes.len())));
    }
    let msg_type = MessageType::from_u8(bytes[0])?;
    let bit_len = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    let body = &bytes[5..];
    if body.len() != bit_len.div_ceil(8) {
        return Err(Error::ProtocolAbort(format!(
            "frame body {} bytes does not match declared {} bits",
            body.len(),
            bit_len
        )));
    }
    let mut with_header = Vec::with_capacity(8 + body.len());
    with_header.extend_from_slice(&(bit_len as u64).to_le_bytes());
    with_header.extend_from_slice(body);
    let payload = BitString::read_packed(&mut with_header.as_slice())
        .map_err(|e| Error::ProtocolAbort(format!("bad frame payload: {e}")))?;
    Ok(Frame { msg_type, payload })
}

/// Framing overhead of one message in bits: 5 header bytes plus byte padding.
pub fn framing_overhead_bits(payload_bits: usize) -> u64 {
    let pad = payload_bits.div_ceil(8) * 8 - payload_bits;
    (5 * 8 + pad) as u64
}
