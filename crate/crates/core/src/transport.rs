//! Metered in-memory channel between the two nodes.
//!
//! The channel contract is a pair of reliable, ordered, error-free bit
//! streams. Every send is metered before delivery; both endpoints record the
//! same message log because the protocol is strictly lockstep, which gives a
//! free conservation check at the end of a run.

use std::sync::mpsc::{channel, Receiver, Sender};

use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::wire::{decode_frame, encode_frame, framing_overhead_bits, Frame, MessageType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    fn flip(self) -> Direction {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub direction: Direction,
    pub msg_type: MessageType,
    pub payload_bits: u64,
}

/// Per-direction, per-stage bit meter plus the full message log.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Transcript {
    /// Payload bits per stage (index 0..2 = stages 1..3), A→B.
    pub stage_bits_a_to_b: [u64; 3],
    /// Payload bits per stage, B→A.
    pub stage_bits_b_to_a: [u64; 3],
    /// Framing overhead in bits (header bytes + byte padding), not counted
    /// in the payload meters.
    pub framing_bits: u64,
    pub log: Vec<LogEntry>,
    /// Number of direction alternations + 1 (half-duplex turns).
    pub rounds: u64,
}

impl Transcript {
    fn record(&mut self, direction: Direction, msg_type: MessageType, payload_bits: u64) {
        let stage = msg_type.stage() - 1;
        match direction {
            Direction::AToB => self.stage_bits_a_to_b[stage] += payload_bits,
            Direction::BToA => self.stage_bits_b_to_a[stage] += payload_bits,
        }
        self.framing_bits += framing_overhead_bits(payload_bits as usize);
        if self.log.last().map(|e| e.direction) != Some(direction) {
            self.rounds += 1;
        }
        self.log.push(LogEntry {
            direction,
            msg_type,
            payload_bits,
        });
    }

    pub fn bits_a_to_b(&self) -> u64 {
        self.stage_bits_a_to_b.iter().sum()
    }

    pub fn bits_b_to_a(&self) -> u64 {
        self.stage_bits_b_to_a.iter().sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.bits_a_to_b() + self.bits_b_to_a()
    }

    pub fn stage_total(&self, stage: usize) -> u64 {
        self.stage_bits_a_to_b[stage - 1] + self.stage_bits_b_to_a[stage - 1]
    }
}

/// One node's end of the duplex channel.
pub struct Endpoint {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    outbound: Direction,
    pub transcript: Transcript,
}

impl Endpoint {
    pub fn send(&mut self, msg_type: MessageType, payload: &BitString) -> Result<()> {
        let bytes = encode_frame(msg_type, payload);
        self.transcript.record(self.outbound, msg_type, payload.len() as u64);
        self.tx
            .send(bytes)
            .map_err(|_| Error::ProtocolAbort("peer endpoint closed".into()))
    }

    pub fn recv(&mut self) -> Result<Frame> {
        let bytes = self
            .rx
            .recv()
            .map_err(|_| Error::ProtocolAbort("peer endpoint closed".into()))?;
        let frame = decode_frame(&bytes)?;
        self.transcript
            .record(self.outbound.flip(), frame.msg_type, frame.payload.len() as u64);
        Ok(frame)
    }

    /// Receive and require a specific message type.
    pub fn expect(&mut self, want: MessageType) -> Result<BitString> {
        let frame = self.recv()?;
        if frame.msg_type != want {
            return Err(Error::ProtocolAbort(format!(
                "expected {want:?}, got {:?}",
                frame.msg_type
            )));
        }
        Ok(frame.payload)
    }
}

/// Build the two connected endpoints (A first, B second).
pub fn duplex_pair() -> (Endpoint, Endpoint) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (
        Endpoint {
            tx: a_tx,
            rx: a_rx,
            outbound: Direction::AToB,
            transcript: Transcript::default(),
        },
        Endpoint {
            tx: b_tx,
            rx: b_rx,
            outbound: Direction::BToA,
            transcript: Transcript::default(),
        },
    )
}
