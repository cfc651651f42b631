//! Interactive per-gap deletion recovery.
//!
//! For each gap the sender holds the source stretch x, the receiver holds the
//! corresponding stretch y of its own string and must rebuild an estimate of
//! x at exactly |x| bits. The exchange is a recursion on (x, y) with
//! d = |x| − |y|:
//!
//! * d < 0 or 4d > |x|: mismatched pivots or too many deletions: wholesale
//!   retransmission (a length anomaly at the top level).
//! * d = 0: exchange h-bit verification hashes; on mismatch keep y and leave
//!   the damage to the ECC stage.
//! * d = 1: send the VT syndrome plus a hash; the receiver inserts the one
//!   missing bit.
//! * d ≥ 2: send an anchor cut from the middle of x; the receiver locates it
//!   among the d+1 possible placements, replies with the deletion count left
//!   of the anchor, and both sides recurse on the two halves (the anchor is
//!   assumed deletion-free and excluded from both).
//!
//! On top of the plain branch rule sits a cost guard: a branch is only taken
//! when its floor cost undercuts wholesale transmission of the range, which
//! keeps the per-gap bill at or below the gap length except for rare unlucky splits.
//!
//! The receiver never needs |x| in advance: the message type plus its fields
//! determine it, so the two state machines stay in lockstep by construction.

use serde::Serialize;

use crate::bits::{BitCursor, BitString};
use crate::error::{Error, Result};
use crate::transport::Endpoint;
use crate::vt;
use crate::wire::MessageType;

/// Knobs of the recovery exchange. Hash seed must be pre-shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncParams {
    /// Verification hash width in bits (h).
    pub hash_bits: u32,
    pub hash_seed: u64,
    /// Fixed anchor length; the default is ceil(3·log2(|x|+1)) per range.
    pub anchor_len_override: Option<usize>,
}

impl Default for SyncParams {
    fn default() -> Self {
        SyncParams {
            hash_bits: 32,
            hash_seed: 0xD15C_0DE5_EED0_55EB,
            anchor_len_override: None,
        }
    }
}

/// How a gap estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SyncStatus {
    /// Every leaf verified (or was transmitted wholesale).
    Verified,
    /// Some leaf failed verification; the estimate may carry errors.
    UnverifiedFallback,
    /// The gap lengths were inconsistent with a pure-deletion descent;
    /// recovered by wholesale transmission.
    LengthAnomaly,
}

/// Receiver-side result for one gap. The estimate always has the length of the sender's side.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncOutcome {
    pub estimate: BitString,
    pub status: SyncStatus,
}

// --- shared arithmetic (both sides must agree bit for bit) ---

fn bit_len(v: usize) -> usize {
    (usize::BITS - v.leading_zeros()) as usize
}

/// ceil(log2(len+1)): width of a VT syndrome for original length `len`.
fn syndrome_width(len: usize) -> usize {
    bit_len(len)
}

/// Width of the d field in an ANCHOR message. On the anchor branch
/// 4d ≤ |x| implies 3d ≤ |y|, so d fits the width of floor(|y|/3).
fn delta_width(y_len: usize) -> usize {
    bit_len(y_len / 3).max(1)
}

/// Width of the d_L field in a SPLIT_REPLY: ceil(log2(d+1)).
fn split_reply_width(d: usize) -> usize {
    bit_len(d)
}

fn anchor_len(params: &SyncParams, x_len: usize) -> usize {
    params
        .anchor_len_override
        .unwrap_or_else(|| (3.0 * ((x_len + 1) as f64).log2()).ceil() as usize)
}

/// Seeded 64-bit string hash (FNV-1a over the packed bytes, length folded in,
/// splitmix finish), truncated to `hash_bits`.
pub fn verification_hash(bits: &BitString, params: &SyncParams) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ params.hash_seed;
    for &byte in bits.packed_bytes() {
        h = (h ^ byte as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= bits.len() as u64;
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    if params.hash_bits >= 64 {
        h
    } else {
        h & ((1u64 << params.hash_bits) - 1)
    }
}

/// Floor cost in bits of entering a branch, used by the sender's
/// wholesale-when-cheaper guard.
fn branch_floor(x_len: usize, y_len: usize, d: usize, params: &SyncParams) -> usize {
    let h = params.hash_bits as usize;
    match d {
        0 => 2 * h,
        1 => syndrome_width(x_len) + h,
        _ => {
            let split = delta_width(y_len) + anchor_len(params, x_len) + split_reply_width(d);
            let min_leaf = (2 * h).min(syndrome_width(x_len) + h);
            split + (d + 1) * min_leaf
        }
    }
}

fn length_anomaly(x_len: usize, y_len: usize) -> bool {
    y_len > x_len || 4 * (x_len - y_len) > x_len
}

// --- sender (node A) side ---

/// Serve one gap: `x` is this node's range, `y_len` came from the gap header.
pub fn serve_gap(x: &BitString, y_len: usize, ep: &mut Endpoint, params: &SyncParams) -> Result<()> {
    serve_range(x, y_len, ep, params)
}

fn serve_range(x: &BitString, y_len: usize, ep: &mut Endpoint, params: &SyncParams) -> Result<()> {
    if length_anomaly(x.len(), y_len) {
        return ep.send(MessageType::Wholesale, x);
    }
    let d = x.len() - y_len;
    if x.len() <= branch_floor(x.len(), y_len, d, params) {
        return ep.send(MessageType::Wholesale, x);
    }
    match d {
        0 => {
            let mut payload = BitString::new();
            payload.push_uint(verification_hash(x, params), params.hash_bits as usize);
            ep.send(MessageType::VerifyHash, &payload)?;
            let reply = ep.expect(MessageType::VerifyHash)?;
            if reply.len() != params.hash_bits as usize {
                return Err(Error::ProtocolAbort("bad hash reply width".into()));
            }
            Ok(())
        }
        1 => {
            let mut payload = BitString::new();
            payload.push_uint(vt::syndrome(x)?, syndrome_width(x.len()));
            payload.push_uint(verification_hash(x, params), params.hash_bits as usize);
            ep.send(MessageType::VtSyn, &payload)
        }
        _ => {
            let m = x.len() / 2;
            let a = anchor_len(params, x.len());
            if a > m {
                return ep.send(MessageType::Wholesale, x);
            }
            let mut payload = BitString::new();
            payload.push_uint(d as u64, delta_width(y_len));
            payload.extend_from(&x.slice(m - a..m));
            ep.send(MessageType::Anchor, &payload)?;

            let reply = ep.recv()?;
            match reply.msg_type {
                MessageType::SplitReply => {
                    let mut c = BitCursor::new(&reply.payload);
                    let d_left = c.read_uint(split_reply_width(d))? as usize;
                    c.expect_end()?;
                    if d_left > d {
                        return Err(Error::ProtocolAbort(format!(
                            "split reply {d_left} exceeds deletion count {d}"
                        )));
                    }
                    let left_x = x.slice(0..m - a);
                    let right_x = x.slice(m..x.len());
                    let left_y_len = (m - a)
                        .checked_sub(d_left)
                        .ok_or_else(|| Error::ProtocolAbort("split reply overruns left half".into()))?;
                    let right_y_len = y_len - left_y_len - a;
                    serve_range(&left_x, left_y_len, ep, params)?;
                    serve_range(&right_x, right_y_len, ep, params)
                }
                MessageType::SplitFail => {
                    let mut c = BitCursor::new(&reply.payload);
                    let code = c.read_uint(2)?;
                    c.expect_end()?;
                    if code != 1 && code != 2 {
                        return Err(Error::ProtocolAbort(format!("bad split fail code {code}")));
                    }
                    ep.send(MessageType::Wholesale, x)
                }
                other => Err(Error::ProtocolAbort(format!(
                    "expected SplitReply or SplitFail, got {other:?}"
                ))),
            }
        }
    }
}

// --- receiver (node B) side ---

struct RangeFlags {
    unverified: bool,
    top_wholesale_d: Option<isize>,
}

/// Recover one gap estimate; `y` is this node's stretch between matched pivots.
pub fn recover_gap(y: &BitString, ep: &mut Endpoint, params: &SyncParams) -> Result<SyncOutcome> {
    let mut flags = RangeFlags {
        unverified: false,
        top_wholesale_d: None,
    };
    let estimate = recover_range(y, ep, params, &mut flags, true)?;
    let status = if let Some(d) = flags.top_wholesale_d {
        let x_len = y.len() as isize + d;
        if d < 0 || 4 * d > x_len {
            SyncStatus::LengthAnomaly
        } else if flags.unverified {
            SyncStatus::UnverifiedFallback
        } else {
            SyncStatus::Verified
        }
    } else if flags.unverified {
        SyncStatus::UnverifiedFallback
    } else {
        SyncStatus::Verified
    };
    Ok(SyncOutcome { estimate, status })
}

fn recover_range(
    y: &BitString,
    ep: &mut Endpoint,
    params: &SyncParams,
    flags: &mut RangeFlags,
    top: bool,
) -> Result<BitString> {
    let frame = ep.recv()?;
    match frame.msg_type {
        MessageType::Wholesale => {
            if top {
                flags.top_wholesale_d = Some(frame.payload.len() as isize - y.len() as isize);
            }
            Ok(frame.payload)
        }
        MessageType::VerifyHash => {
            let mut c = BitCursor::new(&frame.payload);
            let their_hash = c.read_uint(params.hash_bits as usize)?;
            c.expect_end()?;
            let mine = verification_hash(y, params);
            let mut reply = BitString::new();
            reply.push_uint(mine, params.hash_bits as usize);
            ep.send(MessageType::VerifyHash, &reply)?;
            if their_hash != mine {
                flags.unverified = true;
            }
            Ok(y.clone())
        }
        MessageType::VtSyn => {
            let target_len = y.len() + 1;
            let mut c = BitCursor::new(&frame.payload);
            let syn = c.read_uint(syndrome_width(target_len))?;
            let their_hash = c.read_uint(params.hash_bits as usize)?;
            c.expect_end()?;
            match vt::decode_one_deletion(y, target_len, syn) {
                Ok(decoded) if verification_hash(&decoded, params) == their_hash => Ok(decoded),
                _ => {
                    // keep y, pad one zero at the end; ECC cleans up
                    flags.unverified = true;
                    let mut padded = y.clone();
                    padded.push(false);
                    Ok(padded)
                }
            }
        }
        MessageType::Anchor => {
            let mut c = BitCursor::new(&frame.payload);
            let d = c.read_uint(delta_width(y.len()))? as usize;
            let x_len = y.len() + d;
            let a = anchor_len(params, x_len);
            let anchor = c.read_bits(a)?;
            c.expect_end()?;
            if d < 2 {
                return Err(Error::ProtocolAbort(format!("anchor with d={d}")));
            }
            let m = x_len / 2;
            if a > m {
                return Err(Error::ProtocolAbort(format!(
                    "anchor length {a} exceeds half range {m}"
                )));
            }

            // candidate anchor placements: d+1 starts ending at m-a
            let mut hits = Vec::new();
            let lo = (m - a).saturating_sub(d);
            for q in lo..=(m - a).min(y.len().saturating_sub(a)) {
                if q + a <= y.len() && y.slice(q..q + a) == anchor {
                    hits.push(q);
                }
            }
            if hits.len() == 1 {
                let q = hits[0];
                let d_left = (m - a) - q;
                let mut reply = BitString::new();
                reply.push_uint(d_left as u64, split_reply_width(d));
                ep.send(MessageType::SplitReply, &reply)?;
                let left = recover_range(&y.slice(0..q), ep, params, flags, false)?;
                let right = recover_range(&y.slice(q + a..y.len()), ep, params, flags, false)?;
                Ok(BitString::concat([&left, &anchor, &right]))
            } else {
                let mut reply = BitString::new();
                reply.push_uint(if hits.is_empty() { 1 } else { 2 }, 2);
                ep.send(MessageType::SplitFail, &reply)?;
                let frame = ep.expect(MessageType::Wholesale)?;
                Ok(frame)
            }
        }
        other => Err(Error::ProtocolAbort(format!(
            "unexpected {other:?} during gap recovery"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deletion::{apply_deletions, DeletionPattern};
    use crate::transport::duplex_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Run one gap exchange in-process; returns the outcome and the payload
    /// bits spent on the exchange (gap header excluded by construction).
    fn sync_roundtrip(x: &BitString, y: &BitString, params: &SyncParams) -> (SyncOutcome, u64) {
        let (mut a, mut b) = duplex_pair();
        let xc = x.clone();
        let y_len = y.len();
        let pa = *params;
        let handle = std::thread::spawn(move || serve_gap(&xc, y_len, &mut a, &pa).map(|_| a));
        let outcome = recover_gap(y, &mut b, params).unwrap();
        let a = handle.join().unwrap().unwrap();
        assert_eq!(a.transcript, b.transcript);
        (outcome, b.transcript.total_bits())
    }

    fn delete_at(x: &BitString, positions: &[usize]) -> BitString {
        let mut mask = BitString::zeros(x.len());
        for &p in positions {
            mask.set(p, true);
        }
        apply_deletions(x, &DeletionPattern::new(mask, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn equal_strings_cost_two_hashes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = BitString::random(400, &mut rng);
        let params = SyncParams::default();
        let (outcome, bits) = sync_roundtrip(&x, &x, &params);
        assert_eq!(outcome.status, SyncStatus::Verified);
        assert_eq!(outcome.estimate, x);
        assert_eq!(bits, 2 * params.hash_bits as u64);
    }

    #[test]
    fn single_deletion_recovers_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = SyncParams::default();
        for _ in 0..50 {
            let x = BitString::random(100, &mut rng);
            let pos = rng.random_range(0..100);
            let y = delete_at(&x, &[pos]);
            let (outcome, bits) = sync_roundtrip(&x, &y, &params);
            assert_eq!(outcome.estimate, x);
            assert_eq!(outcome.status, SyncStatus::Verified);
            // syndrome (7 bits at |x|=100) + hash
            assert_eq!(bits, 7 + params.hash_bits as u64);
        }
    }

    #[test]
    fn multi_deletion_recovers_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = SyncParams::default();
        for trial in 0..50 {
            let x = BitString::random(600, &mut rng);
            let k = rng.random_range(2..6);
            let mut positions: Vec<usize> = (0..k).map(|_| rng.random_range(0..600)).collect();
            positions.sort_unstable();
            positions.dedup();
            let y = delete_at(&x, &positions);
            let (outcome, _) = sync_roundtrip(&x, &y, &params);
            assert_eq!(outcome.estimate.len(), x.len());
            assert_eq!(outcome.estimate, x, "trial {trial}");
        }
    }

    #[test]
    fn negative_delta_goes_wholesale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = BitString::random(80, &mut rng);
        let y = BitString::random(100, &mut rng); // receiver side longer: mis-match
        let (outcome, bits) = sync_roundtrip(&x, &y, &SyncParams::default());
        assert_eq!(outcome.status, SyncStatus::LengthAnomaly);
        assert_eq!(outcome.estimate, x);
        assert_eq!(bits, 80);
    }

    #[test]
    fn heavy_deletion_goes_wholesale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = BitString::random(100, &mut rng);
        let y = x.slice(0..60); // 40 deletions > |x|/4
        let (outcome, bits) = sync_roundtrip(&x, &y, &SyncParams::default());
        assert_eq!(outcome.status, SyncStatus::LengthAnomaly);
        assert_eq!(outcome.estimate, x);
        assert_eq!(bits, 100);
    }

    #[test]
    fn small_range_prefers_wholesale() {
        // d=0 but the range is cheaper to retransmit than to hash twice
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = BitString::random(40, &mut rng);
        let (outcome, bits) = sync_roundtrip(&x, &x, &SyncParams::default());
        assert_eq!(outcome.status, SyncStatus::Verified);
        assert_eq!(outcome.estimate, x);
        assert_eq!(bits, 40);
    }

    #[test]
    fn estimate_length_always_matches() {
        // adversarial y: random unrelated contents and lengths
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = SyncParams::default();
        for _ in 0..200 {
            let xl = rng.random_range(1..300);
            let yl = rng.random_range(0..320);
            let x = BitString::random(xl, &mut rng);
            let y = BitString::random(yl.min(xl + 20), &mut rng);
            let (outcome, _) = sync_roundtrip(&x, &y, &params);
            assert_eq!(outcome.estimate.len(), x.len());
        }
    }

    #[test]
    fn mismatched_equal_length_falls_back_to_ecc() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = BitString::random(200, &mut rng);
        let y = BitString::random(200, &mut rng);
        let (outcome, _) = sync_roundtrip(&x, &y, &SyncParams::default());
        assert_eq!(outcome.status, SyncStatus::UnverifiedFallback);
        assert_eq!(outcome.estimate, y);
    }

    #[test]
    fn mismatched_off_by_one_pads_and_falls_back() {
        // d = 1 but y is unrelated: the syndrome decodes to something whose
        // hash cannot match, so B keeps y padded with a trailing zero
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = BitString::random(201, &mut rng);
        let y = BitString::random(200, &mut rng);
        let (outcome, _) = sync_roundtrip(&x, &y, &SyncParams::default());
        assert_eq!(outcome.status, SyncStatus::UnverifiedFallback);
        assert_eq!(outcome.estimate.len(), 201);
        let mut padded = y.clone();
        padded.push(false);
        assert_eq!(outcome.estimate, padded);
    }
}
