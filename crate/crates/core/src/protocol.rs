//! Three-stage synchronization protocol: lockstep state machines for node A
//! (holds X) and node B (holds Y, rebuilds X̂) over a metered channel.
//!
//! Stage 1: A sends the pivots; B matches them in Y and replies with a
//! (k−1)-bit membership bitmap. Stage 2: per gap in ascending order, B opens
//! with a header carrying its gap length, the recovery exchange runs
//! ([`crate::gapsync`]), and B closes with GAP_DONE. Stage 3: A sends the ECC
//! header (seeds ride the channel and are metered) plus the parity bits; B
//! decodes and reports DONE.

use std::time::Instant;

use serde::Serialize;

use crate::bits::{BitCursor, BitString};
use crate::deletion::{derive_seed, gen_instance, Instance};
use crate::error::{Error, Result};
use crate::gapsync::{self, SyncOutcome, SyncParams, SyncStatus};
use crate::ldpc::{self, LdpcCode, SharedPermutation};
use crate::matching;
use crate::partition::{partition, Partition, PartitionParams};
use crate::transport::{duplex_pair, Endpoint, Transcript};
use crate::wire::MessageType;

/// Everything both nodes agree on out of band: lengths, rates, knobs and the
/// session seed that sub-seeds the code and permutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub beta: f64,
    /// Override L_S (required meaningfully only for beta = 0).
    pub segment_len: Option<usize>,
    /// Override L_P.
    pub pivot_len: Option<usize>,
    /// Parity overhead factor over n·H(2β).
    pub margin: f64,
    pub max_iter: u32,
    pub sync: SyncParams,
    pub session_seed: u64,
}

/// Fallback tiling when beta = 0 leaves L_S = 1/beta undefined.
const BETA_ZERO_SEGMENT_LEN: usize = 32;
const BETA_ZERO_PIVOT_LEN: usize = 16;

impl ProtocolConfig {
    pub fn new(n: usize, beta: f64, session_seed: u64) -> Self {
        ProtocolConfig {
            n,
            beta,
            segment_len: None,
            pivot_len: None,
            margin: 1.3,
            max_iter: 200,
            sync: SyncParams::default(),
            session_seed,
        }
    }

    pub fn partition_params(&self) -> Result<PartitionParams> {
        match (self.segment_len, self.beta) {
            (Some(ls), _) => PartitionParams::with_lengths(
                self.n,
                ls,
                self.pivot_len.unwrap_or(BETA_ZERO_PIVOT_LEN),
                self.beta,
            ),
            (None, beta) if beta > 0.0 => PartitionParams::derive(self.n, beta, self.pivot_len),
            (None, _) => PartitionParams::with_lengths(
                self.n,
                BETA_ZERO_SEGMENT_LEN,
                self.pivot_len.unwrap_or(BETA_ZERO_PIVOT_LEN),
                0.0,
            ),
        }
    }

    pub fn crossover(&self) -> f64 {
        (2.0 * self.beta + 0.005).min(0.49)
    }

    pub fn parity_len(&self) -> usize {
        ldpc::parity_count(self.n, self.beta, self.margin)
    }

    pub fn code_seed(&self) -> u64 {
        derive_seed(self.session_seed, 0xC0DE)
    }

    pub fn perm_seed(&self) -> u64 {
        derive_seed(self.session_seed, 0x9E84)
    }
}

/// Node B's view of a finished run.
#[derive(Debug, Clone)]
pub struct SyncReport {
    pub x_hat: BitString,
    /// Pre-ECC estimate (stage-2 output), kept for diagnostics.
    pub x_tilde: BitString,
    pub transcript: Transcript,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub segment_count: usize,
    /// k' = number of gaps (matched pivots + 1).
    pub gap_count: usize,
    pub matched_indices: Vec<usize>,
    /// Spans in Y of the matched pivots, parallel to `matched_indices`.
    pub matched_starts: Vec<usize>,
    pub gap_statuses: Vec<SyncStatus>,
    pub decode_converged: bool,
    pub decode_iterations: u32,
    /// Total matching-graph vertices including s and t.
    pub graph_vertices: usize,
    pub timings: Timings,
}

/// Wall-clock stage timings; excluded from determinism comparisons.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub matching_ms: f64,
    pub gaps_ms: f64,
    pub decode_ms: f64,
}

fn read_u32(c: &mut BitCursor) -> Result<u32> {
    Ok(c.read_uint(32)? as u32)
}

/// Gap spans of X between the matched pivots (k' spans).
fn sender_gap_spans(part: &Partition, matched: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut spans = Vec::with_capacity(matched.len() + 1);
    let mut pos = 0usize;
    for &i in matched {
        let pivot = &part.pivot_spans[i - 1];
        spans.push(pos..pivot.start);
        pos = pivot.end;
    }
    spans.push(pos..part.params.n);
    spans
}

/// Run node A to completion. Returns its transcript (identical to B's).
pub fn run_node_a(x: &BitString, cfg: &ProtocolConfig, ep: &mut Endpoint) -> Result<Transcript> {
    if x.len() != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "x length {} != configured n {}",
            x.len(),
            cfg.n
        )));
    }
    let params = cfg.partition_params()?;
    let part = partition(x, params)?;
    let pivots = part.pivots(x);

    // stage 1: pivots in index order
    let payload = BitString::concat(pivots.iter());
    ep.send(MessageType::Pivots, &payload)?;

    // stage 2: bitmap, then serve each gap
    let bitmap = ep.expect(MessageType::MatchBitmap)?;
    if bitmap.len() != params.pivot_count() {
        return Err(Error::ProtocolAbort(format!(
            "bitmap has {} bits, expected {}",
            bitmap.len(),
            params.pivot_count()
        )));
    }
    let matched: Vec<usize> = (0..bitmap.len()).filter(|&i| bitmap.get(i)).map(|i| i + 1).collect();
    let gaps = sender_gap_spans(&part, &matched);

    for (j, span) in gaps.iter().enumerate() {
        let header = ep.expect(MessageType::GapHeader)?;
        let mut c = BitCursor::new(&header);
        let gap_index = read_u32(&mut c)? as usize;
        let b_len = read_u32(&mut c)? as usize;
        c.expect_end()?;
        if gap_index != j {
            return Err(Error::ProtocolAbort(format!(
                "gap header index {gap_index}, expected {j}"
            )));
        }
        let x_gap = x.slice(span.clone());
        gapsync::serve_gap(&x_gap, b_len, ep, &cfg.sync)?;
        ep.expect(MessageType::GapDone)?;
    }

    // stage 3: header, parity, done
    let m = cfg.parity_len();
    let mut header = BitString::new();
    header.push_uint(cfg.n as u64, 32);
    header.push_uint(m as u64, 32);
    header.push_uint(cfg.code_seed(), 64);
    header.push_uint(cfg.perm_seed(), 64);
    header.push_uint(cfg.crossover().to_bits(), 64);
    ep.send(MessageType::EccHeader, &header)?;

    let code = LdpcCode::new(cfg.n, m, cfg.code_seed());
    let perm = SharedPermutation::new(cfg.n, cfg.perm_seed());
    let parity = ldpc::encode_parity(x, &code, &perm)?;
    ep.send(MessageType::Parity, &parity)?;

    ep.expect(MessageType::Done)?;
    Ok(ep.transcript.clone())
}

/// Run node B to completion; produces X̂ and the full report.
pub fn run_node_b(y: &BitString, cfg: &ProtocolConfig, ep: &mut Endpoint) -> Result<SyncReport> {
    let params = cfg.partition_params()?;
    let mut timings = Timings::default();

    // stage 1: receive pivots, match them in y
    let payload = ep.expect(MessageType::Pivots)?;
    let lp = params.pivot_len;
    if payload.len() != params.pivot_count() * lp {
        return Err(Error::ProtocolAbort(format!(
            "pivot payload {} bits, expected {}",
            payload.len(),
            params.pivot_count() * lp
        )));
    }
    let pivots: Vec<BitString> = (0..params.pivot_count())
        .map(|i| payload.slice(i * lp..(i + 1) * lp))
        .collect();

    let t0 = Instant::now();
    let graph = matching::prune(matching::build_graph(y, &pivots, params));
    let graph_vertices = graph.vertex_count();
    let path = matching::longest_path(&graph);
    let result = matching::truncate_and_emit(&path, params, y, &pivots);
    timings.matching_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut bitmap = BitString::zeros(params.pivot_count());
    for &i in &result.matched_indices {
        bitmap.set(i - 1, true);
    }
    ep.send(MessageType::MatchBitmap, &bitmap)?;

    // stage 2: recover each gap, assemble the pre-ECC estimate
    let t0 = Instant::now();
    let mut outcomes: Vec<SyncOutcome> = Vec::with_capacity(result.gap_count());
    for (j, span) in result.gap_spans.iter().enumerate() {
        let mut header = BitString::new();
        header.push_uint(j as u64, 32);
        header.push_uint(span.len() as u64, 32);
        ep.send(MessageType::GapHeader, &header)?;
        let y_gap = y.slice(span.clone());
        let outcome = gapsync::recover_gap(&y_gap, ep, &cfg.sync)?;
        outcomes.push(outcome);
        ep.send(MessageType::GapDone, &BitString::new())?;
    }
    let mut x_tilde = BitString::with_capacity(cfg.n);
    for (j, outcome) in outcomes.iter().enumerate() {
        x_tilde.extend_from(&outcome.estimate);
        if j < result.matched_indices.len() {
            x_tilde.extend_from(&pivots[result.matched_indices[j] - 1]);
        }
    }
    timings.gaps_ms = t0.elapsed().as_secs_f64() * 1e3;
    if x_tilde.len() != cfg.n {
        return Err(Error::ProtocolAbort(format!(
            "assembled estimate has {} bits, expected {}",
            x_tilde.len(),
            cfg.n
        )));
    }

    // stage 3: decode against the received parity
    let header = ep.expect(MessageType::EccHeader)?;
    let mut c = BitCursor::new(&header);
    let n = read_u32(&mut c)? as usize;
    let m = read_u32(&mut c)? as usize;
    let code_seed = c.read_uint(64)?;
    let perm_seed = c.read_uint(64)?;
    let crossover = f64::from_bits(c.read_uint(64)?);
    c.expect_end()?;
    if n != cfg.n {
        return Err(Error::ProtocolAbort(format!(
            "header n {n} != configured {}",
            cfg.n
        )));
    }
    if !(0.0 < crossover && crossover < 0.5) {
        return Err(Error::ProtocolAbort(format!("header crossover {crossover} invalid")));
    }
    let parity = ep.expect(MessageType::Parity)?;
    if parity.len() != m {
        return Err(Error::ProtocolAbort(format!(
            "parity {} bits, header said {m}",
            parity.len()
        )));
    }

    let t0 = Instant::now();
    let code = LdpcCode::new(n, m, code_seed);
    let perm = SharedPermutation::new(n, perm_seed);
    let outcome = if m == 0 {
        ldpc::DecodeOutcome {
            bits: x_tilde.clone(),
            converged: true,
            iterations: 0,
        }
    } else {
        ldpc::decode(&x_tilde, &parity, &code, &perm, crossover, cfg.max_iter)?
    };
    timings.decode_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut done = BitString::new();
    done.push_uint(if outcome.converged { 0 } else { 1 }, 2);
    ep.send(MessageType::Done, &done)?;

    Ok(SyncReport {
        x_hat: outcome.bits,
        x_tilde,
        transcript: ep.transcript.clone(),
        diagnostics: Diagnostics {
            segment_count: params.segment_count,
            gap_count: result.gap_count(),
            matched_indices: result.matched_indices.clone(),
            matched_starts: result.matched_spans.iter().map(|s| s.start).collect(),
            gap_statuses: outcomes.iter().map(|o| o.status).collect(),
            decode_converged: outcome.converged,
            decode_iterations: outcome.iterations,
            graph_vertices,
            timings,
        },
    })
}

/// A finished in-memory run with ground truth attached.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: SyncReport,
    pub instance: Instance,
    pub params: PartitionParams,
}

impl RunOutcome {
    pub fn pre_ecc_errors(&self) -> usize {
        self.report.x_tilde.hamming(&self.instance.x)
    }

    pub fn post_ecc_errors(&self) -> usize {
        self.report.x_hat.hamming(&self.instance.x)
    }

    /// Ground-truth match statistics for the emitted result.
    pub fn match_stats(&self) -> matching::MatchStats {
        let part = Partition::new(self.params, self.params.n).expect("params consistent");
        let result = matching::MatchResult {
            matched_indices: self.report.diagnostics.matched_indices.clone(),
            matched_spans: self
                .report
                .diagnostics
                .matched_starts
                .iter()
                .map(|&s| s..s + self.params.pivot_len)
                .collect(),
            gap_spans: Vec::new(),
            y_len: self.instance.y.len(),
        };
        matching::classify_result(&result, &part, &self.instance.pattern)
    }
}

/// Wire both nodes over an in-memory channel, run to completion, and
/// cross-check that the two endpoints metered identical traffic.
pub fn run_pair(x: &BitString, y: &BitString, cfg: &ProtocolConfig) -> Result<SyncReport> {
    let (mut ep_a, mut ep_b) = duplex_pair();
    let x = x.clone();
    let cfg_a = *cfg;
    let handle = std::thread::spawn(move || run_node_a(&x, &cfg_a, &mut ep_a));
    let report = run_node_b(y, cfg, &mut ep_b);
    let a_transcript = handle
        .join()
        .map_err(|_| Error::ProtocolAbort("node A panicked".into()))?;
    let report = report?;
    let a_transcript = a_transcript?;
    if a_transcript != report.transcript {
        return Err(Error::ProtocolAbort(
            "transcripts diverged between the endpoints".into(),
        ));
    }
    Ok(report)
}

/// Generate an instance and run it end to end.
pub fn one_shot(cfg: &ProtocolConfig) -> Result<RunOutcome> {
    let instance = gen_instance(cfg.n, cfg.beta, cfg.session_seed)?;
    let params = cfg.partition_params()?;
    let report = run_pair(&instance.x, &instance.y, cfg)?;
    Ok(RunOutcome {
        report,
        instance,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_channel_end_to_end() {
        let cfg = ProtocolConfig::new(5_000, 0.0, 42);
        let run = one_shot(&cfg).unwrap();
        assert_eq!(run.pre_ecc_errors(), 0);
        assert_eq!(run.post_ecc_errors(), 0);
        assert_eq!(run.report.x_hat, run.instance.x);
        // stage 1 carries exactly (k-1)·L_P bits A->B
        let params = run.params;
        assert_eq!(
            run.report.transcript.stage_bits_a_to_b[0],
            (params.pivot_count() * params.pivot_len) as u64
        );
        // the matched-index bitmap is exactly k-1 bits B->A
        let bitmap_entry = run
            .report
            .transcript
            .log
            .iter()
            .find(|e| e.msg_type == MessageType::MatchBitmap)
            .unwrap();
        assert_eq!(bitmap_entry.payload_bits, params.pivot_count() as u64);
    }

    #[test]
    fn noisy_run_recovers_exactly() {
        let cfg = ProtocolConfig::new(20_000, 0.01, 7);
        let run = one_shot(&cfg).unwrap();
        assert_eq!(run.report.x_hat.len(), 20_000);
        assert_eq!(run.post_ecc_errors(), 0);
    }

    #[test]
    fn deterministic_runs() {
        let cfg = ProtocolConfig::new(8_000, 0.01, 99);
        let a = one_shot(&cfg).unwrap();
        let b = one_shot(&cfg).unwrap();
        assert_eq!(a.report.transcript, b.report.transcript);
        assert_eq!(a.report.x_hat, b.report.x_hat);
        assert_eq!(a.report.x_tilde, b.report.x_tilde);
        assert_eq!(
            a.report.diagnostics.matched_indices,
            b.report.diagnostics.matched_indices
        );
    }

    #[test]
    fn x_hat_length_always_n_under_pathological_matching() {
        // pivot override of 1 bit at high beta: matching degenerates, the
        // estimate length contract must still hold
        let mut cfg = ProtocolConfig::new(600, 0.2, 3);
        cfg.segment_len = Some(5);
        cfg.pivot_len = Some(1);
        let run = one_shot(&cfg).unwrap();
        assert_eq!(run.report.x_hat.len(), 600);
    }
}
