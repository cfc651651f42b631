//! Pivot/segment partition geometry.
//!
//! The source string is tiled as S_1, P_1, S_2, P_2, ..., P_{k-1}, S_k with
//! segment length L_S ≈ 1/beta and short pivots of length L_P between them.
//! When n is not an exact tiling, the final segment absorbs the remainder
//! (at most L_S + L_P − 1 extra bits), which keeps every pivot at its exact
//! nominal offset.

use std::ops::Range;

use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Tiling parameters shared by both nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionParams {
    /// Source length in bits.
    pub n: usize,
    /// Segment length L_S.
    pub segment_len: usize,
    /// Pivot length L_P.
    pub pivot_len: usize,
    /// Number of segments k (there are k−1 pivots).
    pub segment_count: usize,
    /// Expected matched-pivot fraction R = 1 − L_P·beta + 2·beta, clamped to (0, 1].
    pub expected_match_rate: f64,
}

impl PartitionParams {
    /// Derive parameters from the deletion rate: L_S = round(1/beta),
    /// L_P = ceil(11 + 2·log2(1/beta)) unless overridden, k as large as the
    /// tiling allows.
    pub fn derive(n: usize, beta: f64, pivot_len_override: Option<usize>) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta {beta} outside (0,1)")));
        }
        let segment_len = (1.0 / beta).round() as usize;
        let pivot_len = match pivot_len_override {
            Some(lp) => lp,
            None => (11.0 + 2.0 * (1.0 / beta).log2()).ceil() as usize,
        };
        Self::with_lengths(n, segment_len, pivot_len, beta)
    }

    /// Build parameters from explicit lengths (beta only feeds the R formula;
    /// pass 0 for a deletion-free configuration, giving R = 1).
    pub fn with_lengths(n: usize, segment_len: usize, pivot_len: usize, beta: f64) -> Result<Self> {
        if segment_len < 1 || pivot_len < 1 {
            return Err(Error::InvalidArgument(
                "segment and pivot lengths must be at least 1".into(),
            ));
        }
        // largest k with k*L_S + (k-1)*L_P <= n
        let segment_count = (n + pivot_len) / (segment_len + pivot_len);
        if segment_count < 2 {
            return Err(Error::InstanceTooSmall(format!(
                "n={n} fits only {segment_count} segment(s) of length {segment_len}"
            )));
        }
        let raw = 1.0 - pivot_len as f64 * beta + 2.0 * beta;
        let expected_match_rate = raw.clamp(1e-9, 1.0);
        Ok(PartitionParams {
            n,
            segment_len,
            pivot_len,
            segment_count,
            expected_match_rate,
        })
    }

    pub fn pivot_count(&self) -> usize {
        self.segment_count - 1
    }

    /// Length of the exact tiling before tail padding.
    pub fn tiled_len(&self) -> usize {
        self.segment_count * self.segment_len + self.pivot_count() * self.pivot_len
    }

    /// Remainder absorbed by the final segment.
    pub fn tail_extra(&self) -> usize {
        self.n - self.tiled_len()
    }

    /// Number of source bits strictly between pivot i and pivot j
    /// (layers 0 and k stand for the string boundaries). This is the upper
    /// bound of the matching-graph edge window; the padded tail widens edges
    /// into layer k.
    pub fn inter_pivot_bound(&self, i: usize, j: usize) -> isize {
        debug_assert!(i < j && j <= self.segment_count);
        let gap = j - i;
        let mut bound = (gap - 1) * self.pivot_len + gap * self.segment_len;
        if j == self.segment_count {
            bound += self.tail_extra();
        }
        bound as isize
    }

    /// How many interior path vertices the matcher keeps: ceil(R·k), with a
    /// tiny epsilon so float dust in R·k cannot bump the ceiling.
    pub fn truncation_quota(&self) -> usize {
        (self.expected_match_rate * self.segment_count as f64 - 1e-9).ceil() as usize
    }
}

/// Concrete byte spans of the tiling over a specific string.
#[derive(Debug, Clone)]
pub struct Partition {
    pub params: PartitionParams,
    pub pivot_spans: Vec<Range<usize>>,
    pub segment_spans: Vec<Range<usize>>,
}

impl Partition {
    /// Spans are fully determined by the parameters; `x_len` must equal n.
    pub fn new(params: PartitionParams, x_len: usize) -> Result<Self> {
        if x_len != params.n {
            return Err(Error::InvalidArgument(format!(
                "string length {x_len} incompatible with n={}",
                params.n
            )));
        }
        let k = params.segment_count;
        let (ls, lp) = (params.segment_len, params.pivot_len);
        let mut pivot_spans = Vec::with_capacity(k - 1);
        let mut segment_spans = Vec::with_capacity(k);
        let mut pos = 0usize;
        for i in 0..k {
            let seg_len = if i == k - 1 { ls + params.tail_extra() } else { ls };
            segment_spans.push(pos..pos + seg_len);
            pos += seg_len;
            if i < k - 1 {
                pivot_spans.push(pos..pos + lp);
                pos += lp;
            }
        }
        debug_assert_eq!(pos, params.n);
        Ok(Partition {
            params,
            pivot_spans,
            segment_spans,
        })
    }

    pub fn pivots(&self, x: &BitString) -> Vec<BitString> {
        self.pivot_spans.iter().map(|s| x.slice(s.clone())).collect()
    }

    pub fn segments(&self, x: &BitString) -> Vec<BitString> {
        self.segment_spans.iter().map(|s| x.slice(s.clone())).collect()
    }
}

/// Tile `x` according to `params`.
pub fn partition(x: &BitString, params: PartitionParams) -> Result<Partition> {
    Partition::new(params, x.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_reference_cell() {
        // beta = 0.01: L_S = 100, L_P = ceil(11 + 2 log2(100)) = 25.
        let p = PartitionParams::derive(100_000, 0.01, None).unwrap();
        assert_eq!(p.segment_len, 100);
        assert_eq!(p.pivot_len, 25);
        assert_eq!(p.segment_count, 800);
        assert!((p.expected_match_rate - 0.77).abs() < 1e-12);
        assert_eq!(p.truncation_quota(), 616);
    }

    #[test]
    fn derive_with_override() {
        let p = PartitionParams::derive(100_000, 0.01, Some(8)).unwrap();
        assert_eq!(p.pivot_len, 8);
        assert_eq!(p.segment_len, 100);
    }

    #[test]
    fn small_case_tiling() {
        // beta = 0.5 -> L_S = 2; with pivot length 1, k = (10+1)/3 = 3.
        let p = PartitionParams::derive(10, 0.5, Some(1)).unwrap();
        assert_eq!(p.segment_len, 2);
        assert_eq!(p.segment_count, 3);
        assert_eq!(p.tail_extra(), 2);
    }

    #[test]
    fn too_small_rejected() {
        assert!(matches!(
            PartitionParams::derive(30, 0.01, None),
            Err(Error::InstanceTooSmall(_))
        ));
    }

    #[test]
    fn hand_tiling() {
        // L_S = 2, L_P = 1 over 01101: S1=01, P1=1, S2=01.
        let x: BitString = "01101".parse().unwrap();
        let params = PartitionParams::with_lengths(5, 2, 1, 0.0).unwrap();
        let part = partition(&x, params).unwrap();
        let segs = part.segments(&x);
        let pivs = part.pivots(&x);
        assert_eq!(segs.len(), 2);
        assert_eq!(pivs.len(), 1);
        assert_eq!(segs[0].to_string(), "01");
        assert_eq!(pivs[0].to_string(), "1");
        assert_eq!(segs[1].to_string(), "01");
    }

    #[test]
    fn spans_tile_exactly() {
        let params = PartitionParams::derive(100_000, 0.01, None).unwrap();
        let part = Partition::new(params, 100_000).unwrap();
        let mut pos = 0usize;
        for i in 0..params.segment_count {
            assert_eq!(part.segment_spans[i].start, pos);
            pos = part.segment_spans[i].end;
            if i < params.pivot_count() {
                assert_eq!(part.pivot_spans[i].start, pos);
                assert_eq!(part.pivot_spans[i].len(), params.pivot_len);
                pos = part.pivot_spans[i].end;
            }
        }
        assert_eq!(pos, params.n);
        // last segment absorbs the tail
        assert_eq!(
            part.segment_spans[params.segment_count - 1].len(),
            params.segment_len + params.tail_extra()
        );
    }

    #[test]
    fn concat_of_spans_reproduces_input() {
        let x = {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            BitString::random(1234, &mut rng)
        };
        let params = PartitionParams::with_lengths(1234, 37, 9, 0.02).unwrap();
        let part = partition(&x, params).unwrap();
        let mut rebuilt = BitString::new();
        for i in 0..params.segment_count {
            rebuilt.extend_from(&x.slice(part.segment_spans[i].clone()));
            if i < params.pivot_count() {
                rebuilt.extend_from(&x.slice(part.pivot_spans[i].clone()));
            }
        }
        assert_eq!(rebuilt, x);
    }

    #[test]
    fn length_mismatch_rejected() {
        let params = PartitionParams::with_lengths(100, 10, 3, 0.0).unwrap();
        assert!(matches!(
            Partition::new(params, 99),
            Err(Error::InvalidArgument(_))
        ));
    }
}
