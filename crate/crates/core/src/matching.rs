//! Pivot matching over the received string.
//!
//! Every occurrence of pivot P_i in Y becomes a vertex in layer i of a
//! (k+1)-layer DAG, with auxiliary vertices s (layer 0) and t (layer k)
//! marking the string boundaries. An edge u→v exists when the gap between the
//! two matches in Y is compatible with the source tiling:
//!
//! ```text
//!   -1 <= dis(u, v) <= (j-i-1)·L_P + (j-i)·L_S      (i = u.layer < j = v.layer)
//! ```
//!
//! where dis counts the bits strictly between the matches (−1 is a one-bit
//! overlap, possible when a deletion inside one pivot shifts its correct copy
//! by one). Correct matches always satisfy the predicate, so they form an
//! s–t path; after pruning vertices that cannot reach t, a longest s–t path
//! recovers mostly-correct matches, and its first ceil(R·k) interior vertices
//! are emitted as the match result.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;

use crate::bits::BitString;
use crate::deletion::DeletionPattern;
use crate::error::{Error, Result};
use crate::partition::{Partition, PartitionParams};

/// One pivot occurrence in Y (or a string boundary).
///
/// `start..end` is the half-open span of the match; s is `0..0` in layer 0
/// and t is `len..len` in layer k, so the distance arithmetic below treats all
/// three uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vertex {
    pub layer: usize,
    pub start: usize,
    pub end: usize,
}

impl Vertex {
    fn source() -> Self {
        Vertex { layer: 0, start: 0, end: 0 }
    }

    fn sink(layer: usize, y_len: usize) -> Self {
        Vertex { layer, start: y_len, end: y_len }
    }
}

/// Bits strictly between two matches; −1 means a one-bit overlap.
#[inline]
fn dis(u: &Vertex, v: &Vertex) -> isize {
    v.start as isize - u.end as isize
}

/// Layered occurrence graph. Edges are implicit via [`edge_exists`].
#[derive(Debug, Clone)]
pub struct MatchingGraph {
    pub layers: Vec<Vec<Vertex>>,
    pub params: PartitionParams,
    pub y_len: usize,
}

impl MatchingGraph {
    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// All start positions of each pivot within `y`, ascending.
///
/// Every length-L_P window of `y` is indexed once in a multimap keyed by the
/// window content itself (exact, not a hash), so lookups cost O(|Y| + k)
/// instead of one scan per pivot. Windows longer than 64 bits fall back to a
/// direct scan.
pub fn find_occurrences(y: &BitString, pivots: &[BitString]) -> Vec<Vec<usize>> {
    if pivots.is_empty() {
        return Vec::new();
    }
    let width = pivots[0].len();
    assert!(
        pivots.iter().all(|p| p.len() == width),
        "pivots must share one length"
    );
    if width == 0 || width > y.len() {
        return vec![Vec::new(); pivots.len()];
    }

    if width <= 64 {
        let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let mut key = 0u64;
        for i in 0..y.len() {
            key = ((key << 1) | y.get(i) as u64) & mask;
            if i + 1 >= width {
                index.entry(key).or_default().push(i + 1 - width);
            }
        }
        pivots
            .iter()
            .map(|p| index.get(&p.window_uint(0, width)).cloned().unwrap_or_default())
            .collect()
    } else {
        pivots
            .iter()
            .map(|p| {
                (0..=y.len() - width)
                    .filter(|&q| (0..width).all(|i| y.get(q + i) == p.get(i)))
                    .collect()
            })
            .collect()
    }
}

/// The layer-distance edge predicate. Errors when `u.layer >= v.layer`.
pub fn edge_exists(u: &Vertex, v: &Vertex, params: &PartitionParams) -> Result<bool> {
    if u.layer >= v.layer {
        return Err(Error::InvalidArgument(format!(
            "edge endpoints must ascend layers ({} >= {})",
            u.layer, v.layer
        )));
    }
    Ok(edge_ok(u, v, params))
}

#[inline]
fn edge_ok(u: &Vertex, v: &Vertex, params: &PartitionParams) -> bool {
    let d = dis(u, v);
    d >= -1 && d <= params.inter_pivot_bound(u.layer, v.layer)
}

/// Build the occurrence graph for `y` given the pivots of X.
pub fn build_graph(y: &BitString, pivots: &[BitString], params: PartitionParams) -> MatchingGraph {
    let k = params.segment_count;
    debug_assert_eq!(pivots.len(), k - 1);
    let occ = find_occurrences(y, pivots);
    let width = params.pivot_len;
    let mut layers = Vec::with_capacity(k + 1);
    layers.push(vec![Vertex::source()]);
    for (i, starts) in occ.iter().enumerate() {
        layers.push(
            starts
                .iter()
                .map(|&q| Vertex { layer: i + 1, start: q, end: q + width })
                .collect(),
        );
    }
    layers.push(vec![Vertex::sink(k, y.len())]);
    MatchingGraph { layers, params, y_len: y.len() }
}

/// Drop every interior vertex with no edge to t. Correct matches always keep
/// their edge to t, so none of them are lost; s and t always survive.
pub fn prune(g: MatchingGraph) -> MatchingGraph {
    let k = g.params.segment_count;
    let sink = Vertex::sink(k, g.y_len);
    let params = g.params;
    let layers = g
        .layers
        .into_iter()
        .enumerate()
        .map(|(layer, vs)| {
            if layer == 0 || layer == k {
                vs
            } else {
                vs.into_iter().filter(|v| edge_ok(v, &sink, &params)).collect()
            }
        })
        .collect();
    MatchingGraph { layers, params, y_len: g.y_len }
}

/// Longest s–t path by vertex count.
///
/// Plain DAG dynamic programming over vertices in (layer, start) order.
/// Ties pick the predecessor with most vertices, then smaller start, then
/// smaller layer gap, which pins the result down deterministically.
pub fn longest_path(g: &MatchingGraph) -> Vec<Vertex> {
    let k = g.params.segment_count;
    // flatten with per-layer offsets; layer lists are already start-sorted
    let offsets: Vec<usize> = g
        .layers
        .iter()
        .scan(0usize, |acc, l| {
            let o = *acc;
            *acc += l.len();
            Some(o)
        })
        .collect();
    let flat: Vec<Vertex> = g.layers.iter().flatten().copied().collect();
    let total = flat.len();

    // dist = vertices on the best s-rooted path ending here (0 = unreachable)
    let mut dist = vec![0u32; total];
    let mut pred = vec![usize::MAX; total];
    dist[0] = 1;

    for layer in 1..=k {
        for vi in 0..g.layers[layer].len() {
            let v_id = offsets[layer] + vi;
            let v = flat[v_id];
            let mut best: Option<(u32, usize, usize)> = None; // (dist, u.start, layer gap)
            #[allow(clippy::needless_range_loop)]
            for prev_layer in 0..layer {
                let list = &g.layers[prev_layer];
                if list.is_empty() {
                    continue;
                }
                let span = if prev_layer == 0 { 0 } else { g.params.pivot_len };
                let bound = g.params.inter_pivot_bound(prev_layer, layer);
                // valid u satisfy  v.start - bound <= u.end <= v.start + 1
                let lo_end = v.start as isize - bound;
                let hi_end = v.start as isize + 1;
                let lo = list.partition_point(|u| ((u.start + span) as isize) < lo_end);
                let hi = list.partition_point(|u| ((u.start + span) as isize) <= hi_end);
                for (ui, u) in list[lo..hi].iter().enumerate() {
                    let u_id = offsets[prev_layer] + lo + ui;
                    if dist[u_id] == 0 {
                        continue;
                    }
                    debug_assert!(edge_ok(u, &v, &g.params));
                    let cand = (dist[u_id] + 1, u.start, layer - prev_layer);
                    let better = match best {
                        None => true,
                        Some((bd, bs, bg)) => {
                            cand.0 > bd
                                || (cand.0 == bd && (cand.1 < bs || (cand.1 == bs && cand.2 < bg)))
                        }
                    };
                    if better {
                        best = Some(cand);
                        pred[v_id] = u_id;
                        dist[v_id] = cand.0;
                    }
                }
            }
        }
    }

    // t is always reachable: dis(s, t) = |Y| and the (0, k) window spans all of X
    let t_id = total - 1;
    debug_assert!(dist[t_id] >= 2);
    let mut path = Vec::new();
    let mut cur = t_id;
    while cur != usize::MAX {
        path.push(flat[cur]);
        cur = pred[cur];
    }
    path.reverse();
    path
}

/// Result of stage 1: matched pivot indices, their materialized spans in Y,
/// and the gap spans tiling the rest of Y.
///
/// Tiling invariant: `gaps[0], span[0], gaps[1], ..., span[k'-2], gaps[k'-1]`
/// partition Y exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// 1-based pivot indices i_1 < i_2 < ... (the graph layer numbers).
    pub matched_indices: Vec<usize>,
    /// Half-open spans in Y, parallel to `matched_indices`.
    pub matched_spans: Vec<Range<usize>>,
    /// k' gap spans in Y (k' = matched + 1).
    pub gap_spans: Vec<Range<usize>>,
    pub y_len: usize,
}

impl MatchResult {
    pub fn gap_count(&self) -> usize {
        self.gap_spans.len()
    }
}

/// Keep the first ceil(R·k) interior vertices of the path and materialize the
/// tiling of Y.
///
/// A −1 overlap between consecutive kept matches is resolved by shifting the
/// later span one bit right when the shifted window still equals the pivot,
/// and dropping the later vertex otherwise, so the emitted tiling is always
/// exact.
pub fn truncate_and_emit(
    path: &[Vertex],
    params: PartitionParams,
    y: &BitString,
    pivots: &[BitString],
) -> MatchResult {
    let interior = &path[1..path.len() - 1];
    let keep = interior.len().min(params.truncation_quota());
    let kept = &interior[..keep];

    let mut matched_indices = Vec::with_capacity(keep);
    let mut matched_spans: Vec<Range<usize>> = Vec::with_capacity(keep);
    let mut prev_end = 0usize;
    for v in kept {
        let (start, end) = if v.start >= prev_end {
            (v.start, v.end)
        } else if v.start + 1 == prev_end {
            // one-bit overlap: try the right-shifted window
            let (s, e) = (v.start + 1, v.end + 1);
            let pivot = &pivots[v.layer - 1];
            if e <= y.len() && y.slice(s..e) == *pivot {
                (s, e)
            } else {
                continue;
            }
        } else {
            continue;
        };
        matched_indices.push(v.layer);
        matched_spans.push(start..end);
        prev_end = end;
    }

    let mut gap_spans = Vec::with_capacity(matched_spans.len() + 1);
    let mut pos = 0usize;
    for span in &matched_spans {
        gap_spans.push(pos..span.start);
        pos = span.end;
    }
    gap_spans.push(pos..y.len());

    MatchResult {
        matched_indices,
        matched_spans,
        gap_spans,
        y_len: y.len(),
    }
}

// --- ground-truth classification (simulation side) ---

/// Per-pivot ground truth, from the deletion pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PivotTruth {
    /// No deletion inside the pivot; its correct copy is present.
    NoDeletionCorrect,
    /// Exactly one deletion and a correct copy still occurs in Y.
    OneDeletionCorrect,
    /// Exactly one deletion but no correct copy survives.
    Absent,
    /// Two or more deletions: every copy counts as incorrect.
    Incorrect,
}

/// Classification of one emitted match position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchClass {
    NoDeletionCorrect,
    OneDeletionCorrect,
    Incorrect,
}

impl MatchClass {
    pub fn is_correct(self) -> bool {
        !matches!(self, MatchClass::Incorrect)
    }
}

/// Where the correct copy of pivot `i` starts in Y: its span start minus the
/// deletions before it. With one deletion inside the pivot there is a second
/// candidate one position to the left (the copy that ends at the mapped end
/// index).
fn correct_starts(
    part: &Partition,
    imap: &crate::deletion::IndexMap,
    pattern: &DeletionPattern,
    pivot_index: usize,
) -> (usize, Vec<usize>) {
    let span = &part.pivot_spans[pivot_index - 1];
    let deletions = (span.clone()).filter(|&i| pattern.is_deleted(i)).count();
    let slot = imap.slot(span.start);
    let starts = match deletions {
        0 => vec![slot],
        1 => {
            if slot == 0 {
                vec![slot]
            } else {
                vec![slot, slot - 1]
            }
        }
        _ => Vec::new(),
    };
    (deletions, starts)
}

/// Classify one matched position against the ground truth.
pub fn classify_position(
    part: &Partition,
    imap: &crate::deletion::IndexMap,
    pattern: &DeletionPattern,
    pivot_index: usize,
    match_start: usize,
) -> MatchClass {
    let (deletions, starts) = correct_starts(part, imap, pattern, pivot_index);
    match deletions {
        0 if starts.contains(&match_start) => MatchClass::NoDeletionCorrect,
        1 if starts.contains(&match_start) => MatchClass::OneDeletionCorrect,
        _ => MatchClass::Incorrect,
    }
}

/// Ground-truth statistics over an emitted match result.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MatchStats {
    pub matched: usize,
    pub correct_no_deletion: usize,
    pub correct_one_deletion: usize,
    pub incorrect: usize,
}

impl MatchStats {
    pub fn correct(&self) -> usize {
        self.correct_no_deletion + self.correct_one_deletion
    }

    pub fn incorrect_fraction(&self) -> f64 {
        if self.matched == 0 {
            0.0
        } else {
            self.incorrect as f64 / self.matched as f64
        }
    }
}

pub fn classify_result(
    result: &MatchResult,
    part: &Partition,
    pattern: &DeletionPattern,
) -> MatchStats {
    let imap = pattern.index_map();
    let mut stats = MatchStats::default();
    for (idx, span) in result.matched_indices.iter().zip(&result.matched_spans) {
        stats.matched += 1;
        match classify_position(part, &imap, pattern, *idx, span.start) {
            MatchClass::NoDeletionCorrect => stats.correct_no_deletion += 1,
            MatchClass::OneDeletionCorrect => stats.correct_one_deletion += 1,
            MatchClass::Incorrect => stats.incorrect += 1,
        }
    }
    stats
}

/// Classify the interior vertices of a path (pre-truncation positions).
pub fn classify_path(
    path: &[Vertex],
    part: &Partition,
    pattern: &DeletionPattern,
) -> Vec<MatchClass> {
    let imap = pattern.index_map();
    path[1..path.len() - 1]
        .iter()
        .map(|v| classify_position(part, &imap, pattern, v.layer, v.start))
        .collect()
}

/// Per-pivot truth table: whether a correct copy of each pivot exists in Y.
pub fn pivot_truth(part: &Partition, pattern: &DeletionPattern, y: &BitString, x: &BitString) -> Vec<PivotTruth> {
    let imap = pattern.index_map();
    let lp = part.params.pivot_len;
    (1..part.params.segment_count)
        .map(|i| {
            let (deletions, starts) = correct_starts(part, &imap, pattern, i);
            match deletions {
                0 => PivotTruth::NoDeletionCorrect,
                1 => {
                    let pivot = x.slice(part.pivot_spans[i - 1].clone());
                    let present = starts.iter().any(|&q| {
                        q + lp <= y.len() && y.slice(q..q + lp) == pivot
                    });
                    if present {
                        PivotTruth::OneDeletionCorrect
                    } else {
                        PivotTruth::Absent
                    }
                }
                _ => PivotTruth::Incorrect,
            }
        })
        .collect()
}

// --- debug dumps ---

/// DOT graph with consecutive-layer edges only.
pub fn dot_dump(g: &MatchingGraph) -> String {
    let mut out = String::from("digraph matching {\n  rankdir=LR;\n");
    for (layer, vs) in g.layers.iter().enumerate() {
        for v in vs {
            let _ = writeln!(out, "  \"L{}_{}\" [label=\"{}:{}\"];", layer, v.start, layer, v.start);
        }
    }
    for layer in 0..g.layers.len() - 1 {
        for u in &g.layers[layer] {
            for v in &g.layers[layer + 1] {
                if edge_ok(u, v, &g.params) {
                    let _ = writeln!(out, "  \"L{}_{}\" -> \"L{}_{}\";", layer, u.start, layer + 1, v.start);
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Vertex CSV: layer, start, and a good/bad flag when ground truth is given.
pub fn vertex_csv(
    g: &MatchingGraph,
    truth: Option<(&Partition, &DeletionPattern)>,
) -> String {
    let imap = truth.map(|(_, pattern)| pattern.index_map());
    let mut out = String::from("layer,start,good\n");
    for (layer, vs) in g.layers.iter().enumerate() {
        for v in vs {
            let flag = match (&truth, &imap) {
                (Some((part, pattern)), Some(imap))
                    if layer > 0 && layer < g.params.segment_count =>
                {
                    let class = classify_position(part, imap, pattern, layer, v.start);
                    if class.is_correct() { "1" } else { "0" }
                }
                _ => "",
            };
            let _ = writeln!(out, "{},{},{}", layer, v.start, flag);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deletion::{apply_deletions, gen_instance};
    use crate::partition::partition;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn occurrences_run_of_zeros() {
        let occ = find_occurrences(&bs("00000"), &[bs("00")]);
        assert_eq!(occ, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn occurrences_absent_pattern() {
        let occ = find_occurrences(&bs("0101"), &[bs("11")]);
        assert_eq!(occ, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn occurrences_pattern_longer_than_y() {
        let occ = find_occurrences(&bs("01"), &[bs("0101")]);
        assert_eq!(occ, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn occurrence_count_matches_expectation() {
        // expected count |y|·2^-width; one seeded draw, 3 sigma window
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let y = BitString::random(10_000, &mut rng);
        let pivot = BitString::random(10, &mut rng);
        let occ = find_occurrences(&y, std::slice::from_ref(&pivot));
        let expect: f64 = 10_000.0 / 1024.0;
        let sigma = expect.sqrt();
        let got = occ[0].len() as f64;
        assert!((got - expect).abs() <= 3.0 * sigma, "count {got} vs {expect}");
    }

    fn v(layer: usize, start: usize, end: usize) -> Vertex {
        Vertex { layer, start, end }
    }

    #[test]
    fn edge_boundaries() {
        let params = PartitionParams::with_lengths(1000, 10, 3, 0.0).unwrap();
        let ls = params.segment_len as isize;
        // overlap by one bit: dis = -1 -> edge
        let u = v(1, 7, 10);
        assert!(edge_exists(&u, &v(2, 9, 12), &params).unwrap());
        // adjacent: dis = 0 -> edge   (1-based: u ends at 10, v starts at 11)
        assert!(edge_exists(&u, &v(2, 10, 13), &params).unwrap());
        // just past the upper bound for consecutive layers: dis = L_S + 1
        let too_far = v(2, (10 + ls + 1) as usize, (10 + ls + 4) as usize);
        assert!(!edge_exists(&u, &too_far, &params).unwrap());
        // exactly at the bound
        let at_bound = v(2, (10 + ls) as usize, (10 + ls + 3) as usize);
        assert!(edge_exists(&u, &at_bound, &params).unwrap());
        // dis = -2 (two-bit overlap) is out
        assert!(!edge_exists(&u, &v(2, 8, 11), &params).unwrap());
    }

    #[test]
    fn edge_rejects_layer_order() {
        let params = PartitionParams::with_lengths(1000, 10, 3, 0.0).unwrap();
        assert!(edge_exists(&v(2, 0, 3), &v(1, 10, 13), &params).is_err());
        assert!(edge_exists(&v(1, 0, 3), &v(1, 10, 13), &params).is_err());
    }

    #[test]
    fn prune_drops_vertices_cut_off_from_the_sink() {
        let params = PartitionParams::with_lengths(9, 4, 1, 0.0).unwrap();
        // pivot "1" occurs at 0 and 4 in an 8-bit y; the occurrence at 0 ends
        // too far from t (dis = 7 > L_S + tail) and must go
        let y = bs("10001000");
        let g = build_graph(&y, &[bs("1")], params);
        assert_eq!(g.layers[1].len(), 2);
        let pruned = prune(g);
        assert_eq!(pruned.layers[1].len(), 1);
        assert_eq!(pruned.layers[1][0].start, 4);
    }

    #[test]
    fn graph_without_occurrences_degenerates() {
        let params = PartitionParams::with_lengths(15, 4, 1, 0.0).unwrap();
        // y shares no window with the pivots
        let y = bs("1111111");
        let g = build_graph(&y, &[bs("0"), bs("0")], params);
        let g = prune(g);
        let path = longest_path(&g);
        assert_eq!(path.len(), 2); // s, t only
        let res = truncate_and_emit(&path, params, &y, &[bs("0"), bs("0")]);
        assert_eq!(res.gap_count(), 1);
        assert_eq!(res.gap_spans[0], 0..y.len());
    }

    #[test]
    fn clean_channel_recovers_true_partition() {
        let inst = gen_instance(600, 0.0, 3).unwrap();
        let params = PartitionParams::with_lengths(600, 20, 8, 0.0).unwrap();
        let part = partition(&inst.x, params).unwrap();
        let pivots = part.pivots(&inst.x);
        let g = prune(build_graph(&inst.y, &pivots, params));

        // every layer holds its true occurrence
        for (i, span) in part.pivot_spans.iter().enumerate() {
            assert!(
                g.layers[i + 1].iter().any(|v| v.start == span.start),
                "layer {} lost its true occurrence",
                i + 1
            );
        }

        let path = longest_path(&g);
        assert_eq!(path.len(), params.segment_count + 1); // s + k-1 pivots + t
        let res = truncate_and_emit(&path, params, &inst.y, &pivots);
        assert_eq!(res.matched_indices, (1..params.segment_count).collect::<Vec<_>>());
        for (idx, span) in res.matched_indices.iter().zip(&res.matched_spans) {
            assert_eq!(span, &part.pivot_spans[idx - 1]);
        }
        let stats = classify_result(&res, &part, &inst.pattern);
        assert_eq!(stats.incorrect, 0);
        assert_eq!(stats.matched, params.pivot_count());
    }

    #[test]
    fn tiling_reconstructs_y() {
        for seed in 0..10u64 {
            let inst = gen_instance(2_000, 0.02, seed).unwrap();
            let params = PartitionParams::derive(2_000, 0.02, None).unwrap();
            let part = partition(&inst.x, params).unwrap();
            let pivots = part.pivots(&inst.x);
            let g = prune(build_graph(&inst.y, &pivots, params));
            let path = longest_path(&g);
            let res = truncate_and_emit(&path, params, &inst.y, &pivots);

            // gaps and pivot spans interleave back into y exactly
            let mut rebuilt = BitString::new();
            for j in 0..res.matched_spans.len() {
                rebuilt.extend_from(&inst.y.slice(res.gap_spans[j].clone()));
                rebuilt.extend_from(&inst.y.slice(res.matched_spans[j].clone()));
            }
            rebuilt.extend_from(&inst.y.slice(res.gap_spans[res.gap_count() - 1].clone()));
            assert_eq!(rebuilt, inst.y, "seed {seed}");

            // matched spans really are copies of their pivots
            for (idx, span) in res.matched_indices.iter().zip(&res.matched_spans) {
                assert_eq!(inst.y.slice(span.clone()), pivots[idx - 1]);
            }
        }
    }

    #[test]
    fn truncation_respects_quota() {
        let inst = gen_instance(50_000, 0.01, 9).unwrap();
        let params = PartitionParams::derive(50_000, 0.01, None).unwrap();
        let part = partition(&inst.x, params).unwrap();
        let pivots = part.pivots(&inst.x);
        let g = prune(build_graph(&inst.y, &pivots, params));
        let path = longest_path(&g);
        let res = truncate_and_emit(&path, params, &inst.y, &pivots);
        assert!(res.matched_indices.len() <= params.truncation_quota());
        assert!(res.matched_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tie_break_prefers_smaller_start() {
        // y one bit short of n leaves two legal placements of the single
        // pivot; equal path lengths, so the smaller start must win
        let params = PartitionParams::with_lengths(9, 4, 1, 0.0).unwrap();
        assert_eq!(params.segment_count, 2);
        let y = bs("00011000"); // pivot "1" occurs at 3, 4; both windows legal
        let g = prune(build_graph(&y, &[bs("1")], params));
        assert_eq!(g.layers[1].len(), 2);
        let path = longest_path(&g);
        assert_eq!(path.len(), 3);
        assert_eq!(path[1].start, 3);
    }

    #[test]
    fn classify_one_deletion_cases() {
        // pivot 01101000 with the penultimate bit deleted and a 0 right after:
        // a copy of the pivot still appears, starting at the mapped start index.
        // Layout: S1 = "0", P1 = x[1..9] = 01101000, S2 = "00".
        let x = bs("00110100000");
        let mut mask = BitString::zeros(11);
        mask.set(7, true); // penultimate bit of the pivot span 1..9
        let pattern = DeletionPattern::new(mask, 0.0).unwrap();
        let y = apply_deletions(&x, &pattern).unwrap();
        let params = PartitionParams::with_lengths(11, 1, 8, 0.0).unwrap();
        let part = partition(&x, params).unwrap();
        assert_eq!(part.pivot_spans[0], 1..9);
        let imap = pattern.index_map();
        let slot = imap.slot(1);
        assert_eq!(y.slice(slot..slot + 8), x.slice(1..9));
        assert_eq!(
            classify_position(&part, &imap, &pattern, 1, slot),
            MatchClass::OneDeletionCorrect
        );
        // any other position is incorrect
        assert_eq!(
            classify_position(&part, &imap, &pattern, 1, slot + 1),
            MatchClass::Incorrect
        );
    }

    #[test]
    fn classify_two_correct_matches_for_zero_run() {
        // pivot 000 flanked by zeros, one deletion inside: both the copy
        // starting at the mapped start and the one ending at the mapped end
        // are correct
        let x = bs("00000");
        let params = PartitionParams::with_lengths(5, 1, 3, 0.0).unwrap();
        let part = partition(&x, params).unwrap();
        assert_eq!(part.pivot_spans[0], 1..4);
        let mut mask = BitString::zeros(5);
        mask.set(2, true);
        let pattern = DeletionPattern::new(mask, 0.0).unwrap();
        let y = apply_deletions(&x, &pattern).unwrap();
        let imap = pattern.index_map();
        let slot = imap.slot(1);
        assert_eq!(slot, 1);
        for q in [slot, slot - 1] {
            assert_eq!(y.slice(q..q + 3), x.slice(1..4));
            assert_eq!(
                classify_position(&part, &imap, &pattern, 1, q),
                MatchClass::OneDeletionCorrect
            );
        }
        assert_eq!(
            pivot_truth(&part, &pattern, &y, &x),
            vec![PivotTruth::OneDeletionCorrect]
        );
    }

    #[test]
    fn classify_multi_deletion_always_incorrect() {
        let x = bs("0110110101");
        let params = PartitionParams::with_lengths(10, 2, 4, 0.0).unwrap();
        let part = partition(&x, params).unwrap();
        let mut mask = BitString::zeros(10);
        mask.set(3, true);
        mask.set(4, true); // two deletions inside pivot span 2..6
        let pattern = DeletionPattern::new(mask, 0.0).unwrap();
        let imap = pattern.index_map();
        for q in 0..6 {
            assert_eq!(
                classify_position(&part, &imap, &pattern, 1, q),
                MatchClass::Incorrect
            );
        }
        let y = apply_deletions(&x, &pattern).unwrap();
        assert_eq!(pivot_truth(&part, &pattern, &y, &x)[0], PivotTruth::Incorrect);
    }

    #[test]
    fn dumps_have_expected_shape() {
        let inst = gen_instance(600, 0.0, 3).unwrap();
        let params = PartitionParams::with_lengths(600, 20, 8, 0.0).unwrap();
        let part = partition(&inst.x, params).unwrap();
        let pivots = part.pivots(&inst.x);
        let g = prune(build_graph(&inst.y, &pivots, params));
        let dot = dot_dump(&g);
        assert!(dot.starts_with("digraph matching {"));
        assert!(dot.contains("->"));
        let csv = vertex_csv(&g, Some((&part, &inst.pattern)));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "layer,start,good");
        assert_eq!(lines.len(), 1 + g.vertex_count());
        // clean channel: the true occurrences are flagged good
        assert!(lines[1..].iter().filter(|l| l.ends_with(",1")).count() >= part.params.pivot_count());
    }
}
