//! Monte Carlo harness: reproducible parameter sweeps with per-trial CSV rows
//! and per-cell summaries.

use std::ops::Range;
use std::time::Instant;

use serde::Serialize;

use crate::deletion::derive_seed;
use crate::error::Result;
use crate::protocol::{one_shot, ProtocolConfig, RunOutcome};

/// One sweep: the cross product of sizes, rates and pivot-length overrides,
/// `trials` seeded runs per cell.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    /// Pivot-length overrides; `None` entries use the derived default.
    pub lp_list: Vec<Option<usize>>,
    pub trials: usize,
    pub master_seed: u64,
}

impl BenchConfig {
    /// Deterministic cell enumeration, row-major over (n, beta, lp).
    pub fn cells(&self) -> Vec<(usize, f64, Option<usize>)> {
        let mut cells = Vec::new();
        for &n in &self.n_list {
            for &beta in &self.beta_list {
                for &lp in &self.lp_list {
                    cells.push((n, beta, lp));
                }
            }
        }
        cells
    }
}

/// One trial's measurements. Timing columns sit last so determinism checks
/// can split them off.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub beta: f64,
    pub lp: usize,
    pub seed: u64,
    pub k: usize,
    pub k_prime: usize,
    pub matched_fraction: f64,
    pub incorrect_match_fraction: f64,
    pub pre_ecc_ber: f64,
    pub post_ecc_ber: f64,
    pub bits_total: u64,
    pub bits_stage1: u64,
    pub bits_stage2: u64,
    pub bits_stage3: u64,
    pub bits_bound_109: f64,
    pub bits_lower_ref: f64,
    /// Mean of (deletions · log2 of gap length) over matched gaps.
    pub mean_delta_log_f: f64,
    /// Total deletions over matched gaps (clamped at 0 per gap).
    pub matched_gap_deletions: u64,
    pub graph_vertices: usize,
    pub matching_ms: f64,
    pub wall_time_ms: f64,
}

pub const CSV_SCHEMA_LINE: &str = "# schema=1";
pub const CSV_HEADER: &str = "n,beta,lp,seed,k,k_prime,matched_fraction,incorrect_match_fraction,pre_ecc_ber,post_ecc_ber,bits_total,bits_stage1,bits_stage2,bits_stage3,bits_bound_109,bits_lower_ref,mean_delta_log_f,matched_gap_deletions,graph_vertices,matching_ms,wall_time_ms";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.beta,
            self.lp,
            self.seed,
            self.k,
            self.k_prime,
            self.matched_fraction,
            self.incorrect_match_fraction,
            self.pre_ecc_ber,
            self.post_ecc_ber,
            self.bits_total,
            self.bits_stage1,
            self.bits_stage2,
            self.bits_stage3,
            self.bits_bound_109,
            self.bits_lower_ref,
            self.mean_delta_log_f,
            self.matched_gap_deletions,
            self.graph_vertices,
            self.matching_ms,
            self.wall_time_ms,
        )
    }

    /// The deterministic prefix (everything except the timing columns).
    pub fn csv_deterministic_prefix(&self) -> String {
        let row = self.to_csv();
        let mut parts: Vec<&str> = row.split(',').collect();
        parts.truncate(parts.len() - 2);
        parts.join(",")
    }
}

/// 109·n·β·log2(1/β): the scheme's advertised budget ceiling.
pub fn bits_bound_109(n: usize, beta: f64) -> f64 {
    109.0 * n as f64 * beta * (1.0 / beta).log2()
}

/// n·β·log2(1/β): the conditional-entropy reference line.
pub fn bits_lower_ref(n: usize, beta: f64) -> f64 {
    n as f64 * beta * (1.0 / beta).log2()
}

/// Per-gap (source gap length, deletion count) pairs from a finished run: the A-side
/// gap lengths from the matched indices, the B-side lengths from the matched
/// spans in Y.
pub fn gap_deltas(run: &RunOutcome) -> Vec<(usize, isize)> {
    let part = crate::partition::Partition::new(run.params, run.params.n).expect("params");
    let diag = &run.report.diagnostics;
    let lp = run.params.pivot_len;

    let x_gaps = {
        let mut spans: Vec<Range<usize>> = Vec::with_capacity(diag.gap_count);
        let mut pos = 0usize;
        for &i in &diag.matched_indices {
            let pivot = &part.pivot_spans[i - 1];
            spans.push(pos..pivot.start);
            pos = pivot.end;
        }
        spans.push(pos..run.params.n);
        spans
    };
    let y_gaps = {
        let mut spans: Vec<Range<usize>> = Vec::with_capacity(diag.gap_count);
        let mut pos = 0usize;
        for &s in &diag.matched_starts {
            spans.push(pos..s);
            pos = s + lp;
        }
        spans.push(pos..run.instance.y.len());
        spans
    };
    x_gaps
        .iter()
        .zip(&y_gaps)
        .map(|(xg, yg)| (xg.len(), xg.len() as isize - yg.len() as isize))
        .collect()
}

/// Run one bench trial.
pub fn run_trial(n: usize, beta: f64, lp: Option<usize>, seed: u64) -> Result<BenchRow> {
    let mut cfg = ProtocolConfig::new(n, beta, seed);
    cfg.pivot_len = lp;
    let t0 = Instant::now();
    let run = one_shot(&cfg)?;
    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;

    let stats = run.match_stats();
    let deltas = gap_deltas(&run);
    let matched: Vec<&(usize, isize)> = deltas.iter().filter(|(_, d)| *d >= 0).collect();
    let mean_delta_log_f = if matched.is_empty() {
        0.0
    } else {
        matched
            .iter()
            .map(|(len, d)| *d as f64 * (*len as f64).max(1.0).log2())
            .sum::<f64>()
            / matched.len() as f64
    };
    let matched_gap_deletions: u64 = matched.iter().map(|(_, d)| *d as u64).sum();

    let k = run.params.segment_count;
    let k_prime = run.report.diagnostics.gap_count;
    let t = &run.report.transcript;
    Ok(BenchRow {
        n,
        beta,
        lp: run.params.pivot_len,
        seed,
        k,
        k_prime,
        matched_fraction: k_prime as f64 / k as f64,
        incorrect_match_fraction: stats.incorrect_fraction(),
        pre_ecc_ber: run.pre_ecc_errors() as f64 / n as f64,
        post_ecc_ber: run.post_ecc_errors() as f64 / n as f64,
        bits_total: t.total_bits(),
        bits_stage1: t.stage_total(1),
        bits_stage2: t.stage_total(2),
        bits_stage3: t.stage_total(3),
        bits_bound_109: bits_bound_109(n, beta),
        bits_lower_ref: bits_lower_ref(n, beta),
        mean_delta_log_f,
        matched_gap_deletions,
        graph_vertices: run.report.diagnostics.graph_vertices,
        matching_ms: run.report.diagnostics.timings.matching_ms,
        wall_time_ms,
    })
}

/// Run the whole sweep; rows come back in deterministic cell/trial order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for (ci, (n, beta, lp)) in cfg.cells().into_iter().enumerate() {
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.master_seed, ((ci as u64) << 32) | trial as u64);
            rows.push(run_trial(n, beta, lp, seed)?);
        }
    }
    Ok(rows)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Full CSV document: schema line, header, data rows, then per-cell summary
/// comment lines (recomputable from the raw rows).
pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    // group by (n, beta, lp) preserving first-seen order
    let mut cells: Vec<(usize, f64, usize)> = Vec::new();
    for r in rows {
        let key = (r.n, r.beta, r.lp);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    for (n, beta, lp) in cells {
        let cell: Vec<&BenchRow> = rows
            .iter()
            .filter(|r| r.n == n && r.beta == beta && r.lp == lp)
            .collect();
        let stat = |f: &dyn Fn(&BenchRow) -> f64| {
            let vals: Vec<f64> = cell.iter().map(|r| f(r)).collect();
            mean_std(&vals)
        };
        let (mf_m, mf_s) = stat(&|r| r.matched_fraction);
        let (inc_m, inc_s) = stat(&|r| r.incorrect_match_fraction);
        let (pre_m, pre_s) = stat(&|r| r.pre_ecc_ber);
        let (post_m, post_s) = stat(&|r| r.post_ecc_ber);
        let (bits_m, bits_s) = stat(&|r| r.bits_total as f64);
        out.push_str(&format!(
            "# summary n={n} beta={beta} lp={lp} trials={} matched_fraction={mf_m:.6}±{mf_s:.6} incorrect={inc_m:.6}±{inc_s:.6} pre_ecc_ber={pre_m:.8}±{pre_s:.8} post_ecc_ber={post_m:.8}±{post_s:.8} bits_total={bits_m:.1}±{bits_s:.1}\n",
            cell.len()
        ));
    }
    out
}
