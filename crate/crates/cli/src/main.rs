//! Command line front end: instance generation, single synchronization runs,
//! parameter sweeps, and matching-graph dumps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use delsync::bits::BitString;
use delsync::deletion::DeletionPattern;
use delsync::gapsync::{SyncParams, SyncStatus};
use delsync::harness::{self, BenchConfig};
use delsync::matching;
use delsync::partition::{partition, PartitionParams};
use delsync::protocol::{run_pair, ProtocolConfig, SyncReport};
use delsync::Error;

/// Output directory used to resolve relative output paths.
const OUT_DIR_ENV: &str = "DELSYNC_OUT_DIR";

#[derive(Parser)]
#[command(name = "delsync", about = "Synchronize binary files across a deletion channel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance: source file, deleted copy, and the mask.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "x.bits")]
        out_x: PathBuf,
        #[arg(long, default_value = "y.bits")]
        out_y: PathBuf,
        #[arg(long, default_value = "mask.bits")]
        out_mask: PathBuf,
    },
    /// Run the protocol between two bit files and write the reconstruction.
    Sync {
        /// Node A's file (the source).
        #[arg(long)]
        x: PathBuf,
        /// Node B's file (the deleted copy).
        #[arg(long)]
        y: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "xhat.bits")]
        xhat_out: PathBuf,
        #[arg(long, default_value = "report.json")]
        report_out: PathBuf,
    },
    /// Seeded parameter sweep; emits one CSV row per trial.
    Bench {
        #[arg(long, required = true, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long, required = true, num_args = 1..)]
        beta: Vec<f64>,
        /// Pivot-length overrides; omit to use the derived default.
        #[arg(long, num_args = 0..)]
        lp: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Dump the matching graph as DOT plus a vertex CSV.
    GraphDump {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Deletion mask; enables good/bad vertex flags.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "graph.dot")]
        dot_out: PathBuf,
        #[arg(long, default_value = "vertices.csv")]
        csv_out: PathBuf,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Deletion rate the run is tuned for.
    #[arg(long)]
    beta: f64,
    /// Pivot length override.
    #[arg(long)]
    lp: Option<usize>,
    /// Segment length override.
    #[arg(long)]
    seg: Option<usize>,
    #[arg(long, default_value_t = 1.3)]
    margin: f64,
    /// Anchor length override for gap recovery.
    #[arg(long)]
    anchor_len: Option<usize>,
    #[arg(long, default_value_t = 32)]
    hash_bits: u32,
    #[arg(long, default_value_t = 200)]
    max_iter: u32,
    /// Session seed (code and permutation seeds derive from it).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ParamArgs {
    fn to_config(&self, n: usize) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::new(n, self.beta, self.seed);
        cfg.pivot_len = self.lp;
        cfg.segment_len = self.seg;
        cfg.margin = self.margin;
        cfg.max_iter = self.max_iter;
        cfg.sync = SyncParams {
            hash_bits: self.hash_bits,
            anchor_len_override: self.anchor_len,
            ..SyncParams::default()
        };
        cfg
    }
}

#[derive(Serialize)]
struct ReportJson {
    n: usize,
    beta: f64,
    segment_count: usize,
    gap_count: usize,
    matched_pivots: usize,
    matched_fraction: f64,
    gap_status_counts: GapStatusCounts,
    bits_stage1: u64,
    bits_stage2: u64,
    bits_stage3: u64,
    bits_total: u64,
    bits_a_to_b: u64,
    bits_b_to_a: u64,
    framing_bits: u64,
    rounds: u64,
    decode_converged: bool,
    decode_iterations: u32,
    pre_ecc_mismatch_fraction: f64,
    post_ecc_mismatch_fraction: f64,
    synchronized: bool,
    timings: TimingsJson,
}

#[derive(Serialize)]
struct GapStatusCounts {
    verified: usize,
    unverified_fallback: usize,
    length_anomaly: usize,
}

#[derive(Serialize)]
struct TimingsJson {
    matching_ms: f64,
    gaps_ms: f64,
    decode_ms: f64,
}

fn report_json(report: &SyncReport, x: &BitString, beta: f64) -> ReportJson {
    let d = &report.diagnostics;
    let n = x.len();
    let statuses = &d.gap_statuses;
    let count = |s: SyncStatus| statuses.iter().filter(|&&g| g == s).count();
    let t = &report.transcript;
    ReportJson {
        n,
        beta,
        segment_count: d.segment_count,
        gap_count: d.gap_count,
        matched_pivots: d.matched_indices.len(),
        matched_fraction: d.gap_count as f64 / d.segment_count as f64,
        gap_status_counts: GapStatusCounts {
            verified: count(SyncStatus::Verified),
            unverified_fallback: count(SyncStatus::UnverifiedFallback),
            length_anomaly: count(SyncStatus::LengthAnomaly),
        },
        bits_stage1: t.stage_total(1),
        bits_stage2: t.stage_total(2),
        bits_stage3: t.stage_total(3),
        bits_total: t.total_bits(),
        bits_a_to_b: t.bits_a_to_b(),
        bits_b_to_a: t.bits_b_to_a(),
        framing_bits: t.framing_bits,
        rounds: t.rounds,
        decode_converged: d.decode_converged,
        decode_iterations: d.decode_iterations,
        pre_ecc_mismatch_fraction: report.x_tilde.hamming(x) as f64 / n as f64,
        post_ecc_mismatch_fraction: report.x_hat.hamming(x) as f64 / n as f64,
        synchronized: report.x_hat == *x,
        timings: TimingsJson {
            matching_ms: d.timings.matching_ms,
            gaps_ms: d.timings.gaps_ms,
            decode_ms: d.timings.decode_ms,
        },
    }
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

fn read_bits(path: &Path) -> anyhow::Result<BitString> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let bits = BitString::read_packed(&mut BufReader::new(file))
        .with_context(|| format!("read {}", path.display()))?;
    Ok(bits)
}

fn write_bits(path: &Path, bits: &BitString) -> anyhow::Result<()> {
    let path = resolve_out(path);
    let file = File::create(&path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    bits.write_packed(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let path = resolve_out(path);
    std::fs::write(&path, text).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            n,
            beta,
            seed,
            out_x,
            out_y,
            out_mask,
        } => {
            let instance = delsync::gen_instance(n, beta, seed)?;
            write_bits(&out_x, &instance.x)?;
            write_bits(&out_y, &instance.y)?;
            write_bits(&out_mask, instance.pattern.mask())?;
            println!(
                "generated n={n} beta={beta} seed={seed}: |Y|={} ({} deletions)",
                instance.y.len(),
                instance.pattern.weight()
            );
            Ok(0)
        }
        Command::Sync {
            x,
            y,
            params,
            xhat_out,
            report_out,
        } => {
            let x_bits = read_bits(&x)?;
            let y_bits = read_bits(&y)?;
            let cfg = params.to_config(x_bits.len());
            let report = run_pair(&x_bits, &y_bits, &cfg)?;
            let json = report_json(&report, &x_bits, params.beta);
            write_bits(&xhat_out, &report.x_hat)?;
            write_text(&report_out, &serde_json::to_string_pretty(&json)?)?;
            println!(
                "synchronized={} bits_total={} (stage1={} stage2={} stage3={})",
                json.synchronized, json.bits_total, json.bits_stage1, json.bits_stage2, json.bits_stage3
            );
            Ok(if json.synchronized { 0 } else { 1 })
        }
        Command::Bench {
            n,
            beta,
            lp,
            trials,
            seed,
            out,
        } => {
            let lp_list: Vec<Option<usize>> = if lp.is_empty() {
                vec![None]
            } else {
                lp.into_iter().map(Some).collect()
            };
            let cfg = BenchConfig {
                n_list: n,
                beta_list: beta,
                lp_list,
                trials,
                master_seed: seed,
            };
            let rows = harness::run_bench(&cfg)?;
            write_text(&out, &harness::render_csv(&rows))?;
            println!("wrote {} rows to {}", rows.len(), resolve_out(&out).display());
            Ok(0)
        }
        Command::GraphDump {
            x,
            y,
            mask,
            params,
            dot_out,
            csv_out,
        } => {
            let x_bits = read_bits(&x)?;
            let y_bits = read_bits(&y)?;
            let cfg = params.to_config(x_bits.len());
            let pp: PartitionParams = cfg.partition_params()?;
            let part = partition(&x_bits, pp)?;
            let pivots = part.pivots(&x_bits);
            let graph = matching::build_graph(&y_bits, &pivots, pp);
            write_text(&dot_out, &matching::dot_dump(&graph))?;
            let truth = match &mask {
                Some(path) => {
                    let mask_bits = read_bits(path)?;
                    Some(DeletionPattern::new(mask_bits, params.beta)?)
                }
                None => None,
            };
            let csv = matching::vertex_csv(&graph, truth.as_ref().map(|p| (&part, p)));
            write_text(&csv_out, &csv)?;
            println!(
                "dumped {} vertices across {} layers",
                graph.vertex_count(),
                graph.layers.len()
            );
            Ok(0)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::BadFormat(_)) | Some(Error::Io(_)) => 2,
        Some(Error::ProtocolAbort(_)) => 3,
        _ => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
