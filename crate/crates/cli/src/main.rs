//! `rta` — an offline laboratory for last-mile queueing side channels.
//!
//! The pipeline stages are separate subcommands wired together by CSV
//! and TOML files, so each stage can be rerun, inspected, or replaced:
//!
//! ```text
//! gen -> simulate -> recover -> dtw / calibrate / detect / curve
//!                                          \-> deanon
//! ```
//!
//! `e2e` runs the whole pipeline from one experiment config. Exit codes:
//! 0 success, 2 invalid arguments or malformed files, 3 I/O failure.

mod e2e;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rta_core::dtw::{distance_matrix, dtw_distance_detailed, DtwConfig};
use rta_core::error::{Error, Result};
use rta_core::fingerprint::{fn_curve, CalibrationConfig, Fingerprint};
use rta_core::formats::{self, Provenance};
use rta_core::link_sim::simulate;
use rta_core::recovery::{delay_to_bytes, recover_with, RecoveryOptions};
use rta_core::seeds;
use rta_core::traffic::{generate, load_trace};
use rta_core::{bandwidth, deanon};

#[derive(Parser)]
#[command(
    name = "rta",
    version,
    about = "Offline laboratory for last-mile queueing side-channel analysis"
)]
struct Cli {
    /// Root seed; per-site and per-sample randomness is derived from it
    /// as site_seed = derive(seed, "site", site_index), then
    /// derive(site_seed, "traffic"|"noise", sample_index).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic packet trace from a site profile.
    Gen(GenArgs),
    /// Push a packet trace through the probed bottleneck link.
    Simulate(SimulateArgs),
    /// Recover the per-interval service-time series from probe RTTs.
    Recover(RecoverArgs),
    /// Align two recovered series, or build a corpus distance matrix.
    Dtw(DtwCmdArgs),
    /// Calibrate one site's detection threshold against a corpus.
    Calibrate(CalibrateArgs),
    /// Test one sample against a site's fingerprint at a threshold.
    Detect(DetectArgs),
    /// Calibrate every site in a corpus and summarize miss rates.
    Curve(CurveArgs),
    /// Estimate bottleneck bandwidth with a back-to-back packet train.
    Bwest(BwestArgs),
    /// Combine detection events into identification evidence.
    Deanon(DeanonArgs),
    /// Run a complete experiment from a TOML config.
    E2e(E2eArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Site profile TOML.
    #[arg(long)]
    profile: PathBuf,
    /// Output packet-trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Site index in the seed tree.
    #[arg(long, default_value_t = 0)]
    site_index: u64,
    /// Sample index within the site.
    #[arg(long, default_value_t = 0)]
    sample_index: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Link config TOML.
    #[arg(long)]
    link: PathBuf,
    /// Input packet-trace CSV.
    #[arg(long)]
    traffic: PathBuf,
    /// Output probe RTT CSV.
    #[arg(long)]
    out: PathBuf,
    /// Site index in the seed tree (with --seed, reseeds the noise).
    #[arg(long, default_value_t = 0)]
    site_index: u64,
    /// Sample index within the site (with --seed, reseeds the noise).
    #[arg(long, default_value_t = 0)]
    sample_index: u64,
}

#[derive(Args)]
struct RecoverArgs {
    /// Input probe RTT CSV.
    #[arg(long)]
    rtts: PathBuf,
    /// Output recovered-series CSV.
    #[arg(long)]
    out: PathBuf,
    /// Zero out recovered intervals below this (ms).
    #[arg(long, default_value_t = 1.0)]
    noise_floor_ms: f64,
    /// Track the baseline over the last N responded probes instead of
    /// the global minimum.
    #[arg(long)]
    baseline_window: Option<usize>,
    /// Convert the series to bytes (requires --bandwidth-bps).
    #[arg(long, requires = "bandwidth_bps")]
    bytes: bool,
    /// Link bandwidth used for the bytes conversion.
    #[arg(long)]
    bandwidth_bps: Option<f64>,
}

/// Alignment options shared by every distance-computing subcommand.
#[derive(Args, Clone)]
struct DtwOpts {
    /// Band half-width in intervals; omit for the full lattice.
    #[arg(long)]
    window: Option<usize>,
    /// Report the raw path cost instead of the per-step normalized cost.
    #[arg(long)]
    raw: bool,
    /// Step weights: diagonal,horizontal,vertical.
    #[arg(long, default_value = "1,1,1", value_parser = parse_weights)]
    weights: (f64, f64, f64),
    /// Trim leading and trailing zero intervals before aligning.
    #[arg(long)]
    trim_zeros: bool,
}

impl DtwOpts {
    fn to_config(&self) -> DtwConfig<f64> {
        DtwConfig {
            window: self.window,
            normalize: !self.raw,
            weights: self.weights,
            trim_zeros: self.trim_zeros,
        }
    }
}

fn parse_weights(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated weights, e.g. 1,1,1".into());
    }
    let mut w = [0.0f64; 3];
    for (slot, part) in w.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad weight {part:?}: {e}"))?;
    }
    Ok((w[0], w[1], w[2]))
}

#[derive(Args)]
struct DtwCmdArgs {
    /// First series CSV (pair mode; with --b).
    #[arg(long, requires = "b", conflicts_with_all = ["manifest", "matrix_out"])]
    a: Option<PathBuf>,
    /// Second series CSV (pair mode; with --a).
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Corpus manifest CSV (matrix mode; with --matrix-out).
    #[arg(long, requires = "matrix_out")]
    manifest: Option<PathBuf>,
    /// Output CSV for the pairwise distance matrix.
    #[arg(long, requires = "manifest")]
    matrix_out: Option<PathBuf>,
    #[command(flatten)]
    opts: DtwOpts,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Site to calibrate; every other site is the impostor pool.
    #[arg(long)]
    site: String,
    /// False-positive rate the threshold must provably stay below.
    #[arg(long, default_value_t = 0.05)]
    target_fp: f64,
    /// Confidence level of the false-positive bound.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Optional output CSV with the calibration row.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: DtwOpts,
}

#[derive(Args)]
struct DetectArgs {
    /// Corpus manifest CSV providing the site's training samples.
    #[arg(long)]
    manifest: PathBuf,
    /// Site whose fingerprint to use.
    #[arg(long)]
    site: String,
    /// Detection threshold (from a prior calibration).
    #[arg(long)]
    threshold: f64,
    /// Series CSV of the sample to test.
    #[arg(long)]
    sample: PathBuf,
    #[command(flatten)]
    opts: DtwOpts,
}

#[derive(Args)]
struct CurveArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// False-positive rate every threshold must provably stay below.
    #[arg(long, default_value_t = 0.05)]
    target_fp: f64,
    /// Confidence level of the false-positive bound.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Output CSV with one calibration row per site.
    #[arg(long)]
    reports_out: PathBuf,
    /// Output CSV with the cumulative miss-rate histogram.
    #[arg(long)]
    histogram_out: PathBuf,
    #[command(flatten)]
    opts: DtwOpts,
}

#[derive(Args)]
struct BwestArgs {
    /// Link config TOML.
    #[arg(long)]
    link: PathBuf,
    /// Number of probes in the train.
    #[arg(long, default_value_t = 32)]
    probe_count: usize,
    /// Size of each probe in bytes.
    #[arg(long, default_value_t = 1500)]
    probe_size: u64,
    /// Optional cross-traffic CSV sharing the queue.
    #[arg(long)]
    cross: Option<PathBuf>,
}

#[derive(Args)]
struct DeanonArgs {
    /// Event log CSV (post_time_iso8601,detected).
    #[arg(long)]
    events: PathBuf,
    /// Probability the detector fires on an innocent user.
    #[arg(long, conflicts_with_all = ["avg_session", "window"])]
    fp: Option<f64>,
    /// Average online-session length; with --window, the innocent-user
    /// firing probability becomes avg_session/window * detector_fp.
    #[arg(long, requires = "window")]
    avg_session: Option<f64>,
    /// Observation window in the same unit as --avg-session.
    #[arg(long, requires = "avg_session")]
    window: Option<f64>,
    /// Detector false-positive bound multiplied into the overlap rate.
    #[arg(long, default_value_t = 1.0)]
    detector_fp: f64,
    /// Probability the detector stays silent on the true poster.
    #[arg(long)]
    fn_rate: f64,
    /// Prior probability that the suspect is the poster.
    #[arg(long, default_value_t = 0.5)]
    prior: f64,
}

#[derive(Args)]
struct E2eArgs {
    /// Experiment config TOML.
    #[arg(long)]
    config: PathBuf,
    /// Directory to write series, manifest, calibrations, and summary.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rta: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => run_gen(cli.seed, args),
        Command::Simulate(args) => run_simulate(cli.seed, args),
        Command::Recover(args) => run_recover(args),
        Command::Dtw(args) => run_dtw(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::Detect(args) => run_detect(args),
        Command::Curve(args) => run_curve(args),
        Command::Bwest(args) => run_bwest(cli.seed, args),
        Command::Deanon(args) => run_deanon(args),
        Command::E2e(args) => e2e::run(cli.seed, args.config, args.out_dir),
    }
}

fn run_gen(seed: Option<u64>, args: GenArgs) -> Result<()> {
    let root = seed.unwrap_or(0);
    let profile = formats::read_site_profile_toml::<f64>(&args.profile)?;
    let site_seed = seeds::derive(root, "site", args.site_index);
    let gen_seed = seeds::derive(site_seed, "traffic", args.sample_index);
    let traffic = generate(&profile, gen_seed)?;
    let prov = Provenance::new(format!(
        "gen site={} sample={}",
        args.site_index, args.sample_index
    ))
    .with_seed(root);
    formats::write_traffic_csv(&args.out, &traffic, Some(&prov))?;
    println!("packets={}", traffic.len());
    Ok(())
}

fn run_simulate(seed: Option<u64>, args: SimulateArgs) -> Result<()> {
    let mut link = formats::read_link_toml::<f64>(&args.link)?;
    if let Some(root) = seed {
        let site_seed = seeds::derive(root, "site", args.site_index);
        link.noise.seed = seeds::derive(site_seed, "noise", args.sample_index);
    }
    let traffic = load_trace::<f64>(&args.traffic)?;
    let trace = simulate(&traffic, &link)?;
    let mut prov = Provenance::new(format!(
        "simulate site={} sample={}",
        args.site_index, args.sample_index
    ));
    if let Some(root) = seed {
        prov = prov.with_seed(root);
    }
    formats::write_rtt_csv(&args.out, &trace, Some(&prov))?;
    println!("probes={} lost={}", trace.rtts.len(), trace.lost().count());
    Ok(())
}

fn run_recover(args: RecoverArgs) -> Result<()> {
    let trace = formats::read_rtt_csv::<f64>(&args.rtts)?;
    let opts = RecoveryOptions {
        noise_floor_ms: args.noise_floor_ms,
        baseline_window: args.baseline_window,
    };
    let mut series = recover_with(&trace, &opts)?;
    if args.bytes {
        let bw = args.bandwidth_bps.expect("clap enforces --bandwidth-bps");
        series = delay_to_bytes(&series, bw)?;
    }
    let prov = Provenance::new(format!("recover floor={}", args.noise_floor_ms));
    formats::write_series_csv(&args.out, &series, Some(&prov))?;
    let nonzero = series.values.iter().filter(|&&v| v > 0.0).count();
    let sum: f64 = series.values.iter().sum();
    println!(
        "intervals={} nonzero={nonzero} sum={sum} units={}",
        series.values.len(),
        series.units
    );
    Ok(())
}

/// Read every sample listed in a manifest, in manifest order, with ids
/// `site_id:sample_index`. Paths resolve relative to the manifest.
fn load_manifest_samples(
    manifest: &Path,
) -> Result<(Vec<String>, Vec<rta_core::RecoveredSeries>)> {
    let entries = formats::read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut ids = Vec::with_capacity(entries.len());
    let mut samples = Vec::with_capacity(entries.len());
    for entry in entries {
        ids.push(format!("{}:{}", entry.site_id, entry.sample_index));
        samples.push(formats::read_series_csv(&base.join(&entry.series_file))?);
    }
    Ok((ids, samples))
}

fn run_dtw(args: DtwCmdArgs) -> Result<()> {
    let cfg = args.opts.to_config();
    match (&args.a, &args.b, &args.manifest, &args.matrix_out) {
        (Some(a), Some(b), None, None) => {
            let sa = formats::read_series_csv::<f64>(a)?;
            let sb = formats::read_series_csv::<f64>(b)?;
            let out = dtw_distance_detailed(&sa, &sb, &cfg)?;
            println!(
                "distance={} cells_relaxed={} path_len={}",
                out.distance,
                out.cells_relaxed,
                out.path.pairs.len()
            );
            Ok(())
        }
        (None, None, Some(manifest), Some(matrix_out)) => {
            let (ids, samples) = load_manifest_samples(manifest)?;
            let matrix = distance_matrix(&samples, &cfg)?;
            let prov = Provenance::new("dtw matrix");
            formats::write_matrix_csv(matrix_out, &ids, &matrix, Some(&prov))?;
            println!(
                "samples={} pairs={}",
                ids.len(),
                ids.len() * ids.len().saturating_sub(1) / 2
            );
            Ok(())
        }
        _ => Err(Error::invalid(
            "pass either --a/--b for one pair or --manifest/--matrix-out for a corpus matrix",
        )),
    }
}

/// Split a corpus into one site's training samples and everyone else's,
/// preserving corpus order on both sides.
fn split_corpus(
    manifest: &Path,
    site: &str,
) -> Result<(Vec<rta_core::RecoveredSeries>, Vec<rta_core::RecoveredSeries>)> {
    let corpus = formats::load_corpus::<f64>(manifest)?;
    let mut training = None;
    let mut others = Vec::new();
    for group in corpus {
        if group.site_id == site {
            training = Some(group.samples);
        } else {
            others.extend(group.samples);
        }
    }
    let training =
        training.ok_or_else(|| Error::invalid(format!("site {site} not in manifest")))?;
    Ok((training, others))
}

fn run_calibrate(args: CalibrateArgs) -> Result<()> {
    let (training, others) = split_corpus(&args.manifest, &args.site)?;
    let cfg = CalibrationConfig {
        dtw: args.opts.to_config(),
        target_fp: args.target_fp,
        confidence: args.confidence,
    };
    let mut fp = Fingerprint::new(args.site.clone(), training)?;
    let report = fp.calibrate(&others, &cfg)?;
    if let Some(out) = &args.out {
        let prov = Provenance::new(format!(
            "calibrate site={} target_fp={} confidence={}",
            args.site, args.target_fp, args.confidence
        ));
        formats::write_calibration_csv(out, std::slice::from_ref(&report), Some(&prov))?;
    }
    println!(
        "site={} threshold={} fp_hat={} fp_ci_upper={} fn_hat={} degenerate={}",
        report.site_id,
        report.threshold,
        report.fp_estimate,
        report.fp_ci_upper,
        report.fn_estimate,
        report.degenerate
    );
    Ok(())
}

fn run_detect(args: DetectArgs) -> Result<()> {
    let (training, _) = split_corpus(&args.manifest, &args.site)?;
    let mut fp = Fingerprint::new(args.site.clone(), training)?;
    fp.threshold = Some(args.threshold);
    let dtw = args.opts.to_config();
    let sample = formats::read_series_csv::<f64>(&args.sample)?;
    let avg = fp.avg_distance(&sample, &dtw)?;
    let detected = fp.detect(&sample, &dtw)?;
    println!(
        "site={} avg_distance={avg} threshold={} detected={detected}",
        args.site, args.threshold
    );
    Ok(())
}

fn run_curve(args: CurveArgs) -> Result<()> {
    let corpus = formats::load_corpus::<f64>(&args.manifest)?;
    let cfg = CalibrationConfig {
        dtw: args.opts.to_config(),
        target_fp: args.target_fp,
        confidence: args.confidence,
    };
    let curve = fn_curve(&corpus, &cfg)?;
    let prov = Provenance::new(format!(
        "curve target_fp={} confidence={}",
        args.target_fp, args.confidence
    ));
    formats::write_calibration_csv(&args.reports_out, &curve.reports, Some(&prov))?;
    formats::write_curve_csv(&args.histogram_out, &curve.histogram, Some(&prov))?;
    let degenerate = curve.reports.iter().filter(|r| r.degenerate).count();
    println!("sites={} degenerate={degenerate}", curve.reports.len());
    Ok(())
}

fn run_bwest(seed: Option<u64>, args: BwestArgs) -> Result<()> {
    let mut link = formats::read_link_toml::<f64>(&args.link)?;
    if let Some(root) = seed {
        link.noise.seed = seeds::derive(root, "bwest", 0);
    }
    let cross = match &args.cross {
        Some(path) => load_trace::<f64>(path)?,
        None => Vec::new(),
    };
    let responses = bandwidth::simulate_train(&link, args.probe_count, args.probe_size, &cross)?;
    let estimate = bandwidth::estimate_bandwidth(&responses, args.probe_size)?;
    println!("bandwidth_bps={estimate}");
    Ok(())
}

fn run_deanon(args: DeanonArgs) -> Result<()> {
    let log = formats::read_event_log_csv(&args.events)?;
    let fp = match (args.fp, args.avg_session, args.window) {
        (Some(fp), None, None) => fp,
        (None, Some(avg), Some(window)) => {
            deanon::session_overlap_fp(avg, window)? * args.detector_fp
        }
        _ => {
            return Err(Error::invalid(
                "pass either --fp or both --avg-session and --window",
            ))
        }
    };
    let evidence = deanon::combine_evidence(&log, fp, args.fn_rate, args.prior)?;
    println!(
        "events={} hits={} misses={} fp={fp} llr={} posterior={}",
        log.len(),
        evidence.hits,
        evidence.misses,
        evidence.log_likelihood_ratio,
        evidence.posterior
    );
    Ok(())
}
