//! The `e2e` subcommand: generate a labeled corpus, push every sample
//! through the probed link, recover the series, calibrate every site at
//! each target false-positive preset, and write a machine-readable
//! summary.
//!
//! Everything written under the output directory is a pure function of
//! the config (and an optional `--seed` override): file contents are
//! byte-identical across reruns. Timing goes to stderr only.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use rta_core::dtw::DtwConfig;
use rta_core::error::{Error, Result};
use rta_core::fingerprint::{fn_curve, CalibrationConfig, SiteSamples, TARGET_FP_PRESETS};
use rta_core::formats::{self, ManifestEntry, Provenance};
use rta_core::link_sim::{service_time, simulate, LinkConfig, NoiseKind, PacketArrival};
use rta_core::recovery::{recover, RecoveredSeries};
use rta_core::seeds;
use rta_core::traffic::{generate, SiteProfile};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    /// Root seed; overridable with the global `--seed` flag.
    seed: u64,
    samples_per_site: usize,
    #[serde(default = "default_noise_floor")]
    noise_floor_ms: f64,
    #[serde(default = "default_confidence")]
    confidence: f64,
    #[serde(default = "default_target_fps")]
    target_fps: Vec<f64>,
    /// How long the probes keep running past the last possible packet,
    /// so every queue is observed draining back to idle.
    #[serde(default = "default_probe_tail")]
    probe_tail_ms: f64,
    /// Link config TOML, relative to this file. Its probe_count is
    /// ignored: the experiment derives one schedule covering the
    /// longest sample plus the tail.
    link: String,
    #[serde(default)]
    dtw: DtwSection,
    sites: Vec<SiteRef>,
}

fn default_noise_floor() -> f64 {
    1.0
}
fn default_confidence() -> f64 {
    0.95
}
fn default_target_fps() -> Vec<f64> {
    TARGET_FP_PRESETS.to_vec()
}
fn default_probe_tail() -> f64 {
    100.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteRef {
    /// Site profile TOML, relative to the experiment config.
    profile: String,
}

#[derive(Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct DtwSection {
    window: Option<usize>,
    normalize: bool,
    weights: [f64; 3],
    trim_zeros: bool,
}

impl Default for DtwSection {
    fn default() -> Self {
        DtwSection {
            window: None,
            normalize: true,
            weights: [1.0, 1.0, 1.0],
            trim_zeros: false,
        }
    }
}

impl DtwSection {
    fn to_config(&self) -> DtwConfig<f64> {
        DtwConfig {
            window: self.window,
            normalize: self.normalize,
            weights: (self.weights[0], self.weights[1], self.weights[2]),
            trim_zeros: self.trim_zeros,
        }
    }
}

/// Everything that determined the run, for the record — semantic
/// parameters only, no filesystem paths, no timings.
#[derive(Serialize)]
struct Summary {
    seed: u64,
    samples_per_site: usize,
    noise_floor_ms: f64,
    confidence: f64,
    probe_count: usize,
    link: LinkSummary,
    dtw: DtwSection,
    sites: Vec<String>,
    presets: Vec<PresetSummary>,
}

#[derive(Serialize)]
struct LinkSummary {
    downstream_bandwidth_bps: f64,
    base_rtt_ms: f64,
    mtu_bytes: u32,
    probe_period_ms: f64,
    noise_kind: NoiseKind,
    noise_magnitude_ms: f64,
}

#[derive(Serialize)]
struct PresetSummary {
    target_fp: f64,
    reports: Vec<ReportSummary>,
}

#[derive(Serialize)]
struct ReportSummary {
    site_id: String,
    threshold: f64,
    fp_hat: f64,
    fp_ci_upper: f64,
    fn_hat: f64,
    degenerate: bool,
}

fn io_at(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn run(cli_seed: Option<u64>, config_path: PathBuf, out_dir: PathBuf) -> Result<()> {
    let started = Instant::now();

    let raw = fs::read_to_string(&config_path).map_err(|e| io_at(&config_path, e))?;
    let file: ExperimentFile = toml::from_str(&raw)
        .map_err(|e| Error::invalid(format!("{}: {e}", config_path.display())))?;
    let seed = cli_seed.unwrap_or(file.seed);

    if file.samples_per_site < 2 {
        return Err(Error::invalid(
            "samples_per_site must be at least 2 (leave-one-out needs a pair)",
        ));
    }
    if file.sites.len() < 2 {
        return Err(Error::invalid("an experiment needs at least two sites"));
    }
    if file.target_fps.is_empty() {
        return Err(Error::invalid("target_fps must not be empty"));
    }
    for &f in &file.target_fps {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!(
                "target_fp {f} must lie strictly between 0 and 1"
            )));
        }
    }

    let base = config_path.parent().unwrap_or(Path::new(""));
    let link_template: LinkConfig<f64> = formats::read_link_toml(&base.join(&file.link))?;
    let profiles: Vec<SiteProfile<f64>> = file
        .sites
        .iter()
        .map(|s| formats::read_site_profile_toml(&base.join(&s.profile)))
        .collect::<Result<_>>()?;
    {
        let mut ids: Vec<&str> = profiles.iter().map(|p| p.site_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("site profiles must have distinct site_id values"));
        }
    }

    // Pass 1: generate all traffic, so one probe schedule can cover the
    // longest sample through its full drain.
    let bw = link_template.downstream_bandwidth_bps;
    let mut traffic: Vec<Vec<Vec<PacketArrival<f64>>>> = Vec::with_capacity(profiles.len());
    let mut horizon_ms = 0.0f64;
    for (i, profile) in profiles.iter().enumerate() {
        let site_seed = seeds::derive(seed, "site", i as u64);
        let mut site_traffic = Vec::with_capacity(file.samples_per_site);
        for k in 0..file.samples_per_site as u64 {
            let sample = generate(profile, seeds::derive(site_seed, "traffic", k))?;
            let last_arrival = sample.last().map(|p| p.time_ms).unwrap_or(0.0);
            let mut drain = 0.0;
            for pkt in &sample {
                drain += service_time(pkt.size_bytes, bw)?;
            }
            horizon_ms = horizon_ms.max(last_arrival + drain);
            site_traffic.push(sample);
        }
        traffic.push(site_traffic);
    }
    let probe_count =
        ((horizon_ms + file.probe_tail_ms) / link_template.probe_period_ms).ceil() as usize + 1;

    // Pass 2: simulate, recover, and persist every sample.
    let series_dir = out_dir.join("series");
    fs::create_dir_all(&series_dir).map_err(|e| io_at(&series_dir, e))?;
    let mut entries = Vec::new();
    let mut corpus: Vec<SiteSamples<f64>> = Vec::with_capacity(profiles.len());
    for (i, profile) in profiles.iter().enumerate() {
        let site_seed = seeds::derive(seed, "site", i as u64);
        let mut samples: Vec<RecoveredSeries<f64>> = Vec::with_capacity(file.samples_per_site);
        for k in 0..file.samples_per_site as u64 {
            let mut link = link_template.clone();
            link.probe_count = probe_count;
            link.noise.seed = seeds::derive(site_seed, "noise", k);
            let trace = simulate(&traffic[i][k as usize], &link)?;
            let series = recover(&trace, file.noise_floor_ms)?;
            let rel = format!("series/site{i:02}_sample{k:03}.csv");
            let prov = Provenance::new(format!("e2e site={i} sample={k}")).with_seed(seed);
            formats::write_series_csv(&out_dir.join(&rel), &series, Some(&prov))?;
            entries.push(ManifestEntry {
                site_id: profile.site_id.clone(),
                sample_index: k,
                series_file: rel,
            });
            samples.push(series);
        }
        corpus.push(SiteSamples {
            site_id: profile.site_id.clone(),
            samples,
        });
    }
    formats::write_manifest(
        &out_dir.join("manifest.csv"),
        &entries,
        Some(&Provenance::new("e2e manifest").with_seed(seed)),
    )?;

    println!(
        "sites={} samples_per_site={} probe_count={probe_count}",
        profiles.len(),
        file.samples_per_site
    );

    // Pass 3: calibrate the whole corpus at every preset.
    let dtw_cfg = file.dtw.to_config();
    let mut presets = Vec::with_capacity(file.target_fps.len());
    for &target_fp in &file.target_fps {
        let cal_cfg = CalibrationConfig {
            dtw: dtw_cfg,
            target_fp,
            confidence: file.confidence,
        };
        let curve = fn_curve(&corpus, &cal_cfg)?;
        let prov = Provenance::new(format!("e2e target_fp={target_fp}")).with_seed(seed);
        formats::write_calibration_csv(
            &out_dir.join(format!("calibration_fp{target_fp}.csv")),
            &curve.reports,
            Some(&prov),
        )?;
        formats::write_curve_csv(
            &out_dir.join(format!("curve_fp{target_fp}.csv")),
            &curve.histogram,
            Some(&prov),
        )?;
        for r in &curve.reports {
            println!(
                "preset={target_fp} site={} threshold={} fp_hat={} fn_hat={} degenerate={}",
                r.site_id, r.threshold, r.fp_estimate, r.fn_estimate, r.degenerate
            );
        }
        presets.push(PresetSummary {
            target_fp,
            reports: curve
                .reports
                .iter()
                .map(|r| ReportSummary {
                    site_id: r.site_id.clone(),
                    threshold: r.threshold,
                    fp_hat: r.fp_estimate,
                    fp_ci_upper: r.fp_ci_upper,
                    fn_hat: r.fn_estimate,
                    degenerate: r.degenerate,
                })
                .collect(),
        });
    }

    let summary = Summary {
        seed,
        samples_per_site: file.samples_per_site,
        noise_floor_ms: file.noise_floor_ms,
        confidence: file.confidence,
        probe_count,
        link: LinkSummary {
            downstream_bandwidth_bps: link_template.downstream_bandwidth_bps,
            base_rtt_ms: link_template.base_rtt_ms,
            mtu_bytes: link_template.mtu_bytes,
            probe_period_ms: link_template.probe_period_ms,
            noise_kind: link_template.noise.kind,
            noise_magnitude_ms: link_template.noise.magnitude_ms,
        },
        dtw: file.dtw.clone(),
        sites: profiles.iter().map(|p| p.site_id.clone()).collect(),
        presets,
    };
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::invalid(format!("summary serialization: {e}")))?;
    json.push('\n');
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, json).map_err(|e| io_at(&summary_path, e))?;

    eprintln!(
        "e2e: wrote {} series and {} presets in {:.2}s",
        entries.len(),
        file.target_fps.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
