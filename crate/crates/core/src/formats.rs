//! On-disk formats for traces, series, corpora, and reports.
//!
//! All tabular files are CSV with a leading block of `#` comment lines.
//! Comment lines of the form `# key=value` carry file-level metadata
//! (e.g. the probe period a trace was captured with) and the provenance
//! of the run that produced the file; readers ignore unknown keys.
//! Floating-point values are written in shortest-roundtrip form, so a
//! write/read cycle reproduces them bit for bit. Parse errors carry
//! 1-based line numbers (0 when a failure cannot be attributed to a
//! single line). Link and site-profile configuration is TOML.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Deserialize;

use crate::deanon::{EventLog, PostEvent};
use crate::error::{Error, Result};
use crate::fingerprint::{CalibrationReport, SiteSamples};
use crate::link_sim::{LinkConfig, NoiseKind, NoiseModel, PacketArrival, RttTrace};
use crate::recovery::{RecoveredSeries, Units};
use crate::scalar::Scalar;
use crate::traffic::{ServerProfile, SiteProfile};

/// Identity of the run that produced a file, written as leading comment
/// lines. Deliberately carries no timestamps so identical runs produce
/// identical files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// The command line (or description) that produced the file.
    pub command: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: impl Into<String>) -> Self {
        Provenance {
            tool: "rta".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# tool={}", self.tool),
            format!("# version={}", self.version),
            format!("# command={}", self.command),
        ];
        if let Some(seed) = self.seed {
            lines.push(format!("# seed={seed}"));
        }
        lines
    }
}

// ---------------------------------------------------------------------------
// Shared CSV plumbing
// ---------------------------------------------------------------------------

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::format(line, e.to_string())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Leading `# key=value` lines of a file.
fn parse_metadata(content: &str) -> HashMap<String, String> {
    content
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let body = l.trim_start_matches('#').trim();
            body.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

struct CsvContent {
    metadata: HashMap<String, String>,
    records: Vec<csv::StringRecord>,
}

/// Parse a commented CSV file and check its header.
fn parse_csv(content: &str, expected_header: &[&str]) -> Result<CsvContent> {
    let metadata = parse_metadata(content);
    let header_line = content.lines().take_while(|l| l.starts_with('#')).count() as u64 + 1;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(content.as_bytes());
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected_header {
        return Err(Error::format(
            header_line,
            format!(
                "expected header `{}`, found `{}`",
                expected_header.join(","),
                found.join(",")
            ),
        ));
    }
    let records: std::result::Result<Vec<csv::StringRecord>, csv::Error> = rdr.records().collect();
    Ok(CsvContent {
        metadata,
        records: records.map_err(csv_error)?,
    })
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    rec.get(idx)
        .ok_or_else(|| Error::format(record_line(rec), format!("missing column `{name}`")))
}

fn parse_field<N: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<N>
where
    N::Err: std::fmt::Display,
{
    let s = field(rec, idx, name)?;
    s.parse().map_err(|e| {
        Error::format(
            record_line(rec),
            format!("column `{name}`: cannot parse `{s}`: {e}"),
        )
    })
}

/// Floating-point fields are parsed as `f64` (exact for the default
/// precision) and then converted to `T`.
fn parse_scalar_field<T: Scalar>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    Ok(T::from_f64_lossy(parse_field::<f64>(rec, idx, name)?))
}

fn meta_scalar<T: Scalar>(meta: &HashMap<String, String>, key: &str) -> Result<T> {
    let s = meta
        .get(key)
        .ok_or_else(|| Error::format(0, format!("missing `# {key}=` metadata line")))?;
    let v: f64 = s
        .parse()
        .map_err(|e| Error::format(0, format!("metadata `{key}`: cannot parse `{s}`: {e}")))?;
    Ok(T::from_f64_lossy(v))
}

/// Serialize comment lines plus CSV records and write the file.
fn write_csv(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(header).map_err(csv_error)?;
    for row in rows {
        wtr.write_record(&row).map_err(csv_error)?;
    }
    let body = wtr
        .into_inner()
        .map_err(|e| Error::format(0, e.to_string()))?;
    let mut buf = String::new();
    for c in comments {
        buf.push_str(c);
        buf.push('\n');
    }
    buf.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    fs::write(path, buf).map_err(|e| Error::from(e).with_path(path))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))
}

fn prov_comments(prov: Option<&Provenance>) -> Vec<String> {
    prov.map(|p| p.comment_lines()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Victim traffic traces: time_ms,size_bytes
// ---------------------------------------------------------------------------

const TRAFFIC_HEADER: [&str; 2] = ["time_ms", "size_bytes"];

pub fn write_traffic_csv<T: Scalar>(
    path: &Path,
    trace: &[PacketArrival<T>],
    prov: Option<&Provenance>,
) -> Result<()> {
    let rows = trace
        .iter()
        .map(|p| vec![p.time_ms.to_string(), p.size_bytes.to_string()]);
    write_csv(path, &prov_comments(prov), &TRAFFIC_HEADER, rows)
}

/// Read a packet trace. Rows are validated individually (finite
/// non-negative times, positive sizes); ordering is the caller's
/// concern — see `traffic::load_trace` for the sorted, simulation-ready
/// variant.
pub fn read_traffic_csv<T: Scalar>(path: &Path) -> Result<Vec<PacketArrival<T>>> {
    parse_traffic_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_traffic_str<T: Scalar>(content: &str) -> Result<Vec<PacketArrival<T>>> {
    let parsed = parse_csv(content, &TRAFFIC_HEADER)?;
    let mut out = Vec::with_capacity(parsed.records.len());
    for rec in &parsed.records {
        let time_ms: T = parse_scalar_field(rec, 0, "time_ms")?;
        if !time_ms.is_finite() || time_ms < T::zero() {
            return Err(Error::format(
                record_line(rec),
                "time_ms must be finite and non-negative",
            ));
        }
        let size_bytes: u64 = parse_field(rec, 1, "size_bytes")?;
        if size_bytes == 0 {
            return Err(Error::format(record_line(rec), "size_bytes must be positive"));
        }
        out.push(PacketArrival { time_ms, size_bytes });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Probe RTT traces: probe_index,send_ms,rtt_ms (+ # probe_period_ms=)
// ---------------------------------------------------------------------------

const RTT_HEADER: [&str; 3] = ["probe_index", "send_ms", "rtt_ms"];

pub fn write_rtt_csv<T: Scalar>(
    path: &Path,
    trace: &RttTrace<T>,
    prov: Option<&Provenance>,
) -> Result<()> {
    let mut comments = prov_comments(prov);
    comments.push(format!("# probe_period_ms={}", trace.probe_period_ms));
    let rows = trace.rtts.iter().enumerate().map(|(i, rtt)| {
        vec![
            i.to_string(),
            trace.send_time(i).to_string(),
            rtt.map(|r| r.to_string()).unwrap_or_default(),
        ]
    });
    write_csv(path, &comments, &RTT_HEADER, rows)
}

/// Read a probe RTT trace. An empty `rtt_ms` cell marks a lost probe.
/// `probe_index` must run contiguously from 0; `send_ms` is
/// informational (it is derivable from the index and the period).
pub fn read_rtt_csv<T: Scalar>(path: &Path) -> Result<RttTrace<T>> {
    parse_rtt_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_rtt_str<T: Scalar>(content: &str) -> Result<RttTrace<T>> {
    let parsed = parse_csv(content, &RTT_HEADER)?;
    let probe_period_ms: T = meta_scalar(&parsed.metadata, "probe_period_ms")?;
    if !probe_period_ms.is_finite() || probe_period_ms <= T::zero() {
        return Err(Error::format(0, "probe_period_ms must be positive"));
    }
    if parsed.records.is_empty() {
        return Err(Error::format(0, "trace has no probes"));
    }
    let mut rtts = Vec::with_capacity(parsed.records.len());
    for (row, rec) in parsed.records.iter().enumerate() {
        let idx: u64 = parse_field(rec, 0, "probe_index")?;
        if idx != row as u64 {
            return Err(Error::format(
                record_line(rec),
                format!("probe_index must be contiguous from 0; expected {row}, found {idx}"),
            ));
        }
        let _send_ms: f64 = parse_field(rec, 1, "send_ms")?;
        let cell = field(rec, 2, "rtt_ms")?;
        if cell.is_empty() {
            rtts.push(None);
        } else {
            let rtt: T = parse_scalar_field(rec, 2, "rtt_ms")?;
            if !rtt.is_finite() || rtt < T::zero() {
                return Err(Error::format(
                    record_line(rec),
                    "rtt_ms must be finite and non-negative",
                ));
            }
            rtts.push(Some(rtt));
        }
    }
    Ok(RttTrace {
        probe_period_ms,
        rtts,
    })
}

// ---------------------------------------------------------------------------
// Recovered series: interval_index,value,units
// (+ # probe_period_ms=, # noise_floor_ms=)
// ---------------------------------------------------------------------------

const SERIES_HEADER: [&str; 3] = ["interval_index", "value", "units"];

pub fn write_series_csv<T: Scalar>(
    path: &Path,
    series: &RecoveredSeries<T>,
    prov: Option<&Provenance>,
) -> Result<()> {
    let mut comments = prov_comments(prov);
    comments.push(format!("# probe_period_ms={}", series.probe_period_ms));
    comments.push(format!("# noise_floor_ms={}", series.noise_floor_ms));
    let rows = series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string(), series.units.to_string()]);
    write_csv(path, &comments, &SERIES_HEADER, rows)
}

pub fn read_series_csv<T: Scalar>(path: &Path) -> Result<RecoveredSeries<T>> {
    parse_series_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_series_str<T: Scalar>(content: &str) -> Result<RecoveredSeries<T>> {
    let parsed = parse_csv(content, &SERIES_HEADER)?;
    let probe_period_ms: T = meta_scalar(&parsed.metadata, "probe_period_ms")?;
    if !probe_period_ms.is_finite() || probe_period_ms <= T::zero() {
        return Err(Error::format(0, "probe_period_ms must be positive"));
    }
    let noise_floor_ms: T = meta_scalar(&parsed.metadata, "noise_floor_ms")?;
    if !noise_floor_ms.is_finite() || noise_floor_ms < T::zero() {
        return Err(Error::format(0, "noise_floor_ms must be non-negative"));
    }
    if parsed.records.is_empty() {
        return Err(Error::format(0, "series has no rows"));
    }
    let mut units: Option<Units> = None;
    let mut values = Vec::with_capacity(parsed.records.len());
    for (row, rec) in parsed.records.iter().enumerate() {
        let idx: u64 = parse_field(rec, 0, "interval_index")?;
        if idx != row as u64 {
            return Err(Error::format(
                record_line(rec),
                format!("interval_index must be contiguous from 0; expected {row}, found {idx}"),
            ));
        }
        let value: T = parse_scalar_field(rec, 1, "value")?;
        if !value.is_finite() || value < T::zero() {
            return Err(Error::format(
                record_line(rec),
                "value must be finite and non-negative",
            ));
        }
        let row_units: Units = field(rec, 2, "units")?
            .parse()
            .map_err(|e| Error::format(record_line(rec), format!("{e}")))?;
        match units {
            None => units = Some(row_units),
            Some(u) if u != row_units => {
                return Err(Error::format(
                    record_line(rec),
                    format!("mixed units: file started with {u}, found {row_units}"),
                ));
            }
            _ => {}
        }
        values.push(value);
    }
    Ok(RecoveredSeries {
        probe_period_ms,
        values,
        units: units.expect("at least one row"),
        noise_floor_ms,
    })
}

// ---------------------------------------------------------------------------
// Sample manifests: site_id,sample_index,series_file
// ---------------------------------------------------------------------------

const MANIFEST_HEADER: [&str; 3] = ["site_id", "sample_index", "series_file"];

/// One manifest row; `series_file` is relative to the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub site_id: String,
    pub sample_index: u64,
    pub series_file: String,
}

pub fn write_manifest(
    path: &Path,
    entries: &[ManifestEntry],
    prov: Option<&Provenance>,
) -> Result<()> {
    let rows = entries.iter().map(|e| {
        vec![
            e.site_id.clone(),
            e.sample_index.to_string(),
            e.series_file.clone(),
        ]
    });
    write_csv(path, &prov_comments(prov), &MANIFEST_HEADER, rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_manifest_str(content: &str) -> Result<Vec<ManifestEntry>> {
    let parsed = parse_csv(content, &MANIFEST_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(parsed.records.len());
    for rec in &parsed.records {
        let site_id = field(rec, 0, "site_id")?.to_string();
        if site_id.is_empty() {
            return Err(Error::format(record_line(rec), "site_id must be non-empty"));
        }
        let sample_index: u64 = parse_field(rec, 1, "sample_index")?;
        let series_file = field(rec, 2, "series_file")?.to_string();
        if series_file.is_empty() {
            return Err(Error::format(record_line(rec), "series_file must be non-empty"));
        }
        if !seen.insert((site_id.clone(), sample_index)) {
            return Err(Error::format(
                record_line(rec),
                format!("duplicate sample: site `{site_id}` index {sample_index}"),
            ));
        }
        out.push(ManifestEntry {
            site_id,
            sample_index,
            series_file,
        });
    }
    Ok(out)
}

/// Read a manifest and load every referenced series, grouped by site in
/// first-appearance order.
pub fn load_corpus<T: Scalar>(manifest_path: &Path) -> Result<Vec<SiteSamples<T>>> {
    let entries = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut sites: Vec<SiteSamples<T>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for entry in entries {
        let series = read_series_csv(&base.join(&entry.series_file))?;
        match index.get(&entry.site_id) {
            Some(&s) => sites[s].samples.push(series),
            None => {
                index.insert(entry.site_id.clone(), sites.len());
                sites.push(SiteSamples {
                    site_id: entry.site_id,
                    samples: vec![series],
                });
            }
        }
    }
    Ok(sites)
}

// ---------------------------------------------------------------------------
// Calibration reports: site_id,threshold,fp_hat,fp_ci_upper,fn_hat
// ---------------------------------------------------------------------------

const CALIBRATION_HEADER: [&str; 5] = ["site_id", "threshold", "fp_hat", "fp_ci_upper", "fn_hat"];

/// One calibration row as stored on disk. A degenerate calibration is
/// recognizable by a zero threshold together with `fn_hat` of 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRow<T> {
    pub site_id: String,
    pub threshold: T,
    pub fp_hat: f64,
    pub fp_ci_upper: f64,
    pub fn_hat: f64,
}

pub fn write_calibration_csv<T: Scalar>(
    path: &Path,
    reports: &[CalibrationReport<T>],
    prov: Option<&Provenance>,
) -> Result<()> {
    let rows = reports.iter().map(|r| {
        vec![
            r.site_id.clone(),
            r.threshold.to_string(),
            r.fp_estimate.to_string(),
            r.fp_ci_upper.to_string(),
            r.fn_estimate.to_string(),
        ]
    });
    write_csv(path, &prov_comments(prov), &CALIBRATION_HEADER, rows)
}

pub fn read_calibration_csv<T: Scalar>(path: &Path) -> Result<Vec<CalibrationRow<T>>> {
    parse_calibration_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_calibration_str<T: Scalar>(content: &str) -> Result<Vec<CalibrationRow<T>>> {
    let parsed = parse_csv(content, &CALIBRATION_HEADER)?;
    let mut out = Vec::with_capacity(parsed.records.len());
    for rec in &parsed.records {
        let threshold: T = parse_scalar_field(rec, 1, "threshold")?;
        if !threshold.is_finite() || threshold < T::zero() {
            return Err(Error::format(
                record_line(rec),
                "threshold must be finite and non-negative",
            ));
        }
        let mut rates = [0.0f64; 3];
        for (slot, (idx, name)) in rates.iter_mut().zip([
            (2usize, "fp_hat"),
            (3, "fp_ci_upper"),
            (4, "fn_hat"),
        ]) {
            let v: f64 = parse_field(rec, idx, name)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::format(
                    record_line(rec),
                    format!("column `{name}`: rate {v} outside [0, 1]"),
                ));
            }
            *slot = v;
        }
        out.push(CalibrationRow {
            site_id: field(rec, 0, "site_id")?.to_string(),
            threshold,
            fp_hat: rates[0],
            fp_ci_upper: rates[1],
            fn_hat: rates[2],
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Miss-rate curves: fn_bin_upper,count
// ---------------------------------------------------------------------------

pub fn write_curve_csv(
    path: &Path,
    histogram: &[(f64, usize)],
    prov: Option<&Provenance>,
) -> Result<()> {
    let rows = histogram
        .iter()
        .map(|(upper, count)| vec![upper.to_string(), count.to_string()]);
    write_csv(path, &prov_comments(prov), &["fn_bin_upper", "count"], rows)
}

// ---------------------------------------------------------------------------
// Distance matrices: sample_id,<id>,<id>,...
// ---------------------------------------------------------------------------

pub fn write_matrix_csv<T: Scalar>(
    path: &Path,
    ids: &[String],
    matrix: &[Vec<T>],
    prov: Option<&Provenance>,
) -> Result<()> {
    if matrix.len() != ids.len() || matrix.iter().any(|row| row.len() != ids.len()) {
        return Err(Error::invalid("distance matrix must be square and match ids"));
    }
    let mut header: Vec<&str> = vec!["sample_id"];
    header.extend(ids.iter().map(String::as_str));
    let rows = ids.iter().zip(matrix).map(|(id, row)| {
        let mut cells = Vec::with_capacity(row.len() + 1);
        cells.push(id.clone());
        cells.extend(row.iter().map(|v| v.to_string()));
        cells
    });
    write_csv(path, &prov_comments(prov), &header, rows)
}

// ---------------------------------------------------------------------------
// Post event logs: post_time_iso8601,detected
// ---------------------------------------------------------------------------

const EVENT_HEADER: [&str; 2] = ["post_time_iso8601", "detected"];

pub fn write_event_log_csv(
    path: &Path,
    log: &EventLog,
    prov: Option<&Provenance>,
) -> Result<()> {
    let rows = log.events().iter().map(|e| {
        vec![
            e.post_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            e.detected.to_string(),
        ]
    });
    write_csv(path, &prov_comments(prov), &EVENT_HEADER, rows)
}

pub fn read_event_log_csv(path: &Path) -> Result<EventLog> {
    parse_event_log_str(&read_file(path)?).map_err(|e| e.with_path(path))
}

fn parse_event_log_str(content: &str) -> Result<EventLog> {
    let parsed = parse_csv(content, &EVENT_HEADER)?;
    let mut events: Vec<PostEvent> = Vec::with_capacity(parsed.records.len());
    for rec in &parsed.records {
        let stamp = field(rec, 0, "post_time_iso8601")?;
        let post_time: DateTime<Utc> = DateTime::parse_from_rfc3339(stamp)
            .map_err(|e| {
                Error::format(
                    record_line(rec),
                    format!("cannot parse `{stamp}` as an RFC 3339 timestamp: {e}"),
                )
            })?
            .with_timezone(&Utc);
        let detected = match field(rec, 1, "detected")? {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::format(
                    record_line(rec),
                    format!("column `detected`: expected `true` or `false`, found `{other}`"),
                ));
            }
        };
        if let Some(prev) = events.last() {
            if post_time <= prev.post_time {
                return Err(Error::format(
                    record_line(rec),
                    "post times must be strictly increasing",
                ));
            }
        }
        events.push(PostEvent {
            post_time,
            detected,
        });
    }
    Ok(EventLog::new(events).expect("ordering was checked per row"))
}

// ---------------------------------------------------------------------------
// TOML configuration
// ---------------------------------------------------------------------------

fn toml_error(content: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| content[..s.start.min(content.len())].bytes().filter(|&b| b == b'\n').count() as u64 + 1)
        .unwrap_or(0);
    Error::format(line, e.message().to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default)]
    kind: NoiseKind,
    #[serde(default)]
    magnitude_ms: f64,
    #[serde(default)]
    seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: NoiseKind::None,
            magnitude_ms: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkConfigFile {
    downstream_bandwidth_bps: f64,
    base_rtt_ms: f64,
    mtu_bytes: u32,
    probe_period_ms: f64,
    probe_count: usize,
    #[serde(default)]
    noise: NoiseSection,
}

/// Read and validate a link configuration.
///
/// ```toml
/// downstream_bandwidth_bps = 3e6
/// base_rtt_ms = 40.0
/// mtu_bytes = 1500
/// probe_period_ms = 2.0
/// probe_count = 5000
///
/// [noise]
/// kind = "truncated-gaussian"   # or "none" / "uniform"
/// magnitude_ms = 0.5
/// seed = 7
/// ```
pub fn read_link_toml<T: Scalar>(path: &Path) -> Result<LinkConfig<T>> {
    let content = read_file(path)?;
    parse_link_str(&content).map_err(|e| e.with_path(path))
}

fn parse_link_str<T: Scalar>(content: &str) -> Result<LinkConfig<T>> {
    let file: LinkConfigFile = toml::from_str(content).map_err(|e| toml_error(content, e))?;
    let cfg = LinkConfig {
        downstream_bandwidth_bps: T::from_f64_lossy(file.downstream_bandwidth_bps),
        base_rtt_ms: T::from_f64_lossy(file.base_rtt_ms),
        mtu_bytes: file.mtu_bytes,
        probe_period_ms: T::from_f64_lossy(file.probe_period_ms),
        probe_count: file.probe_count,
        noise: NoiseModel {
            kind: file.noise.kind,
            magnitude_ms: T::from_f64_lossy(file.noise.magnitude_ms),
            seed: file.noise.seed,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerSection {
    rtt_ms: f64,
    objects_bytes: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteProfileFile {
    site_id: String,
    initial_window: f64,
    window_growth: f64,
    mtu_bytes: u32,
    #[serde(default)]
    jitter: f64,
    #[serde(default)]
    think_time_ms: f64,
    servers: Vec<ServerSection>,
}

/// Read and validate a site profile.
///
/// ```toml
/// site_id = "example"
/// initial_window = 2.0
/// window_growth = 2.0
/// mtu_bytes = 1500
/// jitter = 0.1
/// think_time_ms = 30.0
///
/// [[servers]]
/// rtt_ms = 100.0
/// objects_bytes = [4500, 120000]
/// ```
pub fn read_site_profile_toml<T: Scalar>(path: &Path) -> Result<SiteProfile<T>> {
    let content = read_file(path)?;
    parse_site_profile_str(&content).map_err(|e| e.with_path(path))
}

fn parse_site_profile_str<T: Scalar>(content: &str) -> Result<SiteProfile<T>> {
    let file: SiteProfileFile = toml::from_str(content).map_err(|e| toml_error(content, e))?;
    let profile = SiteProfile {
        site_id: file.site_id,
        initial_window: T::from_f64_lossy(file.initial_window),
        window_growth: T::from_f64_lossy(file.window_growth),
        mtu_bytes: file.mtu_bytes,
        jitter: T::from_f64_lossy(file.jitter),
        think_time_ms: T::from_f64_lossy(file.think_time_ms),
        servers: file
            .servers
            .into_iter()
            .map(|s| ServerProfile {
                rtt_ms: T::from_f64_lossy(s.rtt_ms),
                objects_bytes: s.objects_bytes,
            })
            .collect(),
    };
    profile.validate()?;
    Ok(profile)
}
