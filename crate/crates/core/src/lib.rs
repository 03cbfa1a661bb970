//! Offline laboratory for remote traffic analysis on shared last-mile
//! links.
//!
//! The pipeline mirrors an attack that needs no access to the victim's
//! host or network path beyond the public internet:
//!
//! 1. [`link_sim`] — a FIFO bottleneck carries victim packets and
//!    attacker probes; probe RTTs leak the queue backlog.
//! 2. [`recovery`] — probe RTTs are inverted into per-interval estimates
//!    of the victim's traffic pattern.
//! 3. [`dtw`] / [`fingerprint`] — recovered patterns are matched against
//!    site fingerprints by dynamic-time-warping distance, with detection
//!    thresholds calibrated to a target false-positive rate via exact
//!    binomial upper confidence bounds.
//! 4. [`deanon`] — repeated detections are combined into a posterior
//!    that a pseudonymous activity stream belongs to the victim.
//!
//! Supporting modules: [`traffic`] (synthetic page-load generator),
//! [`bandwidth`] (packet-train bandwidth estimation for attack setup),
//! [`formats`] (CSV/TOML interchange), [`seeds`] (deterministic seed
//! splitting).
//!
//! All continuous quantities are generic over a [`Scalar`] (`f32` or
//! `f64`); the aliases at the crate root fix `f64`, which is what the
//! command-line tool and the file formats use.

pub mod bandwidth;
pub mod deanon;
pub mod dtw;
pub mod error;
pub mod fingerprint;
pub mod formats;
pub mod link_sim;
pub mod recovery;
pub mod scalar;
pub mod seeds;
pub mod traffic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Bottleneck link and probing configuration at default precision.
pub type LinkConfig = link_sim::LinkConfig<f64>;
/// RTT noise model at default precision.
pub type NoiseModel = link_sim::NoiseModel<f64>;
/// One victim packet at default precision.
pub type PacketArrival = link_sim::PacketArrival<f64>;
/// Probe RTT trace at default precision.
pub type RttTrace = link_sim::RttTrace<f64>;
/// Recovered traffic-pattern series at default precision.
pub type RecoveredSeries = recovery::RecoveredSeries<f64>;
/// DTW configuration at default precision.
pub type DtwConfig = dtw::DtwConfig<f64>;
/// One site's labelled samples at default precision.
pub type SiteSamples = fingerprint::SiteSamples<f64>;
/// A site fingerprint at default precision.
pub type Fingerprint = fingerprint::Fingerprint<f64>;
/// Threshold-calibration outcome at default precision.
pub type CalibrationReport = fingerprint::CalibrationReport<f64>;
/// Synthetic site profile at default precision.
pub type SiteProfile = traffic::SiteProfile<f64>;
/// One origin server within a site profile, at default precision.
pub type ServerProfile = traffic::ServerProfile<f64>;
