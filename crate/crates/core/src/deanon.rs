//! Combining detection events into deanonymization evidence.
//!
//! Suppose account posts on a monitored board are timestamped, and the
//! detector watches a suspect's link around each post. Each watch either
//! fires (the suspect appeared to load the board when the post was made)
//! or not. Given the detector's calibrated false-positive and
//! false-negative rates, the independent hits and misses combine into a
//! likelihood ratio and a posterior for the hypothesis that the suspect
//! is the poster.

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

/// One monitored post: when it appeared and whether the detector fired
/// on the suspect's link around that time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PostEvent {
    pub post_time: DateTime<Utc>,
    pub detected: bool,
}

/// A chronologically ordered set of post events.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EventLog {
    events: Vec<PostEvent>,
}

impl EventLog {
    /// Build a log, requiring strictly increasing post times so each
    /// event is a distinct observation.
    pub fn new(events: Vec<PostEvent>) -> Result<Self> {
        for (k, w) in events.windows(2).enumerate() {
            if w[1].post_time <= w[0].post_time {
                return Err(Error::invalid(format!(
                    "post times must be strictly increasing (events {} and {})",
                    k,
                    k + 1
                )));
            }
        }
        Ok(EventLog { events })
    }

    pub fn events(&self) -> &[PostEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events where the detector fired.
    pub fn hits(&self) -> usize {
        self.events.iter().filter(|e| e.detected).count()
    }

    /// Number of events where it did not.
    pub fn misses(&self) -> usize {
        self.events.len() - self.hits()
    }
}

/// The expected rate at which an innocent user's sessions overlap posting
/// times: with sessions averaging `avg_session` out of every `window` of
/// the same time unit, a detector watching at a random post time sees
/// the user online with probability `avg_session / window`.
pub fn session_overlap_fp(avg_session: f64, window: f64) -> Result<f64> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid("window must be finite and positive"));
    }
    if !(avg_session.is_finite() && avg_session > 0.0 && avg_session <= window) {
        return Err(Error::invalid(
            "avg_session must be positive and no longer than the window",
        ));
    }
    Ok(avg_session / window)
}

/// Combined evidence over an event log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedEvidence {
    /// Posterior probability that the suspect is the poster.
    pub posterior: f64,
    /// Log-likelihood ratio contributed by the events.
    pub log_likelihood_ratio: f64,
    pub hits: usize,
    pub misses: usize,
}

/// Combine an event log into a posterior, treating events as independent.
///
/// A hit multiplies the odds by `(1 - fn_rate) / fp`; a miss by
/// `fn_rate / (1 - fp)`. `fp` is the probability the detector fires on
/// an innocent user (e.g. from [`session_overlap_fp`] times the
/// fingerprint's false-positive bound), `fn_rate` the probability it
/// stays silent on the true poster. The result only depends on the hit
/// and miss counts, so event order cannot perturb it.
pub fn combine_evidence(
    log: &EventLog,
    fp: f64,
    fn_rate: f64,
    prior: f64,
) -> Result<CombinedEvidence> {
    for (name, v) in [("fp", fp), ("fn_rate", fn_rate), ("prior", prior)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!(
                "{name} must lie strictly between 0 and 1, got {v}"
            )));
        }
    }
    let hits = log.hits();
    let misses = log.misses();
    let llr =
        hits as f64 * ((1.0 - fn_rate) / fp).ln() + misses as f64 * (fn_rate / (1.0 - fp)).ln();
    let posterior = if llr == 0.0 {
        prior
    } else {
        let logit = (prior / (1.0 - prior)).ln();
        1.0 / (1.0 + (-(logit + llr)).exp())
    };
    Ok(CombinedEvidence {
        posterior,
        log_likelihood_ratio: llr,
        hits,
        misses,
    })
}
