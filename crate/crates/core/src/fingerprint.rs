//! Website fingerprinting on recovered traffic series.
//!
//! A fingerprint is a set of training series recorded for one site. A
//! fresh sample is attributed to the site when its mean DTW distance to
//! the training set falls strictly below a threshold. Thresholds are
//! calibrated against out-of-class samples so that an exact one-sided
//! binomial (Clopper-Pearson) upper confidence bound on the false-positive
//! rate stays below a target.

use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::dtw::{distance_matrix, dtw_distance, DtwConfig};
use crate::error::{Error, Result};
use crate::recovery::RecoveredSeries;
use crate::scalar::Scalar;

/// Threshold targets commonly used when reporting detector quality.
pub const TARGET_FP_PRESETS: [f64; 3] = [0.005, 0.01, 0.05];

/// Mean of a slice, summed in ascending order so the result is invariant
/// under permutation of the inputs. Values must be finite.
pub(crate) fn stable_mean<T: Scalar>(values: &[T]) -> T {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let sum: T = sorted.into_iter().sum();
    sum / T::from_index(values.len())
}

/// One-sided exact (Clopper-Pearson) upper confidence bound for a
/// binomial proportion after observing `successes` out of `trials`.
///
/// The bound is the smallest rate `p` such that observing at most
/// `successes` successes has probability `1 - confidence` under
/// `Binomial(trials, p)`; it equals the `confidence` quantile of
/// `Beta(successes + 1, trials - successes)`, and 1 when all trials
/// succeeded.
pub fn clopper_pearson_upper(successes: u64, trials: u64, confidence: f64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("confidence bound requires at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid(format!(
            "successes ({successes}) exceed trials ({trials})"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence must lie strictly between 0 and 1"));
    }
    if successes == trials {
        return Ok(1.0);
    }
    let beta = Beta::new((successes + 1) as f64, (trials - successes) as f64)
        .map_err(|e| Error::invalid(format!("invalid beta parameters: {e}")))?;
    // Invert the CDF by bisection: 90 halvings of [0, 1] reach one ulp,
    // which is tighter than library quantile routines guarantee.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Calibration inputs: distance semantics plus the statistical target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationConfig<T> {
    pub dtw: DtwConfig<T>,
    /// The false-positive bound the threshold must stay below.
    pub target_fp: f64,
    /// Confidence level of the one-sided bound, e.g. 0.95.
    pub confidence: f64,
}

impl<T: Scalar> Default for CalibrationConfig<T> {
    fn default() -> Self {
        CalibrationConfig {
            dtw: DtwConfig::default(),
            target_fp: 0.05,
            confidence: 0.95,
        }
    }
}

impl<T: Scalar> CalibrationConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.target_fp > 0.0 && self.target_fp < 1.0) {
            return Err(Error::invalid("target_fp must lie strictly between 0 and 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("confidence must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}

/// Outcome of calibrating one site's threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport<T> {
    pub site_id: String,
    pub target_fp: f64,
    pub confidence: f64,
    /// Chosen threshold; a sample is attributed when its mean distance is
    /// strictly below it.
    pub threshold: T,
    /// Fraction of out-of-class samples the threshold misclassifies.
    pub fp_estimate: f64,
    /// Upper confidence bound on the false-positive rate at `threshold`.
    pub fp_ci_upper: f64,
    /// Leave-one-out miss rate over the training set.
    pub fn_estimate: f64,
    /// True when no threshold satisfied the bound; detection is then
    /// disabled (`threshold` is zero and nothing scores below it).
    pub degenerate: bool,
}

/// Training samples for one site plus an optional calibrated threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint<T> {
    pub site_id: String,
    pub training: Vec<RecoveredSeries<T>>,
    pub threshold: Option<T>,
}

impl<T: Scalar> Fingerprint<T> {
    pub fn new(site_id: impl Into<String>, training: Vec<RecoveredSeries<T>>) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::invalid("a fingerprint needs at least one training sample"));
        }
        Ok(Fingerprint {
            site_id: site_id.into(),
            training,
            threshold: None,
        })
    }

    /// Mean DTW distance from `sample` to every training series.
    pub fn avg_distance(&self, sample: &RecoveredSeries<T>, dtw: &DtwConfig<T>) -> Result<T> {
        let dists: Result<Vec<T>> = self
            .training
            .iter()
            .map(|t| dtw_distance(sample, t, dtw).map(|(d, _)| d))
            .collect();
        Ok(stable_mean(&dists?))
    }

    /// Whether `sample` is attributed to this site: its mean distance to
    /// the training set is strictly below the calibrated threshold.
    pub fn detect(&self, sample: &RecoveredSeries<T>, dtw: &DtwConfig<T>) -> Result<bool> {
        let threshold = self
            .threshold
            .ok_or_else(|| Error::invalid("fingerprint has no calibrated threshold"))?;
        Ok(self.avg_distance(sample, dtw)? < threshold)
    }

    /// Calibrate the detection threshold against out-of-class samples.
    ///
    /// Candidate thresholds are the distinct mean distances of `others`
    /// to the training set, plus zero. The largest candidate whose
    /// Clopper-Pearson upper bound on the false-positive rate stays
    /// strictly below `target_fp` wins. When even zero fails the bound
    /// (too few out-of-class samples), the report is marked degenerate
    /// and the threshold is zero, which never detects anything.
    pub fn calibrate(
        &mut self,
        others: &[RecoveredSeries<T>],
        cfg: &CalibrationConfig<T>,
    ) -> Result<CalibrationReport<T>> {
        cfg.validate()?;
        if self.training.len() < 2 {
            return Err(Error::invalid(
                "calibration needs at least two training samples for the leave-one-out miss rate",
            ));
        }
        if others.is_empty() {
            return Err(Error::invalid(
                "calibration needs at least one out-of-class sample",
            ));
        }

        let avgs: Result<Vec<T>> = others
            .par_iter()
            .map(|o| self.avg_distance(o, &cfg.dtw))
            .collect();
        let avgs = avgs?;

        let loo: Result<Vec<T>> = (0..self.training.len())
            .into_par_iter()
            .map(|k| {
                let dists: Result<Vec<T>> = self
                    .training
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, t)| dtw_distance(&self.training[k], t, &cfg.dtw).map(|(d, _)| d))
                    .collect();
                Ok(stable_mean(&dists?))
            })
            .collect();
        let loo = loo?;

        let report = select_threshold(&self.site_id, &avgs, &loo, cfg)?;
        self.threshold = Some(report.threshold);
        Ok(report)
    }

    /// Miss rate on a held-out set of in-class samples, measured with the
    /// calibrated threshold instead of the leave-one-out estimate.
    pub fn estimate_fn_holdout(
        &self,
        holdout: &[RecoveredSeries<T>],
        dtw: &DtwConfig<T>,
    ) -> Result<f64> {
        if holdout.is_empty() {
            return Err(Error::invalid("held-out miss rate needs at least one sample"));
        }
        let mut misses = 0usize;
        for sample in holdout {
            if !self.detect(sample, dtw)? {
                misses += 1;
            }
        }
        Ok(misses as f64 / holdout.len() as f64)
    }
}

/// Threshold selection given precomputed mean distances; shared between
/// [`Fingerprint::calibrate`] and [`fn_curve`].
fn select_threshold<T: Scalar>(
    site_id: &str,
    other_avgs: &[T],
    loo_means: &[T],
    cfg: &CalibrationConfig<T>,
) -> Result<CalibrationReport<T>> {
    let n = other_avgs.len() as u64;
    let mut candidates: Vec<T> = other_avgs.to_vec();
    candidates.push(T::zero());
    candidates.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    candidates.dedup();

    let mut chosen: Option<(T, u64, f64)> = None;
    for &nu in candidates.iter().rev() {
        let successes = other_avgs.iter().filter(|&&a| a < nu).count() as u64;
        let upper = clopper_pearson_upper(successes, n, cfg.confidence)?;
        if upper < cfg.target_fp {
            chosen = Some((nu, successes, upper));
            break;
        }
    }

    let degenerate = chosen.is_none();
    let (threshold, successes, fp_ci_upper) = chosen.unwrap_or((
        T::zero(),
        0,
        clopper_pearson_upper(0, n, cfg.confidence)?,
    ));
    let misses = loo_means
        .iter()
        .filter(|&&m| m.partial_cmp(&threshold) != Some(std::cmp::Ordering::Less))
        .count();
    Ok(CalibrationReport {
        site_id: site_id.to_string(),
        target_fp: cfg.target_fp,
        confidence: cfg.confidence,
        threshold,
        fp_estimate: successes as f64 / n as f64,
        fp_ci_upper,
        fn_estimate: misses as f64 / loo_means.len() as f64,
        degenerate,
    })
}

/// Labeled samples for one site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSamples<T> {
    pub site_id: String,
    pub samples: Vec<RecoveredSeries<T>>,
}

/// Detector quality across a labeled corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct FnCurve<T> {
    /// One calibration per site, each against all other sites' samples.
    pub reports: Vec<CalibrationReport<T>>,
    /// Cumulative histogram of leave-one-out miss rates: for each bin
    /// upper edge (0.00, 0.05, ..., 1.00), the number of sites whose
    /// miss rate is at or below it.
    pub histogram: Vec<(f64, usize)>,
}

/// Calibrate every site in a corpus against the rest and summarize the
/// distribution of miss rates.
///
/// All pairwise DTW distances are computed once (in parallel) and reused
/// across sites.
pub fn fn_curve<T: Scalar>(
    sites: &[SiteSamples<T>],
    cfg: &CalibrationConfig<T>,
) -> Result<FnCurve<T>> {
    cfg.validate()?;
    if sites.len() < 2 {
        return Err(Error::invalid("a miss-rate curve needs at least two sites"));
    }
    for site in sites {
        if site.samples.len() < 2 {
            return Err(Error::invalid(format!(
                "site {} needs at least two samples",
                site.site_id
            )));
        }
    }
    {
        let mut ids: Vec<&str> = sites.iter().map(|s| s.site_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != sites.len() {
            return Err(Error::invalid("site ids must be distinct"));
        }
    }

    let mut flat: Vec<&RecoveredSeries<T>> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (s, site) in sites.iter().enumerate() {
        for sample in &site.samples {
            flat.push(sample);
            owner.push(s);
        }
    }
    let flat_owned: Vec<RecoveredSeries<T>> = flat.iter().map(|s| (*s).clone()).collect();
    let matrix = distance_matrix(&flat_owned, &cfg.dtw)?;

    let mut reports = Vec::with_capacity(sites.len());
    for (s, site) in sites.iter().enumerate() {
        let train_idx: Vec<usize> = (0..flat.len()).filter(|&i| owner[i] == s).collect();
        let other_idx: Vec<usize> = (0..flat.len()).filter(|&i| owner[i] != s).collect();

        let other_avgs: Vec<T> = other_idx
            .iter()
            .map(|&o| {
                let dists: Vec<T> = train_idx.iter().map(|&t| matrix[o][t]).collect();
                stable_mean(&dists)
            })
            .collect();
        let loo_means: Vec<T> = train_idx
            .iter()
            .map(|&k| {
                let dists: Vec<T> = train_idx
                    .iter()
                    .filter(|&&j| j != k)
                    .map(|&j| matrix[k][j])
                    .collect();
                stable_mean(&dists)
            })
            .collect();
        reports.push(select_threshold(&site.site_id, &other_avgs, &loo_means, cfg)?);
    }

    let histogram = (0..=20)
        .map(|b| {
            let upper = b as f64 / 20.0;
            let count = reports
                .iter()
                .filter(|r| r.fn_estimate <= upper + 1e-9)
                .count();
            (upper, count)
        })
        .collect();

    Ok(FnCurve { reports, histogram })
}
