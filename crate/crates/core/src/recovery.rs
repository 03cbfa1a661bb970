//! Traffic-pattern recovery from probe RTTs.
//!
//! Inverts the FIFO queueing recorded in an [`RttTrace`]: the minimum
//! RTT estimates the uncongested baseline, each probe's excess over it
//! dates the probe's departure from the queue, and differencing
//! consecutive departures yields the amount of victim service observed
//! in each probe interval. The result is a time series of milliseconds
//! of link occupancy (convertible to bytes given the bandwidth) that
//! makes no reference to packet contents — it is recovered entirely
//! from timing.

use crate::error::{Error, Result};
use crate::link_sim::{service_time, RttTrace};
use crate::scalar::Scalar;

/// Physical unit of the values in a [`RecoveredSeries`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    /// Milliseconds of bottleneck service time per probe interval.
    Milliseconds,
    /// Estimated bytes per probe interval.
    Bytes,
}

impl core::fmt::Display for Units {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Units::Milliseconds => write!(f, "ms"),
            Units::Bytes => write!(f, "bytes"),
        }
    }
}

impl core::str::FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ms" => Ok(Units::Milliseconds),
            "bytes" => Ok(Units::Bytes),
            other => Err(Error::invalid(format!("unknown units `{other}`"))),
        }
    }
}

/// Per-interval estimates of the victim's traffic pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredSeries<T> {
    /// Probe spacing that produced the series, ms.
    pub probe_period_ms: T,
    /// One value per probe interval; exactly 0 where nothing (or less
    /// than the noise floor) was observed.
    pub values: Vec<T>,
    pub units: Units,
    /// The noise floor that was applied, ms (values below it were
    /// zeroed before any unit conversion).
    pub noise_floor_ms: T,
}

impl<T: Scalar> RecoveredSeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Options for [`recover_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryOptions<T> {
    /// Zero out recovered intervals below this many milliseconds. The
    /// default of 1 ms sits above observed sub-millisecond RTT jitter
    /// on idle links while staying below the service time of any
    /// near-MTU packet on consumer-grade bandwidths.
    pub noise_floor_ms: T,
    /// Baseline (minimum-RTT) estimation window: `None` takes the
    /// global minimum over the whole trace; `Some(w)` takes the minimum
    /// of the most recent `w` responded probes (including the current
    /// one), which tracks slow base-RTT drift on long captures.
    pub baseline_window: Option<usize>,
}

impl<T: Scalar> Default for RecoveryOptions<T> {
    fn default() -> Self {
        RecoveryOptions {
            noise_floor_ms: T::one(),
            baseline_window: None,
        }
    }
}

/// Recover the per-interval traffic pattern with the default global
/// baseline. See [`recover_with`].
pub fn recover<T: Scalar>(trace: &RttTrace<T>, noise_floor_ms: T) -> Result<RecoveredSeries<T>> {
    recover_with(
        trace,
        &RecoveryOptions {
            noise_floor_ms,
            baseline_window: None,
        },
    )
}

/// Recover the per-interval traffic pattern from a probe trace.
///
/// For probe `i` sent at `t_i = i * probe_period`, the departure from
/// the queue is dated `t'_i = rtt_i - baseline + t_i`, and the estimate
/// for the interval is `s_i = t'_i - max(t'_{i-1}, t_i)` — the service
/// time the queue performed between the previous probe's departure (or
/// this probe's send instant, whichever is later) and this probe's
/// departure. Negative raw estimates (noise) are clamped to 0 first,
/// then anything below the noise floor is zeroed. A lost probe yields
/// `s_i = 0` and carries `max(t'_{i-1}, t_i)` forward as its departure.
pub fn recover_with<T: Scalar>(
    trace: &RttTrace<T>,
    opts: &RecoveryOptions<T>,
) -> Result<RecoveredSeries<T>> {
    if trace.is_empty() {
        return Err(Error::invalid("trace has no probes"));
    }
    if !trace.probe_period_ms.is_finite() || trace.probe_period_ms <= T::zero() {
        return Err(Error::invalid("probe period must be positive"));
    }
    if !opts.noise_floor_ms.is_finite() || opts.noise_floor_ms < T::zero() {
        return Err(Error::invalid("noise floor must be finite and non-negative"));
    }
    if opts.baseline_window == Some(0) {
        return Err(Error::invalid("baseline window must be at least 1"));
    }
    if trace.present().any(|(_, r)| !r.is_finite()) {
        return Err(Error::invalid("trace contains non-finite RTTs"));
    }

    let baseline = Baseline::prepare(trace, opts.baseline_window)?;

    let mut values = Vec::with_capacity(trace.len());
    let mut prev_departure = T::zero();
    for (i, rtt) in trace.rtts.iter().enumerate() {
        let t_i = trace.send_time(i);
        match *rtt {
            None => {
                values.push(T::zero());
                prev_departure = prev_departure.max(t_i);
            }
            Some(rtt_i) => {
                let departure = rtt_i - baseline.at(i) + t_i;
                let mut estimate = departure - prev_departure.max(t_i);
                if estimate < T::zero() {
                    estimate = T::zero();
                }
                if estimate < opts.noise_floor_ms {
                    estimate = T::zero();
                }
                values.push(estimate);
                prev_departure = departure;
            }
        }
    }
    Ok(RecoveredSeries {
        probe_period_ms: trace.probe_period_ms,
        values,
        units: Units::Milliseconds,
        noise_floor_ms: opts.noise_floor_ms,
    })
}

/// Baseline RTT per probe: a single global minimum, or a trailing
/// sliding-window minimum over responded probes.
enum Baseline<T> {
    Global(T),
    Windowed(Vec<T>),
}

impl<T: Scalar> Baseline<T> {
    fn prepare(trace: &RttTrace<T>, window: Option<usize>) -> Result<Self> {
        let mut any = false;
        let mut global = T::infinity();
        for (_, r) in trace.present() {
            any = true;
            global = global.min(r);
        }
        if !any {
            return Err(Error::invalid("trace has no responded probes"));
        }
        match window {
            None => Ok(Baseline::Global(global)),
            Some(w) => {
                // Monotone deque of (index, rtt) with increasing rtt.
                let mut deque: std::collections::VecDeque<(usize, T)> =
                    std::collections::VecDeque::new();
                let mut mins = vec![global; trace.len()];
                for (i, rtt) in trace.rtts.iter().enumerate() {
                    if let Some(r) = *rtt {
                        while deque.back().is_some_and(|&(_, v)| v >= r) {
                            deque.pop_back();
                        }
                        deque.push_back((i, r));
                    }
                    while deque.front().is_some_and(|&(j, _)| i >= w && j + w <= i) {
                        deque.pop_front();
                    }
                    // A responded probe always occupies the window; for
                    // lost probes the value is unused.
                    if let Some(&(_, v)) = deque.front() {
                        mins[i] = v;
                    }
                }
                Ok(Baseline::Windowed(mins))
            }
        }
    }

    fn at(&self, i: usize) -> T {
        match self {
            Baseline::Global(m) => *m,
            Baseline::Windowed(mins) => mins[i],
        }
    }
}

/// Convert a milliseconds series into per-interval byte estimates at
/// the given bottleneck bandwidth. No rounding is applied.
pub fn delay_to_bytes<T: Scalar>(
    series: &RecoveredSeries<T>,
    bandwidth_bps: T,
) -> Result<RecoveredSeries<T>> {
    if series.units != Units::Milliseconds {
        return Err(Error::invalid(
            "series is not in milliseconds; already converted?",
        ));
    }
    if !bandwidth_bps.is_finite() || bandwidth_bps <= T::zero() {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    // ms of service at bw bits/s -> bytes: v * bw / 8000.
    let per_ms = bandwidth_bps / T::from_count(8_000);
    Ok(RecoveredSeries {
        probe_period_ms: series.probe_period_ms,
        values: series.values.iter().map(|&v| v * per_ms).collect(),
        units: Units::Bytes,
        noise_floor_ms: series.noise_floor_ms,
    })
}

/// Largest probe period that still observes every maximum-size packet:
/// the service time of one MTU-sized packet at the link bandwidth.
/// Probing faster than this leaves no gap in which a full-size packet
/// can slip through the queue unseen.
pub fn probe_period_bound<T: Scalar>(mtu_bytes: u32, bandwidth_bps: T) -> Result<T> {
    service_time(u64::from(mtu_bytes), bandwidth_bps)
}

/// Drop leading and trailing all-zero intervals — an alignment
/// preprocessing step ahead of distance computation. May return an
/// empty series if every value is zero.
pub fn trim_zeros<T: Scalar>(series: &RecoveredSeries<T>) -> RecoveredSeries<T> {
    let first = series.values.iter().position(|v| *v != T::zero());
    let trimmed = match first {
        None => Vec::new(),
        Some(lo) => {
            let hi = series
                .values
                .iter()
                .rposition(|v| *v != T::zero())
                .expect("nonzero element exists");
            series.values[lo..=hi].to_vec()
        }
    };
    RecoveredSeries {
        probe_period_ms: series.probe_period_ms,
        values: trimmed,
        units: series.units,
        noise_floor_ms: series.noise_floor_ms,
    }
}
