//! Bottleneck bandwidth estimation with packet-train probing.
//!
//! A back-to-back train of equally sized probes is sent into the link's
//! FIFO queue. Each probe must wait for its predecessors to drain, so
//! successive responses separate by exactly one probe service time at
//! the bottleneck; the median response spacing therefore reveals the
//! link bandwidth even when individual responses are noisy.

use crate::error::{Error, Result};
use crate::link_sim::{service_time, validate_traffic, LinkConfig, PacketArrival};
use crate::scalar::Scalar;

/// Simulate the responses to a train of `probe_count` probes of
/// `probe_size_bytes` each, all injected at time zero, sharing the FIFO
/// queue with `cross_traffic`.
///
/// Unlike the lightweight probes used for pattern recovery, train probes
/// are data-bearing: each occupies the queue for its own service time.
/// Cross traffic arriving at time zero is served before the train
/// (victim traffic wins ties) and shifts every response equally, leaving
/// the spacings intact; cross traffic arriving later joins the FIFO
/// queue behind the whole train and cannot affect it.
pub fn simulate_train<T: Scalar>(
    link: &LinkConfig<T>,
    probe_count: usize,
    probe_size_bytes: u64,
    cross_traffic: &[PacketArrival<T>],
) -> Result<Vec<T>> {
    link.validate()?;
    validate_traffic(cross_traffic)?;
    if probe_count < 2 {
        return Err(Error::invalid("a train needs at least two probes"));
    }
    if probe_size_bytes == 0 {
        return Err(Error::invalid("probe size must be positive"));
    }

    let mut clear_time = T::zero();
    for pkt in cross_traffic.iter().filter(|p| p.time_ms <= T::zero()) {
        clear_time = clear_time.max(pkt.time_ms)
            + service_time(pkt.size_bytes, link.downstream_bandwidth_bps)?;
    }

    let svc = service_time(probe_size_bytes, link.downstream_bandwidth_bps)?;
    let mut sampler = link.noise.sampler()?;
    let mut responses = Vec::with_capacity(probe_count);
    for _ in 0..probe_count {
        clear_time = clear_time.max(T::zero()) + svc;
        responses.push(link.base_rtt_ms + clear_time + sampler.next_noise());
    }
    Ok(responses)
}

/// Estimate the bottleneck bandwidth (bits per second) from train
/// responses.
///
/// Responses are sorted, and the median of consecutive spacings is taken
/// as the per-probe service time; with an even number of spacings the
/// median is the mean of the two middle values. The responses must
/// actually separate: a non-positive median spacing is an error.
pub fn estimate_bandwidth<T: Scalar>(responses: &[T], probe_size_bytes: u64) -> Result<T> {
    if probe_size_bytes == 0 {
        return Err(Error::invalid("probe size must be positive"));
    }
    if responses.len() < 2 {
        return Err(Error::invalid("bandwidth estimation needs at least two responses"));
    }
    if responses.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("responses must be finite"));
    }
    let mut sorted = responses.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite responses"));
    let diffs: Vec<T> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let median = {
        let mut d = diffs;
        d.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite spacings"));
        let m = d.len() / 2;
        if d.len() % 2 == 1 {
            d[m]
        } else {
            (d[m - 1] + d[m]) / (T::one() + T::one())
        }
    };
    if median.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::invalid(
            "responses do not separate; cannot infer a service time",
        ));
    }
    let bits = T::from_count(probe_size_bytes) * T::from_f64_lossy(8000.0);
    Ok(bits / median)
}
