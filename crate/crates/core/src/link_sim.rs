//! FIFO last-mile link simulation.
//!
//! Models the downstream bottleneck of a shared access link. Victim
//! packets and attacker probes pass through a single FIFO queue drained
//! at the configured bandwidth; probes carry no payload and add no
//! service time of their own, so each probe's round-trip time is the
//! base RTT plus the backlog it found in the queue. Everything is
//! deterministic given the configuration (including the noise seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Distribution family for probe-response noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// No noise; RTTs are exact.
    #[default]
    None,
    /// Uniform on `[0, magnitude_ms)`.
    Uniform,
    /// Half-normal: `|N(0, magnitude_ms)|`.
    TruncatedGaussian,
}

/// Additive, non-negative, i.i.d. per-probe RTT noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel<T> {
    pub kind: NoiseKind,
    /// Scale parameter in milliseconds (upper bound for uniform noise,
    /// pre-fold standard deviation for truncated-gaussian noise).
    pub magnitude_ms: T,
    /// Seed for the noise stream; every simulation run with the same
    /// seed draws the same noise.
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    /// The noiseless model.
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            magnitude_ms: T::zero(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.magnitude_ms.is_finite() || self.magnitude_ms < T::zero() {
            return Err(Error::invalid(format!(
                "noise magnitude must be finite and non-negative, got {}",
                self.magnitude_ms
            )));
        }
        Ok(())
    }

    /// Per-probe sampler; draws are made in probe order.
    pub(crate) fn sampler(&self) -> Result<NoiseSampler<T>> {
        self.validate()?;
        let magnitude = self
            .magnitude_ms
            .to_f64()
            .expect("finite magnitude converts to f64");
        let normal = match self.kind {
            NoiseKind::TruncatedGaussian if magnitude > 0.0 => {
                Some(Normal::new(0.0, magnitude).expect("positive std"))
            }
            _ => None,
        };
        Ok(NoiseSampler {
            kind: self.kind,
            magnitude,
            normal,
            rng: ChaCha12Rng::seed_from_u64(self.seed),
            _marker: core::marker::PhantomData,
        })
    }
}

pub(crate) struct NoiseSampler<T> {
    kind: NoiseKind,
    magnitude: f64,
    normal: Option<Normal<f64>>,
    rng: ChaCha12Rng,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Scalar> NoiseSampler<T> {
    pub(crate) fn next_noise(&mut self) -> T {
        let v = match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => {
                if self.magnitude > 0.0 {
                    self.rng.gen_range(0.0..self.magnitude)
                } else {
                    0.0
                }
            }
            NoiseKind::TruncatedGaussian => match &self.normal {
                Some(n) => n.sample(&mut self.rng).abs(),
                None => 0.0,
            },
        };
        T::from_f64_lossy(v)
    }
}

/// One victim packet crossing the downstream link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketArrival<T> {
    /// Arrival instant at the bottleneck queue, milliseconds.
    pub time_ms: T,
    /// Payload size in bytes; must be positive.
    pub size_bytes: u64,
}

/// Bottleneck link and probing configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig<T> {
    /// Downstream bandwidth, bits per second.
    pub downstream_bandwidth_bps: T,
    /// Propagation and upstream component of every probe RTT, ms.
    pub base_rtt_ms: T,
    /// Maximum transmission unit, bytes.
    pub mtu_bytes: u32,
    /// Probe spacing, ms; probe `i` is sent at `i * probe_period_ms`.
    pub probe_period_ms: T,
    /// Number of probes, starting at t = 0.
    pub probe_count: usize,
    /// RTT noise model.
    pub noise: NoiseModel<T>,
}

impl<T: Scalar> LinkConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.downstream_bandwidth_bps.is_finite() || self.downstream_bandwidth_bps <= T::zero()
        {
            return Err(Error::invalid("downstream bandwidth must be positive"));
        }
        if !self.base_rtt_ms.is_finite() || self.base_rtt_ms < T::zero() {
            return Err(Error::invalid("base RTT must be finite and non-negative"));
        }
        if self.mtu_bytes == 0 {
            return Err(Error::invalid("MTU must be at least 1 byte"));
        }
        if !self.probe_period_ms.is_finite() || self.probe_period_ms <= T::zero() {
            return Err(Error::invalid("probe period must be positive"));
        }
        if self.probe_count == 0 {
            return Err(Error::invalid("probe count must be at least 1"));
        }
        self.noise.validate()
    }
}

/// Probe RTTs observed by the attacker.
#[derive(Clone, Debug, PartialEq)]
pub struct RttTrace<T> {
    /// Probe spacing, ms; probe `i` was sent at `i * probe_period_ms`.
    pub probe_period_ms: T,
    /// One entry per probe, in send order; `None` marks a lost probe
    /// (no response observed).
    pub rtts: Vec<Option<T>>,
}

impl<T: Scalar> RttTrace<T> {
    /// Send instant of probe `i`, ms.
    pub fn send_time(&self, i: usize) -> T {
        self.probe_period_ms * T::from_index(i)
    }

    pub fn len(&self) -> usize {
        self.rtts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rtts.is_empty()
    }

    /// Probes that received a response, as `(index, rtt)`.
    pub fn present(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.rtts
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|v| (i, v)))
    }

    /// Indices of probes without a response.
    pub fn lost(&self) -> impl Iterator<Item = usize> + '_ {
        self.rtts
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.is_none().then_some(i))
    }

    /// Mark the given probes as lost (e.g. to model drops on a captured
    /// trace). Out-of-range indices are rejected.
    pub fn mark_lost(&mut self, indices: &[usize]) -> Result<()> {
        for &i in indices {
            if i >= self.rtts.len() {
                return Err(Error::invalid(format!(
                    "lost-probe index {i} out of range for {} probes",
                    self.rtts.len()
                )));
            }
        }
        for &i in indices {
            self.rtts[i] = None;
        }
        Ok(())
    }
}

/// Transmission (service) time of one packet, in milliseconds.
///
/// A 1500-byte packet on a 3 Mbit/s link takes 4 ms.
pub fn service_time<T: Scalar>(size_bytes: u64, bandwidth_bps: T) -> Result<T> {
    if size_bytes == 0 {
        return Err(Error::invalid("packet size must be positive"));
    }
    if !bandwidth_bps.is_finite() || bandwidth_bps <= T::zero() {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    // bytes -> bits -> per-second rate -> milliseconds: size * 8 * 1000 / bw
    let bits_times_1000 = size_bytes
        .checked_mul(8_000)
        .ok_or_else(|| Error::invalid("packet size too large"))?;
    Ok(T::from_count(bits_times_1000) / bandwidth_bps)
}

/// Check a victim trace for simulation: finite non-negative times,
/// positive sizes, sorted by arrival.
pub fn validate_traffic<T: Scalar>(traffic: &[PacketArrival<T>]) -> Result<()> {
    let mut prev = T::zero();
    for (i, p) in traffic.iter().enumerate() {
        if !p.time_ms.is_finite() || p.time_ms < T::zero() {
            return Err(Error::invalid(format!(
                "packet {i}: arrival time must be finite and non-negative"
            )));
        }
        if p.size_bytes == 0 {
            return Err(Error::invalid(format!("packet {i}: size must be positive")));
        }
        if p.time_ms < prev {
            return Err(Error::invalid(format!(
                "packet {i}: arrivals must be sorted by time"
            )));
        }
        prev = p.time_ms;
    }
    Ok(())
}

/// Run victim `traffic` and the configured probe train through the FIFO
/// bottleneck; returns the per-probe RTT trace.
///
/// The queue is tracked by its clear instant `V`: a victim packet
/// arriving at `t` advances `V` to `max(V, t) + service_time`, while a
/// probe sent at `t_i` observes backlog `max(V - t_i, 0)` without adding
/// service. A victim packet arriving at the same instant as a probe is
/// enqueued first, so the probe sees its backlog.
pub fn simulate<T: Scalar>(
    traffic: &[PacketArrival<T>],
    cfg: &LinkConfig<T>,
) -> Result<RttTrace<T>> {
    cfg.validate()?;
    validate_traffic(traffic)?;

    let mut noise = cfg.noise.sampler()?;
    let mut clear = T::zero();
    let mut next_packet = 0;
    let mut rtts = Vec::with_capacity(cfg.probe_count);
    for i in 0..cfg.probe_count {
        let t_i = cfg.probe_period_ms * T::from_index(i);
        while next_packet < traffic.len() && traffic[next_packet].time_ms <= t_i {
            let p = traffic[next_packet];
            clear = clear.max(p.time_ms)
                + service_time(p.size_bytes, cfg.downstream_bandwidth_bps)?;
            next_packet += 1;
        }
        let backlog = (clear - t_i).max(T::zero());
        rtts.push(Some(cfg.base_rtt_ms + backlog + noise.next_noise()));
    }
    Ok(RttTrace {
        probe_period_ms: cfg.probe_period_ms,
        rtts,
    })
}

/// Congestion indicator: the nearest-rank `percentile` RTT minus the
/// minimum RTT, over present probes.
///
/// The nearest-rank value of a sorted sample of size `n` at percentile
/// `p` in `(0, 1]` is the `ceil(p * n)`-th smallest element.
pub fn rtt_span<T: Scalar>(trace: &RttTrace<T>, percentile: f64) -> Result<T> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::invalid("percentile must lie in (0, 1]"));
    }
    let mut present: Vec<T> = trace.present().map(|(_, r)| r).collect();
    if present.is_empty() {
        return Err(Error::invalid("trace has no responded probes"));
    }
    if present.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("trace contains non-finite RTTs"));
    }
    present.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite RTTs are ordered"));
    let rank = (percentile * present.len() as f64).ceil() as usize;
    Ok(present[rank.max(1) - 1] - present[0])
}
