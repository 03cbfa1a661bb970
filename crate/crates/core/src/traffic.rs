//! Synthetic page-load traffic.
//!
//! A site profile describes the servers a page pulls objects from and the
//! client's transfer dynamics: objects are split into MTU-sized packets
//! and delivered in rounds whose size doubles (or grows by a configured
//! factor) up to a cap, with successive rounds separated by one
//! jittered server round-trip. Merging the per-server streams yields the
//! downstream packet arrivals a last-mile link would carry.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::formats;
use crate::link_sim::{validate_traffic, PacketArrival};
use crate::scalar::Scalar;
use crate::seeds;

/// Hard cap on packets delivered in one round, mirroring a bounded
/// congestion window.
pub const MAX_WINDOW_PACKETS: u64 = 64;

/// One origin server: its round-trip time from the client and the sizes
/// of the objects fetched from it, in request order.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerProfile<T> {
    pub rtt_ms: T,
    pub objects_bytes: Vec<u64>,
}

/// A page-load template: transfer dynamics plus per-server objects.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteProfile<T> {
    pub site_id: String,
    /// Packets delivered in the first round (may be fractional; each
    /// round sends `floor(window)` packets, at least one).
    pub initial_window: T,
    /// Multiplicative window growth per round, capped at
    /// [`MAX_WINDOW_PACKETS`].
    pub window_growth: T,
    pub mtu_bytes: u32,
    /// Fractional round-trip jitter: each round gap is
    /// `rtt * (1 + jitter * u)` with `u` uniform on [-1, 1].
    pub jitter: T,
    /// Delay before the first round, e.g. request or server think time.
    pub think_time_ms: T,
    pub servers: Vec<ServerProfile<T>>,
}

impl<T: Scalar> SiteProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if self.site_id.is_empty() {
            return Err(Error::invalid("site_id must be non-empty"));
        }
        if !(self.initial_window.is_finite() && self.initial_window > T::zero()) {
            return Err(Error::invalid("initial_window must be finite and positive"));
        }
        if !(self.window_growth.is_finite() && self.window_growth >= T::one()) {
            return Err(Error::invalid("window_growth must be finite and at least 1"));
        }
        if self.mtu_bytes == 0 {
            return Err(Error::invalid("mtu_bytes must be positive"));
        }
        if !(self.jitter.is_finite() && self.jitter >= T::zero() && self.jitter < T::one()) {
            return Err(Error::invalid("jitter must lie in [0, 1)"));
        }
        if !(self.think_time_ms.is_finite() && self.think_time_ms >= T::zero()) {
            return Err(Error::invalid("think_time_ms must be finite and non-negative"));
        }
        if self.servers.is_empty() {
            return Err(Error::invalid("a site needs at least one server"));
        }
        let mut total_objects = 0usize;
        for (s, server) in self.servers.iter().enumerate() {
            if !(server.rtt_ms.is_finite() && server.rtt_ms > T::zero()) {
                return Err(Error::invalid(format!(
                    "server {s}: rtt_ms must be finite and positive"
                )));
            }
            if server.objects_bytes.contains(&0) {
                return Err(Error::invalid(format!(
                    "server {s}: object sizes must be positive"
                )));
            }
            total_objects += server.objects_bytes.len();
        }
        if total_objects == 0 {
            return Err(Error::invalid("a site needs at least one object"));
        }
        Ok(())
    }

    /// Scale every object size and round-trip time by `1 + separation`,
    /// producing a structurally identical but more (or less) voluminous
    /// variant. Useful for controlled-distinguishability experiments.
    pub fn perturb(&self, separation: f64) -> Result<SiteProfile<T>> {
        if !(separation.is_finite() && separation > -1.0) {
            return Err(Error::invalid("separation must be finite and greater than -1"));
        }
        let factor = T::from_f64_lossy(1.0 + separation);
        let servers = self
            .servers
            .iter()
            .map(|s| ServerProfile {
                rtt_ms: s.rtt_ms * factor,
                objects_bytes: s
                    .objects_bytes
                    .iter()
                    .map(|&b| (((b as f64) * (1.0 + separation)).round() as u64).max(1))
                    .collect(),
            })
            .collect();
        Ok(SiteProfile {
            site_id: format!("{}+sep{}", self.site_id, separation),
            servers,
            ..self.clone()
        })
    }
}

/// Split an object into MTU-sized packets plus a remainder packet.
fn packetize(size: u64, mtu: u32) -> impl Iterator<Item = u64> {
    let mtu = mtu as u64;
    let full = size / mtu;
    let rem = size % mtu;
    (0..full).map(move |_| mtu).chain((rem > 0).then_some(rem))
}

/// Generate one page load's downstream packet arrivals.
///
/// Each server's stream is produced independently with its own RNG
/// stream derived from `seed`, then the streams are merged by arrival
/// time (ties keep server order, earlier servers first). The result is
/// sorted and ready for link simulation.
pub fn generate<T: Scalar>(profile: &SiteProfile<T>, seed: u64) -> Result<Vec<PacketArrival<T>>> {
    profile.validate()?;
    let mut merged: Vec<PacketArrival<T>> = Vec::new();
    for (s, server) in profile.servers.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(seeds::derive(seed, "traffic-server", s as u64));
        let mut pending: Vec<u64> = server
            .objects_bytes
            .iter()
            .flat_map(|&b| packetize(b, profile.mtu_bytes))
            .collect();
        pending.reverse(); // pop() delivers in object order
        let mut t = profile.think_time_ms;
        let mut window = profile.initial_window;
        let cap = T::from_count(MAX_WINDOW_PACKETS);
        while !pending.is_empty() {
            let burst = window
                .floor()
                .to_u64()
                .unwrap_or(MAX_WINDOW_PACKETS)
                .clamp(1, MAX_WINDOW_PACKETS);
            for _ in 0..burst {
                match pending.pop() {
                    Some(size) => merged.push(PacketArrival {
                        time_ms: t,
                        size_bytes: size,
                    }),
                    None => break,
                }
            }
            if !pending.is_empty() {
                let u = T::from_f64_lossy(rng.gen_range(-1.0..=1.0));
                t += server.rtt_ms * (T::one() + profile.jitter * u);
                window = (window * profile.window_growth).min(cap);
            }
        }
    }
    merged.sort_by(|a, b| a.time_ms.partial_cmp(&b.time_ms).expect("finite times"));
    validate_traffic(&merged)?;
    Ok(merged)
}

/// Read a packet-arrival trace from a CSV file, sort it by time, and
/// validate it for simulation.
pub fn load_trace<T: Scalar>(path: &Path) -> Result<Vec<PacketArrival<T>>> {
    let mut trace = formats::read_traffic_csv(path)?;
    trace.sort_by(|a: &PacketArrival<T>, b| {
        a.time_ms.partial_cmp(&b.time_ms).expect("reader rejects non-finite times")
    });
    validate_traffic(&trace)?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> SiteProfile<f64> {
        SiteProfile {
            site_id: "example".into(),
            initial_window: 2.0,
            window_growth: 2.0,
            mtu_bytes: 1500,
            jitter: 0.0,
            think_time_ms: 30.0,
            servers: vec![ServerProfile {
                rtt_ms: 100.0,
                objects_bytes: vec![4500],
            }],
        }
    }

    #[test]
    fn single_object_two_rounds() {
        // 4500 B at MTU 1500 is three packets; window 2 then 4 delivers
        // them as a pair at think time and the remainder one RTT later.
        let packets = generate(&profile(), 7).unwrap();
        assert_eq!(packets.len(), 3);
        assert_eq!(packets[0].time_ms, 30.0);
        assert_eq!(packets[1].time_ms, 30.0);
        assert_eq!(packets[2].time_ms, 130.0);
        assert!(packets.iter().all(|p| p.size_bytes == 1500));
    }

    #[test]
    fn remainder_packet_is_emitted_last() {
        let sizes: Vec<u64> = packetize(3200, 1500).collect();
        assert_eq!(sizes, vec![1500, 1500, 200]);
        let sizes: Vec<u64> = packetize(1500, 1500).collect();
        assert_eq!(sizes, vec![1500]);
        let sizes: Vec<u64> = packetize(7, 1500).collect();
        assert_eq!(sizes, vec![7]);
    }

    #[test]
    fn window_grows_and_caps() {
        let mut p = profile();
        p.initial_window = 32.0;
        p.window_growth = 4.0;
        // 200 packets: rounds of 32, then capped at 64.
        p.servers[0].objects_bytes = vec![1500 * 200];
        let packets = generate(&p, 1).unwrap();
        assert_eq!(packets.len(), 200);
        let mut by_time = std::collections::BTreeMap::new();
        for pkt in &packets {
            *by_time.entry(pkt.time_ms.to_bits()).or_insert(0u64) += 1;
        }
        let bursts: Vec<u64> = by_time.values().copied().collect();
        assert_eq!(bursts, vec![32, 64, 64, 40]);
    }

    #[test]
    fn same_seed_reproduces_different_seed_varies() {
        let mut p = profile();
        p.jitter = 0.3;
        p.servers[0].objects_bytes = vec![1500 * 20];
        let a = generate(&p, 42).unwrap();
        let b = generate(&p, 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&p, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jitter_bounds_round_gaps() {
        let mut p = profile();
        p.jitter = 0.25;
        p.initial_window = 1.0;
        p.window_growth = 1.0;
        p.servers[0].objects_bytes = vec![1500 * 40];
        let packets = generate(&p, 5).unwrap();
        assert_eq!(packets.len(), 40);
        let mut gaps_seen = false;
        for w in packets.windows(2) {
            let gap = w[1].time_ms - w[0].time_ms;
            assert!((100.0 * 0.75 - 1e-9..=100.0 * 1.25 + 1e-9).contains(&gap));
            if (gap - 100.0).abs() > 1.0 {
                gaps_seen = true;
            }
        }
        assert!(gaps_seen, "jitter should actually move the gaps");
    }

    #[test]
    fn servers_merge_stably_at_equal_times() {
        let mut p = profile();
        p.servers = vec![
            ServerProfile {
                rtt_ms: 50.0,
                objects_bytes: vec![100],
            },
            ServerProfile {
                rtt_ms: 80.0,
                objects_bytes: vec![200],
            },
        ];
        let packets = generate(&p, 9).unwrap();
        assert_eq!(packets.len(), 2);
        assert_eq!(packets[0].time_ms, packets[1].time_ms);
        assert_eq!(packets[0].size_bytes, 100);
        assert_eq!(packets[1].size_bytes, 200);
    }

    #[test]
    fn perturb_scales_sizes_and_rtts() {
        let p = profile();
        let q = p.perturb(2.0).unwrap();
        assert_eq!(q.site_id, "example+sep2");
        assert_eq!(q.servers[0].rtt_ms, 300.0);
        assert_eq!(q.servers[0].objects_bytes, vec![13500]);
        assert!(p.perturb(-1.0).is_err());
        let shrunk = p.perturb(-0.5).unwrap();
        assert_eq!(shrunk.servers[0].objects_bytes, vec![2250]);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut p = profile();
        p.jitter = 1.0;
        assert!(generate(&p, 0).is_err());
        let mut p = profile();
        p.servers.clear();
        assert!(generate(&p, 0).is_err());
        let mut p = profile();
        p.servers[0].objects_bytes.clear();
        assert!(generate(&p, 0).is_err());
        let mut p = profile();
        p.window_growth = 0.5;
        assert!(generate(&p, 0).is_err());
        let mut p = profile();
        p.mtu_bytes = 0;
        assert!(generate(&p, 0).is_err());
    }
}
