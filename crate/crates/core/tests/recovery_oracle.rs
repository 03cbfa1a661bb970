//! Recovery correctness against an independent fluid queue sweep.

mod common;

use common::{fluid_sweep, interval_ground_truth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rta_core::link_sim::{simulate, LinkConfig, NoiseModel, PacketArrival};
use rta_core::recovery::recover;

fn random_traffic(rng: &mut ChaCha12Rng, horizon_ms: f64, max_packets: usize) -> Vec<PacketArrival<f64>> {
    let n = rng.gen_range(0..=max_packets);
    let mut traffic: Vec<PacketArrival<f64>> = (0..n)
        .map(|_| PacketArrival {
            time_ms: rng.gen_range(0.0..horizon_ms),
            size_bytes: rng.gen_range(100..=1500),
        })
        .collect();
    traffic.sort_by(|a, b| a.time_ms.partial_cmp(&b.time_ms).unwrap());
    traffic
}

fn link(bw: f64, period: f64, probe_count: usize) -> LinkConfig<f64> {
    LinkConfig {
        downstream_bandwidth_bps: bw,
        base_rtt_ms: 40.0,
        mtu_bytes: 1500,
        probe_period_ms: period,
        probe_count,
        noise: NoiseModel::none(),
    }
}

/// Simulated-then-recovered series match the fluid oracle interval by
/// interval on randomized traffic, with and without probe loss.
#[test]
fn recovered_series_match_fluid_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0001);
    for trial in 0..300 {
        let bw = [1.5e6, 3e6, 6e6][rng.gen_range(0..3)];
        let period = [1.0, 2.0, 5.0][rng.gen_range(0..3)];
        let horizon = 200.0;
        // Probes run long enough that the queue has fully drained by the
        // end, so the idle tail pins the baseline at the base RTT.
        let probe_count = ((horizon + 400.0) / period) as usize;
        let traffic = random_traffic(&mut rng, horizon, 40);

        let mut trace = simulate(&traffic, &link(bw, period, probe_count)).unwrap();
        let mut lost = vec![false; probe_count];
        if trial % 2 == 1 {
            let indices: Vec<usize> = (0..probe_count).filter(|_| rng.gen_bool(0.2)).collect();
            trace.mark_lost(&indices).unwrap();
            for &i in &indices {
                lost[i] = true;
            }
        }
        let recovered = recover(&trace, 0.0).unwrap();

        let probe_times: Vec<f64> = (0..probe_count).map(|i| i as f64 * period).collect();
        let arrivals: Vec<(f64, u64)> = traffic.iter().map(|p| (p.time_ms, p.size_bytes)).collect();
        let oracle = fluid_sweep(&arrivals, bw, &probe_times);
        let expected = interval_ground_truth(&oracle.backlogs, &probe_times, &lost);

        assert_eq!(recovered.values.len(), expected.len());
        for (i, (got, want)) in recovered.values.iter().zip(&expected).enumerate() {
            assert!(
                (got - want).abs() <= 1e-9,
                "trial {trial}, interval {i}: recovered {got}, oracle {want}"
            );
        }
    }
}

/// Work conservation: when every packet's service time is at least the
/// probe period, the summed estimates differ from the true total service
/// by at most one period per busy period (the unobserved head of each).
#[test]
fn summed_estimates_conserve_service_time() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0002);
    let bw = 3e6;
    let period = 1.0;
    // 1 ms of service at 3 Mbit/s is 375 bytes; stay at or above it.
    for trial in 0..50 {
        let mut traffic = Vec::new();
        let bursts = rng.gen_range(1..=10);
        for b in 0..bursts {
            let start = b as f64 * 40.0 + rng.gen_range(0.0..5.0);
            for k in 0..rng.gen_range(1..=5) {
                traffic.push(PacketArrival {
                    time_ms: start + k as f64 * 0.01,
                    size_bytes: rng.gen_range(375..=1500),
                });
            }
        }
        traffic.sort_by(|a, b| a.time_ms.partial_cmp(&b.time_ms).unwrap());

        let probe_count = 800; // covers 10 bursts * 40 ms plus drain
        let trace = simulate(&traffic, &link(bw, period, probe_count)).unwrap();
        let recovered = recover(&trace, 0.0).unwrap();
        let total_recovered: f64 = recovered.values.iter().sum();

        let probe_times: Vec<f64> = (0..probe_count).map(|i| i as f64 * period).collect();
        let arrivals: Vec<(f64, u64)> = traffic.iter().map(|p| (p.time_ms, p.size_bytes)).collect();
        let oracle = fluid_sweep(&arrivals, bw, &probe_times);

        let slack = oracle.busy_periods as f64 * period + 1e-6;
        assert!(
            (total_recovered - oracle.total_service_ms).abs() <= slack,
            "trial {trial}: recovered {total_recovered} ms vs true {} ms (allowed {slack})",
            oracle.total_service_ms
        );
    }
}
