//! Independent oracles for the integration tests.
//!
//! Each oracle recomputes a quantity the library produces, using a
//! deliberately different route: the queue is swept as a fluid instead
//! of via the clear-time recursion, DTW paths are enumerated instead of
//! solved by dynamic programming, and binomial bounds are inverted from
//! tail sums instead of the beta quantile. Agreement between routes is
//! the point of the tests.

#![allow(dead_code)]
#![allow(clippy::too_many_arguments)]

use statrs::function::gamma::ln_gamma;

/// Result of sweeping victim traffic past probe instants.
pub struct FluidOracle {
    /// Queue backlog (ms of unfinished work) observed at each probe
    /// instant, victim arrivals at the same instant enqueued first.
    pub backlogs: Vec<f64>,
    /// Number of maximal busy periods started by the arrivals.
    pub busy_periods: usize,
    /// Total service time of all arrivals, ms.
    pub total_service_ms: f64,
}

/// Sweep the FIFO queue forward in time, draining it at one millisecond
/// of work per millisecond, and record the backlog each probe sees.
pub fn fluid_sweep(traffic: &[(f64, u64)], bandwidth_bps: f64, probe_times: &[f64]) -> FluidOracle {
    #[derive(Clone, Copy)]
    enum Ev {
        Arrival(f64),     // service time
        Probe(usize),     // output slot
    }
    let mut events: Vec<(f64, u8, Ev)> = Vec::with_capacity(traffic.len() + probe_times.len());
    let mut total_service_ms = 0.0;
    for &(t, size) in traffic {
        let svc = size as f64 * 8000.0 / bandwidth_bps;
        total_service_ms += svc;
        events.push((t, 0, Ev::Arrival(svc)));
    }
    for (k, &t) in probe_times.iter().enumerate() {
        events.push((t, 1, Ev::Probe(k)));
    }
    // Stable sort: victim arrivals precede probes at equal instants, and
    // arrivals keep their input order.
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut backlogs = vec![0.0; probe_times.len()];
    let mut busy_periods = 0usize;
    let mut backlog = 0.0f64;
    let mut now = 0.0f64;
    for (t, _, ev) in events {
        backlog = (backlog - (t - now)).max(0.0);
        now = t;
        match ev {
            Ev::Arrival(svc) => {
                if backlog == 0.0 {
                    busy_periods += 1;
                }
                backlog += svc;
            }
            Ev::Probe(k) => backlogs[k] = backlog,
        }
    }
    FluidOracle {
        backlogs,
        busy_periods,
        total_service_ms,
    }
}

/// The per-interval service estimates an ideal observer would recover
/// from the true backlogs: departures `D_i = t_i + backlog_i`, estimate
/// `max(D_i - max(D_{i-1}, t_i), 0)`. `lost[i]` marks probes whose
/// response never arrived; they contribute 0 and carry the frontier.
pub fn interval_ground_truth(backlogs: &[f64], probe_times: &[f64], lost: &[bool]) -> Vec<f64> {
    assert_eq!(backlogs.len(), probe_times.len());
    assert_eq!(lost.len(), probe_times.len());
    let mut out = Vec::with_capacity(backlogs.len());
    let mut frontier = 0.0f64;
    for i in 0..backlogs.len() {
        let t_i = probe_times[i];
        if lost[i] {
            out.push(0.0);
            frontier = frontier.max(t_i);
        } else {
            let departure = t_i + backlogs[i];
            out.push((departure - frontier.max(t_i)).max(0.0));
            frontier = departure;
        }
    }
    out
}

/// Brute-force DTW by path enumeration.
pub struct BruteDtw {
    pub raw: f64,
    pub normalized: f64,
    pub path: Vec<(usize, usize)>,
    /// Weight sum of the tie-broken path, accumulated end-to-start as
    /// the library's backtracking does.
    pub weight_sum: f64,
}

/// Enumerate every admissible warp path, accumulating costs front to
/// back exactly as the DP does, and keep the minimum-sum path; among
/// equal sums the one whose reversed step string is lexicographically
/// smallest under diagonal < horizontal < vertical wins, which mirrors
/// backtracking that prefers diagonal, then horizontal predecessors.
pub fn dtw_brute(
    a: &[f64],
    b: &[f64],
    window: Option<usize>,
    weights: (f64, f64, f64),
) -> BruteDtw {
    assert!(!a.is_empty() && !b.is_empty());
    let w = window.unwrap_or(usize::MAX);
    assert!(a.len().abs_diff(b.len()) <= w, "band cannot connect inputs");
    let (wd, wh, wv) = weights;
    let cost = |i: usize, j: usize| (a[i] - b[j]).abs();

    // Steps: 0 = diagonal, 1 = horizontal (advance b), 2 = vertical.
    struct Best {
        sum: f64,
        rev_steps: Vec<u8>,
        cells: Vec<(usize, usize)>,
    }
    let mut best: Option<Best> = None;

    fn explore(
        i: usize,
        j: usize,
        sum: f64,
        steps: &mut Vec<u8>,
        cells: &mut Vec<(usize, usize)>,
        a_len: usize,
        b_len: usize,
        w: usize,
        wts: (f64, f64, f64),
        cost: &dyn Fn(usize, usize) -> f64,
        best: &mut Option<Best>,
    ) {
        if i == a_len - 1 && j == b_len - 1 {
            let rev: Vec<u8> = steps.iter().rev().copied().collect();
            let better = match best {
                None => true,
                Some(b) => sum < b.sum || (sum == b.sum && rev < b.rev_steps),
            };
            if better {
                *best = Some(Best {
                    sum,
                    rev_steps: rev,
                    cells: cells.clone(),
                });
            }
            return;
        }
        let moves: [(usize, usize, u8, f64); 3] = [
            (i + 1, j + 1, 0, wts.0),
            (i, j + 1, 1, wts.1),
            (i + 1, j, 2, wts.2),
        ];
        for (ni, nj, step, wt) in moves {
            if ni >= a_len || nj >= b_len || ni.abs_diff(nj) > w {
                continue;
            }
            steps.push(step);
            cells.push((ni, nj));
            explore(
                ni,
                nj,
                sum + wt * cost(ni, nj),
                steps,
                cells,
                a_len,
                b_len,
                w,
                wts,
                cost,
                best,
            );
            steps.pop();
            cells.pop();
        }
    }

    let mut steps = Vec::new();
    let mut cells = vec![(0usize, 0usize)];
    explore(
        0,
        0,
        wd * cost(0, 0),
        &mut steps,
        &mut cells,
        a.len(),
        b.len(),
        w,
        weights,
        &cost,
        &mut best,
    );
    let best = best.expect("at least one path exists inside the band");

    // Weight sum accumulated the way backtracking does: per-step weights
    // from the end toward the start, then the start cell's diagonal
    // weight last.
    let mut weight_sum = 0.0;
    for &s in best.rev_steps.iter() {
        weight_sum += match s {
            0 => wd,
            1 => wh,
            _ => wv,
        };
    }
    weight_sum += wd;

    BruteDtw {
        raw: best.sum,
        normalized: best.sum / weight_sum,
        path: best.cells,
        weight_sum,
    }
}

/// Binomial CDF `P[X <= k]` for `X ~ Binomial(n, p)`, computed in log
/// space from gamma functions.
pub fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p));
    if k >= n {
        return 1.0;
    }
    if p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0; // k < n
    }
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut sum = 0.0;
    for i in 0..=k {
        let ln_term = ln_n_fact - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
            + i as f64 * lp
            + (n - i) as f64 * lq;
        sum += ln_term.exp();
    }
    sum.min(1.0)
}

/// Exact one-sided upper confidence bound for a binomial proportion,
/// found by bisecting the binomial tail: the bound is the `p` at which
/// `P[X <= successes | n, p]` drops to `1 - confidence`.
pub fn cp_upper_oracle(successes: u64, trials: u64, confidence: f64) -> f64 {
    assert!(trials >= 1 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    if successes == trials {
        return 1.0;
    }
    let target = 1.0 - confidence;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(successes, trials, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
