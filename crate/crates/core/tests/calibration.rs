//! Threshold calibration against an independently derived binomial bound.

mod common;

use common::cp_upper_oracle;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rta_core::dtw::DtwConfig;
use rta_core::fingerprint::{
    clopper_pearson_upper, fn_curve, CalibrationConfig, CalibrationReport, Fingerprint,
    SiteSamples,
};
use rta_core::recovery::{RecoveredSeries, Units};

fn series(values: &[f64]) -> RecoveredSeries<f64> {
    RecoveredSeries {
        probe_period_ms: 1.0,
        values: values.to_vec(),
        units: Units::Milliseconds,
        noise_floor_ms: 0.0,
    }
}

fn singleton(v: f64) -> RecoveredSeries<f64> {
    series(&[v])
}

/// Mean with the same deterministic accumulation order the library uses:
/// sort ascending, sum left to right, divide.
fn sorted_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

#[test]
fn cp_bound_matches_binomial_tail_inversion() {
    for n in 1..=30u64 {
        for s in 0..=n {
            for conf in [0.5, 0.9, 0.95, 0.99] {
                let lib = clopper_pearson_upper(s, n, conf).unwrap();
                let oracle = cp_upper_oracle(s, n, conf);
                assert!(
                    (lib - oracle).abs() <= 1e-9,
                    "n={n} s={s} conf={conf}: lib {lib} vs oracle {oracle}"
                );
            }
        }
    }
}

#[test]
fn cp_bound_large_n_spot_checks() {
    let cases: [(u64, &[u64]); 4] = [
        (59, &[0, 1, 2, 29]),
        (128, &[0, 2, 64]),
        (200, &[0, 10, 199]),
        (1000, &[0, 5, 500]),
    ];
    for (n, ss) in cases {
        for &s in ss {
            let lib = clopper_pearson_upper(s, n, 0.95).unwrap();
            let oracle = cp_upper_oracle(s, n, 0.95);
            assert!(
                (lib - oracle).abs() <= 1e-9,
                "n={n} s={s}: lib {lib} vs oracle {oracle}"
            );
        }
    }
}

#[test]
fn cp_bound_is_strictly_monotone_in_successes() {
    let n = 40;
    let mut prev = -1.0;
    for s in 0..=n {
        let upper = clopper_pearson_upper(s, n, 0.95).unwrap();
        assert!(upper > prev, "s={s}: {upper} not above {prev}");
        prev = upper;
    }
    assert_eq!(prev, 1.0);
}

/// On randomized corpora of length-1 series (where the alignment distance
/// between singletons is just the absolute difference), the calibrated
/// threshold must be exactly the largest candidate the oracle bound
/// accepts, the false-positive estimate must be the recounted fraction,
/// and the leave-one-out miss rate must match a recount.
#[test]
// `!(l < threshold)` mirrors the detector's "not detected" predicate, which
// must treat NaN as a miss; a rewritten `>=` would not.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn selected_threshold_is_largest_oracle_passing_candidate() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xca1_0001);
    for trial in 0..50 {
        let m = rng.gen_range(2..=6usize);
        let center = rng.gen_range(10.0..20.0f64);
        let training: Vec<f64> = (0..m).map(|_| center + rng.gen_range(-1.0..1.0)).collect();
        let n = rng.gen_range(60..=120usize);
        let others: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..40.0)).collect();
        let target_fp = [0.01, 0.05, 0.1][trial % 3];
        let confidence = [0.9, 0.95][trial % 2];

        let cfg = CalibrationConfig {
            dtw: DtwConfig::default(),
            target_fp,
            confidence,
        };
        let mut fp = Fingerprint::new(
            format!("trial{trial}"),
            training.iter().map(|&v| singleton(v)).collect(),
        )
        .unwrap();
        let report = fp.calibrate(
            &others.iter().map(|&v| singleton(v)).collect::<Vec<_>>(),
            &cfg,
        )
        .unwrap();

        // Recompute the candidate grid from first principles.
        let avgs: Vec<f64> = others
            .iter()
            .map(|&o| sorted_mean(&training.iter().map(|&t| (o - t).abs()).collect::<Vec<_>>()))
            .collect();
        let mut grid: Vec<f64> = avgs.clone();
        grid.push(0.0);
        grid.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();

        // Sanity for the scan itself: as the candidate grows, both the
        // below-candidate count and the oracle bound are non-decreasing.
        let mut prev_count = 0usize;
        let mut prev_upper = 0.0f64;
        for &nu in &grid {
            let count = avgs.iter().filter(|&&a| a < nu).count();
            let upper = cp_upper_oracle(count as u64, n as u64, confidence);
            assert!(count >= prev_count);
            assert!(upper >= prev_upper - 1e-12);
            prev_count = count;
            prev_upper = upper;
        }

        let expected = grid
            .iter()
            .rev()
            .find_map(|&nu| {
                let count = avgs.iter().filter(|&&a| a < nu).count() as u64;
                let upper = cp_upper_oracle(count, n as u64, confidence);
                (upper < target_fp).then_some((nu, count))
            });

        match expected {
            Some((nu, count)) => {
                assert!(!report.degenerate, "trial {trial}");
                assert_eq!(report.threshold.to_bits(), nu.to_bits(), "trial {trial}");
                assert_eq!(report.fp_estimate, count as f64 / n as f64, "trial {trial}");
                let oracle_upper = cp_upper_oracle(count, n as u64, confidence);
                assert!(
                    (report.fp_ci_upper - oracle_upper).abs() <= 1e-9,
                    "trial {trial}: ci {} vs oracle {oracle_upper}",
                    report.fp_ci_upper
                );
                assert!(report.fp_ci_upper < target_fp);
            }
            None => {
                assert!(report.degenerate, "trial {trial}");
                assert_eq!(report.threshold, 0.0);
                assert_eq!(report.fp_estimate, 0.0);
            }
        }

        // Leave-one-out miss recount.
        let loo: Vec<f64> = (0..m)
            .map(|k| {
                sorted_mean(
                    &training
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, &t)| (training[k] - t).abs())
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let misses = loo.iter().filter(|&&l| !(l < report.threshold)).count();
        assert_eq!(report.fn_estimate, misses as f64 / m as f64, "trial {trial}");
    }
}

fn assert_reports_identical(a: &CalibrationReport<f64>, b: &CalibrationReport<f64>) {
    assert_eq!(a.site_id, b.site_id);
    assert_eq!(a.target_fp, b.target_fp);
    assert_eq!(a.confidence, b.confidence);
    assert_eq!(a.threshold.to_bits(), b.threshold.to_bits());
    assert_eq!(a.fp_estimate, b.fp_estimate);
    assert_eq!(a.fp_ci_upper.to_bits(), b.fp_ci_upper.to_bits());
    assert_eq!(a.fn_estimate, b.fn_estimate);
    assert_eq!(a.degenerate, b.degenerate);
}

fn random_corpus(rng: &mut ChaCha12Rng) -> Vec<SiteSamples<f64>> {
    let levels = [2.0, 9.0, 17.0];
    levels
        .iter()
        .enumerate()
        .map(|(i, &level)| SiteSamples {
            site_id: format!("site{i}"),
            samples: (0..4 + i)
                .map(|_| {
                    series(&[
                        level + rng.gen_range(-0.5..0.5),
                        level + rng.gen_range(-0.5..0.5),
                        level + rng.gen_range(-0.5..0.5),
                    ])
                })
                .collect(),
        })
        .collect()
}

/// The corpus-wide curve must agree bitwise with calibrating each site by
/// hand against the flattened rest.
#[test]
fn fn_curve_agrees_with_per_site_calibration() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xca1_0002);
    let sites = random_corpus(&mut rng);
    let cfg = CalibrationConfig {
        dtw: DtwConfig::default(),
        target_fp: 0.5,
        confidence: 0.6,
    };

    let curve = fn_curve(&sites, &cfg).unwrap();
    assert_eq!(curve.reports.len(), sites.len());

    for (i, site) in sites.iter().enumerate() {
        let others: Vec<_> = sites
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, s)| s.samples.iter().cloned())
            .collect();
        let mut fp = Fingerprint::new(site.site_id.clone(), site.samples.clone()).unwrap();
        let manual = fp.calibrate(&others, &cfg).unwrap();
        assert_reports_identical(&curve.reports[i], &manual);
    }

    // The cumulative histogram counts every site in the last bin.
    assert_eq!(curve.histogram.len(), 21);
    assert_eq!(curve.histogram.last().unwrap().1, sites.len());
    let mut prev = 0usize;
    for &(upper, count) in &curve.histogram {
        assert!((0.0..=1.0 + 1e-9).contains(&upper));
        assert!(count >= prev);
        prev = count;
    }
}

/// Reordering the training set and the out-of-class pool must not change
/// a single bit of the report: candidate grids are sorted and means use a
/// deterministic accumulation order.
#[test]
fn calibration_is_invariant_to_sample_order() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xca1_0003);
    let training: Vec<RecoveredSeries<f64>> = (0..6)
        .map(|_| series(&[rng.gen_range(9.0..11.0), rng.gen_range(9.0..11.0)]))
        .collect();
    let others: Vec<RecoveredSeries<f64>> = (0..80)
        .map(|_| series(&[rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0)]))
        .collect();
    let cfg = CalibrationConfig {
        dtw: DtwConfig::default(),
        target_fp: 0.1,
        confidence: 0.9,
    };

    let mut base = Fingerprint::new("perm", training.clone()).unwrap();
    let baseline = base.calibrate(&others, &cfg).unwrap();

    for round in 0..5 {
        let mut shuffled_training = training.clone();
        let mut shuffled_others = others.clone();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(0xca1_0100 + round);
        shuffled_training.shuffle(&mut shuffle_rng);
        shuffled_others.shuffle(&mut shuffle_rng);

        let mut fp = Fingerprint::new("perm", shuffled_training).unwrap();
        let report = fp.calibrate(&shuffled_others, &cfg).unwrap();
        assert_reports_identical(&baseline, &report);
    }
}
