//! Dynamic time warping over recovered traffic series.
//!
//! Page loads stretch and compress with network conditions, so a
//! point-by-point comparison of two recovered series is brittle. DTW
//! finds the monotone alignment (warp path) between two series that
//! minimizes the weighted sum of absolute value differences, optionally
//! restricted to a diagonal band, and reports both the distance and the
//! alignment.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::recovery::{trim_zeros, RecoveredSeries};
use crate::scalar::Scalar;

/// DTW parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtwConfig<T> {
    /// Band half-width in indices: only cells with `|i - j| <= window`
    /// are admissible. `None` leaves the lattice unconstrained.
    pub window: Option<usize>,
    /// Divide the optimal path's weighted cost by its weight sum, making
    /// distances comparable across series lengths. The divisor is the
    /// weight sum of the tie-broken backtracked path; when several
    /// alignments achieve the minimum, the two orientations of a pair
    /// may therefore normalize by different divisors.
    pub normalize: bool,
    /// Step weights `(diagonal, horizontal, vertical)`. A horizontal
    /// step advances the second series only, a vertical step the first
    /// series only. The start cell counts with the diagonal weight.
    pub weights: (T, T, T),
    /// Drop leading/trailing zeros of both inputs before aligning.
    pub trim_zeros: bool,
}

impl<T: Scalar> Default for DtwConfig<T> {
    fn default() -> Self {
        DtwConfig {
            window: None,
            normalize: true,
            weights: (T::one(), T::one(), T::one()),
            trim_zeros: false,
        }
    }
}

/// Monotone alignment between two series: index pairs from `(0, 0)` to
/// `(len_a - 1, len_b - 1)`, each step advancing one or both indices
/// by one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Result of a DTW run, including instrumentation.
#[derive(Clone, Debug, PartialEq)]
pub struct DtwOutcome<T> {
    pub distance: T,
    pub path: WarpPath,
    /// Number of lattice cells relaxed; grows as `I * J` unconstrained
    /// and as `I * window` with a band.
    pub cells_relaxed: usize,
}

/// DTW distance and one optimal warp path between two same-unit series.
///
/// The distance is the minimum over admissible paths of the weighted sum
/// of `|a_i - b_j|`; with `normalize` it is divided by the chosen path's
/// weight sum. Ties between paths are broken during backtracking by
/// preferring diagonal, then horizontal, then vertical predecessors.
pub fn dtw_distance<T: Scalar>(
    a: &RecoveredSeries<T>,
    b: &RecoveredSeries<T>,
    cfg: &DtwConfig<T>,
) -> Result<(T, WarpPath)> {
    dtw_distance_detailed(a, b, cfg).map(|out| (out.distance, out.path))
}

/// [`dtw_distance`] with instrumentation.
pub fn dtw_distance_detailed<T: Scalar>(
    a: &RecoveredSeries<T>,
    b: &RecoveredSeries<T>,
    cfg: &DtwConfig<T>,
) -> Result<DtwOutcome<T>> {
    if a.units != b.units {
        return Err(Error::invalid(format!(
            "cannot compare series in {} with series in {}",
            a.units, b.units
        )));
    }
    let (wd, wh, wv) = cfg.weights;
    for w in [wd, wh, wv] {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::invalid("step weights must be finite and non-negative"));
        }
    }

    let trimmed;
    let (xs, ys) = if cfg.trim_zeros {
        trimmed = (trim_zeros(a), trim_zeros(b));
        (&trimmed.0.values[..], &trimmed.1.values[..])
    } else {
        (&a.values[..], &b.values[..])
    };
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::invalid(if cfg.trim_zeros {
            "series is all zeros after trimming"
        } else {
            "series must be non-empty"
        }));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contain non-finite values"));
    }

    let (i_len, j_len) = (xs.len(), ys.len());
    if let Some(w) = cfg.window {
        if i_len.abs_diff(j_len) > w {
            return Err(Error::invalid(format!(
                "band of half-width {w} cannot connect lengths {i_len} and {j_len}"
            )));
        }
    }
    let w = cfg.window.unwrap_or(usize::MAX);

    // Direction per admissible cell, rows compressed to their bands.
    const START: u8 = 0;
    const DIAG: u8 = 1;
    const HORIZ: u8 = 2;
    const VERT: u8 = 3;
    let band = |i: usize| -> (usize, usize) { (i.saturating_sub(w), (j_len - 1).min(i.saturating_add(w))) };
    let mut row_offsets = Vec::with_capacity(i_len + 1);
    let mut total = 0usize;
    for i in 0..i_len {
        row_offsets.push(total);
        let (lo, hi) = band(i);
        total += hi - lo + 1;
    }
    row_offsets.push(total);
    let mut dirs = vec![START; total];

    let inf = T::infinity();
    let mut prev_row = vec![inf; j_len];
    let mut cur_row = vec![inf; j_len];
    let mut cells_relaxed = 0usize;

    for i in 0..i_len {
        let (lo, hi) = band(i);
        if lo > 0 {
            cur_row[lo - 1] = inf;
        }
        for j in lo..=hi {
            let cost = (xs[i] - ys[j]).abs();
            let (value, dir) = if i == 0 && j == 0 {
                (wd * cost, START)
            } else {
                let diag = if i > 0 && j > 0 { prev_row[j - 1] } else { inf };
                let horiz = if j > 0 { cur_row[j - 1] } else { inf };
                let vert = if i > 0 { prev_row[j] } else { inf };
                let d_c = diag + wd * cost;
                let h_c = horiz + wh * cost;
                let v_c = vert + wv * cost;
                let best = d_c.min(h_c).min(v_c);
                let dir = if d_c == best {
                    DIAG
                } else if h_c == best {
                    HORIZ
                } else {
                    VERT
                };
                (best, dir)
            };
            cur_row[j] = value;
            dirs[row_offsets[i] + (j - lo)] = dir;
            cells_relaxed += 1;
        }
        if hi + 1 < j_len {
            cur_row[hi + 1] = inf;
        }
        core::mem::swap(&mut prev_row, &mut cur_row);
    }

    let raw = prev_row[j_len - 1];
    debug_assert!(raw.is_finite(), "end cell must be reachable inside the band");

    // Backtrack; accumulate the path's weight sum for normalization.
    let mut pairs = Vec::new();
    let mut weight_sum = T::zero();
    let (mut i, mut j) = (i_len - 1, j_len - 1);
    loop {
        pairs.push((i, j));
        let (lo, _) = band(i);
        match dirs[row_offsets[i] + (j - lo)] {
            START => {
                weight_sum += wd;
                break;
            }
            DIAG => {
                weight_sum += wd;
                i -= 1;
                j -= 1;
            }
            HORIZ => {
                weight_sum += wh;
                j -= 1;
            }
            _ => {
                weight_sum += wv;
                i -= 1;
            }
        }
    }
    pairs.reverse();

    let distance = if cfg.normalize { raw / weight_sum } else { raw };
    Ok(DtwOutcome {
        distance,
        path: WarpPath { pairs },
        cells_relaxed,
    })
}

/// Symmetric matrix of pairwise DTW distances; entry `(i, j)` compares
/// `samples[i]` with `samples[j]`. Pairs are computed in parallel; the
/// result does not depend on scheduling.
pub fn distance_matrix<T: Scalar>(
    samples: &[RecoveredSeries<T>],
    cfg: &DtwConfig<T>,
) -> Result<Vec<Vec<T>>> {
    let n = samples.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let computed: Result<Vec<((usize, usize), T)>> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_distance(&samples[i], &samples[j], cfg).map(|(d, _)| ((i, j), d)))
        .collect();
    let mut matrix = vec![vec![T::zero(); n]; n];
    for ((i, j), d) in computed? {
        matrix[i][j] = d;
        matrix[j][i] = d;
    }
    Ok(matrix)
}
