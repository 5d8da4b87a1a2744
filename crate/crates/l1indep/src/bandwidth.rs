//! Data-driven bandwidth selection.
//!
//! Candidate bandwidths obey the `n^(-1/(3d+1))` rate: each coordinate gets
//! a range `[c1, c2] * n^(-1/(3d+1))` with the constants chosen from the
//! data by neighbor-count conditions, and the winning combination maximizes
//! a leave-one-out criterion built from the same plug-in fields as the test
//! statistic.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::estimators::{Bandwidths, Estimators};

/// Geometric ladder step for the constant search: 2^(1/4).
const LADDER_STEP: f64 = 1.189207115002721;
const LADDER_SPAN: f64 = 1e3;

/// Per-coordinate candidate lists under the rate bound.
#[derive(Debug, Clone)]
pub struct BandwidthGrid {
    /// ascending candidates per flat coordinate
    pub candidates: Vec<Vec<f64>>,
    /// `n^(-1/(3d+1))`
    pub rate: f64,
    /// `(c1, c2)` per flat coordinate
    pub constants: Vec<(f64, f64)>,
}

/// The rate factor `n^(-1/(3d+1))`.
pub fn rate_factor(n: usize, d: usize) -> f64 {
    (n as f64).powf(-1.0 / (3.0 * d as f64 + 1.0))
}

impl BandwidthGrid {
    /// Builds the grid from data, `points` log-spaced candidates per
    /// coordinate between the selected constants times the rate factor.
    pub fn from_sample(sample: &Sample, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidConfig("bandwidth grid needs at least one point".into()));
        }
        let d = sample.d();
        let rate = rate_factor(sample.n(), d);
        let mut constants = Vec::with_capacity(d);
        for k in 0..d {
            constants.push(select_constants(sample, k)?);
        }
        Ok(Self::with_constants(&constants, rate, points))
    }

    /// Grid from explicit constants; bounds scale exactly with the rate.
    pub fn with_constants(constants: &[(f64, f64)], rate: f64, points: usize) -> Self {
        let candidates = constants
            .iter()
            .map(|&(c1, c2)| log_spaced(c1 * rate, c2 * rate, points))
            .collect();
        Self { candidates, rate, constants: constants.to_vec() }
    }

    /// Bandwidths at the middle candidate of every coordinate.
    pub fn midpoint(&self) -> Bandwidths {
        let h: Vec<f64> = self.candidates.iter().map(|c| c[c.len() / 2]).collect();
        Bandwidths::new(h).expect("grid candidates are positive")
    }
}

fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Neighbor count for the occupancy floor: `ceil(sqrt(2 n))`, which is the
/// classical 10 at n = 50 and grows so that product-kernel boxes keep a few
/// observations at every sample size.
pub fn neighbor_count(n: usize) -> usize {
    ((2.0 * n as f64).sqrt().ceil() as usize).max(1)
}

/// Ratio of the occupancy floor to the median neighbor distance.
const FLOOR_OVER_MEDIAN: f64 = 1.5;
/// Cap on `c2 / c1`: a tight range keeps the criterion maximization from
/// drifting into badly calibrated corners of bandwidth space.
const RANGE_CAP: f64 = 2.5;

/// Chooses the rate constants for one flat coordinate from neighbor counts.
///
/// `c1` is the smallest ladder value whose bandwidth keeps the typical
/// (median over observations) `m`-th-neighbor distance within `1.5 h`,
/// with `m = ceil(sqrt(2 n))`; below this floor kernel boxes are too empty
/// for the folded-normal centering to calibrate. `c2` is the largest ladder
/// value whose window `2 c2 rate` still leaves at least one point outside
/// for every observation, additionally capped at `2.5 c1`. Falls back to
/// `(0.5, 2.0)` times the coordinate standard deviation over the rate when
/// the ladder search fails.
pub fn select_constants(sample: &Sample, k: usize) -> Result<(f64, f64)> {
    let n = sample.n();
    if n < 12 {
        return Err(Error::TooFewObservations { n, min: 12 });
    }
    let mut col = sample.column(k);
    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = col.iter().sum::<f64>() / n as f64;
    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd <= 0.0 {
        return Err(Error::DegenerateCoordinate { coord: k + 1 });
    }
    let rate = rate_factor(n, sample.d());

    // typical m-th-neighbor distance (median over observations; the median
    // ignores tail points, which the region trimming excludes anyway)
    let m = neighbor_count(n);
    let mut dists: Vec<f64> = (0..n).map(|i| kth_neighbor_distance(&col, i, m)).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let w1 = FLOOR_OVER_MEDIAN * dists[n / 2];
    // smallest over observations of the farthest-point distance: any window
    // strictly below it leaves at least one point outside everywhere
    let w2 = (0..n)
        .map(|i| (col[i] - col[0]).max(col[n - 1] - col[i]))
        .fold(f64::INFINITY, f64::min);

    let lo = sd / LADDER_SPAN;
    let hi = sd * LADDER_SPAN;
    // smallest ladder value with c rate >= w1
    let c1 = ladder_at_least(lo, hi, w1 / rate);
    // largest ladder value with 2 c rate < w2, capped at RANGE_CAP * c1
    let c2 = c1.and_then(|c1| {
        ladder_below(lo, hi, (w2 / (2.0 * rate)).min(RANGE_CAP * c1))
    });
    match (c1, c2) {
        (Some(c1), Some(c2)) if c1 < c2 => Ok((c1, c2)),
        (Some(c1), _) => Ok((c1, c1 * LADDER_STEP)),
        _ => Ok((0.5 * sd / rate, 2.0 * sd / rate)),
    }
}

/// Distance from `col[i]` to its `k`-th nearest neighbor in the sorted
/// column (two-pointer merge over the neighbors on each side).
fn kth_neighbor_distance(col: &[f64], i: usize, k: usize) -> f64 {
    let n = col.len();
    let (mut lo, mut hi) = (i, i);
    let mut dist = 0.0;
    for _ in 0..k.min(n - 1) {
        let left = if lo > 0 { col[i] - col[lo - 1] } else { f64::INFINITY };
        let right = if hi + 1 < n { col[hi + 1] - col[i] } else { f64::INFINITY };
        if left <= right {
            lo -= 1;
            dist = left;
        } else {
            hi += 1;
            dist = right;
        }
    }
    dist
}

fn ladder_at_least(lo: f64, hi: f64, target: f64) -> Option<f64> {
    let mut c = lo;
    while c <= hi * (1.0 + 1e-12) {
        if c >= target {
            return Some(c);
        }
        c *= LADDER_STEP;
    }
    None
}

fn ladder_below(lo: f64, hi: f64, target: f64) -> Option<f64> {
    let mut c = lo;
    let mut best = None;
    while c <= hi * (1.0 + 1e-12) {
        if c < target {
            best = Some(c);
        } else {
            break;
        }
        c *= LADDER_STEP;
    }
    best
}

/// Value of the leave-one-out selection criterion together with the number
/// of skipped terms (observations whose leave-one-out marginal product
/// vanished).
pub fn loo_criterion(sample: &Sample, bw: &Bandwidths) -> Result<(f64, usize)> {
    let n = sample.n();
    if n < 3 {
        return Err(Error::TooFewObservations { n, min: 3 });
    }
    let est = Estimators::uniform(sample, bw)?;
    let spec = sample.spec();
    let sqrt_n = (n as f64).sqrt();
    let half_norm = (2.0 / std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    let mut skipped = 0usize;
    for j in 0..n {
        let x = sample.row(j);
        let mut denom = 1.0;
        for l in 0..spec.p() {
            denom *= est.marginal(l, &x[spec.range(l)], Some(j));
            if denom == 0.0 {
                break;
            }
        }
        if denom == 0.0 {
            skipped += 1;
            continue;
        }
        let joint = est.joint(x, Some(j));
        let l_hat = est.l_hat(x, Some(j))?;
        total += (sqrt_n * (joint - denom).abs() - half_norm * l_hat.sqrt()) / denom;
    }
    if skipped == n {
        return Err(Error::CriterionAllSkipped);
    }
    Ok((total, skipped))
}

/// Result of the bandwidth search.
#[derive(Debug, Clone)]
pub struct SelectedBandwidths {
    pub bandwidths: Bandwidths,
    /// criterion value at the selected point, when it was computable
    pub criterion: Option<f64>,
    pub skipped_terms: usize,
    /// true when every candidate failed and the grid midpoint was used
    pub fallback: bool,
}

/// Maximizes the leave-one-out criterion over the candidate grid: full
/// Cartesian search for `d <= 2` (cheap and immune to local maxima),
/// coordinate-wise ascent otherwise.
pub fn select_bandwidths(sample: &Sample, grid: &BandwidthGrid) -> Result<SelectedBandwidths> {
    if sample.d() <= 2 {
        select_bandwidths_exhaustive(sample, grid)
    } else {
        select_bandwidths_ascent(sample, grid)
    }
}

/// Coordinate-wise ascent over the candidate grid from the midpoint,
/// maximizing the leave-one-out criterion. Ties break toward the larger
/// bandwidth; candidates where the criterion is undefined are skipped.
pub fn select_bandwidths_ascent(sample: &Sample, grid: &BandwidthGrid) -> Result<SelectedBandwidths> {
    let d = sample.d();
    if grid.candidates.len() != d {
        return Err(Error::InvalidConfig(format!(
            "grid has {} coordinates, sample has {d}",
            grid.candidates.len()
        )));
    }
    let mut idx: Vec<usize> = grid.candidates.iter().map(|c| c.len() / 2).collect();
    let eval = |idx: &[usize]| -> Option<(f64, usize)> {
        let h: Vec<f64> = idx.iter().zip(&grid.candidates).map(|(&i, c)| c[i]).collect();
        let bw = Bandwidths::new(h).ok()?;
        loo_criterion(sample, &bw).ok()
    };

    let mut best = eval(&idx);
    if best.is_none() {
        // climb the diagonal toward larger bandwidths until the criterion
        // becomes computable
        let max_steps = grid.candidates.iter().map(|c| c.len()).max().unwrap_or(1);
        'diag: for _ in 0..max_steps {
            let mut moved = false;
            for (k, c) in grid.candidates.iter().enumerate() {
                if idx[k] + 1 < c.len() {
                    idx[k] += 1;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
            best = eval(&idx);
            if best.is_some() {
                break 'diag;
            }
        }
    }
    if best.is_none() {
        let midpoint = grid.midpoint();
        return Ok(SelectedBandwidths {
            bandwidths: midpoint,
            criterion: None,
            skipped_terms: sample.n(),
            fallback: true,
        });
    }

    loop {
        let mut improved = false;
        for k in 0..d {
            // larger bandwidth first, so ties keep the bigger one
            for step in [1isize, -1] {
                let next = idx[k] as isize + step;
                if next < 0 || next as usize >= grid.candidates[k].len() {
                    continue;
                }
                let mut cand = idx.clone();
                cand[k] = next as usize;
                if let Some((val, sk)) = eval(&cand) {
                    let (cur, _) = best.unwrap();
                    let better = val > cur || (val == cur && step > 0);
                    if better {
                        idx = cand;
                        best = Some((val, sk));
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    let h: Vec<f64> = idx.iter().zip(&grid.candidates).map(|(&i, c)| c[i]).collect();
    let (val, skipped) = best.unwrap();
    Ok(SelectedBandwidths {
        bandwidths: Bandwidths::new(h)?,
        criterion: Some(val),
        skipped_terms: skipped,
        fallback: false,
    })
}

/// Exhaustive search over the full Cartesian candidate grid. Intended for
/// small `d`; used as the oracle for the ascent search.
pub fn select_bandwidths_exhaustive(
    sample: &Sample,
    grid: &BandwidthGrid,
) -> Result<SelectedBandwidths> {
    let d = sample.d();
    let counts: Vec<usize> = grid.candidates.iter().map(|c| c.len()).collect();
    let total: usize = counts.iter().product();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for flat in 0..total {
        let mut rem = flat;
        let mut h = Vec::with_capacity(d);
        for k in 0..d {
            h.push(grid.candidates[k][rem % counts[k]]);
            rem /= counts[k];
        }
        let bw = Bandwidths::new(h.clone())?;
        if let Ok((val, sk)) = loo_criterion(sample, &bw) {
            let take = match &best {
                None => true,
                Some((cur, _, cur_h)) => {
                    val > *cur
                        || (val == *cur
                            && h.iter().product::<f64>() > cur_h.iter().product::<f64>())
                }
            };
            if take {
                best = Some((val, sk, h));
            }
        }
    }
    match best {
        Some((val, skipped, h)) => Ok(SelectedBandwidths {
            bandwidths: Bandwidths::new(h)?,
            criterion: Some(val),
            skipped_terms: skipped,
            fallback: false,
        }),
        None => Ok(SelectedBandwidths {
            bandwidths: grid.midpoint(),
            criterion: None,
            skipped_terms: sample.n(),
            fallback: true,
        }),
    }
}
