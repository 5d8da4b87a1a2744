//! Truncation-region selection, numerical integration of the L1 statistic
//! and its centering term, the normalized statistic `T_n`, and the test
//! decision.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::estimators::{combine_l_hat, Bandwidths, Estimators};
use crate::variance::VarianceParams;

/// Product of axis-aligned boxes, one per block; the statistic is
/// integrated over their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Per flat coordinate: `[lo, hi]`.
    pub bounds: Vec<[f64; 2]>,
}

impl Region {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        for (k, b) in bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[1] > b[0]) {
                return Err(Error::InvalidConfig(format!(
                    "coordinate {}: region bounds [{}, {}] must be finite with positive length",
                    k + 1,
                    b[0],
                    b[1]
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn d(&self) -> usize {
        self.bounds.len()
    }

    /// Scales coordinate `k` by `c` (used by the scaling-invariance checks).
    pub fn scale_coord(&mut self, k: usize, c: f64) {
        self.bounds[k][0] *= c;
        self.bounds[k][1] *= c;
    }
}

/// Regular midpoint grid covering a region, one axis per flat coordinate.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    axes: Vec<GridAxis>,
}

#[derive(Debug, Clone)]
struct GridAxis {
    lo: f64,
    width: f64,
    count: usize,
}

impl QuadratureGrid {
    /// Builds a grid with per-coordinate cell size at most
    /// `h_k / grid_factor`.
    pub fn new(region: &Region, bw: &Bandwidths, grid_factor: f64) -> Result<Self> {
        if grid_factor < 2.0 {
            return Err(Error::InvalidConfig(format!(
                "grid_factor {grid_factor} must be >= 2"
            )));
        }
        if region.d() != bw.as_slice().len() {
            return Err(Error::InvalidConfig("region/bandwidth dimension mismatch".into()));
        }
        let axes = region
            .bounds
            .iter()
            .zip(bw.as_slice())
            .map(|(b, &h)| {
                let len = b[1] - b[0];
                let count = (len / (h / grid_factor)).ceil().max(1.0) as usize;
                GridAxis { lo: b[0], width: len / count as f64, count }
            })
            .collect();
        Ok(Self { axes })
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width).product()
    }

    fn center(&self, k: usize, digit: usize) -> f64 {
        let a = &self.axes[k];
        a.lo + (digit as f64 + 0.5) * a.width
    }

    /// Visits every cell center in a fixed row-major order.
    fn for_each_cell(&self, mut f: impl FnMut(&[usize], &[f64])) {
        let d = self.axes.len();
        let total: usize = self.axes.iter().map(|a| a.count).product();
        let mut digits = vec![0usize; d];
        let mut x: Vec<f64> = (0..d).map(|k| self.center(k, 0)).collect();
        for _ in 0..total {
            f(&digits, &x);
            for k in 0..d {
                digits[k] += 1;
                if digits[k] < self.axes[k].count {
                    x[k] = self.center(k, digits[k]);
                    break;
                }
                digits[k] = 0;
                x[k] = self.center(k, 0);
            }
        }
    }
}

/// Per-block index layout into a grid restricted to that block's axes.
struct BlockLayout {
    /// flat coordinate range of the block
    coords: std::ops::Range<usize>,
    /// stride per block-local axis
    strides: Vec<usize>,
    /// number of sub-grid points
    size: usize,
}

fn block_layouts(sample: &Sample, grid: &QuadratureGrid) -> Vec<BlockLayout> {
    let spec = sample.spec();
    let counts = grid.cell_counts();
    (0..spec.p())
        .map(|l| {
            let coords = spec.range(l);
            let mut strides = Vec::with_capacity(coords.len());
            let mut size = 1usize;
            for k in coords.clone() {
                strides.push(size);
                size *= counts[k];
            }
            BlockLayout { coords, strides, size }
        })
        .collect()
}

fn block_index(layout: &BlockLayout, digits: &[usize]) -> usize {
    layout
        .coords
        .clone()
        .zip(&layout.strides)
        .map(|(k, &s)| digits[k] * s)
        .sum()
}

/// Tabulates `f(block point)` on every sub-grid point of block `l`.
fn tabulate_block<T: Clone + Default>(
    grid: &QuadratureGrid,
    layout: &BlockLayout,
    mut f: impl FnMut(&[f64]) -> T,
) -> Vec<T> {
    let dl = layout.coords.len();
    let mut out = vec![T::default(); layout.size];
    let counts: Vec<usize> = layout.coords.clone().map(|k| grid.axes[k].count).collect();
    let mut digits = vec![0usize; dl];
    let mut x: Vec<f64> =
        layout.coords.clone().map(|k| grid.center(k, 0)).collect();
    for idx in 0..layout.size {
        out[idx] = f(&x);
        for a in 0..dl {
            digits[a] += 1;
            if digits[a] < counts[a] {
                x[a] = grid.center(layout.coords.start + a, digits[a]);
                break;
            }
            digits[a] = 0;
            x[a] = grid.center(layout.coords.start + a, 0);
        }
    }
    out
}

/// Integral over the region of `|f_n - prod_l f_{n,l}|` by the midpoint rule.
pub fn v_n_region(est: &Estimators<'_>, grid: &QuadratureGrid) -> f64 {
    let sample = est.sample();
    let layouts = block_layouts(sample, grid);
    let marginals: Vec<Vec<f64>> = layouts
        .iter()
        .enumerate()
        .map(|(l, layout)| tabulate_block(grid, layout, |x_l| est.marginal(l, x_l, None)))
        .collect();
    let vol = grid.cell_volume();
    let mut sum = 0.0;
    grid.for_each_cell(|digits, x| {
        let mut prod = 1.0;
        for (l, layout) in layouts.iter().enumerate() {
            prod *= marginals[l][block_index(layout, digits)];
        }
        sum += (est.joint(x, None) - prod).abs();
    });
    sum * vol
}

/// Centering term: `sqrt(2/pi)` times the midpoint integral of
/// `sqrt(l_hat)` over the region.
pub fn a_n_region(est: &Estimators<'_>, grid: &QuadratureGrid) -> Result<f64> {
    let sample = est.sample();
    if sample.n() < 2 {
        return Err(Error::TooFewObservations { n: sample.n(), min: 2 });
    }
    let layouts = block_layouts(sample, grid);
    let fields: Vec<Vec<(f64, f64)>> = layouts
        .iter()
        .enumerate()
        .map(|(l, layout)| {
            tabulate_block(grid, layout, |x_l| est.v_and_g(l, x_l, None).unwrap())
        })
        .collect();
    let vol = grid.cell_volume();
    let p = layouts.len();
    let mut pairs = vec![(0.0, 0.0); p];
    let mut sum = 0.0;
    grid.for_each_cell(|digits, _| {
        for (l, layout) in layouts.iter().enumerate() {
            pairs[l] = fields[l][block_index(layout, digits)];
        }
        sum += combine_l_hat(&pairs).sqrt();
    });
    Ok((2.0 / std::f64::consts::PI).sqrt() * sum * vol)
}

/// Picks the truncation region: per block, the empirical span widened by one
/// bandwidth, then symmetric tail trimming while the estimated marginal mass
/// stays at least `1 - epsilon_region`.
pub fn select_region(
    est: &Estimators<'_>,
    epsilon_region: f64,
    grid_factor: f64,
) -> Result<Region> {
    if !(epsilon_region > 0.0 && epsilon_region < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "epsilon_region {epsilon_region} must be in (0, 0.5)"
        )));
    }
    let sample = est.sample();
    let spec = sample.spec();
    let bw = est.bandwidths();
    let n = sample.n();

    // sorted column values per flat coordinate
    let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(spec.d());
    for k in 0..spec.d() {
        let mut col = sample.column(k);
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if col[n - 1] - col[0] <= 0.0 {
            return Err(Error::DegenerateCoordinate { coord: k + 1 });
        }
        sorted.push(col);
    }

    let block_bounds = |l: usize, trim: usize| -> Vec<[f64; 2]> {
        spec.range(l)
            .map(|k| {
                let h = bw.coord(k);
                [sorted[k][trim] - h, sorted[k][n - 1 - trim] + h]
            })
            .collect()
    };

    // estimated mass of block l's marginal over its box
    let block_mass = |l: usize, bounds: &[[f64; 2]]| -> Result<f64> {
        let region = Region::new(bounds.to_vec())?;
        let block_bw = Bandwidths::new(spec.range(l).map(|k| bw.coord(k)).collect())?;
        let axes: Vec<GridAxis> = region
            .bounds
            .iter()
            .zip(block_bw.as_slice())
            .map(|(b, &h)| {
                let len = b[1] - b[0];
                let count = (len / (h / grid_factor)).ceil().max(1.0) as usize;
                GridAxis { lo: b[0], width: len / count as f64, count }
            })
            .collect();
        let g = QuadratureGrid { axes };
        let vol = g.cell_volume();
        let mut mass = 0.0;
        g.for_each_cell(|_, x| mass += est.marginal(l, x, None));
        Ok(mass * vol)
    };

    let max_trim = n / 4;
    let mut bounds = vec![[0.0, 0.0]; spec.d()];
    for l in 0..spec.p() {
        let mut trim = 0usize;
        let mut current = block_bounds(l, 0);
        while trim + 1 <= max_trim {
            let candidate = block_bounds(l, trim + 1);
            if block_mass(l, &candidate)? >= 1.0 - epsilon_region {
                trim += 1;
                current = candidate;
            } else {
                break;
            }
        }
        for (b, k) in current.into_iter().zip(spec.range(l)) {
            bounds[k] = b;
        }
    }
    Region::new(bounds)
}

/// Everything `run_test` needs besides the data, the bandwidths and the
/// variance constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub epsilon_region: f64,
    pub grid_factor: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { alpha: 0.05, epsilon_region: 0.04, grid_factor: 2.0 }
    }
}

/// Outcome of one run of the independence test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    pub v_n: f64,
    pub a_n: f64,
    pub sigma: f64,
    pub t_n: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub z_crit: f64,
    pub reject: bool,
    pub bandwidths: Vec<f64>,
    pub region: Region,
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Standard normal quantile `z_q`.
pub fn std_normal_quantile(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// Full pipeline: region, grid, `V_n`, `a_n`, `T_n`, decision.
pub fn run_test(
    sample: &Sample,
    bw: &Bandwidths,
    vp: &VarianceParams,
    cfg: &TestConfig,
) -> Result<TestResult> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {} must be in (0, 1)", cfg.alpha)));
    }
    let n = sample.n();
    let min_n = 2 * sample.spec().p();
    if n < min_n {
        return Err(Error::TooFewObservations { n, min: min_n });
    }
    if !(vp.sigma_sq > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma^2 = {} must be positive",
            vp.sigma_sq
        )));
    }
    let est = Estimators::new(sample, bw, vp.kernels.clone())?;
    let region = select_region(&est, cfg.epsilon_region, cfg.grid_factor)?;
    let grid = QuadratureGrid::new(&region, bw, cfg.grid_factor)?;
    let v_n = v_n_region(&est, &grid);
    let a_n = a_n_region(&est, &grid)?;
    let sigma = vp.sigma();
    let t_n = ((n as f64).sqrt() * v_n - a_n) / sigma;
    let p_value = 1.0 - std_normal_cdf(t_n);
    let z_crit = std_normal_quantile(1.0 - cfg.alpha);
    Ok(TestResult {
        n,
        v_n,
        a_n,
        sigma,
        t_n,
        p_value,
        alpha: cfg.alpha,
        z_crit,
        reject: t_n > z_crit,
        bandwidths: bw.as_slice().to_vec(),
        region,
    })
}

/// Permutation calibration of `sqrt(n) V_n` over the fixed region and
/// bandwidths: rows of blocks 2..p are independently permuted `b_reps`
/// times and the p-value is `(1 + #{permuted >= observed}) / (B + 1)`.
pub fn permutation_calibrate(
    sample: &Sample,
    bw: &Bandwidths,
    vp: &VarianceParams,
    region: &Region,
    b_reps: usize,
    seed: u64,
    grid_factor: f64,
) -> Result<f64> {
    if b_reps < 99 {
        return Err(Error::InvalidConfig(format!(
            "permutation count {b_reps} below the minimum of 99"
        )));
    }
    let n = sample.n();
    let p = sample.spec().p();
    let grid = QuadratureGrid::new(region, bw, grid_factor)?;
    let est = Estimators::new(sample, bw, vp.kernels.clone())?;
    let observed = (n as f64).sqrt() * v_n_region(&est, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..b_reps {
        let perms: Vec<Vec<usize>> = (1..p)
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                idx
            })
            .collect();
        let permuted = sample.permute_blocks(&perms)?;
        let pest = Estimators::new(&permuted, bw, vp.kernels.clone())?;
        let stat = (n as f64).sqrt() * v_n_region(&pest, &grid);
        if stat >= observed {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (b_reps + 1) as f64)
}
