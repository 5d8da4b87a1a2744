//! Asymptotic variance constant of the normalized L1 statistic.
//!
//! `sigma^2 = Ktilde * int_{[-1,1]^d} phi(prod_l rho_l(t_l)) dt`, where
//! `phi(r)` is the covariance of absolute values of standard normals with
//! correlation `r` and `rho_l` is the autocorrelation of kernel `l`.

use crate::data::BlockSpec;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Covariance of `|sqrt(1-r^2) Z1 + r Z2|` and `|Z2|` for independent
/// standard normals: `(2/pi)(r asin r + sqrt(1-r^2) - 1)`.
pub fn phi(rho: f64) -> Result<f64> {
    if rho.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!("phi argument {rho} outside [-1, 1]")));
    }
    let r = rho.clamp(-1.0, 1.0);
    Ok(2.0 / std::f64::consts::PI * (r * r.asin() + (1.0 - r * r).sqrt() - 1.0))
}

/// Inputs and cached output for the variance constant.
#[derive(Debug, Clone)]
pub struct VarianceParams {
    pub kernels: Vec<Kernel>,
    pub ktilde: f64,
    pub sigma_sq: f64,
    pub resolution: usize,
}

impl VarianceParams {
    /// Computes `sigma^2` for the given block structure and kernels.
    pub fn compute(spec: &BlockSpec, kernels: Vec<Kernel>, resolution: usize) -> Result<Self> {
        let sigma_sq = sigma_sq(spec, &kernels, resolution)?;
        let ktilde = kernels.iter().map(|k| k.l2_norm_sq()).product();
        Ok(Self { kernels, ktilde, sigma_sq, resolution })
    }

    /// Uniform kernels for every block at the default resolution.
    pub fn uniform(spec: &BlockSpec) -> Result<Self> {
        let kernels = spec.dims().iter().map(|&dl| Kernel::uniform(dl)).collect();
        Self::compute(spec, kernels, default_resolution(spec.d()))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

/// Points per axis giving quadrature error well under the 1e-5 contract
/// while staying fast at higher dimension.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 1024,
        3 => 192,
        _ => 64,
    }
}

/// Variance constant by deterministic quadrature of `phi(rho(t))` over
/// `[-1,1]^d`, scaled by `Ktilde`.
///
/// Tensor midpoint rule for `d <= 4`; for larger `d` a Halton point set
/// with at least 2^18 points.
pub fn sigma_sq(spec: &BlockSpec, kernels: &[Kernel], resolution: usize) -> Result<f64> {
    if kernels.len() != spec.p() {
        return Err(Error::InvalidSpec(format!(
            "expected {} kernels, got {}",
            spec.p(),
            kernels.len()
        )));
    }
    for (l, k) in kernels.iter().enumerate() {
        if k.dim != spec.dim(l) {
            return Err(Error::InvalidSpec(format!(
                "kernel {} has dim {}, block has dim {}",
                l + 1,
                k.dim,
                spec.dim(l)
            )));
        }
    }
    sigma_sq_kernels(kernels, resolution)
}

/// Variance constant for an explicit kernel list; the integration dimension
/// is the sum of the kernel dimensions, with no block-structure validation.
pub fn sigma_sq_kernels(kernels: &[Kernel], resolution: usize) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::InvalidConfig(format!(
            "sigma_sq resolution {resolution} below the minimum of 64"
        )));
    }
    let d: usize = kernels.iter().map(|k| k.dim).sum();
    // map a flat coordinate to its kernel
    let coord_kernel: Vec<&Kernel> = kernels
        .iter()
        .flat_map(|k| std::iter::repeat(k).take(k.dim))
        .collect();

    let rho_at = |t: &[f64]| -> f64 {
        let mut r = 1.0;
        for (k, kern) in t.iter().zip(&coord_kernel) {
            r *= kern.autocorrelation1(*k);
            if r == 0.0 {
                return 0.0;
            }
        }
        r
    };

    let integral = if d <= 4 {
        midpoint_integral(d, resolution, &rho_at)?
    } else {
        halton_integral(d, 1 << 18, &rho_at)?
    };
    let ktilde: f64 = kernels.iter().map(|k| k.l2_norm_sq()).product();
    Ok(ktilde * integral)
}

fn midpoint_integral(d: usize, res: usize, rho_at: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let cell = 2.0 / res as f64;
    let centers: Vec<f64> = (0..res).map(|i| -1.0 + (i as f64 + 0.5) * cell).collect();
    let total = res.pow(d as u32);
    let mut t = vec![0.0; d];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for tk in t.iter_mut() {
            *tk = centers[rem % res];
            rem /= res;
        }
        sum += phi(rho_at(&t))?;
    }
    Ok(sum * cell.powi(d as i32))
}

/// Radical-inverse Halton sequence over the first `d` primes, shifted to
/// `[-1,1]^d`; deterministic for a fixed point count.
fn halton_integral(d: usize, points: usize, rho_at: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    if d > PRIMES.len() {
        return Err(Error::InvalidConfig(format!(
            "sigma_sq supports at most {} dimensions",
            PRIMES.len()
        )));
    }
    let mut t = vec![0.0; d];
    let mut sum = 0.0;
    for i in 1..=points {
        for (k, tk) in t.iter_mut().enumerate() {
            *tk = 2.0 * radical_inverse(i, PRIMES[k]) - 1.0;
        }
        sum += phi(rho_at(&t))?;
    }
    Ok(sum / points as f64 * (1u64 << d) as f64)
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    #[test]
    fn phi_endpoints() {
        assert!(phi(0.0).unwrap().abs() < 1e-12);
        let expect = 1.0 - 2.0 / PI;
        assert!((phi(1.0).unwrap() - expect).abs() < 1e-12);
        assert!((phi(-1.0).unwrap() - expect).abs() < 1e-12);
        assert!(phi(1.1).is_err());
        // slightly-out-of-range inputs are clamped
        assert!(phi(1.0 + 5e-13).is_ok());
    }

    #[test]
    fn phi_symmetric_monotone_and_bounded() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let r = i as f64 / 1000.0;
            let v = phi(r).unwrap();
            assert!((v - phi(-r).unwrap()).abs() < 1e-15);
            assert!(v + 1e-15 >= prev, "phi not nondecreasing at {r}");
            assert!(v <= (PI - 2.0) * r * r / PI + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn phi_half_matches_monte_carlo() {
        // Cov(|sqrt(0.75) Z1 + 0.5 Z2|, |Z2|) with 10^7 draws
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let rho = 0.5f64;
        let c = (1.0 - rho * rho).sqrt();
        let n = 10_000_000usize;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let a = (c * z1 + rho * z2).abs();
            let b = z2.abs();
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let var_a = saa / nf - (sa / nf).powi(2);
        let var_b = sbb / nf - (sb / nf).powi(2);
        // conservative standard error for a covariance estimate
        let se = (var_a * var_b / nf).sqrt() * 2.0;
        let diff = (cov - phi(rho).unwrap()).abs();
        assert!(diff < 3.0 * se, "diff {diff} vs 3*se {}", 3.0 * se);
    }

    #[test]
    fn sigma_sq_d1_closed_form() {
        // 2 * int_0^1 phi(s) ds = 3/2 - 4/pi for the uniform kernel
        let got = sigma_sq_kernels(&[Kernel::uniform(1)], 4096).unwrap();
        let expect = 1.5 - 4.0 / PI;
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn sigma_sq_d2_uniform() {
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let kernels = vec![Kernel::uniform(1), Kernel::uniform(1)];
        let got = sigma_sq(&spec, &kernels, 1024).unwrap();
        // independent high-resolution oracle: 4 * int_0^1 int_0^1 phi(st) ds dt
        let res = 4096usize;
        let cell = 1.0 / res as f64;
        let mut oracle = 0.0;
        for i in 0..res {
            let s = (i as f64 + 0.5) * cell;
            for j in 0..res {
                let t = (j as f64 + 0.5) * cell;
                oracle += phi(s * t).unwrap();
            }
        }
        oracle *= 4.0 * cell * cell;
        assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
    }

    #[test]
    fn sigma_sq_refinement_stable() {
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let kernels = vec![Kernel::uniform(1), Kernel::uniform(1)];
        let a = sigma_sq(&spec, &kernels, 256).unwrap();
        let b = sigma_sq(&spec, &kernels, 512).unwrap();
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn sigma_sq_block_split_invariant_for_uniform() {
        // uniform-kernel sigma^2 depends only on total d, not the block split
        let s12 = BlockSpec::new(vec![1, 2]).unwrap();
        let s21 = BlockSpec::new(vec![2, 1]).unwrap();
        let s111 = BlockSpec::new(vec![1, 1, 1]).unwrap();
        let k = |dims: &[usize]| -> Vec<Kernel> { dims.iter().map(|&d| Kernel::uniform(d)).collect() };
        let a = sigma_sq(&s12, &k(&[1, 2]), 128).unwrap();
        let b = sigma_sq(&s21, &k(&[2, 1]), 128).unwrap();
        let c = sigma_sq(&s111, &k(&[1, 1, 1]), 128).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn resolution_floor_enforced() {
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let kernels = vec![Kernel::uniform(1), Kernel::uniform(1)];
        assert!(sigma_sq(&spec, &kernels, 32).is_err());
    }
}
