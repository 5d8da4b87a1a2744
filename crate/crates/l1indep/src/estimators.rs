//! Kernel plug-in quantities: joint and marginal density estimates, the
//! squared-kernel field `v_hat`, the off-diagonal U-statistic `g_n`, and the
//! variance-proxy field `l_hat` entering the centering term.
//!
//! All estimators use one bandwidth per flat coordinate; the single-bandwidth
//! case is recovered by equal entries. Evaluations are pure functions of
//! `(sample, bandwidths, point)` and safe to run in parallel over grids.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// One strictly positive bandwidth per flat coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidths {
    h: Vec<f64>,
}

impl Bandwidths {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidBandwidth("empty bandwidth list".into()));
        }
        for (k, &v) in h.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidBandwidth(format!(
                    "coordinate {}: bandwidth {v} must be positive and finite",
                    k + 1
                )));
            }
        }
        Ok(Self { h })
    }

    /// Equal bandwidth in every coordinate.
    pub fn constant(h: f64, d: usize) -> Result<Self> {
        Self::new(vec![h; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.h
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.h[k]
    }

    /// Product of the bandwidths of block `l` (the `h^{d_l}` factor).
    pub fn block_product(&self, sample: &Sample, l: usize) -> f64 {
        sample.spec().range(l).map(|k| self.h[k]).product()
    }

    /// Product over all coordinates (the `h^d` factor).
    pub fn total_product(&self) -> f64 {
        self.h.iter().product()
    }
}

/// Evaluator bundling a sample, bandwidths, and one kernel per block.
///
/// `skip` selects the leave-one-out variant: when set, that observation is
/// excluded from every sum and `n-1` replaces `n` in the normalizations.
pub struct Estimators<'a> {
    sample: &'a Sample,
    bw: &'a Bandwidths,
    kernels: Vec<Kernel>,
}

impl<'a> Estimators<'a> {
    pub fn new(sample: &'a Sample, bw: &'a Bandwidths, kernels: Vec<Kernel>) -> Result<Self> {
        let spec = sample.spec();
        if bw.as_slice().len() != spec.d() {
            return Err(Error::InvalidBandwidth(format!(
                "expected {} bandwidths, got {}",
                spec.d(),
                bw.as_slice().len()
            )));
        }
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
        Ok(Self { sample, bw, kernels })
    }

    /// Uniform product kernels in every block.
    pub fn uniform(sample: &'a Sample, bw: &'a Bandwidths) -> Result<Self> {
        let kernels = sample.spec().dims().iter().map(|&dl| Kernel::uniform(dl)).collect();
        Self::new(sample, bw, kernels)
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    pub fn bandwidths(&self) -> &Bandwidths {
        self.bw
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    fn effective_n(&self, skip: Option<usize>) -> usize {
        self.sample.n() - skip.map_or(0, |_| 1)
    }

    /// Kernel factor of observation `i` for block `l` at `x_l`, with
    /// per-coordinate bandwidth scaling.
    #[inline]
    fn block_factor(&self, i: usize, l: usize, x_l: &[f64]) -> f64 {
        let kernel = &self.kernels[l];
        let row = self.sample.block_row(i, l);
        let range = self.sample.spec().range(l);
        let mut out = 1.0;
        for (off, k) in range.enumerate() {
            out *= kernel.eval1((x_l[off] - row[off]) / self.bw.coord(k));
            if out == 0.0 {
                return 0.0;
            }
        }
        out
    }

    /// Sums `(S1, S2) = (sum_i K, sum_i K^2)` of block-`l` kernel factors.
    fn block_sums(&self, l: usize, x_l: &[f64], skip: Option<usize>) -> (f64, f64) {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 0..self.sample.n() {
            if Some(i) == skip {
                continue;
            }
            let f = self.block_factor(i, l, x_l);
            s1 += f;
            s2 += f * f;
        }
        (s1, s2)
    }

    /// Joint density estimate `f_n` at a `d`-vector.
    pub fn joint(&self, x: &[f64], skip: Option<usize>) -> f64 {
        let spec = self.sample.spec();
        let n = self.effective_n(skip);
        let mut sum = 0.0;
        for i in 0..self.sample.n() {
            if Some(i) == skip {
                continue;
            }
            let mut term = 1.0;
            for l in 0..spec.p() {
                term *= self.block_factor(i, l, &x[spec.range(l)]);
                if term == 0.0 {
                    break;
                }
            }
            sum += term;
        }
        sum / (n as f64 * self.bw.total_product())
    }

    /// Marginal density estimate `f_{n,l}` of block `l`.
    pub fn marginal(&self, l: usize, x_l: &[f64], skip: Option<usize>) -> f64 {
        let n = self.effective_n(skip);
        let (s1, _) = self.block_sums(l, x_l, skip);
        s1 / (n as f64 * self.bw.block_product(self.sample, l))
    }

    /// Squared-kernel field `v_hat_{n,l}`.
    pub fn v_hat(&self, l: usize, x_l: &[f64], skip: Option<usize>) -> f64 {
        let n = self.effective_n(skip);
        let hb = self.bw.block_product(self.sample, l);
        let (_, s2) = self.block_sums(l, x_l, skip);
        s2 / (n as f64 * hb * hb)
    }

    /// Off-diagonal U-statistic `g_{n,l}`, via the `(S1^2 - S2)` identity.
    pub fn g_n(&self, l: usize, x_l: &[f64], skip: Option<usize>) -> Result<f64> {
        let n = self.effective_n(skip);
        if n < 2 {
            return Err(Error::TooFewObservations { n, min: 2 });
        }
        let hb = self.bw.block_product(self.sample, l);
        let (s1, s2) = self.block_sums(l, x_l, skip);
        Ok((s1 * s1 - s2) / (n as f64 * (n - 1) as f64 * hb * hb))
    }

    /// Per-block `(v_hat, g_n)` pair from a single pass over the data.
    pub fn v_and_g(&self, l: usize, x_l: &[f64], skip: Option<usize>) -> Result<(f64, f64)> {
        let n = self.effective_n(skip);
        if n < 2 {
            return Err(Error::TooFewObservations { n, min: 2 });
        }
        let hb = self.bw.block_product(self.sample, l);
        let (s1, s2) = self.block_sums(l, x_l, skip);
        let v = s2 / (n as f64 * hb * hb);
        let g = (s1 * s1 - s2) / (n as f64 * (n - 1) as f64 * hb * hb);
        Ok((v, g))
    }

    /// Variance-proxy field, clamped at zero, assembled from per-block
    /// `(v_hat, g_n)` pairs.
    pub fn l_hat(&self, x: &[f64], skip: Option<usize>) -> Result<f64> {
        let spec = self.sample.spec();
        let pairs: Vec<(f64, f64)> = (0..spec.p())
            .map(|l| self.v_and_g(l, &x[spec.range(l)], skip))
            .collect::<Result<_>>()?;
        Ok(combine_l_hat(&pairs))
    }

    /// Leave-one-out evaluator set with observation `j` removed.
    pub fn loo_fields(&self, j: usize) -> Result<LooFields<'_, 'a>> {
        let n = self.sample.n();
        if j >= n {
            return Err(Error::RowOutOfRange { index: j, n });
        }
        if n < 3 {
            return Err(Error::TooFewObservations { n, min: 3 });
        }
        Ok(LooFields { est: self, j })
    }
}

/// Combines per-block `(v_hat, g_n)` values into the clamped variance proxy
/// `max(0, prod v - sum_l v_l prod_{j!=l} g_j + (p-1) prod g)`.
pub fn combine_l_hat(pairs: &[(f64, f64)]) -> f64 {
    let p = pairs.len();
    let prod_v: f64 = pairs.iter().map(|&(v, _)| v).product();
    let prod_g: f64 = pairs.iter().map(|&(_, g)| g).product();
    let mut cross = 0.0;
    for l in 0..p {
        let mut term = pairs[l].0;
        for (j, &(_, g)) in pairs.iter().enumerate() {
            if j != l {
                term *= g;
            }
        }
        cross += term;
    }
    (prod_v - cross + (p as f64 - 1.0) * prod_g).max(0.0)
}

/// Leave-one-out view over [`Estimators`], all fields computed as if row `j`
/// had never been observed.
pub struct LooFields<'e, 'a> {
    est: &'e Estimators<'a>,
    j: usize,
}

impl LooFields<'_, '_> {
    pub fn joint(&self, x: &[f64]) -> f64 {
        self.est.joint(x, Some(self.j))
    }

    pub fn marginal(&self, l: usize, x_l: &[f64]) -> f64 {
        self.est.marginal(l, x_l, Some(self.j))
    }

    pub fn l_hat(&self, x: &[f64]) -> Result<f64> {
        self.est.l_hat(x, Some(self.j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BlockSpec;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, dims: Vec<usize>) -> Sample {
        let spec = BlockSpec::new(dims).unwrap();
        let d = spec.d();
        let values: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Sample::from_rows(values, n, spec).unwrap()
    }

    /// O(n) brute-force joint KDE, straight from the definition.
    fn brute_joint(s: &Sample, b: &Bandwidths, kernels: &[Kernel], x: &[f64]) -> f64 {
        let spec = s.spec();
        let mut sum = 0.0;
        for i in 0..s.n() {
            let mut term = 1.0;
            for l in 0..spec.p() {
                let xl = &x[spec.range(l)];
                let xi = s.block_row(i, l);
                for (off, k) in spec.range(l).enumerate() {
                    term *= kernels[l].eval1((xl[off] - xi[off]) / b.coord(k));
                }
            }
            sum += term;
        }
        sum / (s.n() as f64 * b.total_product())
    }

    fn brute_marginal(s: &Sample, b: &Bandwidths, kernels: &[Kernel], l: usize, xl: &[f64]) -> f64 {
        let spec = s.spec();
        let mut sum = 0.0;
        for i in 0..s.n() {
            let xi = s.block_row(i, l);
            let mut term = 1.0;
            for (off, k) in spec.range(l).enumerate() {
                term *= kernels[l].eval1((xl[off] - xi[off]) / b.coord(k));
            }
            sum += term;
        }
        sum / (s.n() as f64 * b.block_product(s, l))
    }

    /// O(n^2) double-loop g_n, straight from the definition.
    fn brute_g(s: &Sample, b: &Bandwidths, kernels: &[Kernel], l: usize, xl: &[f64]) -> f64 {
        let spec = s.spec();
        let hb = b.block_product(s, l);
        let factor = |i: usize| -> f64 {
            let xi = s.block_row(i, l);
            let mut term = 1.0;
            for (off, k) in spec.range(l).enumerate() {
                term *= kernels[l].eval1((xl[off] - xi[off]) / b.coord(k));
            }
            term
        };
        let mut sum = 0.0;
        for i in 0..s.n() {
            for j in 0..s.n() {
                if i != j {
                    sum += factor(i) * factor(j);
                }
            }
        }
        sum / (s.n() as f64 * (s.n() - 1) as f64 * hb * hb)
    }

    #[test]
    fn single_observation_joint_is_inverse_bandwidth_product() {
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let s = Sample::from_rows(vec![0.3, -0.2], 1, spec).unwrap();
        let b = Bandwidths::new(vec![0.5, 0.25]).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        let at_obs = est.joint(&[0.3, -0.2], None);
        assert!((at_obs - 1.0 / (0.5 * 0.25)).abs() < 1e-12);
        // far away in one coordinate: empty sum
        assert_eq!(est.joint(&[0.3, 5.0], None), 0.0);
    }

    #[test]
    fn marginal_single_observation() {
        let spec = BlockSpec::new(vec![1, 2]).unwrap();
        let s = Sample::from_rows(vec![0.0, 1.0, 2.0], 1, spec).unwrap();
        let b = Bandwidths::new(vec![0.5, 0.2, 0.4]).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        let m = est.marginal(1, &[1.0, 2.0], None);
        assert!((m - 1.0 / (0.2 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn identical_blocks_give_identical_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let col: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = col.iter().flat_map(|&v| [v, v]).collect();
        let s = Sample::from_rows(values, 20, spec).unwrap();
        let b = Bandwidths::constant(0.3, 2).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        for i in 0..40 {
            let x = -1.0 + i as f64 / 20.0;
            assert!((est.marginal(0, &[x], None) - est.marginal(1, &[x], None)).abs() < 1e-14);
        }
    }

    #[test]
    fn estimators_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..30 {
            let dims = match trial % 3 {
                0 => vec![1, 1],
                1 => vec![1, 2],
                _ => vec![1, 1, 1],
            };
            let n = rng.gen_range(5..30);
            let s = random_sample(&mut rng, n, dims);
            let d = s.d();
            let h: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..0.8)).collect();
            let b = Bandwidths::new(h).unwrap();
            let est = Estimators::uniform(&s, &b).unwrap();
            let kernels: Vec<Kernel> = est.kernels().to_vec();
            for _ in 0..5 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.2..1.2)).collect();
                let spec = s.spec();
                assert!((est.joint(&x, None) - brute_joint(&s, &b, &kernels, &x)).abs() < 1e-12);
                for l in 0..spec.p() {
                    let xl = &x[spec.range(l)];
                    assert!(
                        (est.marginal(l, xl, None) - brute_marginal(&s, &b, &kernels, l, xl)).abs()
                            < 1e-12
                    );
                    assert!(
                        (est.g_n(l, xl, None).unwrap() - brute_g(&s, &b, &kernels, l, xl)).abs()
                            < 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_kernel_vhat_identity() {
        // indicator squared is itself, so v_hat * h_block = marginal
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sample(&mut rng, 25, vec![1, 1]);
        let b = Bandwidths::new(vec![0.4, 0.6]).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        for _ in 0..20 {
            let x = rng.gen_range(-1.0..1.0);
            for l in 0..2 {
                let v = est.v_hat(l, &[x], None);
                let m = est.marginal(l, &[x], None);
                let hb = b.block_product(&s, l);
                assert!((v * hb - m).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn g_n_two_points() {
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let s = Sample::from_rows(vec![0.0, 0.0, 0.1, 0.1], 2, spec).unwrap();
        let b = Bandwidths::constant(0.5, 2).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        // x covered by both kernels: product of factors / hb^2
        let g = est.g_n(0, &[0.05], None).unwrap();
        assert!((g - 1.0 / 0.25).abs() < 1e-12);
        // x covered by exactly one support: every cross term vanishes
        let g0 = est.g_n(0, &[0.3], None).unwrap();
        assert_eq!(g0, 0.0);
    }

    #[test]
    fn l_hat_factorizes_at_p_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_sample(&mut rng, 30, vec![1, 1]);
        let b = Bandwidths::new(vec![0.5, 0.5]).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        for _ in 0..30 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let (v1, g1) = est.v_and_g(0, &x[..1], None).unwrap();
            let (v2, g2) = est.v_and_g(1, &x[1..], None).unwrap();
            let expect = ((v1 - g1) * (v2 - g2)).max(0.0);
            assert!((est.l_hat(&x, None).unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn l_hat_zero_away_from_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sample(&mut rng, 10, vec![1, 1]);
        let b = Bandwidths::constant(0.3, 2).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        assert_eq!(est.l_hat(&[10.0, 10.0], None).unwrap(), 0.0);
    }

    #[test]
    fn loo_matches_sub_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_sample(&mut rng, 3, vec![1, 1]);
        let b = Bandwidths::constant(0.7, 2).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        let loo = est.loo_fields(0).unwrap();
        let sub = s.without_row(0).unwrap();
        let sub_est = Estimators::uniform(&sub, &b).unwrap();
        for _ in 0..10 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            assert!((loo.joint(&x) - sub_est.joint(&x, None)).abs() < 1e-14);
            assert!((loo.marginal(0, &x[..1]) - sub_est.marginal(0, &x[..1], None)).abs() < 1e-14);
        }
    }

    #[test]
    fn loo_own_term_identity() {
        // n * h_total * f_n(x) = (n-1) * h_total * f_{n,-j}(x) + own kernel term
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = random_sample(&mut rng, 12, vec![1, 1]);
        let b = Bandwidths::constant(0.5, 2).unwrap();
        let est = Estimators::uniform(&s, &b).unwrap();
        let ht = b.total_product();
        for j in 0..s.n() {
            let x = s.row(j).to_vec();
            let full = s.n() as f64 * ht * est.joint(&x, None);
            let loo = (s.n() - 1) as f64 * ht * est.joint(&x, Some(j));
            // own term: all kernel factors equal 1 at the observation itself
            assert!((full - loo - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_sample(&mut rng, 15, vec![1, 1]);
        let mut rows: Vec<Vec<f64>> = (0..15).map(|i| s.row(i).to_vec()).collect();
        rows.reverse();
        let shuffled =
            Sample::from_rows(rows.concat(), 15, s.spec().clone()).unwrap();
        let b = Bandwidths::constant(0.4, 2).unwrap();
        let e1 = Estimators::uniform(&s, &b).unwrap();
        let e2 = Estimators::uniform(&shuffled, &b).unwrap();
        for _ in 0..10 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            assert_eq!(e1.joint(&x, None), e2.joint(&x, None));
            assert_eq!(e1.l_hat(&x, None).unwrap(), e2.l_hat(&x, None).unwrap());
        }
    }
}
