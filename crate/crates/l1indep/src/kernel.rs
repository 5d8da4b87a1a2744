//! Bounded-support product kernels, their L2 norms and autocorrelations.
//!
//! Every kernel is a coordinate product of a univariate kernel supported in
//! `[-1/2, 1/2]`, so the multivariate support is the sup-norm ball of radius
//! 1/2 and the autocorrelation factorizes across coordinates.

/// Univariate kernel shape, extended to `dim` coordinates as a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Indicator of `|u| <= 1/2`.
    Uniform,
    /// `2(1 - 2|u|)` on `|u| <= 1/2`.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub dim: usize,
}

impl Kernel {
    pub fn uniform(dim: usize) -> Self {
        Kernel { kind: KernelKind::Uniform, dim }
    }

    pub fn triangular(dim: usize) -> Self {
        Kernel { kind: KernelKind::Triangular, dim }
    }

    /// Univariate kernel value.
    #[inline]
    pub fn eval1(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Uniform => {
                if u.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Triangular => {
                let a = u.abs();
                if a <= 0.5 {
                    2.0 * (1.0 - 2.0 * a)
                } else {
                    0.0
                }
            }
        }
    }

    /// Product-kernel value at a `dim`-vector.
    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let mut out = 1.0;
        for &uk in u {
            out *= self.eval1(uk);
            if out == 0.0 {
                return 0.0;
            }
        }
        out
    }

    /// Squared univariate value, used by the plug-in variance field.
    #[inline]
    pub fn eval1_sq(&self, u: f64) -> f64 {
        let v = self.eval1(u);
        v * v
    }

    /// `int K^2` for the univariate kernel.
    pub fn l2_norm_sq_1d(&self) -> f64 {
        match self.kind {
            KernelKind::Uniform => 1.0,
            KernelKind::Triangular => 4.0 / 3.0,
        }
    }

    /// `int K^2` over the kernel's dimension (product structure).
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq_1d().powi(self.dim as i32)
    }

    /// Univariate autocorrelation `int K(u)K(u+t) du / int K^2`.
    pub fn autocorrelation1(&self, t: f64) -> f64 {
        let a = t.abs();
        match self.kind {
            KernelKind::Uniform => (1.0 - a).max(0.0),
            KernelKind::Triangular => {
                // Self-correlation of the triangle is the cubic B-spline
                // M4 (4-fold convolution of uniforms), rescaled to [-1, 1].
                let x = 2.0 * a;
                let m4 = if x <= 1.0 {
                    2.0 / 3.0 - x * x + x * x * x / 2.0
                } else if x <= 2.0 {
                    let s = 2.0 - x;
                    s * s * s / 6.0
                } else {
                    0.0
                };
                1.5 * m4
            }
        }
    }

    /// Multivariate autocorrelation, a product over coordinates.
    pub fn autocorrelation(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim);
        let mut out = 1.0;
        for &tk in t {
            out *= self.autocorrelation1(tk);
            if out == 0.0 {
                return 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Midpoint-rule quadrature of `f` over `[lo, hi]`.
    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn uniform_eval_points() {
        let k1 = Kernel::uniform(1);
        assert_eq!(k1.eval(&[0.0]), 1.0);
        assert_eq!(k1.eval(&[0.6]), 0.0);
        let k2 = Kernel::uniform(2);
        assert_eq!(k2.eval(&[0.4, -0.4]), 1.0);
        assert_eq!(k2.eval(&[0.4, 0.6]), 0.0);
    }

    #[test]
    fn kernels_integrate_to_one() {
        for kind in [KernelKind::Uniform, KernelKind::Triangular] {
            let k = Kernel { kind, dim: 1 };
            let mass = quad(|u| k.eval1(u), -0.6, 0.6, 1 << 16);
            // midpoint error is O(1/N) at the uniform kernel's jumps
            assert!((mass - 1.0).abs() < 1e-4, "{kind:?}: {mass}");
        }
    }

    #[test]
    fn l2_norms_match_quadrature() {
        assert_eq!(Kernel::uniform(1).l2_norm_sq(), 1.0);
        assert_eq!(Kernel::uniform(2).l2_norm_sq(), 1.0);
        for kind in [KernelKind::Uniform, KernelKind::Triangular] {
            let k = Kernel { kind, dim: 1 };
            let num = quad(|u| k.eval1_sq(u), -0.5, 0.5, 1 << 16);
            assert!((num - k.l2_norm_sq()).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_autocorrelation_is_triangle() {
        let k = Kernel::uniform(1);
        assert_eq!(k.autocorrelation1(0.0), 1.0);
        assert_eq!(k.autocorrelation1(1.2), 0.0);
        assert!((k.autocorrelation1(0.5) - 0.5).abs() < 1e-15);
        // pointwise against (1 - |t|)+ on a 1001-point grid of [-1.5, 1.5]
        for i in 0..=1000 {
            let t = -1.5 + 3.0 * i as f64 / 1000.0;
            let expect = (1.0 - t.abs()).max(0.0);
            assert!((k.autocorrelation1(t) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn autocorrelation_matches_convolution_oracle() {
        for kind in [KernelKind::Uniform, KernelKind::Triangular] {
            let k = Kernel { kind, dim: 1 };
            let l2 = k.l2_norm_sq_1d();
            for i in 0..=60 {
                let t = -1.2 + 2.4 * i as f64 / 60.0;
                let num = quad(|u| k.eval1(u) * k.eval1(u + t), -0.5, 0.5, 1 << 15) / l2;
                assert!(
                    (num - k.autocorrelation1(t)).abs() < 1e-4,
                    "{kind:?} t={t}: {num} vs {}",
                    k.autocorrelation1(t)
                );
            }
        }
    }

    #[test]
    fn autocorrelation_symmetric_and_bounded() {
        for kind in [KernelKind::Uniform, KernelKind::Triangular] {
            let k = Kernel { kind, dim: 1 };
            for i in 0..=200 {
                let t = 1.5 * i as f64 / 200.0;
                let r = k.autocorrelation1(t);
                assert!((r - k.autocorrelation1(-t)).abs() < 1e-15);
                assert!((-1.0..=1.0).contains(&r));
                if t > 1e-9 {
                    assert!(r < 1.0);
                }
            }
        }
    }

    #[test]
    fn multivariate_autocorrelation_factorizes() {
        let k = Kernel::uniform(3);
        let t = [0.3f64, -0.7, 0.1];
        let expect: f64 = t.iter().map(|&tk| (1.0 - tk.abs()).max(0.0)).product();
        assert!((k.autocorrelation(&t) - expect).abs() < 1e-15);
    }
}
