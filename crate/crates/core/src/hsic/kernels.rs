//! Input kernels on [0, 1] and the ANOVA centering transform.
//!
//! An ANOVA kernel has the form `1 + k` with `k` reproducing zero-mean
//! functions; the HSIC decomposition needs this so that `K - 1` measures
//! pure dependence. The Sobolev kernel is ANOVA by construction, the
//! translation-invariant kernels are centered numerically:
//! `K(x,y) = 1 + k(x,y) - m(x) - m(y) + mu` with `m(x) = int k(x,z) dz`
//! and `mu` the double integral, both by Gauss-Legendre quadrature.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use serde::{Deserialize, Serialize};

fn default_h() -> f64 {
    0.2
}

/// Kernel families on rescaled inputs. Bandwidths default to 0.2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputKernel {
    /// First-order Sobolev kernel, hyperparameter-free and already ANOVA.
    Sobolev1,
    Gaussian {
        #[serde(default = "default_h")]
        h: f64,
    },
    Laplace {
        #[serde(default = "default_h")]
        h: f64,
    },
    Matern32 {
        #[serde(default = "default_h")]
        h: f64,
    },
    Matern52 {
        #[serde(default = "default_h")]
        h: f64,
    },
}

impl InputKernel {
    pub fn label(&self) -> &'static str {
        match self {
            InputKernel::Sobolev1 => "sobolev1",
            InputKernel::Gaussian { .. } => "gaussian",
            InputKernel::Laplace { .. } => "laplace",
            InputKernel::Matern32 { .. } => "matern32",
            InputKernel::Matern52 { .. } => "matern52",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = match *self {
            InputKernel::Sobolev1 => return Ok(()),
            InputKernel::Gaussian { h }
            | InputKernel::Laplace { h }
            | InputKernel::Matern32 { h }
            | InputKernel::Matern52 { h } => h,
        };
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::param(format!(
                "{} kernel bandwidth must be positive, got {h}",
                self.label()
            )));
        }
        Ok(())
    }

    /// Raw kernel value before any centering; `x, y` must already live
    /// in [0, 1].
    pub fn eval_base(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!(
                "kernel arguments must be rescaled to [0,1], got ({x}, {y})"
            )));
        }
        Ok(self.base_unchecked(x, y))
    }

    fn base_unchecked(&self, x: f64, y: f64) -> f64 {
        let r = (x - y).abs();
        match *self {
            InputKernel::Sobolev1 => {
                1.0 + (x - 0.5) * (y - 0.5) + 0.5 * (r * r - r + 1.0 / 6.0)
            }
            InputKernel::Gaussian { h } => (-0.5 * (r / h) * (r / h)).exp(),
            InputKernel::Laplace { h } => (-r / h).exp(),
            InputKernel::Matern32 { h } => {
                let t = 3f64.sqrt() * r / h;
                (1.0 + t) * (-t).exp()
            }
            InputKernel::Matern52 { h } => {
                let t = 5f64.sqrt() * r / h;
                (1.0 + t + t * t / 3.0) * (-t).exp()
            }
        }
    }
}

/// A kernel with the zero-mean (ANOVA) property on [0, 1].
pub struct AnovaKernel {
    base: InputKernel,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Double integral of the base kernel over the unit square.
    mu: f64,
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

impl AnovaKernel {
    pub fn new(base: InputKernel) -> Result<Self> {
        Self::with_order(base, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn with_order(base: InputKernel, q: usize) -> Result<Self> {
        base.validate()?;
        if q < 2 {
            return Err(Error::param("quadrature order must be at least 2"));
        }
        let (raw_nodes, raw_weights) = gauss_legendre(q);
        // Map from [-1, 1] to [0, 1].
        let nodes: Vec<f64> = raw_nodes.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let weights: Vec<f64> = raw_weights.iter().map(|w| 0.5 * w).collect();
        let mut mu = 0.0;
        for (i, &xi) in nodes.iter().enumerate() {
            let mut mi = 0.0;
            for (j, &xj) in nodes.iter().enumerate() {
                mi += weights[j] * base.base_unchecked(xi, xj);
            }
            mu += weights[i] * mi;
        }
        Ok(AnovaKernel {
            base,
            nodes,
            weights,
            mu,
        })
    }

    pub fn base(&self) -> InputKernel {
        self.base
    }

    /// m(x) = int_0^1 k(x, z) dz.
    fn m(&self, x: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * self.base.base_unchecked(x, z))
            .sum()
    }

    /// Transformed kernel value; the Sobolev kernel passes through.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!(
                "kernel arguments must be rescaled to [0,1], got ({x}, {y})"
            )));
        }
        if self.base == InputKernel::Sobolev1 {
            return Ok(self.base.base_unchecked(x, y));
        }
        Ok(1.0 + self.base.base_unchecked(x, y) - self.m(x) - self.m(y) + self.mu)
    }

    /// Full Gram matrix over a point set, diagonal included. The m-values
    /// are computed once per point, so this is O(n q + n^2).
    pub fn gram(&self, xs: &[f64]) -> Result<ndarray::Array2<f64>> {
        if let Some(bad) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!(
                "kernel arguments must be rescaled to [0,1], got {bad}"
            )));
        }
        let n = xs.len();
        let sobolev = self.base == InputKernel::Sobolev1;
        let ms: Vec<f64> = if sobolev {
            Vec::new()
        } else {
            xs.iter().map(|&x| self.m(x)).collect()
        };
        let mut g = ndarray::Array2::zeros((n, n));
        for j in 0..n {
            for l in j..n {
                let v = if sobolev {
                    self.base.base_unchecked(xs[j], xs[l])
                } else {
                    1.0 + self.base.base_unchecked(xs[j], xs[l]) - ms[j] - ms[l] + self.mu
                };
                g[[j, l]] = v;
                g[[l, j]] = v;
            }
        }
        Ok(g)
    }
}
