//! Bounded input distributions.
//!
//! All three families live on a closed interval `[lo, hi]`. The truncated
//! normal and truncated skew-normal share a single numeric path: the CDF is
//! tabulated by composite Gauss–Legendre quadrature of the density and the
//! quantile function is a safeguarded Newton solve on that table. The
//! density is cheap, so no special functions beyond the normal CDF (for the
//! skew factor) are needed.

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::derived_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Declarative description of one input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Uniform {
        bounds: (f64, f64),
    },
    TruncatedNormal {
        bounds: (f64, f64),
        mu: f64,
        sigma: f64,
    },
    TruncatedSkewNormal {
        bounds: (f64, f64),
        xi: f64,
        omega: f64,
        alpha: f64,
    },
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        DistributionSpec::Uniform { bounds: (lo, hi) }
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        DistributionSpec::TruncatedNormal {
            bounds: (lo, hi),
            mu,
            sigma,
        }
    }

    pub fn truncated_skew_normal(xi: f64, omega: f64, alpha: f64, lo: f64, hi: f64) -> Self {
        DistributionSpec::TruncatedSkewNormal {
            bounds: (lo, hi),
            xi,
            omega,
            alpha,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            DistributionSpec::Uniform { bounds }
            | DistributionSpec::TruncatedNormal { bounds, .. }
            | DistributionSpec::TruncatedSkewNormal { bounds, .. } => bounds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::param(format!("bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        match *self {
            DistributionSpec::Uniform { .. } => {}
            DistributionSpec::TruncatedNormal { mu, sigma, .. } => {
                if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
                    return Err(Error::param(format!(
                        "truncated normal needs finite mu and sigma > 0, got mu={mu} sigma={sigma}"
                    )));
                }
            }
            DistributionSpec::TruncatedSkewNormal { xi, omega, alpha, .. } => {
                if !xi.is_finite() || !omega.is_finite() || !alpha.is_finite() || omega <= 0.0 {
                    return Err(Error::param(format!(
                        "truncated skew normal needs finite params and omega > 0, got xi={xi} omega={omega} alpha={alpha}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<Dist> {
        Dist::new(self)
    }
}

/// Standard normal CDF, used in the skew-normal density.
fn std_normal_cdf(t: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(t / std::f64::consts::SQRT_2))
}

/// Unnormalized density on `[lo, hi]`; constants cancel in normalization.
fn raw_density(spec: &DistributionSpec, x: f64) -> f64 {
    match *spec {
        DistributionSpec::Uniform { .. } => 1.0,
        DistributionSpec::TruncatedNormal { mu, sigma, .. } => {
            let z = (x - mu) / sigma;
            (-0.5 * z * z).exp()
        }
        DistributionSpec::TruncatedSkewNormal { xi, omega, alpha, .. } => {
            let z = (x - xi) / omega;
            (-0.5 * z * z).exp() * std_normal_cdf(alpha * z)
        }
    }
}

/// Cumulative quadrature table over `PANELS` equal panels of `[lo, hi]`.
struct CdfTable {
    edges: Vec<f64>,
    /// cum[k] = unnormalized integral of the density over [lo, edges[k]].
    cum: Vec<f64>,
    /// Total unnormalized mass cum[PANELS].
    total: f64,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

const PANELS: usize = 512;
const PANEL_ORDER: usize = 8;

impl CdfTable {
    fn build(spec: &DistributionSpec) -> Result<CdfTable> {
        let (lo, hi) = spec.bounds();
        let (gl_nodes, gl_weights) = quad::gauss_legendre(PANEL_ORDER);
        let mut edges = Vec::with_capacity(PANELS + 1);
        for k in 0..=PANELS {
            edges.push(lo + (hi - lo) * k as f64 / PANELS as f64);
        }
        let mut cum = Vec::with_capacity(PANELS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..PANELS {
            acc += quad::integrate(
                |x| raw_density(spec, x),
                edges[k],
                edges[k + 1],
                &gl_nodes,
                &gl_weights,
            );
            cum.push(acc);
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::param(
                "distribution has no mass on its bounds".to_string(),
            ));
        }
        Ok(CdfTable {
            edges,
            cum,
            total: acc,
            gl_nodes,
            gl_weights,
        })
    }

    fn cdf(&self, spec: &DistributionSpec, x: f64) -> f64 {
        let (lo, hi) = spec.bounds();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let w = (hi - lo) / PANELS as f64;
        let k = (((x - lo) / w) as usize).min(PANELS - 1);
        let partial = quad::integrate(
            |t| raw_density(spec, t),
            self.edges[k],
            x,
            &self.gl_nodes,
            &self.gl_weights,
        );
        ((self.cum[k] + partial) / self.total).clamp(0.0, 1.0)
    }

    /// Quantile by bracketed Newton iteration on the tabulated CDF.
    fn inverse(&self, spec: &DistributionSpec, u: f64) -> f64 {
        let (lo, hi) = spec.bounds();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        let target = u * self.total;
        // Panel whose cumulative range brackets the target.
        let k = match self.cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(k) => k.min(PANELS - 1),
            Err(k) => k.saturating_sub(1).min(PANELS - 1),
        };
        let (mut a, mut b) = (self.edges[k], self.edges[k + 1]);
        let mut x = 0.5 * (a + b);
        for _ in 0..80 {
            let f = self.cdf(spec, x) - u;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = raw_density(spec, x) / self.total;
            let step = if d > 0.0 { f / d } else { f64::INFINITY };
            // Test convergence before moving, so a sub-ulp Newton step
            // cannot knock the settled point back to a bracket midpoint.
            if (b - a) < 1e-15 * (hi - lo) || step.abs() < 1e-15 * (hi - lo) {
                break;
            }
            let newton = x - step;
            x = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
        }
        x
    }
}

/// A validated, ready-to-sample distribution.
///
/// Construction runs parameter validation and, for the truncated families,
/// builds the quadrature CDF table once.
pub struct Dist {
    spec: DistributionSpec,
    table: Option<CdfTable>,
}

impl Dist {
    pub fn new(spec: &DistributionSpec) -> Result<Dist> {
        spec.validate()?;
        let table = match spec {
            DistributionSpec::Uniform { .. } => None,
            _ => Some(CdfTable::build(spec)?),
        };
        Ok(Dist {
            spec: spec.clone(),
            table,
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.spec.bounds()
    }

    /// Quantile function F^-1(u); monotone, maps [0,1] onto [lo, hi].
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || !(0.0..=1.0).contains(&u) {
            return Err(Error::param(format!("u must lie in [0, 1], got {u}")));
        }
        let (lo, hi) = self.bounds();
        Ok(match &self.table {
            None => lo + u * (hi - lo),
            Some(t) => t.inverse(&self.spec, u),
        })
    }

    /// CDF of the truncated distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        match &self.table {
            None => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Some(t) => t.cdf(&self.spec, x),
        }
    }

    /// Normalized density at `x` (zero outside the bounds).
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x < lo || x > hi {
            return 0.0;
        }
        match &self.table {
            None => 1.0 / (hi - lo),
            Some(t) => raw_density(&self.spec, x) / t.total,
        }
    }

    /// `n` i.i.d. draws, deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = derived_rng(seed, &[]);
        (0..n).map(|_| self.inverse_cdf(rng.random::<f64>())).collect()
    }

    /// E[f(U)] by composite quadrature against the normalized density.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (lo, hi) = self.bounds();
        let (nodes, weights) = quad::gauss_legendre(16);
        let panels = 256;
        let mut acc = 0.0;
        for k in 0..panels {
            let a = lo + (hi - lo) * k as f64 / panels as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / panels as f64;
            acc += quad::integrate(|x| f(x) * self.pdf(x), a, b, &nodes, &weights);
        }
        acc
    }

    /// Var[f(U)] by quadrature.
    pub fn variance_of<F: Fn(f64) -> f64 + Copy>(&self, f: F) -> f64 {
        let m = self.expectation(f);
        self.expectation(|x| {
            let d = f(x) - m;
            d * d
        })
    }
}
