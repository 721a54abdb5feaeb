//! U(n)-invariant Kähler metrics on ℂⁿ given by a radial potential.

mod curvature;
pub(crate) mod state;

pub use curvature::{
    phong_sturm_operator, traceless_hermitian_basis, CurvaturePointData, KahlerTensor, PhongSturm, HERMITIAN_TOL,
};
pub use state::RadialKahlerState;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID: usize = 16;

/// Uniform grid in ρ = log|z|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rho_min: f64,
    pub h: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(rho_min: f64, rho_max: f64, len: usize) -> Result<Self> {
        if len < MIN_GRID {
            return Err(Error::GridTooCoarse { nodes: len, min: MIN_GRID });
        }
        if !(rho_max > rho_min) || !rho_min.is_finite() || !rho_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid bounds [{rho_min}, {rho_max}] are not an interval"
            )));
        }
        Ok(Self { rho_min, h: (rho_max - rho_min) / (len - 1) as f64, len })
    }

    /// Accepts explicit samples if they are uniform to 1e-9 relative.
    pub fn from_samples(rho: &[f64]) -> Result<Self> {
        let len = rho.len();
        if len < MIN_GRID {
            return Err(Error::GridTooCoarse { nodes: len, min: MIN_GRID });
        }
        let grid = Self::new(rho[0], rho[len - 1], len)?;
        let deviation = rho
            .iter()
            .enumerate()
            .map(|(i, r)| (r - grid.rho(i)).abs())
            .fold(0.0, f64::max);
        if deviation > 1e-9 * grid.h {
            return Err(Error::GridNotUniform { deviation });
        }
        Ok(grid)
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho_min + i as f64 * self.h
    }

    pub fn rho_max(&self) -> f64 {
        self.rho(self.len - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.rho(i)).collect()
    }

    /// Same bounds, `2·len − 1` nodes.
    pub fn refined(&self) -> Self {
        Self { rho_min: self.rho_min, h: self.h / 2.0, len: 2 * self.len - 1 }
    }
}

/// Behaviour of the metric as ρ → +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarField {
    /// Radial eigenvalue tends to a positive constant; f tends to a constant.
    Euclidean,
    /// Radial eigenvalue decays like 1/|z|²; f grows linearly in ρ.
    Cylindrical,
}

/// Analytic part of the potential, `α·e^ρ + β·(−Li₂(−e^ρ))`.
///
/// `α = 1, β = 0` is flat space and `α = 0, β = 1` the cigar. The origin scale
/// `α + β` must be positive and `α ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub alpha: f64,
    pub beta: f64,
}

impl Reference {
    pub const FLAT: Self = Self { alpha: 1.0, beta: 0.0 };
    pub const CIGAR: Self = Self { alpha: 0.0, beta: 1.0 };

    /// `P″e^{−ρ} = c + (1 − c)/(1 + e^ρ)`: flat at c = 1, cigar at c = 0.
    pub fn blend(c: f64) -> Self {
        Self { alpha: c, beta: 1.0 - c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.origin_scale() > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reference potential needs α ≥ 0 and α + β > 0, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn origin_scale(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn far_field(&self) -> FarField {
        if self.alpha > 0.0 {
            FarField::Euclidean
        } else {
            FarField::Cylindrical
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { alpha: k * self.alpha, beta: k * self.beta }
    }

    pub fn value(&self, rho: f64) -> f64 {
        let x = rho.exp();
        let mut v = self.alpha * x;
        if self.beta != 0.0 {
            v += self.beta * neg_dilog_neg(x);
        }
        v
    }

    /// P′ of the reference.
    pub fn d1(&self, rho: f64) -> f64 {
        let x = rho.exp();
        self.alpha * x + self.beta * x.ln_1p()
    }

    /// P″ of the reference.
    pub fn d2(&self, rho: f64) -> f64 {
        let x = rho.exp();
        self.alpha * x + self.beta * x / (1.0 + x)
    }

    /// log(λ_t / a) with relative accuracy near the origin.
    pub fn delta_t(&self, rho: f64) -> f64 {
        let x = rho.exp();
        let a = self.origin_scale();
        if self.beta == 0.0 {
            return 0.0;
        }
        // g = log(1+x)/x − 1
        let g = if x < 1e-4 {
            x * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x * 0.2)))
        } else {
            x.ln_1p() / x - 1.0
        };
        let r = self.beta * g / a;
        if r.abs() < 0.5 {
            r.ln_1p()
        } else {
            (self.alpha + self.beta * x.ln_1p() / x).ln() - a.ln()
        }
    }

    /// log(λ_r / a).
    pub fn delta_r(&self, rho: f64) -> f64 {
        let x = rho.exp();
        let a = self.origin_scale();
        if self.beta == 0.0 {
            return 0.0;
        }
        if self.alpha == 0.0 {
            return -x.ln_1p();
        }
        (self.alpha * x / a).ln_1p() - x.ln_1p()
    }

    /// First and second ρ-derivatives of [`Self::delta_r`].
    pub fn delta_r_derivatives(&self, rho: f64) -> (f64, f64) {
        if self.beta == 0.0 {
            return (0.0, 0.0);
        }
        let x = rho.exp();
        let a = self.origin_scale();
        let s = a + self.alpha * x;
        let d1 = self.alpha * x / s - x / (1.0 + x);
        let d2 = self.alpha * x * a / (s * s) - x / ((1.0 + x) * (1.0 + x));
        (d1, d2)
    }
}

/// `−Li₂(−x)` for `x ≥ 0`, the primitive of `log(1+e^ρ)` in ρ.
pub fn neg_dilog_neg(x: f64) -> f64 {
    -dilog(-x)
}

/// Real dilogarithm for `z ≤ 1/2`.
fn dilog(z: f64) -> f64 {
    use std::f64::consts::PI;
    if z < -1.0 {
        // inversion
        let l = (-z).ln();
        -PI * PI / 6.0 - 0.5 * l * l - dilog(1.0 / z)
    } else if z < -0.5 {
        // Landen: maps [−1, −1/2) into [1/3, 1/2]
        let l = (1.0 - z).ln();
        -dilog(z / (z - 1.0)) - 0.5 * l * l
    } else {
        let mut term = z;
        let mut sum: f64 = 0.0;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) && k < 200.0 {
            sum += term / (k * k);
            term *= z;
            k += 1.0;
        }
        sum
    }
}

/// Radial function sampled on a state's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}
