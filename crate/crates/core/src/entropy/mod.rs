//! Perelman's F, W and μ on radial Kähler states, their first variations,
//! the Sobolev and non-collapsing probes, and the rescaling chain on warped
//! surfaces.
//!
//! Every integral is taken against `e^{−f}dV` (equivalently `u²dV` with
//! `u = e^{−f/2}`), truncated to the grid. The real dimension is `2n`.

mod chain;
mod minimize;
mod probes;
mod surface;
mod variation;

pub use chain::{modified_flow_chain, ChainControls, ChainReport};
pub use minimize::{mu_minimize, mu_series, MinimizerControls, MuResult, MuSeries, TauMode, MIN_SUPPORT_FACTOR};
pub use probes::{collapse_ratios, inequality_probes, sobolev_estimate, CollapseSample, InequalityProbes};
pub use surface::{Parity, WarpedSurfaceState};
pub use variation::{variation_residual, Bump, VariationField, VariationResidual, VARIATION_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::state::GhostWeights;
use crate::geometry::{RadialKahlerState, ScalarField};

/// An integrand is accepted when its value per unit ρ at the last node is
/// below this fraction of its peak.
pub const DECAY_THRESHOLD: f64 = 1e-5;

/// Tolerance on `(4πτ)^{−n}∫u²dV = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `(4πτ)^{−m/2}∫[τ(R+|∇f|²) + f − m]e^{−f}dV` with real dimension m.
    Riemannian,
    /// `(4πτ)^{−n}∫[2τ(R+|∇f|²) + f − 2n]e^{−f}dV` with the Kähler traces
    /// `g^{ij̄}R_{ij̄} = R/2` and `g^{ij̄}f_if_j̄ = |∇f|²/2`.
    Kahler,
}

fn gaussian_factor(n: usize, tau: f64) -> f64 {
    (4.0 * std::f64::consts::PI * tau).powi(-(n as i32))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("τ = {tau} must be positive")))
    }
}

/// ∫ q dV, rejecting integrands that have not decayed at the far boundary.
fn integrate_decaying(state: &RadialKahlerState, q: &[f64]) -> Result<f64> {
    let dens = state.volume_density();
    let m = q.len();
    let peak = q.iter().zip(&dens).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
    if !peak.is_finite() {
        return Err(Error::NonFinite { index: q.iter().position(|v| !v.is_finite()).unwrap_or(0) });
    }
    if peak > 0.0 {
        let ratio = (q[m - 1] * dens[m - 1]).abs() / peak;
        if ratio > DECAY_THRESHOLD {
            return Err(Error::NonIntegrable { ratio });
        }
    }
    Ok(state.volume_weights().iter().zip(q).map(|(w, v)| w * v).sum())
}

/// F(g, f) = ∫(R + |∇f|²)e^{−f}dV.
pub fn f_functional(state: &RadialKahlerState, f: &ScalarField) -> Result<f64> {
    let r = state.scalar_curvature();
    let g = state.grad_norm_sq(f)?;
    let q: Vec<f64> = (0..state.len())
        .map(|i| (r.values[i] + g.values[i]) * (-f.values[i]).exp())
        .collect();
    integrate_decaying(state, &q)
}

/// W(g, f, τ) in the f-form.
pub fn w_functional(state: &RadialKahlerState, f: &ScalarField, tau: f64, norm: Normalization) -> Result<f64> {
    check_tau(tau)?;
    let n = state.n();
    let m = 2.0 * n as f64;
    let r = state.scalar_curvature();
    let g = state.grad_norm_sq(f)?;
    let q: Vec<f64> = (0..state.len())
        .map(|i| {
            let (ri, gi, fi) = (r.values[i], g.values[i], f.values[i]);
            let bracket = match norm {
                Normalization::Riemannian => tau * (ri + gi) + fi - m,
                Normalization::Kahler => 2.0 * tau * (0.5 * ri + 0.5 * gi) + fi - 2.0 * n as f64,
            };
            bracket * (-fi).exp()
        })
        .collect();
    Ok(gaussian_factor(n, tau) * integrate_decaying(state, &q)?)
}

/// A compactly supported density `u = e^{−f/2}` with its ρ-derivative,
/// normalized so that `(4πτ)^{−n}∫u²dV = 1`. Nodes from `cutoff` on are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDensity {
    pub tau: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub cutoff: usize,
}

impl TestDensity {
    fn check_support(state: &RadialKahlerState, len: usize, cutoff: usize) -> Result<()> {
        if len != state.len() {
            return Err(Error::GridMismatch { expected: state.len(), got: len });
        }
        if cutoff < 4 || cutoff + 3 > state.len() {
            return Err(Error::InvalidArgument(format!(
                "support cutoff {cutoff} must lie strictly inside the grid of {} nodes",
                state.len()
            )));
        }
        Ok(())
    }

    fn normalized(state: &RadialKahlerState, tau: f64, mut u: Vec<f64>, mut du: Vec<f64>, cutoff: usize) -> Result<Self> {
        for i in cutoff..u.len() {
            u[i] = 0.0;
            du[i] = 0.0;
        }
        let mut d = Self { tau, u, du, cutoff };
        let mass = d.normalization(state);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NormalizationViolated { value: mass });
        }
        let k = mass.sqrt().recip();
        d.u.iter_mut().chain(d.du.iter_mut()).for_each(|v| *v *= k);
        let after = d.normalization(state);
        if (after - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NormalizationViolated { value: after });
        }
        Ok(d)
    }

    /// From samples of `u`; the derivative comes from the state's stencils
    /// applied to the truncated samples.
    pub fn new(state: &RadialKahlerState, tau: f64, u: Vec<f64>, cutoff: usize) -> Result<Self> {
        check_tau(tau)?;
        Self::check_support(state, u.len(), cutoff)?;
        let mut u = u;
        u[cutoff..].iter_mut().for_each(|v| *v = 0.0);
        let du = state.d1(&ScalarField::new(u.clone())?)?;
        Self::normalized(state, tau, u, du, cutoff)
    }

    /// `u = e^{−f/2}` with the derivative `−f′u/2` (exact substitution),
    /// truncated at `cutoff` and renormalized, which shifts f by a constant.
    pub fn from_potential(state: &RadialKahlerState, tau: f64, f: &ScalarField, cutoff: usize) -> Result<Self> {
        check_tau(tau)?;
        Self::check_support(state, f.len(), cutoff)?;
        let f1 = state.d1(f)?;
        let u: Vec<f64> = f.values.iter().map(|v| (-0.5 * v).exp()).collect();
        let du = u.iter().zip(&f1).map(|(u, d)| -0.5 * d * u).collect();
        Self::normalized(state, tau, u, du, cutoff)
    }

    /// u² ∝ exp(−d²/4τ) in the distance d from the origin, support d < radius.
    pub fn gaussian(state: &RadialKahlerState, tau: f64, radius: f64) -> Result<Self> {
        check_tau(tau)?;
        let cutoff = support_cutoff(state, radius);
        Self::check_support(state, state.len(), cutoff)?;
        let d = state.radial_distance();
        let speed = state.distance_speed();
        let u: Vec<f64> = d.iter().map(|d| (-d * d / (8.0 * tau)).exp()).collect();
        let du = (0..state.len()).map(|i| -d[i] * speed[i] / (4.0 * tau) * u[i]).collect();
        Self::normalized(state, tau, u, du, cutoff)
    }

    /// (4πτ)^{−n}∫u²dV.
    pub fn normalization(&self, state: &RadialKahlerState) -> f64 {
        let c = gaussian_factor(state.n(), self.tau);
        c * state.volume_weights().iter().zip(&self.u).map(|(w, u)| w * u * u).sum::<f64>()
    }

    /// The potential f = −log u² on the support.
    pub fn potential(&self) -> Vec<f64> {
        self.u.iter().map(|u| -(u * u).ln()).collect()
    }

    /// L² distance in the normalized measure (4πτ)^{−n}dV.
    pub fn distance(&self, other: &Self, state: &RadialKahlerState) -> f64 {
        let c = gaussian_factor(state.n(), self.tau);
        let s: f64 = state
            .volume_weights()
            .iter()
            .zip(self.u.iter().zip(&other.u))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum();
        (c * s).sqrt()
    }
}

/// First node at distance ≥ `radius` from the origin, capped three nodes
/// before the end.
pub(crate) fn support_cutoff(state: &RadialKahlerState, radius: f64) -> usize {
    let d = state.radial_distance();
    d.iter().position(|&v| v >= radius).unwrap_or(state.len()).min(state.len() - 3)
}

/// The Dirichlet form `∫|∇u|²dV = 4∫κu′²dρ`, `κ = dV/(P″dρ)`, for u supported
/// on nodes `0..free` (`free ≤ len − 3`), as `Σ_k weights_k·(rows_k·u)²`. The
/// derivative is the staggered fourth-order difference at `ρ_{k+½}`, which,
/// unlike the centred one, does not vanish on the grid's sawtooth mode.
pub(crate) fn dirichlet_form(state: &RadialKahlerState, free: usize) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    const S: [f64; 4] = [1.0, -27.0, 27.0, -1.0];
    let m = state.len();
    debug_assert!(free + 3 <= m);
    let h = state.grid().h;
    let ghost = GhostWeights::new(h).near[0];
    let dens = state.volume_density();
    let lk: Vec<f64> = dens.iter().zip(state.p2()).map(|(d, p)| (d / p).ln()).collect();
    let mut rows = Vec::with_capacity(free + 1);
    let mut weights = Vec::with_capacity(free + 1);
    for k in 0..=free {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(7);
        for (j, c) in S.iter().enumerate() {
            let w = c / (24.0 * h);
            match (k + j).checked_sub(1) {
                Some(idx) if idx < free => row.push((idx, w)),
                Some(_) => {}
                None => row.extend(ghost.iter().enumerate().filter(|(i, _)| *i < free).map(|(i, g)| (i, w * g))),
            }
        }
        let log_kappa = if k == 0 {
            (5.0 * lk[0] + 15.0 * lk[1] - 5.0 * lk[2] + lk[3]) / 16.0
        } else {
            (-lk[k - 1] + 9.0 * lk[k] + 9.0 * lk[k + 1] - lk[k + 2]) / 16.0
        };
        rows.push(row);
        weights.push(4.0 * h * log_kappa.exp());
    }
    (rows, weights)
}

fn xlogx_sq(u: f64) -> f64 {
    let q = u * u;
    if q > 0.0 {
        q * q.ln()
    } else {
        0.0
    }
}

/// W(g, u, τ) in the u-form: the integrand is
/// `τ(Ru² + 4|∇u|²) − u²log u² − m·u²` (Riemannian) or
/// `2τ(R_K u² + 4|∇u|²_K) − u²log u² − 2n·u²` (Kähler traces).
pub fn w_density(state: &RadialKahlerState, density: &TestDensity, norm: Normalization) -> Result<f64> {
    if density.u.len() != state.len() {
        return Err(Error::GridMismatch { expected: state.len(), got: density.u.len() });
    }
    let value = density.normalization(state);
    if (value - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationViolated { value });
    }
    let tau = density.tau;
    let n = state.n();
    let m = 2.0 * n as f64;
    let r = state.scalar_curvature();
    let p2 = state.p2();
    let q: Vec<f64> = (0..state.len())
        .map(|i| {
            let (u, du) = (density.u[i], density.du[i]);
            let grad = 4.0 * du * du / p2[i];
            let energy = match norm {
                Normalization::Riemannian => tau * (r.values[i] * u * u + 4.0 * grad),
                Normalization::Kahler => 2.0 * tau * (0.5 * r.values[i] * u * u + 4.0 * 0.5 * grad),
            };
            energy - xlogx_sq(u) - m * u * u
        })
        .collect();
    let c = gaussian_factor(n, tau);
    Ok(c * state.volume_weights().iter().zip(&q).map(|(w, v)| w * v).sum::<f64>())
}

/// F in the u-form, ∫(Ru² + 4|∇u|²)dV.
pub fn f_density(state: &RadialKahlerState, density: &TestDensity) -> f64 {
    let r = state.scalar_curvature();
    let p2 = state.p2();
    state
        .volume_weights()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let (u, du) = (density.u[i], density.du[i]);
            w * (r.values[i] * u * u + 16.0 * du * du / p2[i])
        })
        .sum()
}

/// Functional values at one state and scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyReport {
    pub tau: f64,
    /// F at the μ-minimizer.
    pub f_value: f64,
    pub w_riemannian: f64,
    pub w_kahler: f64,
    pub mu: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub minimizer: TestDensity,
    /// W of the Gaussian seed; μ never exceeds it.
    pub w_seed: f64,
}

pub fn entropy_report(state: &RadialKahlerState, tau: f64, controls: &MinimizerControls) -> Result<EntropyReport> {
    let res = mu_minimize(state, tau, controls)?;
    let w_riemannian = w_density(state, &res.density, Normalization::Riemannian)?;
    let w_kahler = w_density(state, &res.density, Normalization::Kahler)?;
    Ok(EntropyReport {
        tau,
        f_value: f_density(state, &res.density),
        w_riemannian,
        w_kahler,
        mu: res.mu,
        converged: res.converged,
        iterations: res.iterations,
        gradient_norm: res.gradient_norm,
        w_seed: res.w_seed,
        minimizer: res.density,
    })
}
