use serde::{Deserialize, Serialize};

use super::{check_tau, f_functional, gaussian_factor, w_functional, Normalization};
use crate::error::{Error, Result};
use crate::geometry::{RadialKahlerState, ScalarField};

/// Step for the centred difference quotients.
pub const VARIATION_EPS: f64 = 1e-5;

/// A compactly supported bump `amplitude·P″(center)·b((ρ − center)/width)`
/// with `b(s) = exp(−1/(1 − s²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// A U(n)-invariant Hermitian variation `v` of the metric, generated by a
/// change `ψ` of the Kähler potential. Its eigenvalues relative to g are
/// `ν_r = ψ″/P″` and `ν_t = ψ′/P′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationField {
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub nu_r: Vec<f64>,
    pub nu_t: Vec<f64>,
}

/// Second derivative of `exp(−1/(1 − s²))`.
fn bump_d2(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    (-1.0 / q).exp() * (4.0 * s * s / q.powi(4) - 2.0 / (q * q) - 8.0 * s * s / q.powi(3))
}

impl VariationField {
    pub fn zero(state: &RadialKahlerState) -> Self {
        let m = state.len();
        Self { psi1: vec![0.0; m], psi2: vec![0.0; m], nu_r: vec![0.0; m], nu_t: vec![0.0; m] }
    }

    /// From ψ″ in ρ. ψ′ is its integral from the origin by the quadrature
    /// that builds P′, so `ν_t` is the exact linearization of the sampled state.
    pub fn from_potential(state: &RadialKahlerState, psi2: Vec<f64>) -> Result<Self> {
        let m = state.len();
        if psi2.len() != m {
            return Err(Error::GridMismatch { expected: m, got: psi2.len() });
        }
        if let Some(index) = psi2.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let psi1 = state.integrate_from_origin(&psi2);
        let nu_r = psi2.iter().zip(state.p2()).map(|(a, b)| a / b).collect();
        let nu_t = psi1.iter().zip(state.p1()).map(|(a, b)| a / b).collect();
        Ok(Self { psi1, psi2, nu_r, nu_t })
    }

    /// Sum of bumps. Each must sit at least four cells inside the grid.
    pub fn bumps(state: &RadialKahlerState, bumps: &[Bump]) -> Result<Self> {
        let g = state.grid();
        let (lo, hi) = (g.rho_min, g.rho_min + (g.len - 1) as f64 * g.h);
        let m = state.len();
        let p2 = state.p2();
        let mut psi2 = vec![0.0; m];
        for b in bumps {
            if !(b.width > 0.0) || b.center - b.width < lo + 4.0 * g.h || b.center + b.width > hi - 4.0 * g.h {
                return Err(Error::InvalidArgument(format!(
                    "bump at {} of width {} leaves the interior of [{lo}, {hi}]",
                    b.center, b.width
                )));
            }
            let k = (b.center - lo) / g.h;
            let (i0, t) = (k.floor() as usize, k.fract());
            let pc = p2[i0] * (1.0 - t) + p2[(i0 + 1).min(m - 1)] * t;
            let a = b.amplitude * pc;
            for i in 0..m {
                let s = (g.rho_min + i as f64 * g.h - b.center) / b.width;
                psi2[i] += a * bump_d2(s) / (b.width * b.width);
            }
        }
        Self::from_potential(state, psi2)
    }

    /// `h = ν_r + (n−1)ν_t`, half the real trace of v.
    pub fn half_trace(&self, n: usize) -> Vec<f64> {
        self.nu_r.iter().zip(&self.nu_t).map(|(r, t)| r + (n as f64 - 1.0) * t).collect()
    }

    /// The metric with potential `P + εψ`.
    pub fn apply(&self, state: &RadialKahlerState, eps: f64) -> Result<RadialKahlerState> {
        let mut w = state.deviation().to_vec();
        for (i, wi) in w.iter_mut().enumerate() {
            let k = 1.0 + eps * self.nu_r[i];
            if !(k > 0.0) {
                return Err(Error::MetricDegenerate {
                    node: i,
                    rho: state.grid().rho_min + i as f64 * state.grid().h,
                    tangential: state.lambda_t()[i],
                    radial: state.lambda_r()[i] * k,
                });
            }
            *wi += (eps * self.nu_r[i]).ln_1p();
        }
        state.with_deviation(state.log_scale(), w, state.time())
    }
}

/// Analytic first variations against centred difference quotients, with f
/// moved so that `e^{−f}dV` is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationResidual {
    pub df_analytic: f64,
    pub df_numeric: f64,
    pub dw_analytic: f64,
    pub dw_numeric: f64,
    /// L¹ size of the terms in each analytic integral.
    pub f_scale: f64,
    pub w_scale: f64,
    /// Relative to the scale, or absolute when the scale is zero.
    pub f_residual: f64,
    pub w_residual: f64,
}

/// f on the perturbed state that keeps the weighted measure fixed node by node.
fn transported_potential(base: &RadialKahlerState, moved: &RadialKahlerState, f: &ScalarField) -> Result<ScalarField> {
    let n = base.n() as f64;
    let values = (0..base.len())
        .map(|i| {
            f.values[i]
                + (moved.p2()[i] / base.p2()[i]).ln()
                + (n - 1.0) * (moved.p1()[i] / base.p1()[i]).ln()
        })
        .collect();
    ScalarField::new(values)
}

pub fn variation_residual(
    state: &RadialKahlerState,
    f: &ScalarField,
    v: &VariationField,
    tau: f64,
) -> Result<VariationResidual> {
    check_tau(tau)?;
    let n = state.n();
    let nm1 = n as f64 - 1.0;
    if f.len() != state.len() {
        return Err(Error::GridMismatch { expected: state.len(), got: f.len() });
    }
    let (mr, mt) = state.ricci_eigenvalues();
    let f1 = state.d1(f)?;
    let f2 = state.d2(f)?;
    let (p1, p2) = (state.p1(), state.p2());
    let weights = state.volume_weights();
    let c = gaussian_factor(n, tau);
    let (mut df, mut f_scale, mut trace, mut trace_scale) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..state.len() {
        let e = (-f.values[i]).exp() * weights[i];
        let terms = [
            v.nu_r[i] * mr[i],
            nm1 * v.nu_t[i] * mt[i],
            4.0 * v.nu_r[i] * f2[i] / p2[i],
            4.0 * nm1 * v.nu_t[i] * f1[i] / p1[i],
        ];
        df -= terms.iter().sum::<f64>() * e;
        f_scale += terms.iter().map(|t| t.abs()).sum::<f64>() * e;
        let h = v.nu_r[i] + nm1 * v.nu_t[i];
        trace += h * e;
        trace_scale += (v.nu_r[i].abs() + nm1 * v.nu_t[i].abs()) * e;
    }
    let dw = c * (tau * df + trace);
    let w_scale = c * (tau * f_scale + trace_scale);

    let eval = |eps: f64| -> Result<(f64, f64)> {
        let moved = v.apply(state, eps)?;
        let fe = transported_potential(state, &moved, f)?;
        Ok((f_functional(&moved, &fe)?, w_functional(&moved, &fe, tau, Normalization::Riemannian)?))
    };
    let (fp, wp) = eval(VARIATION_EPS)?;
    let (fm, wm) = eval(-VARIATION_EPS)?;
    let df_numeric = (fp - fm) / (2.0 * VARIATION_EPS);
    let dw_numeric = (wp - wm) / (2.0 * VARIATION_EPS);
    let rel = |a: f64, b: f64, s: f64| if s > 0.0 { (a - b).abs() / s } else { (a - b).abs() };
    Ok(VariationResidual {
        df_analytic: df,
        df_numeric,
        dw_analytic: dw,
        dw_numeric,
        f_scale,
        w_scale,
        f_residual: rel(df, df_numeric, f_scale),
        w_residual: rel(dw, dw_numeric, w_scale),
    })
}
