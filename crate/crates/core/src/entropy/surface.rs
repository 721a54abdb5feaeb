use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fornberg, lagrange_eval, Diff};

const GH: usize = 3;
const MIN_NODES: usize = 16;
const POLE_TOL: f64 = 1e-3;

/// Reflection behaviour of a field at a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Rotationally symmetric surface `A(x)dx² + w(x)²dθ²` on `[x0, x1]`,
/// sampled at cell centres. An end is either a smooth pole (w → 0) or a
/// free boundary where fields are extrapolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedSurfaceState {
    x0: f64,
    x1: f64,
    a2: Vec<f64>,
    w: Vec<f64>,
    poles: [bool; 2],
    time: f64,
}

fn check_samples(v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::GridMismatch { expected: len, got: v.len() });
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

impl WarpedSurfaceState {
    pub fn new(x0: f64, x1: f64, a2: Vec<f64>, w: Vec<f64>, poles: [bool; 2], time: f64) -> Result<Self> {
        let len = a2.len();
        if len < MIN_NODES {
            return Err(Error::GridTooCoarse { nodes: len, min: MIN_NODES });
        }
        if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(Error::InvalidArgument(format!("[{x0}, {x1}] is not an interval")));
        }
        check_samples(&a2, len)?;
        check_samples(&w, len)?;
        if let Some(node) = (0..len).find(|&i| !(a2[i] > 0.0 && w[i] > 0.0)) {
            return Err(Error::MetricDegenerate { node, rho: x0, tangential: w[node], radial: a2[node] });
        }
        let s = Self { x0, x1, a2, w, poles, time };
        for end in 0..2 {
            if poles[end] {
                let ratio = s.pole_closure(end);
                if (ratio - 1.0).abs() > POLE_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "pole at {} is not smooth: w′/√A = {ratio}",
                        if end == 0 { x0 } else { x1 }
                    )));
                }
            }
        }
        Ok(s)
    }

    /// `w′/√A` at a pole, from even fits through the two nearest nodes.
    fn pole_closure(&self, end: usize) -> f64 {
        let m = self.len();
        let (i, j) = if end == 0 { (0, 1) } else { (m - 1, m - 2) };
        let (ti, tj) = (0.5 * self.h(), 1.5 * self.h());
        let odd = |q: &[f64]| {
            let (a, b) = (q[i] / ti, q[j] / tj);
            (a * tj * tj - b * ti * ti) / (tj * tj - ti * ti)
        };
        let even = |q: &[f64]| (q[i] * tj * tj - q[j] * ti * ti) / (tj * tj - ti * ti);
        odd(&self.w) / even(&self.a2).sqrt()
    }

    /// Arclength coordinate on `[0, length]` with `A ≡ 1`.
    pub fn from_warp(length: f64, warp: impl Fn(f64) -> f64, poles: [bool; 2], len: usize) -> Result<Self> {
        let h = length / len as f64;
        let w = (0..len).map(|i| warp((i as f64 + 0.5) * h)).collect();
        Self::new(0.0, length, vec![1.0; len], w, poles, 0.0)
    }

    /// `r²(dx² + sin²x dθ²)` on `[0, π]`.
    pub fn round_sphere(radius: f64, len: usize) -> Result<Self> {
        let h = std::f64::consts::PI / len as f64;
        let w = (0..len).map(|i| radius * ((i as f64 + 0.5) * h).sin()).collect();
        Self::new(0.0, std::f64::consts::PI, vec![radius * radius; len], w, [true, true], 0.0)
    }

    pub fn flat_cylinder(radius: f64, length: f64, len: usize) -> Result<Self> {
        Self::new(0.0, length, vec![1.0; len], vec![radius; len], [false, false], 0.0)
    }

    pub fn len(&self) -> usize {
        self.a2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a2.is_empty()
    }

    pub fn h(&self) -> f64 {
        (self.x1 - self.x0) / self.len() as f64
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x0, self.x1)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// `g_xx`.
    pub fn a2(&self) -> &[f64] {
        &self.a2
    }

    pub fn warp(&self) -> &[f64] {
        &self.w
    }

    pub fn poles(&self) -> [bool; 2] {
        self.poles
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(&self, time: f64) -> Self {
        Self { time, ..self.clone() }
    }

    /// Same coordinates, new metric samples.
    pub fn with_metric(&self, a2: Vec<f64>, w: Vec<f64>, time: f64) -> Result<Self> {
        Self::new(self.x0, self.x1, a2, w, self.poles, time)
    }

    /// `q` with `GH` ghosts per side: mirrored with the given parity at a
    /// pole, quintic extrapolation at a free end.
    pub fn extend(&self, q: &[f64], parity: Parity) -> Vec<f64> {
        let m = q.len();
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        let mut e = vec![0.0; m + 2 * GH];
        e[GH..GH + m].copy_from_slice(q);
        let rs: Vec<f64> = (0..6).map(|k| k as f64).collect();
        for g in 0..GH {
            e[GH - 1 - g] = if self.poles[0] {
                sign * q[g]
            } else {
                let w = &fornberg(-((g + 1) as f64), &rs, 0)[0];
                (0..6).map(|k| w[k] * q[k]).sum()
            };
            e[GH + m + g] = if self.poles[1] {
                sign * q[m - 1 - g]
            } else {
                let w = &fornberg((6 + g) as f64, &rs, 0)[0];
                (0..6).map(|k| w[k] * q[m - 6 + k]).sum()
            };
        }
        e
    }

    /// First and second x-derivatives at the nodes.
    pub fn derivatives(&self, q: &[f64], parity: Parity) -> (Vec<f64>, Vec<f64>) {
        let ext = self.extend(q, parity);
        let d = Diff::new(ext.len(), self.h()).expect("extended grid is long enough");
        let m = q.len();
        (d.d1(&ext)[GH..GH + m].to_vec(), d.d2(&ext)[GH..GH + m].to_vec())
    }

    pub fn gauss_curvature(&self) -> Vec<f64> {
        let (a1, _) = self.derivatives(&self.a2, Parity::Even);
        let (w1, w2) = self.derivatives(&self.w, Parity::Odd);
        (0..self.len())
            .map(|i| {
                let (a, w) = (self.a2[i], self.w[i]);
                -w2[i] / (a * w) + w1[i] * a1[i] / (2.0 * a * a * w)
            })
            .collect()
    }

    pub fn grad_sq(&self, f: &[f64]) -> Vec<f64> {
        let (f1, _) = self.derivatives(f, Parity::Even);
        f1.iter().zip(&self.a2).map(|(d, a)| d * d / a).collect()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (r, t) = self.hessian(f);
        r.iter().zip(&t).map(|(a, b)| a + b).collect()
    }

    /// Hessian of an even field in the orthonormal frame: (radial, angular).
    pub fn hessian(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (a1, _) = self.derivatives(&self.a2, Parity::Even);
        let (w1, _) = self.derivatives(&self.w, Parity::Odd);
        let (f1, f2) = self.derivatives(f, Parity::Even);
        let radial = (0..self.len())
            .map(|i| (f2[i] - a1[i] * f1[i] / (2.0 * self.a2[i])) / self.a2[i])
            .collect();
        let angular = (0..self.len()).map(|i| w1[i] * f1[i] / (self.w[i] * self.a2[i])).collect();
        (radial, angular)
    }

    /// ∫q dA for an even field q: midpoint rule with the h² end correction.
    pub fn integrate(&self, q: &[f64]) -> f64 {
        let h = self.h();
        let tau = std::f64::consts::TAU;
        let dens: Vec<f64> = (0..self.len()).map(|i| tau * self.a2[i].sqrt() * self.w[i] * q[i]).collect();
        let e = self.extend(&dens, Parity::Odd);
        let m = dens.len();
        let slope = |k: usize| (e[k - 2] - 27.0 * e[k - 1] + 27.0 * e[k] - e[k + 1]) / (24.0 * h);
        h * dens.iter().sum::<f64>() + h * h / 24.0 * (slope(GH + m) - slope(GH))
    }

    pub fn area(&self) -> f64 {
        self.integrate(&vec![1.0; self.len()])
    }

    /// F = ∫(R + |∇f|²)e^{−f}dA with R = 2K.
    pub fn f_functional(&self, f: &[f64]) -> f64 {
        let k = self.gauss_curvature();
        let g = self.grad_sq(f);
        let q: Vec<f64> = (0..self.len()).map(|i| (2.0 * k[i] + g[i]) * (-f[i]).exp()).collect();
        self.integrate(&q)
    }

    /// W in real dimension two.
    pub fn w_functional(&self, f: &[f64], tau: f64) -> Result<f64> {
        super::check_tau(tau)?;
        let k = self.gauss_curvature();
        let g = self.grad_sq(f);
        let q: Vec<f64> = (0..self.len())
            .map(|i| (tau * (2.0 * k[i] + g[i]) + f[i] - 2.0) * (-f[i]).exp())
            .collect();
        Ok(self.integrate(&q) / (4.0 * std::f64::consts::PI * tau))
    }

    /// Six-point Lagrange interpolation of a sampled field at x ∈ [x0, x1].
    pub fn interpolate(&self, q: &[f64], parity: Parity, x: f64) -> f64 {
        let e = self.extend(q, parity);
        self.interpolate_extended(&e, x)
    }

    fn interpolate_extended(&self, e: &[f64], x: f64) -> f64 {
        let h = self.h();
        let m = self.len() as isize;
        let k = (((x - self.x0) / h - 0.5).floor() as isize).clamp(-1, m - 1);
        let lo = (k - 2 + GH as isize) as usize;
        let xs: Vec<f64> = (0..6).map(|j| self.x0 + ((k - 2 + j) as f64 + 0.5) * h).collect();
        lagrange_eval(&xs, &e[lo..lo + 6], x)
    }

    /// Pullback to a new coordinate y on `[y0, y1]` with `x = X(y)`;
    /// `map(y) = (X(y), X′(y))`. X must carry ends to ends.
    pub fn reparametrize(&self, y0: f64, y1: f64, map: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let m = self.len();
        let h = (y1 - y0) / m as f64;
        let (xs, dxs): (Vec<f64>, Vec<f64>) = (0..m).map(|i| map(y0 + (i as f64 + 0.5) * h)).unzip();
        self.resample(y0, y1, &xs, &dxs)
    }

    pub(crate) fn resample(&self, y0: f64, y1: f64, xs: &[f64], dxs: &[f64]) -> Result<Self> {
        let ea = self.extend(&self.a2, Parity::Even);
        let ew = self.extend(&self.w, Parity::Odd);
        let a2 = xs
            .iter()
            .zip(dxs)
            .map(|(&x, &dx)| self.interpolate_extended(&ea, x) * dx * dx)
            .collect();
        let w = xs.iter().map(|&x| self.interpolate_extended(&ew, x)).collect();
        Self::new(y0, y1, a2, w, self.poles, self.time)
    }

    /// An even field composed with the same coordinate change.
    pub fn resample_field(&self, q: &[f64], xs: &[f64]) -> Vec<f64> {
        let e = self.extend(q, Parity::Even);
        xs.iter().map(|&x| self.interpolate_extended(&e, x)).collect()
    }
}
