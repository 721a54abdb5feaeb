use serde::{Deserialize, Serialize};

use super::dirichlet_form;
use crate::error::Result;
use crate::geometry::RadialKahlerState;
use crate::numerics::{hermite_eval, invert_monotone, Banded};

const SOBOLEV_ITERATIONS: usize = 200;

/// Lower estimate of the Sobolev constant
/// `sup (∫|u|^p)^{2/p} / ∫(|∇u|² + u²)`, `p = 2n/(n−1)`, by ascent over
/// radial functions supported on the grid. `None` when n = 1.
pub fn sobolev_estimate(state: &RadialKahlerState) -> Result<Option<f64>> {
    let n = state.n();
    if n < 2 {
        return Ok(None);
    }
    let p = 2.0 * n as f64 / (n as f64 - 1.0);
    let m = state.len();
    let free = m - 3;
    let omega = state.volume_weights();
    let (rows, kappa) = dirichlet_form(state, free);
    // Dirichlet form plus the L² mass; rows couple at most four columns apart
    let mut mass = Banded::zeros(free, 12, 12);
    for (row, k) in rows.iter().zip(&kappa) {
        for &(a, wa) in row {
            for &(b, wb) in row {
                mass.add(a, b, k * wa * wb);
            }
        }
    }
    for (j, w) in omega.iter().enumerate().take(free) {
        mass.add(j, j, *w);
    }
    let mut mat = mass.clone();
    mat.factor()?;
    let quad = |u: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..free {
            for j in i.saturating_sub(12)..(i + 13).min(free) {
                s += u[i] * mass.get(i, j) * u[j];
            }
        }
        s
    };
    let normalize = |u: &mut Vec<f64>| {
        let k = quad(u).sqrt().recip();
        u.iter_mut().for_each(|v| *v *= k);
    };
    let objective = |u: &[f64]| -> f64 {
        let s: f64 = (0..free).map(|j| omega[j] * u[j].abs().powf(p)).sum();
        s.powf(2.0 / p)
    };
    let d = state.radial_distance();
    let mut u: Vec<f64> = d[..free].iter().map(|x| (-0.5 * x * x).exp()).collect();
    normalize(&mut u);
    let mut value = objective(&u);
    for _ in 0..SOBOLEV_ITERATIONS {
        let s: f64 = (0..free).map(|j| omega[j] * u[j].abs().powf(p)).sum();
        let k = 2.0 * s.powf(2.0 / p - 1.0);
        let g: Vec<f64> = (0..free).map(|j| k * omega[j] * u[j].abs().powf(p - 2.0) * u[j]).collect();
        let a = mat.solve(&g);
        let ug: f64 = u.iter().zip(&g).map(|(x, y)| x * y).sum();
        let dir: Vec<f64> = a.iter().zip(&u).map(|(x, y)| x - ug * y).collect();
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(x, y)| x + step * y).collect();
            normalize(&mut trial);
            let v = objective(&trial);
            if v > value {
                u = trial;
                value = v;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(Some(value))
}

/// `κ(r) = Vol B(r)/r^{2n}` with the curvature scale test of the
/// non-collapsing statement. Radii outside the grid's distance range give
/// no ratio and are not admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseSample {
    pub radius: f64,
    pub kappa: Option<f64>,
    /// sup |Rm| over the ball, including the first node beyond it.
    pub sup_rm: f64,
    /// sup |Rm| ≤ r⁻² on the ball.
    pub admissible: bool,
}

pub fn collapse_ratios(state: &RadialKahlerState, radii: &[f64]) -> Vec<CollapseSample> {
    let n = state.n() as i32;
    let g = state.grid();
    let rho: Vec<f64> = (0..g.len).map(|i| g.rho_min + i as f64 * g.h).collect();
    let d = state.radial_distance();
    let speed = state.distance_speed();
    let vol = state.ball_volume();
    let dens = state.volume_density();
    let rm = state.rm_norm().values;
    radii
        .iter()
        .map(|&r| {
            let end = d.partition_point(|&x| x <= r).min(g.len - 1);
            let sup_rm = rm[..=end].iter().copied().fold(0.0, f64::max);
            match invert_monotone(&rho, &d, &speed, r) {
                Some(rs) if r > 0.0 => {
                    let v = hermite_eval(&rho, &vol, &dens, rs);
                    CollapseSample {
                        radius: r,
                        kappa: Some(v / r.powi(2 * n)),
                        sup_rm,
                        admissible: sup_rm <= r.powi(-2),
                    }
                }
                _ => CollapseSample { radius: r, kappa: None, sup_rm, admissible: false },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityProbes {
    pub sobolev: Option<f64>,
    pub collapse: Vec<CollapseSample>,
}

pub fn inequality_probes(state: &RadialKahlerState, radii: &[f64]) -> Result<InequalityProbes> {
    Ok(InequalityProbes { sobolev: sobolev_estimate(state)?, collapse: collapse_ratios(state, radii) })
}
