use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FlowTrajectory;
use crate::error::{Error, Result};
use crate::geometry::ScalarField;

/// Heat-gauge potential f̃(t) = f(0) + ∫₀ᵗ R and its consistency residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaugeTrack {
    /// Effective times of the stored states.
    pub times: Vec<f64>,
    pub corrected: Vec<ScalarField>,
    /// sup|f̃ − f| per stored time.
    pub residual: Vec<f64>,
    /// Same, after removing the best constant (f̃ − f depends on t only).
    pub residual_mod_const: Vec<f64>,
    /// sup|(∂ₜ − Δ)f̃| on each interval between stored times.
    pub heat_residual: Vec<f64>,
}

pub fn gauge_track(traj: &FlowTrajectory) -> Result<GaugeTrack> {
    if traj.len() < 2 {
        return Err(Error::TrajectoryTooShort { len: traj.len(), min: 2 });
    }
    let times = traj.effective_times();
    let fields: Vec<(ScalarField, ScalarField)> = traj
        .states
        .par_iter()
        .map(|s| (s.ricci_potential(), s.scalar_curvature()))
        .collect();
    let m = traj.states[0].len();
    let mut corrected = vec![fields[0].0.clone()];
    for k in 1..traj.len() {
        let dt = times[k] - times[k - 1];
        let prev = &corrected[k - 1].values;
        let (ra, rb) = (&fields[k - 1].1.values, &fields[k].1.values);
        let values = (0..m).map(|i| prev[i] + 0.5 * dt * (ra[i] + rb[i])).collect();
        corrected.push(ScalarField { values });
    }
    let mut residual = Vec::with_capacity(traj.len());
    let mut residual_mod_const = Vec::with_capacity(traj.len());
    for (c, (f, _)) in corrected.iter().zip(&fields) {
        let diff: Vec<f64> = c.values.iter().zip(&f.values).map(|(a, b)| a - b).collect();
        let hi = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = diff.iter().copied().fold(f64::INFINITY, f64::min);
        residual.push(hi.abs().max(lo.abs()));
        residual_mod_const.push(0.5 * (hi - lo));
    }
    let laps: Vec<ScalarField> = traj
        .states
        .par_iter()
        .zip(corrected.par_iter())
        .map(|(s, c)| s.laplacian(c))
        .collect::<Result<_>>()?;
    let heat_residual = (1..traj.len())
        .map(|k| {
            let dt = times[k] - times[k - 1];
            (0..m)
                .map(|i| {
                    let dfdt = (corrected[k].values[i] - corrected[k - 1].values[i]) / dt;
                    (dfdt - 0.5 * (laps[k].values[i] + laps[k - 1].values[i])).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(GaugeTrack { times, corrected, residual, residual_mod_const, heat_residual })
}
