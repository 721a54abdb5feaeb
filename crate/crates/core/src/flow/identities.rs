use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FlowTrajectory;
use crate::error::{Error, Result};
use crate::geometry::ScalarField;

/// Residuals of (∂ₜ−Δ)R = |R_{ij̄}|² and
/// ∂ₜ|∇f|² = Δ|∇f|² − |f_{ij}|² − |R_{ij̄}|² at interior stored times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResiduals {
    pub times: Vec<f64>,
    pub scalar: Vec<f64>,
    pub bochner: Vec<f64>,
}

impl EvolutionResiduals {
    pub fn max_scalar(&self) -> f64 {
        self.scalar.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_bochner(&self) -> f64 {
        self.bochner.iter().copied().fold(0.0, f64::max)
    }
}

struct Fields {
    r: ScalarField,
    grad: ScalarField,
    lap_r: ScalarField,
    lap_grad: ScalarField,
    ric: ScalarField,
    hess: ScalarField,
}

/// Time derivatives are centered differences of stored states, so only
/// times whose two neighbours are equally spaced are used.
pub fn evolution_residuals(traj: &FlowTrajectory) -> Result<EvolutionResiduals> {
    if traj.len() < 3 {
        return Err(Error::TrajectoryTooShort { len: traj.len(), min: 3 });
    }
    let te = traj.effective_times();
    let fields: Vec<Fields> = traj
        .states
        .par_iter()
        .map(|s| {
            let (f1, f2) = s.ricci_potential_derivatives();
            let r = s.scalar_curvature();
            let grad = s.grad_norm_sq_from(&f1);
            Ok(Fields {
                lap_r: s.laplacian(&r)?,
                lap_grad: s.laplacian(&grad)?,
                ric: s.ricci_norm_sq(),
                hess: s.hessian20_norm_sq_from(&f1, &f2),
                r,
                grad,
            })
        })
        .collect::<Result<_>>()?;
    let m = traj.states[0].len();
    let mut out = EvolutionResiduals { times: vec![], scalar: vec![], bochner: vec![] };
    for k in 1..traj.len() - 1 {
        let (a, b) = (te[k] - te[k - 1], te[k + 1] - te[k]);
        if (a - b).abs() > 1e-9 * a.max(b) {
            continue;
        }
        let (p, c, nx) = (&fields[k - 1], &fields[k], &fields[k + 1]);
        let mut rs: f64 = 0.0;
        let mut bs: f64 = 0.0;
        for i in 0..m {
            let dr = (nx.r.values[i] - p.r.values[i]) / (a + b);
            let dg = (nx.grad.values[i] - p.grad.values[i]) / (a + b);
            rs = rs.max((dr - c.lap_r.values[i] - c.ric.values[i]).abs());
            bs = bs.max((dg - c.lap_grad.values[i] + c.hess.values[i] + c.ric.values[i]).abs());
        }
        out.times.push(te[k]);
        out.scalar.push(rs);
        out.bochner.push(bs);
    }
    Ok(out)
}
