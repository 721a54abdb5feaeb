use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gauge_track, FlowTrajectory};
use crate::geometry::FarField;

/// sup|f(0)| must stay below this for the bounded-potential hypothesis.
pub const F_BOUND_THRESHOLD: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundId {
    /// inf R ≥ −n/t.
    ScalarLower,
    /// sup(2|∇f|² + R) ≤ C₀.
    Combination,
    /// sup(t|∇f̃|² + f̃²) ≤ sup f(0)².
    Bernstein,
    /// sup t(|∇f|² + R) ≤ C₁.
    InverseTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRecord {
    pub id: BoundId,
    pub hypothesis_satisfied: bool,
    /// Effective times at which the bound was evaluated.
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub tolerance: Vec<f64>,
    /// Largest amount by which the left side crosses the right side.
    pub max_violation: f64,
    pub status: BoundStatus,
    /// Set when the bound holds by less than a factor 2.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsLedger {
    /// sup[2|∇f|² + R] at t = 0.
    pub c0: f64,
    /// sup(t|∇f|² + f²) at t = 0, i.e. sup f(0)².
    pub bernstein: f64,
    /// 2·C·C₀.
    pub c1: f64,
    pub sup_abs_f0: f64,
    pub far_field: FarField,
    pub f_bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub records: Vec<BoundRecord>,
    pub constants: ConstantsLedger,
    pub dt_max: f64,
    pub h: f64,
}

impl BoundReport {
    pub fn get(&self, id: BoundId) -> &BoundRecord {
        self.records.iter().find(|r| r.id == id).expect("every bound is recorded")
    }

    /// No asserted bound failed.
    pub fn all_hold(&self) -> bool {
        self.records.iter().all(|r| r.status != BoundStatus::Fail)
    }
}

fn tolerance(dt: f64, h: f64, rhs: f64) -> f64 {
    10.0 * (dt * dt + h * h) * rhs.abs().max(1.0)
}

fn record(
    id: BoundId,
    hypothesis: bool,
    times: Vec<f64>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    dt: f64,
    h: f64,
    lower: bool,
) -> BoundRecord {
    let tol: Vec<f64> = rhs.iter().map(|r| tolerance(dt, h, *r)).collect();
    let mut max_violation = f64::NEG_INFINITY;
    let mut ok = true;
    let mut flagged = false;
    for i in 0..lhs.len() {
        let v = if lower { rhs[i] - lhs[i] } else { lhs[i] - rhs[i] };
        max_violation = max_violation.max(v);
        if v > tol[i] || !v.is_finite() {
            ok = false;
        }
        if !lower && lhs[i] > 0.5 * rhs[i] {
            flagged = true;
        }
    }
    let status = if !hypothesis {
        BoundStatus::NotApplicable
    } else if ok {
        BoundStatus::Pass
    } else {
        BoundStatus::Fail
    };
    BoundRecord {
        id,
        hypothesis_satisfied: hypothesis,
        times,
        lhs,
        rhs,
        tolerance: tol,
        max_violation,
        status,
        flagged: flagged && id == BoundId::InverseTime,
    }
}

/// Evaluates the four maximum-principle bounds at every stored time. The
/// Bernstein and inverse-time bounds need a bounded Ricci potential: sup|f(0)|
/// below [`F_BOUND_THRESHOLD`] and a Euclidean far field.
pub fn bound_report(traj: &FlowTrajectory) -> BoundReport {
    let s0 = traj.initial();
    let n = s0.n() as f64;
    let h = s0.grid().h;
    let dt = traj.controls.effective_time(traj.dt_max_used());
    let times = traj.effective_times();
    let d0 = &traj.diagnostics[0];
    let c0 = d0.sup_combo;
    let f0 = s0.ricci_potential();
    let bernstein = f0.values.iter().fold(0.0, |m: f64, v| m.max(v * v));
    let c1 = 2.0 * bernstein * c0;
    let f_bounded = d0.sup_abs_f < F_BOUND_THRESHOLD && s0.far_field() == FarField::Euclidean;
    let constants = ConstantsLedger {
        c0,
        bernstein,
        c1,
        sup_abs_f0: d0.sup_abs_f,
        far_field: s0.far_field(),
        f_bounded,
    };

    let positive: Vec<usize> = (0..traj.len()).filter(|&k| times[k] > 0.0).collect();
    let pick = |v: &dyn Fn(usize) -> f64| positive.iter().map(|&k| v(k)).collect::<Vec<f64>>();
    let t_pos = pick(&|k| times[k]);

    let a = record(
        BoundId::ScalarLower,
        true,
        t_pos.clone(),
        pick(&|k| traj.diagnostics[k].inf_r),
        pick(&|k| -n / times[k]),
        dt,
        h,
        true,
    );
    let b = record(
        BoundId::Combination,
        true,
        times.clone(),
        traj.diagnostics.iter().map(|d| d.sup_combo).collect(),
        vec![c0; traj.len()],
        dt,
        h,
        false,
    );
    let bern_lhs: Vec<f64> = if traj.len() >= 2 {
        let track = gauge_track(traj).expect("trajectory has at least two states");
        traj.states
            .par_iter()
            .zip(track.corrected.par_iter())
            .zip(times.par_iter())
            .map(|((s, ft), &t)| {
                let g = s.grad_norm_sq(ft).expect("same grid");
                (0..s.len()).map(|i| t * g.values[i] + ft.values[i].powi(2)).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    } else {
        vec![f64::NAN; traj.len()]
    };
    let c = record(
        BoundId::Bernstein,
        f_bounded,
        times.clone(),
        bern_lhs,
        vec![bernstein; traj.len()],
        dt,
        h,
        false,
    );
    let d = record(
        BoundId::InverseTime,
        f_bounded,
        times.clone(),
        traj.diagnostics.iter().zip(&times).map(|(d, t)| t * d.sup_soliton).collect(),
        vec![c1; traj.len()],
        dt,
        h,
        false,
    );
    BoundReport { records: vec![a, b, c, d], constants, dt_max: dt, h }
}
