//! Kähler-Ricci flow on radial potentials and the maximum-principle checks.
//!
//! The speed factor `c` means ∂ₜg = −c·Rc for the Riemannian metric. All
//! time-dependent bounds are stated in the effective time `t_eff = c·t/2`,
//! the time of the flow ∂ₜg = −2Rc.

mod bounds;
mod gauge;
mod identities;
mod monitor;
mod step;

pub use bounds::{bound_report, BoundId, BoundRecord, BoundReport, BoundStatus, ConstantsLedger};
pub use gauge::{gauge_track, GaugeTrack};
pub use identities::{evolution_residuals, EvolutionResiduals};
pub use monitor::{singularity_monitor, BlowupCandidate, BlowupSignal, SignalCause};
pub use step::{krf_step, log_radial_velocity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RadialKahlerState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowControls {
    /// c in ∂ₜg = −c·Rc.
    pub speed: f64,
    pub dt_max: f64,
    /// dt ≤ θ / sup|Rm|.
    pub theta_curv: f64,
    pub max_halvings: u32,
    /// Blow-up when sup|Rm| exceeds this multiple of max(1, sup|Rm|(0)).
    pub blowup_factor: f64,
    pub max_steps: usize,
    /// Keep every k-th accepted state (the last one is always kept).
    pub store_every: usize,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            speed: 1.0,
            dt_max: 1e-2,
            theta_curv: 0.05,
            max_halvings: 40,
            blowup_factor: 1e3,
            max_steps: 1_000_000,
            store_every: 1,
        }
    }
}

impl FlowControls {
    pub fn effective_time(&self, t: f64) -> f64 {
        0.5 * self.speed * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EndStatus {
    Completed,
    PositivityFailure { time: f64, reason: String },
    BlowupDetected { time: f64, sup_rm: f64 },
    StepLimit { time: f64 },
}

/// Pointwise diagnostics of one stored state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub t_eff: f64,
    pub sup_r: f64,
    pub inf_r: f64,
    pub sup_grad_f: f64,
    /// sup(2|∇f|² + R).
    pub sup_combo: f64,
    /// sup(|∇f|² + R).
    pub sup_soliton: f64,
    pub sup_rm: f64,
    pub sup_abs_f: f64,
    /// sup |R_{ij̄}|.
    pub sup_ricci: f64,
    pub min_eigenvalue: f64,
}

impl StepDiagnostics {
    pub fn of(state: &RadialKahlerState, speed: f64) -> Self {
        let f = state.ricci_potential();
        let r = state.scalar_curvature();
        let g = state.ricci_potential_grad_sq();
        let ric = state.ricci_norm_sq();
        let lt = state.lambda_t();
        let lr = state.lambda_r();
        let mut d = Self {
            time: state.time(),
            t_eff: 0.5 * speed * state.time(),
            sup_r: r.max(),
            inf_r: r.min(),
            sup_grad_f: g.max(),
            sup_combo: f64::NEG_INFINITY,
            sup_soliton: f64::NEG_INFINITY,
            sup_rm: state.rm_norm().max(),
            sup_abs_f: f.max_abs(),
            sup_ricci: ric.max().sqrt(),
            min_eigenvalue: f64::INFINITY,
        };
        for i in 0..state.len() {
            d.sup_combo = d.sup_combo.max(2.0 * g.values[i] + r.values[i]);
            d.sup_soliton = d.sup_soliton.max(g.values[i] + r.values[i]);
            d.min_eigenvalue = d.min_eigenvalue.min(lr[i]);
            if state.n() > 1 {
                d.min_eigenvalue = d.min_eigenvalue.min(lt[i]);
            }
        }
        d
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub controls: FlowControls,
    pub states: Vec<RadialKahlerState>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Accepted step sizes, in order, including steps between stored states.
    pub dt_history: Vec<f64>,
    pub status: EndStatus,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time()).collect()
    }

    pub fn effective_times(&self) -> Vec<f64> {
        self.states.iter().map(|s| self.controls.effective_time(s.time())).collect()
    }

    pub fn initial(&self) -> &RadialKahlerState {
        &self.states[0]
    }

    pub fn last(&self) -> &RadialKahlerState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest step actually taken.
    pub fn dt_max_used(&self) -> f64 {
        self.dt_history.iter().copied().fold(0.0, f64::max)
    }
}

/// Integrates to `t_end` or until positivity fails or curvature blows up.
pub fn evolve(initial: &RadialKahlerState, t_end: f64, controls: FlowControls) -> Result<FlowTrajectory> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be positive")));
    }
    if !(controls.speed > 0.0) || !(controls.dt_max > 0.0) || controls.store_every == 0 {
        return Err(Error::InvalidArgument("flow controls must be positive".into()));
    }
    let d0 = StepDiagnostics::of(initial, controls.speed);
    let trigger = controls.blowup_factor * d0.sup_rm.max(1.0);
    let mut traj = FlowTrajectory {
        controls,
        states: vec![initial.clone()],
        diagnostics: vec![d0],
        dt_history: Vec::new(),
        status: EndStatus::Completed,
    };
    let mut state = initial.clone();
    let mut sup_rm = d0.sup_rm;
    let t0 = initial.time();
    let end = t0 + t_end;
    let mut steps = 0usize;
    while end - state.time() > 1e-12 * end.abs().max(1.0) {
        if steps >= controls.max_steps {
            traj.status = EndStatus::StepLimit { time: state.time() };
            break;
        }
        let mut dt = controls.dt_max.min(end - state.time());
        if sup_rm > 0.0 {
            dt = dt.min(controls.theta_curv / sup_rm);
        }
        let mut halvings = 0;
        let next = loop {
            match krf_step(&state, dt, controls.speed) {
                Ok(s) => break Ok(s),
                Err(Error::StepRejected { time, reason }) => {
                    if halvings >= controls.max_halvings {
                        break Err((time, reason));
                    }
                    halvings += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        let next = match next {
            Ok(s) => s,
            Err((time, reason)) => {
                traj.status = EndStatus::PositivityFailure { time, reason };
                break;
            }
        };
        steps += 1;
        traj.dt_history.push(dt);
        state = next;
        // snap to the end time so the last state sits exactly at t_end
        if (end - state.time()).abs() <= 1e-12 * end.abs().max(1.0) {
            state = state.with_time(end);
        }
        let d = StepDiagnostics::of(&state, controls.speed);
        sup_rm = d.sup_rm;
        let done = end - state.time() <= 1e-12 * end.abs().max(1.0);
        let blown = sup_rm > trigger || !sup_rm.is_finite();
        if steps % controls.store_every == 0 || done || blown {
            traj.states.push(state.clone());
            traj.diagnostics.push(d);
        }
        if blown {
            traj.status = EndStatus::BlowupDetected { time: state.time(), sup_rm };
            break;
        }
    }
    Ok(traj)
}
