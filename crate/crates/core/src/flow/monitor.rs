use serde::{Deserialize, Serialize};

use super::{EndStatus, FlowTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalCause {
    CurvatureGrowth,
    PositivityFailure,
}

/// A stored time and node with K = |Rm|(t, ρ) that passes the backward-window
/// condition sup_{[t − 1/(CK), t]} sup|Rm| ≤ C·K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCandidate {
    pub index: usize,
    pub time: f64,
    pub node: usize,
    pub rho: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSignal {
    pub cause: Option<SignalCause>,
    pub candidates: Vec<BlowupCandidate>,
}

impl BlowupSignal {
    pub fn raised(&self) -> bool {
        self.cause.is_some()
    }
}

/// Raises a signal when sup|Rm| grows past the trajectory's blow-up factor
/// (or the run ended in a blow-up or positivity failure) and lists the stored
/// points that satisfy the window condition with constant `c`.
pub fn singularity_monitor(traj: &FlowTrajectory, c: f64) -> BlowupSignal {
    assert!(c > 1.0, "window constant must exceed 1");
    let rm0 = traj.diagnostics[0].sup_rm.max(1.0);
    let grew = traj.diagnostics.iter().any(|d| d.sup_rm > traj.controls.blowup_factor * rm0);
    let cause = match traj.status {
        EndStatus::BlowupDetected { .. } => Some(SignalCause::CurvatureGrowth),
        _ if grew => Some(SignalCause::CurvatureGrowth),
        EndStatus::PositivityFailure { .. } => Some(SignalCause::PositivityFailure),
        _ => None,
    };
    if cause.is_none() {
        return BlowupSignal { cause, candidates: vec![] };
    }
    let times = traj.times();
    let t0 = times[0];
    let mut candidates = Vec::new();
    for (j, s) in traj.states.iter().enumerate() {
        let rm = s.rm_norm();
        let (node, k) = rm
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        if !(k > 0.0) {
            continue;
        }
        let start = times[j] - 1.0 / (c * k);
        if start < t0 {
            continue;
        }
        let ok = (0..=j)
            .filter(|&i| times[i] >= start)
            .all(|i| traj.diagnostics[i].sup_rm <= c * k);
        if ok {
            candidates.push(BlowupCandidate { index: j, time: times[j], node, rho: s.grid().rho(node), k });
        }
    }
    BlowupSignal { cause, candidates }
}
