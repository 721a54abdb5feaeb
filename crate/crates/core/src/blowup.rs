//! Blow-up sequences, rescaled pointed flows `g_j(t) = K_j·g(t_j + t/K_j)`
//! and diagnostics of their limits.
//!
//! Rescaled metrics are compared through coordinate-free profiles: Ricci
//! eigenvalues, |Rm| and the orbit size √P′ as functions of signed arclength
//! from the base point. Two radial metrics that differ by a holomorphic
//! dilation `z ↦ az` have identical profiles, so no renormalization of ρ is
//! needed.

use serde::{Deserialize, Serialize};

use crate::entropy::collapse_ratios;
use crate::error::{Error, Result};
use crate::flow::{singularity_monitor, BlowupCandidate, FlowTrajectory};
use crate::geometry::RadialKahlerState;
use crate::numerics::{invert_monotone, lagrange_eval};

/// Half-width of the arclength window used for pointed comparisons.
pub const PROFILE_RADIUS: f64 = 10.0;
const PROFILE_STEP: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionControls {
    /// Window constant C in sup_{[t − 1/(CK), t]} |Rm| ≤ C·K.
    pub c: f64,
    /// Minimal ratio γ between consecutive scales.
    pub ratio: f64,
    /// Keep at most this many entries, the latest ones.
    pub max_entries: usize,
}

impl Default for SelectionControls {
    fn default() -> Self {
        Self { c: 2.0, ratio: 2.0, max_entries: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSequence {
    pub controls: SelectionControls,
    pub entries: Vec<BlowupCandidate>,
}

/// Greedy scan over the monitor's admissible points: an entry is kept when
/// its scale exceeds the last kept one by the factor γ.
pub fn select_sequence(traj: &FlowTrajectory, controls: SelectionControls) -> Result<BlowupSequence> {
    if !(controls.c > 1.0) || !(controls.ratio > 1.0) || controls.max_entries == 0 {
        return Err(Error::InvalidArgument(format!(
            "selection needs C > 1, γ > 1 and at least one entry, got {controls:?}"
        )));
    }
    let signal = singularity_monitor(traj, controls.c);
    if !signal.raised() {
        return Err(Error::NoAdmissiblePoints);
    }
    let mut entries: Vec<BlowupCandidate> = Vec::new();
    for cand in signal.candidates {
        match entries.last() {
            Some(last) if cand.k < controls.ratio * last.k => {}
            _ => entries.push(cand),
        }
    }
    if entries.is_empty() {
        return Err(Error::NoAdmissiblePoints);
    }
    let skip = entries.len().saturating_sub(controls.max_entries);
    entries.drain(..skip);
    Ok(BlowupSequence { controls, entries })
}

impl BlowupSequence {
    /// Entries at chosen stored states, based at the maximum of |Rm|. Used to
    /// probe bounded-curvature runs; a flat state gets the unit scale.
    pub fn forced(traj: &FlowTrajectory, indices: &[usize], controls: SelectionControls) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&index| {
                let s = traj.states.get(index).ok_or_else(|| {
                    Error::InvalidArgument(format!("index {index} beyond {} stored states", traj.len()))
                })?;
                let rm = s.rm_norm();
                let (node, k) = rm
                    .values
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
                let k = if k > 0.0 { k } else { 1.0 };
                Ok(BlowupCandidate { index, time: s.time(), node, rho: s.grid().rho(node), k })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { controls, entries })
    }
}

/// Invariant profile of a metric around a base node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Signed arclength from the base node, increasing outward.
    pub sigma: Vec<f64>,
    pub mu_r: Vec<f64>,
    pub mu_t: Vec<f64>,
    pub rm: Vec<f64>,
    pub orbit: Vec<f64>,
}

impl Profile {
    pub fn of(state: &RadialKahlerState, base: usize) -> Self {
        let d = state.radial_distance();
        let (mu_r, mu_t) = state.ricci_eigenvalues();
        Self {
            sigma: d.iter().map(|x| x - d[base]).collect(),
            mu_r,
            mu_t,
            rm: state.rm_norm().values,
            orbit: state.p1().iter().map(|p| p.sqrt()).collect(),
        }
    }

    /// Window |σ| ≤ radius, clipped to the nodes with full stencils.
    fn range(&self, radius: f64) -> (f64, f64) {
        let m = self.sigma.len();
        (self.sigma[0].max(-radius), self.sigma[m.saturating_sub(3)].min(radius))
    }

    fn sample(&self, state: &RadialKahlerState, sigma: f64) -> [f64; 4] {
        let g = state.grid();
        let rho: Vec<f64> = g.points();
        let shift = self.sigma[0];
        let d: Vec<f64> = self.sigma.iter().map(|s| s - shift).collect();
        let r = invert_monotone(&rho, &d, &state.distance_speed(), sigma - shift).unwrap_or(rho[0]);
        let k = ((r - g.rho_min) / g.h).round() as usize;
        let lo = k.saturating_sub(3).min(g.len - 6);
        let xs = &rho[lo..lo + 6];
        let at = |v: &[f64]| lagrange_eval(xs, &v[lo..lo + 6], r);
        [at(&self.mu_r), at(&self.mu_t), at(&self.rm), at(&self.orbit)]
    }
}

/// Sup distance between profiles over their common window.
pub fn profile_distance(a: (&RadialKahlerState, usize), b: (&RadialKahlerState, usize), radius: f64) -> f64 {
    let (pa, pb) = (Profile::of(a.0, a.1), Profile::of(b.0, b.1));
    let (la, ha) = pa.range(radius);
    let (lb, hb) = pb.range(radius);
    let (lo, hi) = (la.max(lb), ha.min(hb));
    if !(hi > lo) {
        return f64::NAN;
    }
    let steps = ((hi - lo) / PROFILE_STEP).ceil() as usize;
    (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .map(|s| {
            let (x, y) = (pa.sample(a.0, s), pb.sample(b.0, s));
            x.iter().zip(&y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `g_j` on the rescaled window `[−back, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledFlow {
    pub entry: BlowupCandidate,
    pub times: Vec<f64>,
    pub source_indices: Vec<usize>,
    pub states: Vec<RadialKahlerState>,
    /// max |K·R(g_j) − R(g)| / max(1, |R(g)|) over all window samples.
    pub scalar_transform_error: f64,
}

impl RescaledFlow {
    pub fn at_base_time(&self) -> &RadialKahlerState {
        self.states.last().expect("window holds the base time")
    }

    /// |Rm(g_j(0))| at the base node.
    pub fn base_rm(&self) -> f64 {
        self.at_base_time().rm_norm().values[self.entry.node]
    }
}

pub fn rescale_pointed(traj: &FlowTrajectory, entry: &BlowupCandidate, back: f64) -> Result<RescaledFlow> {
    let times = traj.times();
    let k = entry.k;
    let start = entry.time - back / k;
    let (t0, t1) = (times[0], *times.last().expect("non-empty trajectory"));
    if !(back >= 0.0) || start < t0 - 1e-12 * t1.abs().max(1.0) || entry.index >= traj.len() {
        return Err(Error::WindowOutOfRange { start, end: entry.time });
    }
    let mut out = RescaledFlow {
        entry: *entry,
        times: vec![],
        source_indices: vec![],
        states: vec![],
        scalar_transform_error: 0.0,
    };
    for i in 0..=entry.index {
        if times[i] < start - 1e-12 * t1.abs().max(1.0) {
            continue;
        }
        let src = &traj.states[i];
        let tau = k * (times[i] - entry.time);
        let g = src.scaled(k)?.with_time(tau);
        let (r0, r1) = (src.scalar_curvature().values, g.scalar_curvature().values);
        let err = r0.iter().zip(&r1).map(|(a, b)| (k * b - a).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
        out.scalar_transform_error = out.scalar_transform_error.max(err);
        out.times.push(tau);
        out.source_indices.push(i);
        out.states.push(g);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDiagnostics {
    pub k: f64,
    pub time: f64,
    pub rho: f64,
    /// |Rm(g_j(0))|(base); 1 whenever the base is curved.
    pub base_rm: f64,
    /// sup |Rm(g_j)| over the window.
    pub sup_rm: f64,
    /// Unit-ball volume ratio when the base sits on the axis.
    pub collapse: Option<f64>,
    /// sup |Rc(g_j(0))| within the pointed window.
    pub ricci_residual: f64,
    pub scalar_transform_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub entries: Vec<EntryDiagnostics>,
    pub uniform_rm_bound: f64,
    /// Between consecutive entries at their base times.
    pub profile_distances: Vec<f64>,
    /// Ricci residuals strictly decrease along the sequence.
    pub ricci_decreasing: bool,
}

pub fn entry_diagnostics(flow: &RescaledFlow) -> EntryDiagnostics {
    let g = flow.at_base_time();
    let base = flow.entry.node;
    let sup_rm = flow.states.iter().map(|s| s.rm_norm().max()).fold(0.0, f64::max);
    let collapse = if base == 0 { collapse_ratios(g, &[1.0])[0].kappa } else { None };
    let profile = Profile::of(g, base);
    let (lo, hi) = profile.range(PROFILE_RADIUS);
    let ricci_residual = (0..g.len())
        .filter(|&i| profile.sigma[i] >= lo && profile.sigma[i] <= hi)
        .map(|i| profile.mu_r[i].abs().max(profile.mu_t[i].abs()))
        .fold(0.0, f64::max);
    EntryDiagnostics {
        k: flow.entry.k,
        time: flow.entry.time,
        rho: flow.entry.rho,
        base_rm: flow.base_rm(),
        sup_rm,
        collapse,
        ricci_residual,
        scalar_transform_error: flow.scalar_transform_error,
    }
}

/// Rescales every entry on the window `[−1/C, 0]` and collects the
/// compactness diagnostics. Entries are processed in parallel.
pub fn limit_diagnostics(traj: &FlowTrajectory, seq: &BlowupSequence) -> Result<(Vec<RescaledFlow>, LimitReport)> {
    use rayon::prelude::*;
    let back = 1.0 / seq.controls.c;
    let flows = seq.entries.par_iter().map(|e| rescale_pointed(traj, e, back)).collect::<Result<Vec<_>>>()?;
    let entries: Vec<EntryDiagnostics> = flows.par_iter().map(entry_diagnostics).collect();
    let profile_distances = flows
        .windows(2)
        .map(|w| profile_distance((w[0].at_base_time(), w[0].entry.node), (w[1].at_base_time(), w[1].entry.node), PROFILE_RADIUS))
        .collect();
    let report = LimitReport {
        uniform_rm_bound: entries.iter().map(|e| e.sup_rm).fold(0.0, f64::max),
        ricci_decreasing: entries.len() >= 2 && entries.windows(2).all(|w| w[1].ricci_residual < w[0].ricci_residual),
        entries,
        profile_distances,
    };
    Ok((flows, report))
}
