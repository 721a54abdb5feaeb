use std::path::{Path, PathBuf};

use krf_core::blowup::{limit_diagnostics, select_sequence, EntryDiagnostics, LimitReport, SelectionControls};
use krf_core::entropy::{
    entropy_report, sobolev_estimate, variation_residual, Bump, MinimizerControls, VariationField,
};
use krf_core::flow::{
    bound_report, evolution_residuals, evolve, gauge_track, singularity_monitor, BoundReport, EndStatus,
    FlowControls, FlowTrajectory,
};
use krf_core::geometry::{phong_sturm_operator, RadialKahlerState, ScalarField};
use krf_core::presets::shrinking_fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PresetName, ScenarioConfig};
use crate::output;
use crate::verdict::{verdict, Evidence, HypothesisLedger, Verdict, VerdictInputs};
use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;
/// Levels of the synthetic shrinking fixture.
pub const SHRINKING_LEVELS: usize = 12;
/// Seeded bumps in the first-variation spot check.
const VARIATION_BUMPS: usize = 3;

/// Holomorphic curvature extremes of one stored state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolomorphicSample {
    pub time: f64,
    pub bisectional_min: f64,
    pub bisectional_max: f64,
    /// NaN in complex dimension one.
    pub phong_sturm_sum_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub tau: f64,
    /// "initial" or "final".
    pub stage: String,
    pub mu: Option<f64>,
    pub w_seed: Option<f64>,
    pub f_value: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationSample {
    pub tau: f64,
    pub f_residual: f64,
    pub w_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub n: usize,
    pub nodes: usize,
    pub status: EndStatus,
    pub final_time: f64,
    pub stored_states: usize,
    pub dt_max_used: f64,
    pub verdict: Verdict,
    pub bounds: Option<BoundSummary>,
    pub entropy: Vec<EntropySample>,
    pub variation: Vec<VariationSample>,
    pub blowup: Option<BlowupSummary>,
    pub identities: Option<IdentitySummary>,
    /// All enabled checks pass or are not applicable.
    pub checks_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub c0: f64,
    pub c1: f64,
    pub bernstein: f64,
    pub f_bounded: bool,
    pub all_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSummary {
    pub cause: Option<String>,
    pub entries: Vec<EntryDiagnostics>,
    pub uniform_rm_bound: f64,
    pub profile_distances: Vec<f64>,
    pub ricci_decreasing: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub max_scalar: f64,
    pub max_bochner: f64,
}

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: Summary,
    pub trajectory: FlowTrajectory,
    pub bounds: Option<BoundReport>,
    pub holomorphic: Vec<HolomorphicSample>,
}

pub fn holomorphic_sample(state: &RadialKahlerState) -> Result<HolomorphicSample, HarnessError> {
    let (mut bmin, mut bmax, mut ps) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    // curvature_at needs both neighbours, so the two end nodes are skipped
    for i in 1..state.len() - 1 {
        let p = state.curvature_at(i)?;
        bmin = bmin.min(p.bisectional_min);
        bmax = bmax.max(p.bisectional_max);
        if state.n() >= 2 {
            ps = ps.min(phong_sturm_operator(&p)?.sum_two_lowest);
        }
    }
    Ok(HolomorphicSample {
        time: state.time(),
        bisectional_min: bmin,
        bisectional_max: bmax,
        phong_sturm_sum_min: if state.n() >= 2 { ps } else { f64::NAN },
    })
}

fn entropy_samples(state: &RadialKahlerState, taus: &[f64], stage: &str) -> Vec<EntropySample> {
    taus.par_iter()
        .map(|&tau| match entropy_report(state, tau, &MinimizerControls::default()) {
            Ok(r) => EntropySample {
                tau,
                stage: stage.into(),
                mu: Some(r.mu),
                w_seed: Some(r.w_seed),
                f_value: Some(r.f_value),
                converged: Some(r.converged),
                iterations: Some(r.iterations),
                error: None,
            },
            Err(e) => EntropySample {
                tau,
                stage: stage.into(),
                mu: None,
                w_seed: None,
                f_value: None,
                converged: None,
                iterations: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Seeded bumps in the middle half of the grid, f = d²/2.
fn variation_samples(state: &RadialKahlerState, taus: &[f64], seed: u64) -> Result<Vec<VariationSample>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = state.grid();
    let (lo, hi) = (g.rho_min, g.rho_max());
    let (mut a, mut b) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
    // keep the bumps where e^{-f} has mass; the far tail is coarse in distance
    let dist = state.radial_distance();
    let live: Vec<f64> = (0..g.len).filter(|&i| (0.25..=2.5).contains(&dist[i])).map(|i| g.rho(i)).collect();
    if let (Some(&l), Some(&r)) = (live.first(), live.last()) {
        (a, b) = (a.max(l), b.min(r));
        if a >= b {
            (a, b) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
        }
    }
    let width_max = (0.25 * (hi - lo) - 4.0 * g.h).min(2.0);
    let f = ScalarField::new(dist.iter().map(|d| 0.5 * d * d).collect())?;
    let mut out = Vec::new();
    for &tau in taus {
        let bumps: Vec<Bump> = (0..VARIATION_BUMPS)
            .map(|_| Bump {
                center: rng.gen_range(a..b),
                width: rng.gen_range(0.5 * width_max..width_max),
                amplitude: rng.gen_range(-0.1..0.1),
            })
            .collect();
        let v = VariationField::bumps(state, &bumps)?;
        let r = variation_residual(state, &f, &v, tau)?;
        out.push(VariationSample { tau, f_residual: r.f_residual, w_residual: r.w_residual });
    }
    Ok(out)
}

fn flow_controls(cfg: &ScenarioConfig) -> FlowControls {
    let mut c = FlowControls { speed: cfg.speed, ..FlowControls::default() };
    if let Some(dt) = cfg.dt_max {
        c.dt_max = dt;
    }
    c
}

/// Runs one scenario and writes its artifacts under `out_dir/<name>`. On a
/// mid-run failure a `failure.json` record is written and the error returned.
pub fn run_scenario(cfg: &ScenarioConfig, out_root: &Path) -> Result<RunArtifacts, HarnessError> {
    cfg.validate()?;
    let dir = out_root.join(&cfg.name);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io(dir.display().to_string(), e))?;
    output::write_manifest(&dir, cfg)?;
    match execute(cfg, &dir) {
        Ok(a) => Ok(a),
        Err(e) => {
            output::write_failure(&dir, &e)?;
            Err(e)
        }
    }
}

fn execute(cfg: &ScenarioConfig, dir: &Path) -> Result<RunArtifacts, HarnessError> {
    let synthetic = cfg.preset == Some(PresetName::Shrinking);
    let traj = if synthetic {
        shrinking_fixture(cfg.grid()?, cfg.t_end, SHRINKING_LEVELS)?
    } else {
        evolve(&cfg.initial_state()?, cfg.t_end, flow_controls(cfg))?
    };
    output::write_timeseries(dir, &traj)?;
    let initial = traj.initial();
    let tol = &cfg.tolerances;
    let mut residuals = Vec::new();

    let bounds = (!synthetic).then(|| bound_report(&traj));
    if let Some(b) = &bounds {
        output::write_bounds(dir, b)?;
    }
    if !synthetic && traj.len() >= 2 {
        let g = gauge_track(&traj)?;
        output::write_gauge(dir, &g)?;
    }

    let holomorphic = if cfg.monitors.holomorphic {
        let h = traj.states.par_iter().map(holomorphic_sample).collect::<Result<Vec<_>, _>>()?;
        output::write_holomorphic(dir, &h)?;
        h
    } else {
        vec![]
    };

    let identities = if cfg.monitors.identities && !synthetic && traj.len() >= 3 {
        let r = evolution_residuals(&traj)?;
        Some(IdentitySummary { max_scalar: r.max_scalar(), max_bochner: r.max_bochner() })
    } else {
        None
    };

    let mut entropy = Vec::new();
    if cfg.monitors.entropy {
        entropy.extend(entropy_samples(initial, &cfg.taus, "initial"));
        entropy.extend(entropy_samples(traj.last(), &cfg.taus, "final"));
        output::write_entropy(dir, &entropy)?;
    }

    let variation = if cfg.monitors.variation { variation_samples(initial, &cfg.taus, cfg.seed)? } else { vec![] };
    for v in &variation {
        residuals.push(Evidence::checked(&format!("variation_f:tau={}", v.tau), v.f_residual, tol.variation));
        residuals.push(Evidence::checked(&format!("variation_w:tau={}", v.tau), v.w_residual, tol.variation));
    }

    let signal = singularity_monitor(&traj, tol.window_constant);
    let mut blowup = None;
    let mut limit: Option<LimitReport> = None;
    if cfg.monitors.blowup && signal.raised() {
        let controls = SelectionControls { c: tol.window_constant, ratio: tol.scale_ratio, ..Default::default() };
        let cause = signal.cause.map(|c| format!("{c:?}"));
        match select_sequence(&traj, controls).and_then(|seq| limit_diagnostics(&traj, &seq)) {
            Ok((_, report)) => {
                output::write_blowup(dir, &report)?;
                for e in &report.entries {
                    residuals.push(Evidence::checked("blowup_normalization", (e.base_rm - 1.0).abs(), 1e-8));
                    residuals.push(Evidence::checked("blowup_scalar_transform", e.scalar_transform_error, 1e-12));
                }
                blowup = Some(BlowupSummary {
                    cause,
                    entries: report.entries.clone(),
                    uniform_rm_bound: report.uniform_rm_bound,
                    profile_distances: report.profile_distances.clone(),
                    ricci_decreasing: report.ricci_decreasing,
                    error: None,
                });
                limit = Some(report);
            }
            Err(e) => {
                blowup = Some(BlowupSummary {
                    cause,
                    entries: vec![],
                    uniform_rm_bound: f64::NAN,
                    profile_distances: vec![],
                    ricci_decreasing: false,
                    error: Some(e.to_string()),
                })
            }
        }
    }

    let h0 = holomorphic.first().copied().map(Ok).unwrap_or_else(|| holomorphic_sample(initial))?;
    let scale = initial.rm_norm().max_abs().max(1.0);
    let sign_tol = 1e-10 * scale;
    let hypotheses = HypothesisLedger {
        sobolev: if cfg.monitors.sobolev { sobolev_estimate(initial)? } else { None },
        f_bounded: bounds.as_ref().map(|b| b.constants.f_bounded),
        bisectional_min: Some(h0.bisectional_min),
        bisectional_nonnegative: Some(h0.bisectional_min >= -sign_tol),
        phong_sturm_sum: (initial.n() >= 2).then_some(h0.phong_sturm_sum_min),
        phong_sturm_nonnegative: (initial.n() >= 2).then_some(h0.phong_sturm_sum_min >= -sign_tol),
    };

    let v = verdict(
        VerdictInputs {
            trajectory: &traj,
            bounds: bounds.as_ref(),
            signal: &signal,
            limit: limit.as_ref(),
            residuals: residuals.clone(),
            hypotheses,
        },
        tol,
    );
    let checks_pass = bounds.as_ref().is_none_or(|b| b.all_hold()) && residuals.iter().all(|e| e.passed != Some(false));
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        n: initial.n(),
        nodes: initial.len(),
        status: traj.status.clone(),
        final_time: traj.last().time(),
        stored_states: traj.len(),
        dt_max_used: traj.dt_max_used(),
        verdict: v,
        bounds: bounds.as_ref().map(|b| BoundSummary {
            c0: b.constants.c0,
            c1: b.constants.c1,
            bernstein: b.constants.bernstein,
            f_bounded: b.constants.f_bounded,
            all_hold: b.all_hold(),
        }),
        entropy,
        variation,
        blowup,
        identities,
        checks_pass,
    };
    output::write_summary(dir, &summary)?;
    Ok(RunArtifacts { dir: dir.to_path_buf(), summary, trajectory: traj, bounds, holomorphic })
}
