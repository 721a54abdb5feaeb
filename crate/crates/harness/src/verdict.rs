use krf_core::blowup::LimitReport;
use krf_core::flow::{BlowupSignal, BoundReport, BoundStatus, EndStatus, FlowTrajectory, SignalCause};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    FiniteTimeBlowupRicciFlatLimit,
    InfiniteTimeBlowupRicciFlatLimit,
    GlobalWithRicciFlatLimit,
    Inconclusive,
}

/// A checked number with the tolerance it was held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub key: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

impl Evidence {
    pub fn checked(key: &str, value: f64, tolerance: f64) -> Self {
        Self { key: key.into(), value, tolerance: Some(tolerance), passed: Some(value <= tolerance) }
    }

    pub fn info(key: &str, value: f64) -> Self {
        Self { key: key.into(), value, tolerance: None, passed: None }
    }
}

/// Hypotheses evaluated on the initial metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLedger {
    pub sobolev: Option<f64>,
    pub f_bounded: Option<bool>,
    pub bisectional_min: Option<f64>,
    pub bisectional_nonnegative: Option<bool>,
    /// min over nodes of the sum of the two lowest Phong-Sturm eigenvalues (n ≥ 2).
    pub phong_sturm_sum: Option<f64>,
    pub phong_sturm_nonnegative: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub classification: Classification,
    pub cause: Option<String>,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
    pub hypotheses: HypothesisLedger,
}

pub struct VerdictInputs<'a> {
    pub trajectory: &'a FlowTrajectory,
    /// None for synthetic trajectories, which are not flow solutions.
    pub bounds: Option<&'a BoundReport>,
    pub signal: &'a BlowupSignal,
    pub limit: Option<&'a LimitReport>,
    /// Other supporting checks, each with its tolerance.
    pub residuals: Vec<Evidence>,
    pub hypotheses: HypothesisLedger,
}

fn final_quartile(values: &[f64]) -> &[f64] {
    let m = values.len();
    &values[(3 * m / 4).min(m.saturating_sub(2))..]
}

/// Non-increasing with a net drop of more than `rel` relative.
fn decreasing(values: &[f64], rel: f64) -> bool {
    values.len() >= 2
        && values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
        && values[values.len() - 1] < values[0] * (1.0 - rel)
}

pub fn verdict(inputs: VerdictInputs<'_>, tol: &Tolerances) -> Verdict {
    let traj = inputs.trajectory;
    let mut evidence = inputs.residuals;
    let mut notes = Vec::new();
    let mut failed: Vec<String> = Vec::new();

    if let Some(b) = inputs.bounds {
        for r in &b.records {
            let tol_max = r.tolerance.iter().copied().fold(0.0, f64::max);
            let key = format!("bound:{}", serde_json::to_value(r.id).expect("plain enum"));
            let key = key.replace('"', "");
            evidence.push(Evidence {
                key: key.clone(),
                value: r.max_violation,
                tolerance: Some(tol_max),
                passed: match r.status {
                    BoundStatus::NotApplicable => None,
                    s => Some(s == BoundStatus::Pass),
                },
            });
            match r.status {
                BoundStatus::Fail => failed.push(key),
                BoundStatus::NotApplicable => {
                    notes.push(format!("{key} not applicable: Ricci potential unbounded"));
                }
                BoundStatus::Pass if r.flagged => notes.push(format!("{key} holds with margin below 2x")),
                BoundStatus::Pass => {}
            }
        }
    } else {
        notes.push("synthetic trajectory: maximum-principle bounds not evaluated".into());
    }
    failed.extend(evidence.iter().filter(|e| e.passed == Some(false) && !e.key.starts_with("bound:")).map(|e| e.key.clone()));

    let ricci: Vec<f64> = traj.diagnostics.iter().map(|d| d.sup_ricci).collect();
    let (r0, r1) = (ricci[0], *ricci.last().expect("non-empty"));
    evidence.push(Evidence::info("sup_ricci_initial", r0));
    evidence.push(Evidence::info("sup_ricci_final", r1));
    let rm: Vec<f64> = traj.diagnostics.iter().map(|d| d.sup_rm).collect();
    evidence.push(Evidence::info("sup_rm_initial", rm[0]));
    evidence.push(Evidence::info("sup_rm_final", *rm.last().expect("non-empty")));

    let done = |classification, cause: Option<String>, evidence, notes| Verdict {
        classification,
        cause,
        evidence,
        notes,
        hypotheses: inputs.hypotheses.clone(),
    };

    if !failed.is_empty() {
        let cause = format!("supporting residual exceeds tolerance: {}", failed.join(", "));
        return done(Classification::Inconclusive, Some(cause), evidence, notes);
    }

    match inputs.signal.cause {
        Some(SignalCause::PositivityFailure) => {
            return done(Classification::Inconclusive, Some("positivity failure".into()), evidence, notes);
        }
        Some(SignalCause::CurvatureGrowth) => {
            let finite = matches!(traj.status, EndStatus::BlowupDetected { .. });
            let Some(limit) = inputs.limit.filter(|l| !l.entries.is_empty()) else {
                let cause = "curvature growth without admissible blow-up points".to_string();
                return done(Classification::Inconclusive, Some(cause), evidence, notes);
            };
            let res: Vec<f64> = limit.entries.iter().map(|e| e.ricci_residual).collect();
            let last = *res.last().expect("non-empty");
            evidence.push(Evidence::info("blowup_entries", res.len() as f64));
            evidence.push(Evidence::info("blowup_scale_final", limit.entries.last().expect("non-empty").k));
            evidence.push(Evidence::info("rescaled_ricci_final", last));
            evidence.push(Evidence::info("rescaled_rm_uniform_bound", limit.uniform_rm_bound));
            let flat = last <= tol.ricci_flat || (limit.ricci_decreasing && last <= tol.ricci_decay * res[0]);
            if flat && (res.len() < 2 || limit.ricci_decreasing || last <= tol.ricci_flat) {
                let class = if finite {
                    Classification::FiniteTimeBlowupRicciFlatLimit
                } else {
                    Classification::InfiniteTimeBlowupRicciFlatLimit
                };
                return done(class, None, evidence, notes);
            }
            let when = if finite { "finite-time" } else { "growth at the final time" };
            let cause = format!("{when} blow-up; rescaled limit is not Ricci flat (residual {last:.3e})");
            return done(Classification::Inconclusive, Some(cause), evidence, notes);
        }
        None => {}
    }

    // bounded curvature
    let tail = final_quartile(&ricci);
    let tail_max = tail.iter().copied().fold(0.0, f64::max);
    if tail_max <= tol.ricci_flat {
        evidence.push(Evidence::checked("sup_ricci_final_quartile", tail_max, tol.ricci_flat));
        return done(Classification::GlobalWithRicciFlatLimit, None, evidence, notes);
    }
    let target = tol.ricci_decay * r0;
    evidence.push(Evidence::checked("sup_ricci_final_vs_decay_target", r1, target));
    if decreasing(tail, 0.0) && decreasing(&ricci, tol.stationary) && r1 <= target {
        return done(Classification::GlobalWithRicciFlatLimit, None, evidence, notes);
    }
    let stationary = (r1 - r0).abs() <= tol.stationary * r0.max(tol.ricci_flat);
    let cause = if stationary {
        notes.push("steady profile: sup|Rc| stationary along the run".into());
        "curvature neither decays nor blows up"
    } else if !decreasing(tail, 0.0) {
        "Ricci residual not decreasing over the final quartile"
    } else {
        "Ricci residual decreasing but above its decay target"
    };
    done(Classification::Inconclusive, Some(cause.into()), evidence, notes)
}
