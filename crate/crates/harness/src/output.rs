//! Artifact writers. Every file under a run directory is listed in README.md
//! with its columns; the summary carries `schema_version`.

use std::path::Path;

use krf_core::blowup::LimitReport;
use krf_core::flow::{BoundReport, FlowTrajectory, GaugeTrack};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::scenario::{EntropySample, HolomorphicSample, Summary, SCHEMA_VERSION};
use crate::HarnessError;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(path.display().to_string(), e)
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Csv(path.display().to_string(), e))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Csv(path.display().to_string(), e))?;
    }
    w.flush().map_err(io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

#[derive(Serialize)]
struct CurvatureRow {
    time: f64,
    t_eff: f64,
    sup_r: f64,
    inf_r: f64,
    sup_rm: f64,
    sup_ricci: f64,
    min_eigenvalue: f64,
}

#[derive(Serialize)]
struct PotentialRow {
    time: f64,
    t_eff: f64,
    sup_abs_f: f64,
    sup_grad_f: f64,
    sup_combo: f64,
    sup_soliton: f64,
}

pub fn write_timeseries(dir: &Path, traj: &FlowTrajectory) -> Result<(), HarnessError> {
    write_csv(
        &dir.join("curvature.csv"),
        traj.diagnostics.iter().map(|d| CurvatureRow {
            time: d.time,
            t_eff: d.t_eff,
            sup_r: d.sup_r,
            inf_r: d.inf_r,
            sup_rm: d.sup_rm,
            sup_ricci: d.sup_ricci,
            min_eigenvalue: d.min_eigenvalue,
        }),
    )?;
    write_csv(
        &dir.join("potential.csv"),
        traj.diagnostics.iter().map(|d| PotentialRow {
            time: d.time,
            t_eff: d.t_eff,
            sup_abs_f: d.sup_abs_f,
            sup_grad_f: d.sup_grad_f,
            sup_combo: d.sup_combo,
            sup_soliton: d.sup_soliton,
        }),
    )
}

#[derive(Serialize)]
struct BoundRow<'a> {
    bound: &'a str,
    t_eff: f64,
    lhs: f64,
    rhs: f64,
    tolerance: f64,
    holds: bool,
    status: &'a str,
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn write_bounds(dir: &Path, report: &BoundReport) -> Result<(), HarnessError> {
    let mut rows = Vec::new();
    let names: Vec<(String, String)> = report.records.iter().map(|r| (kebab(&r.id), kebab(&r.status))).collect();
    for (r, (id, status)) in report.records.iter().zip(&names) {
        for i in 0..r.lhs.len() {
            // lower bounds (inf R ≥ −n/t) hold when lhs ≥ rhs − tol
            let lower = matches!(r.id, krf_core::flow::BoundId::ScalarLower);
            let gap = if lower { r.rhs[i] - r.lhs[i] } else { r.lhs[i] - r.rhs[i] };
            rows.push(BoundRow {
                bound: id,
                t_eff: r.times[i],
                lhs: r.lhs[i],
                rhs: r.rhs[i],
                tolerance: r.tolerance[i],
                holds: gap <= r.tolerance[i],
                status,
            });
        }
    }
    write_csv(&dir.join("bounds.csv"), rows)
}

#[derive(Serialize)]
struct GaugeRow {
    t_eff: f64,
    residual_mod_const: f64,
    /// On the interval ending at this time; empty for the first row.
    heat_residual: Option<f64>,
}

pub fn write_gauge(dir: &Path, g: &GaugeTrack) -> Result<(), HarnessError> {
    write_csv(
        &dir.join("gauge.csv"),
        (0..g.times.len()).map(|i| GaugeRow {
            t_eff: g.times[i],
            residual_mod_const: g.residual_mod_const[i],
            heat_residual: i.checked_sub(1).and_then(|k| g.heat_residual.get(k).copied()),
        }),
    )
}

pub fn write_holomorphic(dir: &Path, rows: &[HolomorphicSample]) -> Result<(), HarnessError> {
    write_csv(&dir.join("holomorphic.csv"), rows)
}

pub fn write_entropy(dir: &Path, rows: &[EntropySample]) -> Result<(), HarnessError> {
    write_csv(&dir.join("entropy.csv"), rows)
}

pub fn write_blowup(dir: &Path, report: &LimitReport) -> Result<(), HarnessError> {
    write_csv(&dir.join("blowup.csv"), &report.entries)
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<(), HarnessError> {
    write_json(&dir.join("summary.json"), summary)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    config: &'a ScenarioConfig,
}

pub fn write_manifest(dir: &Path, cfg: &ScenarioConfig) -> Result<(), HarnessError> {
    let m = Manifest { schema_version: SCHEMA_VERSION, tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), config: cfg };
    write_json(&dir.join("manifest.json"), &m)
}

#[derive(Serialize)]
struct Failure {
    error: String,
}

pub fn write_failure(dir: &Path, err: &HarnessError) -> Result<(), HarnessError> {
    write_json(&dir.join("failure.json"), &Failure { error: err.to_string() })
}
