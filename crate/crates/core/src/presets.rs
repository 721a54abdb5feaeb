//! Initial data and synthetic trajectories used by tests and scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{EndStatus, FlowControls, FlowTrajectory, StepDiagnostics};
use crate::geometry::{FarField, Grid, RadialKahlerState, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FlatC1,
    FlatC2,
    Cigar,
    /// Cigar capped to a Euclidean end, so f stays bounded.
    PerturbedCigar,
    /// λ_r grows from 1 at the origin to 2 at infinity; negative curvature.
    Cusp,
    /// Compactly supported bump on flat ℂ², positive curvature at its core.
    PositiveBump,
    /// U(2)-invariant metric of positive bisectional curvature.
    U2Positive,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::FlatC1,
        Preset::FlatC2,
        Preset::Cigar,
        Preset::PerturbedCigar,
        Preset::Cusp,
        Preset::PositiveBump,
        Preset::U2Positive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FlatC1 => "flat-c1",
            Preset::FlatC2 => "flat-c2",
            Preset::Cigar => "cigar",
            Preset::PerturbedCigar => "perturbed-cigar",
            Preset::Cusp => "cusp",
            Preset::PositiveBump => "positive-bump",
            Preset::U2Positive => "u2-positive",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Preset::FlatC2 | Preset::PositiveBump | Preset::U2Positive => 2,
            _ => 1,
        }
    }

    /// Grid the preset is designed for, with `len` nodes.
    pub fn default_grid(self, len: usize) -> Result<Grid> {
        match self {
            Preset::PositiveBump => Grid::new(-8.0, 4.0, len),
            Preset::Cusp | Preset::PerturbedCigar => Grid::new(-8.0, 8.0, len),
            _ => Grid::new(-16.0, 16.0, len),
        }
    }

    pub fn build(self, grid: Grid) -> Result<RadialKahlerState> {
        match self {
            Preset::FlatC1 => RadialKahlerState::flat(1, grid),
            Preset::FlatC2 => RadialKahlerState::flat(2, grid),
            Preset::Cigar => RadialKahlerState::cigar(grid),
            Preset::PerturbedCigar => RadialKahlerState::from_reference(1, grid, Reference::blend(0.1)),
            Preset::Cusp => RadialKahlerState::from_reference(1, grid, Reference::blend(2.0)),
            Preset::PositiveBump => {
                let (q1, q2) = bump_deviation(&grid, BUMP_SCALE, BUMP_AMPLITUDE);
                RadialKahlerState::from_deviation_derivatives(
                    2,
                    grid,
                    Reference::FLAT,
                    FarField::Euclidean,
                    &q1,
                    &q2,
                )
            }
            Preset::U2Positive => RadialKahlerState::from_reference(2, grid, Reference::CIGAR),
        }
    }
}

pub const BUMP_AMPLITUDE: f64 = 0.2;
pub const BUMP_SCALE: f64 = 1.0;

/// Q = −ε·s·y²e^{−y} with y = |z|²/s. Smooth in |z|², below round-off once
/// |z|² exceeds about 40·s, and positively curved near the origin.
/// Returns (Q′, Q″) in ρ.
pub fn bump_deviation(grid: &Grid, scale: f64, amplitude: f64) -> (Vec<f64>, Vec<f64>) {
    grid.points()
        .iter()
        .map(|&r| {
            let x = r.exp();
            let y = x / scale;
            let e = (-y).exp();
            let q1 = -amplitude * x * (2.0 * y - y * y) * e;
            let q2 = -amplitude * x * (4.0 * y - 5.0 * y * y + y * y * y) * e;
            (q1, q2)
        })
        .unzip()
}

/// Q(ρ) = −ε·e^ρ·exp(−((ρ − center)/width)²), a bump localized in ρ. The
/// metric stays positive for ε < width²/2. Returns (Q′, Q″).
pub fn localized_bump(grid: &Grid, center: f64, width: f64, amplitude: f64) -> (Vec<f64>, Vec<f64>) {
    grid.points()
        .iter()
        .map(|&r| {
            let s = (r - center) / width;
            let g = -amplitude * r.exp() * (-s * s).exp();
            let u = 1.0 - 2.0 * s / width;
            (g * u, g * (u * u - 2.0 / (width * width)))
        })
        .unzip()
}

fn synthetic(states: Vec<RadialKahlerState>, status: EndStatus) -> FlowTrajectory {
    let controls = FlowControls::default();
    let diagnostics = states.iter().map(|s| StepDiagnostics::of(s, controls.speed)).collect();
    let dt_history = states.windows(2).map(|w| w[1].time() - w[0].time()).collect();
    FlowTrajectory { controls, states, diagnostics, dt_history, status }
}

/// Cigars scaled by 2(T − t) at t_k = T(1 − 2^{−k}), k = 0..=levels, so the
/// curvature at the tip is exactly 1/(T − t). Not a solution of the flow.
pub fn shrinking_fixture(grid: Grid, t_sing: f64, levels: usize) -> Result<FlowTrajectory> {
    if !(t_sing > 0.0) {
        return Err(Error::InvalidArgument(format!("singular time {t_sing} must be positive")));
    }
    let base = RadialKahlerState::cigar(grid)?;
    let mut states = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let t = t_sing * (1.0 - 0.5f64.powi(k as i32));
        let s = base.scaled(2.0 * (t_sing - t))?;
        states.push(s.with_time(t));
    }
    let last = states.last().expect("at least one level");
    let status = EndStatus::BlowupDetected { time: last.time(), sup_rm: last.rm_norm().max() };
    Ok(synthetic(states, status))
}

/// Flat ℂ¹ with a fixed bump at ρ = 2 and a second bump at ρ = −2 whose width
/// shrinks by √2 per level, so curvature concentrates at ρ = −2 only.
pub fn two_bump_fixture(grid: Grid, levels: usize) -> Result<FlowTrajectory> {
    let fixed = localized_bump(&grid, 2.0, 1.0, 0.1);
    let mut states = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let w = 0.5f64.powf(k as f64 / 2.0);
        let focus = localized_bump(&grid, -2.0, w, 0.2 * w * w);
        let q1: Vec<f64> = fixed.0.iter().zip(&focus.0).map(|(a, b)| a + b).collect();
        let q2: Vec<f64> = fixed.1.iter().zip(&focus.1).map(|(a, b)| a + b).collect();
        let t = 1.0 - 0.5f64.powi(k as i32);
        let s = RadialKahlerState::from_deviation_derivatives(
            1,
            grid,
            Reference::FLAT,
            FarField::Euclidean,
            &q1,
            &q2,
        )?;
        states.push(s.with_time(t));
    }
    let last = states.last().expect("at least one level");
    let status = EndStatus::BlowupDetected { time: last.time(), sup_rm: last.rm_norm().max() };
    Ok(synthetic(states, status))
}
