use std::path::{Path, PathBuf};

use krf_core::geometry::{FarField, Grid, RadialKahlerState};
use krf_core::presets::Preset;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Default node count when the config has no `[grid]` table.
pub const DEFAULT_NODES: usize = 257;
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    #[serde(alias = "flat")]
    FlatC1,
    FlatC2,
    Cigar,
    PerturbedCigar,
    Cusp,
    PositiveBump,
    U2Positive,
    /// Synthetic shrinking cigars with |Rm| = 1/(T − t); T is `t_end`.
    Shrinking,
}

impl PresetName {
    pub fn preset(self) -> Preset {
        match self {
            PresetName::FlatC1 => Preset::FlatC1,
            PresetName::FlatC2 => Preset::FlatC2,
            PresetName::Cigar | PresetName::Shrinking => Preset::Cigar,
            PresetName::PerturbedCigar => Preset::PerturbedCigar,
            PresetName::Cusp => Preset::Cusp,
            PresetName::PositiveBump => Preset::PositiveBump,
            PresetName::U2Positive => Preset::U2Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub nodes: usize,
}

/// Explicit potential samples P(ρ) on a uniform ρ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTable {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub far_field: FarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Monitors {
    pub entropy: bool,
    pub blowup: bool,
    /// Bisectional extremes and the Phong-Sturm eigenvalue sum per stored state.
    pub holomorphic: bool,
    /// Seeded first-variation spot check at t = 0.
    pub variation: bool,
    pub sobolev: bool,
    /// Evolution-identity residuals; needs dt ≲ h².
    pub identities: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Self { entropy: true, blowup: true, holomorphic: true, variation: true, sobolev: true, identities: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// sup|Rc| below this counts as Ricci flat outright.
    pub ricci_flat: f64,
    /// Bounded runs must end with sup|Rc| below this fraction of its initial value.
    pub ricci_decay: f64,
    /// Relative first-variation residual.
    pub variation: f64,
    /// Relative change below which a quantity counts as stationary.
    pub stationary: f64,
    /// Window constant C for blow-up selection.
    pub window_constant: f64,
    /// Minimal scale ratio γ between blow-up entries.
    pub scale_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ricci_flat: 1e-8,
            ricci_decay: 0.1,
            variation: 1e-4,
            stationary: 1e-3,
            window_constant: 2.0,
            scale_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub preset: Option<PresetName>,
    pub potential: Option<PotentialTable>,
    /// Complex dimension; must agree with the preset when both are given.
    pub n: Option<usize>,
    pub grid: Option<GridConfig>,
    pub t_end: f64,
    /// c in ∂ₜg = −c·Rc.
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub monitors: Monitors,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_speed() -> f64 {
    1.0
}

fn default_taus() -> Vec<f64> {
    vec![1.0]
}

fn invalid(key: &str, message: impl std::fmt::Display) -> HarnessError {
    HarnessError::ConfigInvalid(format!("key `{key}`: {message}"))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::ConfigInvalid(m) => HarnessError::ConfigInvalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// A preset scenario with every default.
    pub fn preset(name: &str, preset: PresetName, t_end: f64) -> Self {
        Self {
            name: name.to_string(),
            preset: Some(preset),
            potential: None,
            n: None,
            grid: None,
            t_end,
            speed: default_speed(),
            taus: default_taus(),
            dt_max: None,
            monitors: Monitors::default(),
            tolerances: Tolerances::default(),
            output_dir: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match (&self.preset, &self.potential) {
            (None, None) => return Err(invalid("preset", "either `preset` or `[potential]` is required")),
            (Some(_), Some(_)) => return Err(invalid("potential", "`preset` and `[potential]` are exclusive")),
            _ => {}
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name", "must be a non-empty file name"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.speed != 1.0 && self.speed != 2.0 {
            return Err(invalid("speed", format!("must be 1 or 2, got {}", self.speed)));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(invalid("taus", format!("every τ must be positive, got {t}")));
        }
        if let Some(dt) = self.dt_max {
            if !(dt > 0.0) {
                return Err(invalid("dt_max", format!("must be positive, got {dt}")));
            }
        }
        if let Some(g) = &self.grid {
            if g.nodes < MIN_NODES {
                return Err(invalid("grid.nodes", format!("resolution {} is below {MIN_NODES}", g.nodes)));
            }
            if !(g.rho_max > g.rho_min) {
                return Err(invalid("grid.rho_max", "must exceed rho_min"));
            }
        }
        if let Some(p) = &self.potential {
            if self.n.is_none() {
                return Err(invalid("n", "required with `[potential]`"));
            }
            if p.rho.len() != p.values.len() {
                return Err(invalid("potential.values", "length differs from `rho`"));
            }
            if p.rho.len() < MIN_NODES {
                return Err(invalid("potential.rho", format!("resolution {} is below {MIN_NODES}", p.rho.len())));
            }
            if self.grid.is_some() {
                return Err(invalid("grid", "the potential table fixes the grid"));
            }
        }
        if let (Some(p), Some(n)) = (self.preset, self.n) {
            if p.preset().dimension() != n {
                return Err(invalid("n", format!("preset {:?} has dimension {}", p, p.preset().dimension())));
            }
        }
        if self.n == Some(0) {
            return Err(invalid("n", "must be at least 1"));
        }
        let t = &self.tolerances;
        if !(t.window_constant > 1.0) || !(t.scale_ratio > 1.0) {
            return Err(invalid("tolerances", "window_constant and scale_ratio must exceed 1"));
        }
        Ok(())
    }

    /// Replaces the node count, keeping the grid bounds.
    pub fn with_resolution(mut self, nodes: usize) -> Result<Self, HarnessError> {
        if self.potential.is_some() {
            return Err(invalid("grid", "resolution cannot be overridden for a potential table"));
        }
        let p = self.preset.expect("validated").preset();
        let g = match self.grid.take() {
            Some(g) => GridConfig { nodes, ..g },
            None => {
                let d = p.default_grid(MIN_NODES)?;
                GridConfig { rho_min: d.rho_min, rho_max: d.rho_max(), nodes }
            }
        };
        self.grid = Some(g);
        self.validate()?;
        Ok(self)
    }

    pub fn grid(&self) -> Result<Grid, HarnessError> {
        let p = self.preset.expect("grid() is for preset scenarios").preset();
        Ok(match &self.grid {
            Some(g) => Grid::new(g.rho_min, g.rho_max, g.nodes)?,
            None => p.default_grid(DEFAULT_NODES)?,
        })
    }

    pub fn initial_state(&self) -> Result<RadialKahlerState, HarnessError> {
        if let Some(p) = &self.potential {
            return Ok(RadialKahlerState::from_potential(self.n.expect("validated"), &p.rho, &p.values, p.far_field)?);
        }
        Ok(self.preset.expect("validated").preset().build(self.grid()?)?)
    }
}
