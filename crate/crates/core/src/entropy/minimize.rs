use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_tau, dirichlet_form, gaussian_factor, support_cutoff, w_density, xlogx_sq, Normalization, TestDensity};
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::RadialKahlerState;
use crate::numerics::Banded;

/// The support radius may not drop below this many √τ.
pub const MIN_SUPPORT_FACTOR: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerControls {
    pub max_iterations: usize,
    /// Stop when the constrained gradient, measured in the preconditioner's
    /// dual norm, drops below this.
    pub gradient_tol: f64,
    /// Support radius in units of √τ, capped by the grid.
    pub support_factor: f64,
    /// Gaussian seeds with variance 2τ·scale. The result with the lowest W
    /// wins, ties broken by gradient norm.
    pub seed_scales: Vec<f64>,
}

impl Default for MinimizerControls {
    fn default() -> Self {
        Self { max_iterations: 5000, gradient_tol: 1e-6, support_factor: 10.0, seed_scales: vec![1.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuResult {
    pub mu: f64,
    pub density: TestDensity,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// W of the first seed.
    pub w_seed: f64,
    /// W after each accepted step of the winning seed.
    pub history: Vec<f64>,
    /// W evaluations over all seeds, trial points included.
    pub evaluations: usize,
    /// Smallest W seen at any evaluated point. Equals `mu`.
    pub min_evaluated: f64,
    pub seed: usize,
}

/// W(u) restricted to the support and its gradient in the nodal values.
struct Problem<'a> {
    state: &'a RadialKahlerState,
    tau: f64,
    free: usize,
    c: f64,
    omega: Vec<f64>,
    r: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    /// `Σ_k kappa_k (rows_k·u)² = ∫|∇u|²dV`.
    kappa: Vec<f64>,
    dirichlet: Vec<(usize, usize, f64)>,
    band: usize,
}

impl<'a> Problem<'a> {
    fn new(state: &'a RadialKahlerState, tau: f64, free: usize) -> Self {
        let (rows, kappa) = dirichlet_form(state, free);
        let omega = state.volume_weights();
        let c = gaussian_factor(state.n(), tau);
        // 2L with L = 4τc·DᵀKD the Dirichlet term
        let mut acc = std::collections::BTreeMap::<(usize, usize), f64>::new();
        let mut band = 0;
        for (i, row) in rows.iter().enumerate() {
            let k = 8.0 * tau * c * kappa[i];
            for &(a, wa) in row {
                for &(b, wb) in row {
                    *acc.entry((a, b)).or_insert(0.0) += k * wa * wb;
                    band = band.max(a.abs_diff(b));
                }
            }
        }
        let dirichlet = acc.into_iter().map(|((a, b), v)| (a, b, v)).collect();
        Self {
            state,
            tau,
            free,
            c,
            omega,
            r: state.scalar_curvature().values,
            rows,
            kappa,
            dirichlet,
            band,
        }
    }

    fn derivative(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, w)| w * u[j]).sum()).collect()
    }

    fn mass(&self, u: &[f64]) -> f64 {
        self.c * (0..self.free).map(|j| self.omega[j] * u[j] * u[j]).sum::<f64>()
    }

    fn normalize(&self, u: &mut [f64]) {
        let k = self.mass(u).sqrt().recip();
        u.iter_mut().for_each(|v| *v *= k);
    }

    fn value(&self, u: &[f64]) -> f64 {
        let m = 2.0 * self.state.n() as f64;
        let du = self.derivative(u);
        let mut s: f64 = du.iter().zip(&self.kappa).map(|(d, k)| 4.0 * self.tau * k * d * d).sum();
        for i in 0..self.free {
            s += self.omega[i] * (self.tau * self.r[i] * u[i] * u[i] - xlogx_sq(u[i]) - m * u[i] * u[i]);
        }
        self.c * s
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let m = 2.0 * self.state.n() as f64;
        let du = self.derivative(u);
        let mut g: Vec<f64> = (0..self.free)
            .map(|j| {
                let uj = u[j];
                let log = if uj != 0.0 { (uj * uj).ln() } else { 0.0 };
                self.c * self.omega[j] * (2.0 * self.tau * self.r[j] * uj - 2.0 * uj * log - 2.0 * uj - 2.0 * m * uj)
            })
            .collect();
        for (i, row) in self.rows.iter().enumerate() {
            let k = 8.0 * self.tau * self.c * self.kappa[i] * du[i];
            for &(j, w) in row {
                g[j] += k * w;
            }
        }
        g
    }

    /// 2L plus a positive diagonal that follows the entropy term's curvature.
    fn preconditioner(&self, u: &[f64]) -> Result<Banded> {
        let mut mat = Banded::zeros(self.free, self.band, self.band);
        for &(a, b, v) in &self.dirichlet {
            mat.add(a, b, v);
        }
        for j in 0..self.free {
            let q = u[j] * u[j];
            let ent = if q > 0.0 { (-2.0 * q.ln() - 6.0).clamp(0.0, 1e3) } else { 1e3 };
            let d = 2.0 * self.tau * self.r[j].abs() + ent + 2.0;
            mat.add(j, j, self.c * self.omega[j] * d);
        }
        mat.factor()?;
        Ok(mat)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Descent {
    u: Vec<f64>,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    evaluations: usize,
    min_evaluated: f64,
    seed_value: f64,
}

fn descend(p: &Problem, mut u: Vec<f64>, controls: &MinimizerControls) -> Result<Descent> {
    p.normalize(&mut u);
    let mut value = p.value(&u);
    let seed_value = value;
    let mut out = Descent {
        u: vec![],
        value,
        gradient_norm: f64::INFINITY,
        iterations: 0,
        converged: false,
        history: vec![value],
        evaluations: 1,
        min_evaluated: value,
        seed_value,
    };
    for it in 0..controls.max_iterations {
        let g = p.gradient(&u);
        let mat = p.preconditioner(&u)?;
        let grad_mass: Vec<f64> = (0..p.free).map(|j| 2.0 * p.c * p.omega[j] * u[j]).collect();
        let a = mat.solve(&g);
        let b = mat.solve(&grad_mass);
        let na = dot(&grad_mass, &a);
        let nb = dot(&grad_mass, &b);
        let alpha = na / nb;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - alpha * y).collect();
        let gn2 = (dot(&g, &a) - na * na / nb).max(0.0);
        out.gradient_norm = gn2.sqrt();
        out.iterations = it;
        if out.gradient_norm < controls.gradient_tol {
            out.converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial: Vec<f64> = u.iter().zip(&d).map(|(x, y)| x - step * y).collect();
            p.normalize(&mut trial);
            let v = p.value(&trial);
            out.evaluations += 1;
            out.min_evaluated = out.min_evaluated.min(v);
            if v <= value - 1e-4 * step * gn2 {
                u = trial;
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no further decrease at line-search resolution
            out.iterations = it + 1;
            break;
        }
        out.history.push(value);
        out.iterations = it + 1;
    }
    out.value = value;
    out.u = u;
    out.min_evaluated = out.min_evaluated.min(value);
    Ok(out)
}

/// μ(g, τ) = inf W(g, u, τ) over normalized densities supported within
/// `support_factor·√τ` of the origin.
pub fn mu_minimize(state: &RadialKahlerState, tau: f64, controls: &MinimizerControls) -> Result<MuResult> {
    check_tau(tau)?;
    if controls.seed_scales.is_empty() || controls.seed_scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("seed scales must be positive and non-empty".into()));
    }
    let m = state.len();
    let d = state.radial_distance();
    let radius = (controls.support_factor * tau.sqrt()).min(d[m - 3]);
    if radius < MIN_SUPPORT_FACTOR * tau.sqrt() {
        return Err(Error::InvalidArgument(format!(
            "grid reaches distance {:.3}, below {MIN_SUPPORT_FACTOR}·√τ = {:.3}",
            d[m - 3],
            MIN_SUPPORT_FACTOR * tau.sqrt()
        )));
    }
    let free = support_cutoff(state, radius);
    let problem = Problem::new(state, tau, free);
    let mut best: Option<(usize, Descent)> = None;
    let mut evaluations = 0;
    let mut min_evaluated = f64::INFINITY;
    let mut w_seed = f64::NAN;
    for (k, scale) in controls.seed_scales.iter().enumerate() {
        let seed: Vec<f64> = d[..free].iter().map(|x| (-x * x / (8.0 * tau * scale)).exp()).collect();
        let run = descend(&problem, seed, controls)?;
        if k == 0 {
            w_seed = run.seed_value;
        }
        evaluations += run.evaluations;
        min_evaluated = min_evaluated.min(run.min_evaluated);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                run.value < b.value || (run.value == b.value && run.gradient_norm < b.gradient_norm)
            }
        };
        if better {
            best = Some((k, run));
        }
    }
    let (seed, run) = best.expect("at least one seed");
    let mut u = run.u.clone();
    u.resize(m, 0.0);
    let density = TestDensity::new(state, tau, u, free)?;
    let mu = w_density(state, &density, Normalization::Riemannian)?;
    Ok(MuResult {
        mu,
        density,
        iterations: run.iterations,
        gradient_norm: run.gradient_norm,
        converged: run.converged,
        w_seed,
        history: run.history,
        evaluations,
        min_evaluated: min_evaluated.min(mu),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// τ constant in time.
    Fixed,
    /// τ(t) = τ₀ − t.
    Shifted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuSeries {
    pub mode: TauMode,
    pub tau0: f64,
    /// Effective times of the sampled states.
    pub times: Vec<f64>,
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
    /// Smallest (μ_{k+1} − μ_k)/(t_{k+1} − t_k).
    pub worst_rate: f64,
    pub tolerance_rate: f64,
    pub non_decreasing: bool,
}

/// μ along a trajectory at up to `samples` evenly spaced stored states.
pub fn mu_series(
    traj: &FlowTrajectory,
    tau0: f64,
    mode: TauMode,
    samples: usize,
    tolerance_rate: f64,
    controls: &MinimizerControls,
) -> Result<MuSeries> {
    check_tau(tau0)?;
    let te = traj.effective_times();
    let len = traj.len();
    if mode == TauMode::Shifted && !(tau0 > te[len - 1]) {
        return Err(Error::InvalidArgument(format!(
            "τ₀ = {tau0} must exceed the final time {}",
            te[len - 1]
        )));
    }
    let samples = samples.clamp(2, len.max(2));
    let mut idx: Vec<usize> = if samples >= len {
        (0..len).collect()
    } else {
        (0..samples).map(|k| ((k * (len - 1)) as f64 / (samples - 1) as f64).round() as usize).collect()
    };
    idx.dedup();
    let tau_at = |t: f64| match mode {
        TauMode::Fixed => tau0,
        TauMode::Shifted => tau0 - t,
    };
    let results: Vec<MuResult> = idx
        .par_iter()
        .map(|&k| mu_minimize(&traj.states[k], tau_at(te[k]), controls))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = idx.iter().map(|&k| te[k]).collect();
    let values: Vec<f64> = results.iter().map(|r| r.mu).collect();
    let worst_rate = (1..values.len())
        .map(|k| (values[k] - values[k - 1]) / (times[k] - times[k - 1]))
        .fold(f64::INFINITY, f64::min);
    Ok(MuSeries {
        mode,
        tau0,
        taus: times.iter().map(|&t| tau_at(t)).collect(),
        converged: results.iter().map(|r| r.converged).collect(),
        non_decreasing: worst_rate >= -tolerance_rate,
        worst_rate,
        tolerance_rate,
        times,
        values,
    })
}
