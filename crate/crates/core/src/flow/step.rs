use crate::error::{Error, Result};
use crate::geometry::state::{GhostWeights, FAR_STENCIL, GHOSTS};
use crate::geometry::RadialKahlerState;
use crate::numerics::Banded;

const C1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const C2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
const BAND: usize = FAR_STENCIL;

/// γ of the two-stage Rosenbrock method.
const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// ∂ₜ log λ_r = −2c·f″/P″ at every node.
pub fn log_radial_velocity(state: &RadialKahlerState, speed: f64) -> Vec<f64> {
    let (_, f2) = state.ricci_potential_derivatives();
    f2.iter().zip(state.p2()).map(|(f, p)| -2.0 * speed * f / p).collect()
}

/// Local part of ∂F_i/∂w_j for F = [`log_radial_velocity`], with ghost
/// extrapolation folded in. The nonlocal dependence of λ_t on w is dropped.
fn velocity_jacobian(state: &RadialKahlerState, speed: f64) -> Vec<Vec<(usize, f64)>> {
    let m = state.len();
    let h = state.grid().h;
    let n = state.n() as f64;
    let ghosts = GhostWeights::new(h);
    let (p1, p2) = (state.p1(), state.p2());
    let vel = log_radial_velocity(state, speed);
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let s = 2.0 * speed / p2[i];
        let a1 = s * (n - 1.0) * (p2[i] / p1[i]) / h;
        let a2 = s / (h * h);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(12);
        row.push((i, -vel[i]));
        for k in 0..5 {
            let w = a1 * C1[k] + a2 * C2[k];
            if w == 0.0 {
                continue;
            }
            let e = i + k;
            if e < GHOSTS {
                let g = GHOSTS - 1 - e;
                for (j, c) in ghosts.near[g].iter().enumerate() {
                    row.push((j, w * c));
                }
            } else if e >= GHOSTS + m {
                let g = e - GHOSTS - m;
                for (j, c) in ghosts.far[g].iter().enumerate() {
                    row.push((m - FAR_STENCIL + j, w * c));
                }
            } else {
                row.push((e - GHOSTS, w));
            }
        }
        rows.push(row);
    }
    rows
}

/// `I − γ·dt·J`, banded.
struct Linearization {
    matrix: Banded,
}

impl Linearization {
    fn new(state: &RadialKahlerState, dt: f64, speed: f64) -> Result<Self> {
        let m = state.len();
        let rows = velocity_jacobian(state, speed);
        let s = GAMMA * dt;
        let mut matrix = Banded::zeros(m, BAND, BAND);
        for (i, row) in rows.iter().enumerate() {
            matrix.add(i, i, 1.0);
            for &(j, w) in row {
                matrix.add(i, j, -s * w);
            }
        }
        matrix.factor()?;
        Ok(Self { matrix })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.matrix.solve(b)
    }
}

fn rejected(time: f64, e: Error) -> Error {
    match e {
        Error::MetricDegenerate { .. } | Error::NonFinite { .. } => {
            Error::StepRejected { time, reason: e.to_string() }
        }
        other => other,
    }
}

/// Adds an increment of log λ_r, moving its origin value into the log-scale.
fn advance(state: &RadialKahlerState, du: &[f64], time: f64) -> Result<RadialKahlerState> {
    let d0 = du[0];
    let w = state.deviation().iter().zip(du).map(|(w, d)| w + (d - d0)).collect();
    state.with_deviation(state.log_scale() + d0, w, time).map_err(|e| rejected(state.time(), e))
}

/// One step of the flow ∂ₜg = −c·Rc by the two-stage linearly implicit
/// Rosenbrock method of order two, applied to log λ_r.
pub fn krf_step(state: &RadialKahlerState, dt: f64, speed: f64) -> Result<RadialKahlerState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step size {dt} is not positive")));
    }
    let t = state.time();
    let lin = Linearization::new(state, dt, speed).map_err(|e| rejected(t, e))?;
    let k1 = lin.solve(&log_radial_velocity(state, speed));
    let du1: Vec<f64> = k1.iter().map(|k| dt * k).collect();
    let s1 = advance(state, &du1, t + dt)?;
    let f1 = log_radial_velocity(&s1, speed);
    let rhs: Vec<f64> = f1.iter().zip(&k1).map(|(a, b)| a - 2.0 * b).collect();
    let k2 = lin.solve(&rhs);
    let du: Vec<f64> = (0..k1.len()).map(|i| dt * (1.5 * k1[i] + 0.5 * k2[i])).collect();
    advance(state, &du, t + dt)
}
