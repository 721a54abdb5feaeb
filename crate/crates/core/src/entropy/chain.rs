use serde::{Deserialize, Serialize};

use super::surface::{Parity, WarpedSurfaceState};
use crate::error::{Error, Result};
use crate::numerics::{invert_monotone, three_point_slope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainControls {
    /// dt = theta·h²·min A.
    pub theta: f64,
}

impl Default for ChainControls {
    fn default() -> Self {
        Self { theta: 0.1 }
    }
}

/// Residuals of the four flows linked by the gradient diffeomorphisms and
/// the time rescaling, each the sup over interior nodes at interior times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub tau: f64,
    pub h: f64,
    pub dt_max: f64,
    /// Largest step in the rescaled parameter s.
    pub ds_max: f64,
    /// max(sup|K| at t = 0, 1/τ).
    pub scale: f64,
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    /// Times at which the residuals below are evaluated.
    pub residual_times: Vec<f64>,
    /// ∂ₜg = −2(Rc + ∇²f) + g/τ.
    pub modified_metric: Vec<f64>,
    /// ∂ₜf = −Δf − R + 1/τ.
    pub modified_potential: Vec<f64>,
    /// ∂ₜḡ = −2Rc + ḡ/τ.
    pub pulled_back_metric: Vec<f64>,
    /// ∂ₛǧ = −2Rc(ǧ).
    pub rescaled_metric: Vec<f64>,
    /// ∂ₛf̌ = −Δf̌ + |∇f̌|² − R + 1/(τ − s).
    pub rescaled_potential: Vec<f64>,
    pub w_pulled_back: Vec<f64>,
    pub w_modified: Vec<f64>,
    /// |W(ḡ, f̄) − W(g, f)| at every stored time.
    pub w_defect: Vec<f64>,
}

impl ChainReport {
    pub fn max_metric_residual(&self) -> f64 {
        [&self.modified_metric, &self.pulled_back_metric, &self.rescaled_metric]
            .iter()
            .flat_map(|v| v.iter())
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn max_potential_residual(&self) -> f64 {
        self.modified_potential.iter().chain(&self.rescaled_potential).copied().fold(0.0, f64::max)
    }

    pub fn max_w_defect(&self) -> f64 {
        self.w_defect.iter().copied().fold(0.0, f64::max)
    }
}

fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

/// `(∂ₜA, ∂ₜw)` of the pulled-back flow.
fn bar_rhs(s: &WarpedSurfaceState, tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = s.gauss_curvature();
    let da = s.a2().iter().zip(&k).map(|(a, k)| -2.0 * k * a + a / tau).collect();
    let dw = s.warp().iter().zip(&k).map(|(w, k)| -k * w + w / (2.0 * tau)).collect();
    Ok((da, dw))
}

fn rk4(s: &WarpedSurfaceState, dt: f64, tau: f64) -> Result<WarpedSurfaceState> {
    let (a, w) = (s.a2(), s.warp());
    let t = s.time();
    let (ka1, kw1) = bar_rhs(s, tau)?;
    let s2 = s.with_metric(axpy(a, 0.5 * dt, &ka1), axpy(w, 0.5 * dt, &kw1), t + 0.5 * dt)?;
    let (ka2, kw2) = bar_rhs(&s2, tau)?;
    let s3 = s.with_metric(axpy(a, 0.5 * dt, &ka2), axpy(w, 0.5 * dt, &kw2), t + 0.5 * dt)?;
    let (ka3, kw3) = bar_rhs(&s3, tau)?;
    let s4 = s.with_metric(axpy(a, dt, &ka3), axpy(w, dt, &kw3), t + dt)?;
    let (ka4, kw4) = bar_rhs(&s4, tau)?;
    let comb = |q: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..q.len()).map(|i| q[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
    };
    s.with_metric(comb(a, &ka1, &ka2, &ka3, &ka4), comb(w, &kw1, &kw2, &kw3, &kw4), t + dt)
}

/// ∂_σ f̄ in reversed time σ = T − t: Δf̄ − |∇f̄|² + R − 1/τ.
fn backward_rhs(s: &WarpedSurfaceState, f: &[f64], tau: f64) -> Vec<f64> {
    let lap = s.laplacian(f);
    let g = s.grad_sq(f);
    let k = s.gauss_curvature();
    (0..f.len()).map(|i| lap[i] - g[i] + 2.0 * k[i] - 1.0 / tau).collect()
}

/// Velocity of the displacement δ = X − x: (1 + δ_x)·f̄_x/Ā.
fn displacement_rhs(s: &WarpedSurfaceState, f: &[f64], delta: &[f64]) -> Vec<f64> {
    let (f1, _) = s.derivatives(f, Parity::Even);
    let (d1, _) = s.derivatives(delta, Parity::Odd);
    (0..f.len()).map(|i| (1.0 + d1[i]) * f1[i] / s.a2()[i]).collect()
}

/// Pushes (ḡ, f̄) forward by X: g at y = X(x) is Ā/X_x², w̄, f̄.
fn push_forward(
    bar: &WarpedSurfaceState,
    f: &[f64],
    delta: &[f64],
) -> Result<(WarpedSurfaceState, Vec<f64>)> {
    let m = bar.len();
    let (d1, _) = bar.derivatives(delta, Parity::Odd);
    if let Some(node) = d1.iter().position(|d| !(1.0 + d > 0.0)) {
        return Err(Error::PullbackFailure { node });
    }
    let h = bar.h();
    let (x0, _) = bar.bounds();
    // extended samples of x, X and X_x so targets near a pole stay in range
    let ex = bar.extend(delta, Parity::Odd);
    let ed1 = bar.extend(&d1, Parity::Even);
    let g = (ex.len() - m) / 2;
    let xs: Vec<f64> = (0..ex.len()).map(|k| x0 + (k as f64 - g as f64 + 0.5) * h).collect();
    let big_x: Vec<f64> = xs.iter().zip(&ex).map(|(x, d)| x + d).collect();
    let slope: Vec<f64> = ed1.iter().map(|d| 1.0 + d).collect();
    let targets = bar.nodes();
    let mut pre = Vec::with_capacity(m);
    let mut jac = Vec::with_capacity(m);
    for (j, &y) in targets.iter().enumerate() {
        let x = invert_monotone(&xs, &big_x, &slope, y).ok_or(Error::PullbackFailure { node: j })?;
        pre.push(x);
        jac.push(1.0 / (1.0 + bar.interpolate(&d1, Parity::Even, x)));
    }
    let (y0, y1) = bar.bounds();
    let g_state = bar.resample(y0, y1, &pre, &jac)?;
    Ok((g_state, bar.resample_field(f, &pre)))
}

/// Runs the chain on `[0, t_end]`. The potential is fixed at the final time
/// and integrated backward, since its forward equation is backward-parabolic.
pub fn modified_flow_chain(
    initial: &WarpedSurfaceState,
    f_end: &[f64],
    tau: f64,
    t_end: f64,
    controls: ChainControls,
) -> Result<ChainReport> {
    super::check_tau(tau)?;
    if !t_end.is_finite() {
        return Err(Error::ChainDomainExceeded { s: tau, tau });
    }
    if !(t_end > 0.0) || !(controls.theta > 0.0) {
        return Err(Error::InvalidArgument("t_end and theta must be positive".into()));
    }
    let m = initial.len();
    if f_end.len() != m {
        return Err(Error::GridMismatch { expected: m, got: f_end.len() });
    }
    let h = initial.h();

    let mut bars = vec![initial.with_time(0.0)];
    let mut dt_max: f64 = 0.0;
    loop {
        let cur = bars.last().expect("non-empty");
        let t = cur.time();
        if t >= t_end * (1.0 - 1e-14) {
            break;
        }
        let a_min = cur.a2().iter().copied().fold(f64::INFINITY, f64::min);
        let dt = (controls.theta * h * h * a_min).min(t_end - t);
        dt_max = dt_max.max(dt);
        let next = rk4(cur, dt, tau)?;
        bars.push(next);
    }
    let times: Vec<f64> = bars.iter().map(|s| s.time()).collect();
    let steps = bars.len();

    // f̄ backward by Heun
    let mut fbar = vec![Vec::new(); steps];
    fbar[steps - 1] = f_end.to_vec();
    for k in (0..steps - 1).rev() {
        let dt = times[k + 1] - times[k];
        let l1 = backward_rhs(&bars[k + 1], &fbar[k + 1], tau);
        let pred = axpy(&fbar[k + 1], dt, &l1);
        let l2 = backward_rhs(&bars[k], &pred, tau);
        fbar[k] = (0..m).map(|i| fbar[k + 1][i] + 0.5 * dt * (l1[i] + l2[i])).collect();
        if let Some(index) = fbar[k].iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
    }

    // displacement forward by Heun
    let mut delta = vec![vec![0.0; m]];
    for k in 0..steps - 1 {
        let dt = times[k + 1] - times[k];
        let v1 = displacement_rhs(&bars[k], &fbar[k], &delta[k]);
        let pred = axpy(&delta[k], dt, &v1);
        let v2 = displacement_rhs(&bars[k + 1], &fbar[k + 1], &pred);
        delta.push((0..m).map(|i| delta[k][i] + 0.5 * dt * (v1[i] + v2[i])).collect());
    }

    let mut gs = Vec::with_capacity(steps);
    let mut fs = Vec::with_capacity(steps);
    for k in 0..steps {
        let (g, f) = push_forward(&bars[k], &fbar[k], &delta[k])?;
        gs.push(g);
        fs.push(f);
    }

    let s: Vec<f64> = times.iter().map(|t| -tau * (-t / tau).exp_m1()).collect();
    let ds_max = s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let scale = initial.gauss_curvature().iter().fold(1.0 / tau, |a, k| a.max(k.abs()));

    let mut w_pulled_back = Vec::with_capacity(steps);
    let mut w_modified = Vec::with_capacity(steps);
    for k in 0..steps {
        w_pulled_back.push(bars[k].w_functional(&fbar[k], tau)?);
        w_modified.push(gs[k].w_functional(&fs[k], tau)?);
    }
    let w_defect = w_pulled_back.iter().zip(&w_modified).map(|(a, b)| (a - b).abs()).collect();

    let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, |a: f64, b| a.max(b.abs()));
    let interior = 2..m - 2;
    let mut report = ChainReport {
        tau,
        h,
        dt_max,
        ds_max,
        scale,
        times: times.clone(),
        s: s.clone(),
        residual_times: Vec::new(),
        modified_metric: Vec::new(),
        modified_potential: Vec::new(),
        pulled_back_metric: Vec::new(),
        rescaled_metric: Vec::new(),
        rescaled_potential: Vec::new(),
        w_pulled_back,
        w_modified,
        w_defect,
    };
    for k in 1..steps - 1 {
        let ct = three_point_slope(times[k] - times[k - 1], times[k + 1] - times[k]);
        let cs = three_point_slope(s[k] - s[k - 1], s[k + 1] - s[k]);
        let slope = |c: &[f64; 3], q: &dyn Fn(usize) -> f64| c[0] * q(k - 1) + c[1] * q(k) + c[2] * q(k + 1);
        report.residual_times.push(times[k]);

        let bar = &bars[k];
        let kb = bar.gauss_curvature();
        let bar_res = interior.clone().flat_map(|i| {
            let a = slope(&ct, &|j| bars[j].a2()[i]);
            let b = slope(&ct, &|j| bars[j].warp()[i].powi(2));
            let (ai, bi) = (bar.a2()[i], bar.warp()[i].powi(2));
            [(a + 2.0 * kb[i] * ai - ai / tau) / ai, (b + 2.0 * kb[i] * bi - bi / tau) / bi]
        });
        report.pulled_back_metric.push(sup(&mut bar_res.into_iter()));

        let c = 1.0 - s[k] / tau;
        let check_res = interior.clone().flat_map(|i| {
            let a = slope(&cs, &|j| (1.0 - s[j] / tau) * bars[j].a2()[i]);
            let b = slope(&cs, &|j| (1.0 - s[j] / tau) * bars[j].warp()[i].powi(2));
            let (ai, bi) = (c * bar.a2()[i], c * bar.warp()[i].powi(2));
            let kc = kb[i] / c;
            [(a + 2.0 * kc * ai) / ai, (b + 2.0 * kc * bi) / bi]
        });
        report.rescaled_metric.push(sup(&mut check_res.into_iter()));

        let lap = bar.laplacian(&fbar[k]);
        let grad = bar.grad_sq(&fbar[k]);
        let check_f = interior.clone().map(|i| {
            let df = slope(&cs, &|j| fbar[j][i]);
            df + (lap[i] - grad[i] + 2.0 * kb[i]) / c - 1.0 / (tau * c)
        });
        report.rescaled_potential.push(sup(&mut check_f.into_iter()));

        let g = &gs[k];
        let kg = g.gauss_curvature();
        let (hr, ht) = g.hessian(&fs[k]);
        let mod_res = interior.clone().flat_map(|i| {
            let a = slope(&ct, &|j| gs[j].a2()[i]);
            let b = slope(&ct, &|j| gs[j].warp()[i].powi(2));
            let (ai, bi) = (g.a2()[i], g.warp()[i].powi(2));
            [
                (a + 2.0 * (kg[i] + hr[i]) * ai - ai / tau) / ai,
                (b + 2.0 * (kg[i] + ht[i]) * bi - bi / tau) / bi,
            ]
        });
        report.modified_metric.push(sup(&mut mod_res.into_iter()));

        let lap = g.laplacian(&fs[k]);
        let mod_f = interior.clone().map(|i| {
            let df = slope(&ct, &|j| fs[j][i]);
            df + lap[i] + 2.0 * kg[i] - 1.0 / tau
        });
        report.modified_potential.push(sup(&mut mod_f.into_iter()));
    }
    Ok(report)
}
