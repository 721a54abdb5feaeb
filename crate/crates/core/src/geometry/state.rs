use serde::{Deserialize, Serialize};

use super::curvature::CurvaturePointData;
use super::{FarField, Grid, Reference, ScalarField};
use crate::error::{Error, Result};
use crate::numerics::{cumulative, cumulative_exp, fornberg, gregory_weights, Diff};

/// Number of ghost nodes on each side of the deviation samples.
pub(crate) const GHOSTS: usize = 2;
pub(crate) const FAR_STENCIL: usize = 6;

/// U(n)-invariant Kähler metric on ℂⁿ with radial eigenvalue
/// `λ_r = λ_r^ref · e^{s + w(ρ)}`, where `λ_r^ref` belongs to the analytic
/// [`Reference`], `s` is a scalar log-scale and `w` is sampled on the grid.
///
/// The tangential eigenvalue follows from `P′ = ∫P″ dρ` with the metric
/// smooth at the origin. Keeping the origin value in `s` lets `w` stay O(|z|²)
/// near the origin, which is what the curvature there needs to be accurate.
/// The metric is positive by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialKahlerState {
    n: usize,
    grid: Grid,
    reference: Reference,
    far: FarField,
    log_scale: f64,
    w: Vec<f64>,
    time: f64,
    #[serde(skip)]
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    diff: Diff,
    x: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    /// log(λ/A), A = a·e^s the origin scale.
    delta_t: Vec<f64>,
    delta_r: Vec<f64>,
    dt1: Vec<f64>,
    dt2: Vec<f64>,
    dr1: Vec<f64>,
    dr2: Vec<f64>,
}

/// Extrapolation weights for ghost values of a field that is smooth in |z|²
/// at the origin and in ρ at the far end.
#[derive(Debug, Clone)]
pub(crate) struct GhostWeights {
    /// Ghost at ρ_min − (g+1)h from nodes 0..4, as a cubic in e^ρ.
    pub near: [[f64; 4]; GHOSTS],
    /// Ghost at ρ_max + (g+1)h from the last six nodes, quintic in ρ.
    pub far: [[f64; FAR_STENCIL]; GHOSTS],
}

impl GhostWeights {
    pub fn new(h: f64) -> Self {
        let xs: Vec<f64> = (0..4).map(|k| (k as f64 * h).exp()).collect();
        let rs: Vec<f64> = (0..FAR_STENCIL).map(|k| k as f64).collect();
        let mut near = [[0.0; 4]; GHOSTS];
        let mut far = [[0.0; FAR_STENCIL]; GHOSTS];
        for g in 0..GHOSTS {
            let w = fornberg((-((g + 1) as f64) * h).exp(), &xs, 0);
            near[g].copy_from_slice(&w[0]);
            let w = fornberg((FAR_STENCIL - 1 + g + 1) as f64, &rs, 0);
            far[g].copy_from_slice(&w[0]);
        }
        Self { near, far }
    }

    /// `[ghost₁, ghost₀, q…, ghost₀, ghost₁]`
    pub fn extend(&self, q: &[f64]) -> Vec<f64> {
        let m = q.len();
        let mut e = vec![0.0; m + 2 * GHOSTS];
        e[GHOSTS..GHOSTS + m].copy_from_slice(q);
        for g in 0..GHOSTS {
            e[GHOSTS - 1 - g] = (0..4).map(|k| self.near[g][k] * q[k]).sum();
            e[GHOSTS + m + g] =
                (0..FAR_STENCIL).map(|k| self.far[g][k] * q[m - FAR_STENCIL + k]).sum();
        }
        e
    }
}

/// First and second ρ-derivatives via ghosts and centered five-point stencils.
pub(crate) fn ghost_derivatives(q: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let ext = GhostWeights::new(h).extend(q);
    let d = Diff::new(ext.len(), h).expect("extended grid is long enough");
    let d1 = d.d1(&ext);
    let d2 = d.d2(&ext);
    let m = q.len();
    (d1[GHOSTS..GHOSTS + m].to_vec(), d2[GHOSTS..GHOSTS + m].to_vec())
}

impl PartialEq for RadialKahlerState {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.grid == other.grid
            && self.reference == other.reference
            && self.far == other.far
            && self.log_scale == other.log_scale
            && self.w == other.w
            && self.time == other.time
    }
}

impl RadialKahlerState {
    pub fn new(
        n: usize,
        grid: Grid,
        reference: Reference,
        far: FarField,
        log_scale: f64,
        w: Vec<f64>,
        time: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("complex dimension must be positive".into()));
        }
        if grid.len < super::MIN_GRID {
            return Err(Error::GridTooCoarse { nodes: grid.len, min: super::MIN_GRID });
        }
        if w.len() != grid.len {
            return Err(Error::GridMismatch { expected: grid.len, got: w.len() });
        }
        if let Some(index) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !log_scale.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        reference.validate()?;
        let mut s = Self { n, grid, reference, far, log_scale, w, time, cache: None };
        s.cache = Some(s.build_cache()?);
        Ok(s)
    }

    /// The reference metric itself.
    pub fn from_reference(n: usize, grid: Grid, reference: Reference) -> Result<Self> {
        Self::new(n, grid, reference, reference.far_field(), 0.0, vec![0.0; grid.len], 0.0)
    }

    pub fn flat(n: usize, grid: Grid) -> Result<Self> {
        Self::from_reference(n, grid, Reference::FLAT)
    }

    pub fn cigar(grid: Grid) -> Result<Self> {
        Self::from_reference(1, grid, Reference::CIGAR)
    }

    /// Reference potential plus a deviation `Q` given through its ρ-derivatives
    /// `Q′` and `Q″` at the nodes.
    pub fn from_deviation_derivatives(
        n: usize,
        grid: Grid,
        reference: Reference,
        far: FarField,
        q1: &[f64],
        q2: &[f64],
    ) -> Result<Self> {
        if q1.len() != grid.len || q2.len() != grid.len {
            return Err(Error::GridMismatch { expected: grid.len, got: q1.len().min(q2.len()) });
        }
        let mut w = Vec::with_capacity(grid.len);
        for i in 0..grid.len {
            let rho = grid.rho(i);
            let (m1, m2) = (reference.d1(rho), reference.d2(rho));
            let (r1, r2) = (q1[i] / m1, q2[i] / m2);
            if !(r1 > -1.0) || !(r2 > -1.0) {
                return Err(Error::MetricDegenerate {
                    node: i,
                    rho,
                    tangential: (m1 + q1[i]) / rho.exp(),
                    radial: (m2 + q2[i]) / rho.exp(),
                });
            }
            w.push(r2.ln_1p());
        }
        Self::new(n, grid, reference, far, 0.0, w, 0.0)
    }

    /// Builds a state from raw potential samples, differentiated with
    /// fourth-order stencils. The tangential eigenvalue is rebuilt from the
    /// radial one, so it agrees with `P′/|z|²` up to discretization error.
    pub fn from_potential(n: usize, rho: &[f64], potential: &[f64], far: FarField) -> Result<Self> {
        let grid = Grid::from_samples(rho)?;
        if potential.len() != grid.len {
            return Err(Error::GridMismatch { expected: grid.len, got: potential.len() });
        }
        if let Some(index) = potential.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let d = Diff::new(grid.len, grid.h)?;
        let p1 = d.d1(potential);
        let p2 = d.d2(potential);
        let mut log_lr = Vec::with_capacity(grid.len);
        for i in 0..grid.len {
            let x = grid.rho(i).exp();
            if !(p1[i] > 0.0) || !(p2[i] > 0.0) {
                return Err(Error::MetricDegenerate {
                    node: i,
                    rho: grid.rho(i),
                    tangential: p1[i] / x,
                    radial: p2[i] / x,
                });
            }
            log_lr.push((p2[i] / x).ln());
        }
        // one-sided stencils at the axis end are amplified by e^{-ρ} in the
        // curvature; smoothness at the origin gives w = a + b·|z|² there
        if grid.len >= 4 {
            let (x2, x3) = (grid.rho(2).exp(), grid.rho(3).exp());
            let b = (log_lr[3] - log_lr[2]) / (x3 - x2);
            for i in 0..2 {
                log_lr[i] = log_lr[2] + b * (grid.rho(i).exp() - x2);
            }
        }
        let s = log_lr[0];
        let w = log_lr.iter().map(|v| v - s).collect();
        Self::new(n, grid, Reference::FLAT, far, s, w, 0.0)
    }

    fn build_cache(&self) -> Result<Cache> {
        let m = self.grid.len;
        let h = self.grid.h;
        let r = &self.reference;
        let a = r.origin_scale();
        let scale = a * self.log_scale.exp();
        let (w1, w2) = ghost_derivatives(&self.w, h);
        let x: Vec<f64> = (0..m).map(|i| self.grid.rho(i).exp()).collect();
        // J = ∫ M″·(e^w − 1) dρ from the origin
        let g: Vec<f64> = (0..m)
            .map(|i| {
                let rho = self.grid.rho(i);
                r.d2(rho) / rho.exp() * self.w[i].exp_m1()
            })
            .collect();
        let jint = cumulative_exp(&g, self.grid.rho_min, h);
        let mut c = Cache {
            diff: Diff::new(m, h)?,
            x,
            p1: vec![0.0; m],
            p2: vec![0.0; m],
            delta_t: vec![0.0; m],
            delta_r: vec![0.0; m],
            dt1: vec![0.0; m],
            dt2: vec![0.0; m],
            dr1: vec![0.0; m],
            dr2: vec![0.0; m],
        };
        for i in 0..m {
            let rho = self.grid.rho(i);
            let xi = c.x[i];
            let (e1, e2) = r.delta_r_derivatives(rho);
            let er = r.delta_r(rho) + self.w[i];
            // P′/(A x) − 1
            let ratio = r.delta_t(rho).exp_m1() + jint[i] / (a * xi);
            let quotient = er.exp() / (1.0 + ratio);
            c.delta_r[i] = er;
            c.delta_t[i] = ratio.ln_1p();
            c.dr1[i] = e1 + w1[i];
            c.dr2[i] = e2 + w2[i];
            c.dt1[i] = (er.exp_m1() - ratio) / (1.0 + ratio);
            c.dt2[i] = quotient * (c.dr1[i] - c.dt1[i]);
            c.p1[i] = scale * xi * (1.0 + ratio);
            c.p2[i] = scale * xi * er.exp();
            if !(c.p1[i] > 0.0) || !(c.p2[i] > 0.0) || !c.p1[i].is_finite() || !c.p2[i].is_finite() {
                return Err(Error::MetricDegenerate {
                    node: i,
                    rho,
                    tangential: c.p1[i] / xi,
                    radial: c.p2[i] / xi,
                });
            }
            if !c.dt2[i].is_finite() || !c.dr2[i].is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(c)
    }

    fn cache(&self) -> &Cache {
        self.cache.as_ref().expect("state cache is built at construction")
    }

    /// Restores the derived-quantity cache after deserialization.
    pub fn rebuild(mut self) -> Result<Self> {
        self.cache = Some(self.build_cache()?);
        Ok(self)
    }

    /// Same geometry class with a new log-scale, deviation and time.
    pub fn with_deviation(&self, log_scale: f64, w: Vec<f64>, time: f64) -> Result<Self> {
        Self::new(self.n, self.grid, self.reference, self.far, log_scale, w, time)
    }

    pub fn with_time(&self, time: f64) -> Self {
        let mut s = self.clone();
        s.time = time;
        s
    }

    /// The metric multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {k} must be positive")));
        }
        self.with_deviation(self.log_scale + k.ln(), self.w.clone(), self.time)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn far_field(&self) -> FarField {
        self.far
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `w = log(λ_r/λ_r^ref) − s`.
    pub fn deviation(&self) -> &[f64] {
        &self.w
    }

    /// Common value of both eigenvalues at the origin.
    pub fn origin_scale(&self) -> f64 {
        self.reference.origin_scale() * self.log_scale.exp()
    }

    pub fn diff(&self) -> &Diff {
        &self.cache().diff
    }

    /// e^ρ = |z|².
    pub fn x(&self) -> &[f64] {
        &self.cache().x
    }

    /// P′(ρ).
    pub fn p1(&self) -> &[f64] {
        &self.cache().p1
    }

    /// P″(ρ).
    pub fn p2(&self) -> &[f64] {
        &self.cache().p2
    }

    /// log(λ_t/A) with A the origin scale.
    pub fn delta_t(&self) -> &[f64] {
        &self.cache().delta_t
    }

    /// log(λ_r/A).
    pub fn delta_r(&self) -> &[f64] {
        &self.cache().delta_r
    }

    /// Potential normalized to vanish at the origin.
    pub fn potential(&self) -> Vec<f64> {
        let (p1, p2) = (self.p1(), self.p2());
        // P′ ≈ A x (1 + c x) below the grid
        let tail = 0.5 * (3.0 * p1[0] - p2[0]);
        cumulative(p1, self.grid.h).into_iter().map(|v| v + tail).collect()
    }

    pub fn lambda_t(&self) -> Vec<f64> {
        let a = self.origin_scale();
        self.delta_t().iter().map(|d| a * d.exp()).collect()
    }

    pub fn lambda_r(&self) -> Vec<f64> {
        let a = self.origin_scale();
        self.delta_r().iter().map(|d| a * d.exp()).collect()
    }

    /// (n−1)log P′ + log P″ − nρ.
    pub fn log_det(&self) -> Vec<f64> {
        let a = self.origin_scale().ln();
        let n = self.n as f64;
        (0..self.len())
            .map(|i| (n - 1.0) * self.delta_t()[i] + self.delta_r()[i] + n * a)
            .collect()
    }

    fn check(&self, field: &ScalarField) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), got: field.len() });
        }
        Ok(())
    }

    /// ρ-derivative of a radial function smooth in |z|² at the origin.
    pub fn d1(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.check(field)?;
        Ok(ghost_derivatives(&field.values, self.grid.h).0)
    }

    pub fn d2(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.check(field)?;
        Ok(ghost_derivatives(&field.values, self.grid.h).1)
    }

    fn derivatives(&self, field: &ScalarField) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(field)?;
        Ok(ghost_derivatives(&field.values, self.grid.h))
    }

    /// f = −(n−1)δ_t − δ_r, gauged to vanish at the first node. Then
    /// R_{ij̄} = ∂_i∂_j̄ f.
    pub fn ricci_potential(&self) -> ScalarField {
        let n = self.n as f64;
        let (dt, dr) = (self.delta_t(), self.delta_r());
        ScalarField {
            values: (0..self.len())
                .map(|i| -(n - 1.0) * (dt[i] - dt[0]) - (dr[i] - dr[0]))
                .collect(),
        }
    }

    /// (f′, f″) from the closed-form derivatives of the log-eigenvalues.
    pub fn ricci_potential_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let c = self.cache();
        let f1 = (0..self.len()).map(|i| -(n - 1.0) * c.dt1[i] - c.dr1[i]).collect();
        let f2 = (0..self.len()).map(|i| -(n - 1.0) * c.dt2[i] - c.dr2[i]).collect();
        (f1, f2)
    }

    /// `(δ_t′, δ_t″, δ_r′, δ_r″)`.
    pub fn log_eigenvalue_derivatives(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let c = self.cache();
        (&c.dt1, &c.dt2, &c.dr1, &c.dr2)
    }

    /// Δh = 4[(n−1)h′/P′ + h″/P″] with ρ-derivatives.
    pub fn laplacian(&self, field: &ScalarField) -> Result<ScalarField> {
        let (h1, h2) = self.derivatives(field)?;
        Ok(self.laplacian_from(&h1, &h2))
    }

    /// The Laplacian from given ρ-derivatives of a radial function.
    pub fn laplacian_from(&self, h1: &[f64], h2: &[f64]) -> ScalarField {
        let n = self.n as f64;
        let (p1, p2) = (self.p1(), self.p2());
        ScalarField {
            values: (0..self.len())
                .map(|i| 4.0 * ((n - 1.0) * h1[i] / p1[i] + h2[i] / p2[i]))
                .collect(),
        }
    }

    /// R = Δf.
    pub fn scalar_curvature(&self) -> ScalarField {
        let (f1, f2) = self.ricci_potential_derivatives();
        self.laplacian_from(&f1, &f2)
    }

    /// |∇h|² = 4h′²/P″.
    pub fn grad_norm_sq(&self, field: &ScalarField) -> Result<ScalarField> {
        let h1 = self.d1(field)?;
        Ok(self.grad_norm_sq_from(&h1))
    }

    pub fn grad_norm_sq_from(&self, h1: &[f64]) -> ScalarField {
        let p2 = self.p2();
        ScalarField { values: (0..self.len()).map(|i| 4.0 * h1[i] * h1[i] / p2[i]).collect() }
    }

    /// |∇f|² of the Ricci potential.
    pub fn ricci_potential_grad_sq(&self) -> ScalarField {
        let (f1, _) = self.ricci_potential_derivatives();
        self.grad_norm_sq_from(&f1)
    }

    /// Ricci eigenvalues `(μ_r, μ_t)`, normalized so that `μ_r + (n−1)μ_t = R`.
    pub fn ricci_eigenvalues(&self) -> (Vec<f64>, Vec<f64>) {
        let (f1, f2) = self.ricci_potential_derivatives();
        let (p1, p2) = (self.p1(), self.p2());
        let mr = (0..self.len()).map(|i| 4.0 * f2[i] / p2[i]).collect();
        let mt = (0..self.len()).map(|i| 4.0 * f1[i] / p1[i]).collect();
        (mr, mt)
    }

    /// |R_{ij̄}|² = μ_r² + (n−1)μ_t².
    pub fn ricci_norm_sq(&self) -> ScalarField {
        let (mr, mt) = self.ricci_eigenvalues();
        let n = self.n as f64;
        ScalarField {
            values: mr.iter().zip(&mt).map(|(r, t)| r * r + (n - 1.0) * t * t).collect(),
        }
    }

    /// Squared norm of the (2,0) Hessian, 16[h″ − h′(1 + δ_r′)]²/P″².
    pub fn hessian20_norm_sq(&self, field: &ScalarField) -> Result<ScalarField> {
        let (h1, h2) = self.derivatives(field)?;
        Ok(self.hessian20_norm_sq_from(&h1, &h2))
    }

    pub fn hessian20_norm_sq_from(&self, h1: &[f64], h2: &[f64]) -> ScalarField {
        let dr1 = &self.cache().dr1;
        let p2 = self.p2();
        ScalarField {
            values: (0..self.len())
                .map(|i| {
                    let v = h2[i] - h1[i] * (1.0 + dr1[i]);
                    16.0 * v * v / (p2[i] * p2[i])
                })
                .collect(),
        }
    }

    /// Curvature components `(A, B, C, D)` at every node in the unitary frame
    /// adapted to the radial direction: `A = R_{11̄11̄}`, `B = R_{11̄aā}`,
    /// `C = R_{aāaā}`, `D = R_{aābb̄}` for tangential `a ≠ b`.
    pub fn curvature_components(&self) -> Vec<[f64; 4]> {
        let c = self.cache();
        (0..self.len())
            .map(|i| {
                let a = -2.0 * c.dr2[i] / c.p2[i];
                let b = -2.0 * (c.dr1[i] - c.dt1[i]) / c.p1[i];
                let cc = -4.0 * c.dt1[i] / c.p1[i];
                [a, b, cc, 0.5 * cc]
            })
            .collect()
    }

    /// Largest absolute frame component of the curvature tensor per node.
    pub fn rm_norm(&self) -> ScalarField {
        let n = self.n;
        ScalarField {
            values: self
                .curvature_components()
                .iter()
                .map(|c| {
                    let mut m = c[0].abs();
                    if n >= 2 {
                        m = m.max(c[1].abs()).max(c[2].abs());
                    }
                    if n >= 3 {
                        m = m.max(c[3].abs());
                    }
                    m
                })
                .collect(),
        }
    }

    pub fn curvature_at(&self, node: usize) -> Result<CurvaturePointData> {
        if node == 0 || node + 1 >= self.len() {
            return Err(Error::BoundaryNode { node, nodes: self.len() });
        }
        let [a, b, c, d] = self.curvature_components()[node];
        Ok(CurvaturePointData::from_components(self.n, a, b, c, d))
    }

    /// `∫_{−∞}^{ρ_i} q dρ` for q vanishing like e^ρ at the origin, with the
    /// quadrature that builds P′ from P″.
    pub fn integrate_from_origin(&self, q: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = q.iter().enumerate().map(|(i, v)| v / self.grid.rho(i).exp()).collect();
        cumulative_exp(&g, self.grid.rho_min, self.grid.h)
    }

    /// Volume density in ρ: `π^n/(n−1)! · P′^{n−1} P″`.
    pub fn volume_density(&self) -> Vec<f64> {
        let n = self.n;
        let c = std::f64::consts::PI.powi(n as i32) / factorial(n - 1);
        (0..self.len())
            .map(|i| c * self.p1()[i].powi(n as i32 - 1) * self.p2()[i])
            .collect()
    }

    /// Quadrature weights for ∫·dV over the grid. The ball inside ρ_min is
    /// added to the first node (its density grows like e^{nρ}).
    pub fn volume_weights(&self) -> Vec<f64> {
        let dens = self.volume_density();
        let mut w = gregory_weights(self.len(), self.grid.h);
        for (wi, di) in w.iter_mut().zip(&dens) {
            *wi *= di;
        }
        w[0] += dens[0] / self.n as f64;
        w
    }

    /// Distance to the origin, including the analytic near-origin tail.
    pub fn radial_distance(&self) -> Vec<f64> {
        let speed = self.distance_speed();
        let tail = 2.0 * speed[0];
        cumulative(&speed, self.grid.h).into_iter().map(|s| s + tail).collect()
    }

    /// ds/dρ.
    pub fn distance_speed(&self) -> Vec<f64> {
        self.p2().iter().map(|p| 0.5 * p.sqrt()).collect()
    }

    /// Volume of the ball around the origin out to each node.
    pub fn ball_volume(&self) -> Vec<f64> {
        let dens = self.volume_density();
        let tail = dens[0] / self.n as f64;
        cumulative(&dens, self.grid.h).into_iter().map(|v| v + tail).collect()
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}
