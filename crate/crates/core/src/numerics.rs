//! Finite differences, quadrature and a banded solver on uniform grids.

use crate::error::{Error, Result};

/// Fornberg's recursion. Returns `w[k][j]`, the weight of node `j` in the
/// `k`-th derivative at `x0`, for `k = 0..=m`.
pub fn fornberg(x0: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Interpolating polynomial through `(xs, ys)` evaluated at `x`.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let w = fornberg(x, xs, 0);
    w[0].iter().zip(ys).map(|(a, b)| a * b).sum()
}

/// Fourth-order first and second derivative stencils on a uniform grid.
/// Interior nodes use the centered five-point formulas, the two nodes at
/// each end use six-point one-sided ones.
#[derive(Debug, Clone)]
pub struct Diff {
    pub n: usize,
    pub h: f64,
    edge_d1: [[f64; 6]; 2],
    edge_d2: [[f64; 6]; 2],
}

pub const MIN_NODES: usize = 8;

const C1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const C2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

impl Diff {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::GridTooCoarse { nodes: n, min: MIN_NODES });
        }
        let nodes: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let mut edge_d1 = [[0.0; 6]; 2];
        let mut edge_d2 = [[0.0; 6]; 2];
        for i in 0..2 {
            let w = fornberg(i as f64, &nodes, 2);
            for k in 0..6 {
                edge_d1[i][k] = w[1][k];
                edge_d2[i][k] = w[2][k];
            }
        }
        Ok(Self { n, h, edge_d1, edge_d2 })
    }

    /// Stencil for derivative `order` (1 or 2) at node `i`: first node index
    /// and the weights, already scaled by the spacing.
    pub fn weights(&self, i: usize, order: usize) -> (usize, Vec<f64>) {
        let n = self.n;
        let scale = self.h.powi(order as i32);
        let (edge, centre) = if order == 1 {
            (&self.edge_d1, &C1)
        } else {
            (&self.edge_d2, &C2)
        };
        if i < 2 {
            (0, edge[i].iter().map(|w| w / scale).collect())
        } else if i + 2 >= n {
            // mirror: d/dx flips sign under reflection for odd orders
            let j = n - 1 - i;
            let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
            let mut w: Vec<f64> = edge[j].iter().map(|w| sign * w / scale).collect();
            w.reverse();
            (n - 6, w)
        } else {
            (i - 2, centre.iter().map(|w| w / scale).collect())
        }
    }

    fn apply(&self, f: &[f64], order: usize) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        let n = self.n;
        let mut out = vec![0.0; n];
        let scale = self.h.powi(order as i32);
        let centre = if order == 1 { &C1 } else { &C2 };
        for i in 2..n - 2 {
            let mut s = 0.0;
            for k in 0..5 {
                s += centre[k] * f[i - 2 + k];
            }
            out[i] = s / scale;
        }
        for i in [0, 1, n - 2, n - 1] {
            let (start, w) = self.weights(i, order);
            out[i] = w.iter().zip(&f[start..start + 6]).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn d1(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, 1)
    }

    pub fn d2(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, 2)
    }
}

/// Gregory weights exact for cubics: h·(3/8, 7/6, 23/24, 1, …, 1, 23/24, 7/6, 3/8).
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 6, "Gregory rule needs at least 6 nodes");
    let mut w = vec![h; n];
    let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for (k, e) in ends.iter().enumerate() {
        w[k] = e * h;
        w[n - 1 - k] = e * h;
    }
    w
}

pub fn integrate(f: &[f64], h: f64) -> f64 {
    gregory_weights(f.len(), h).iter().zip(f).map(|(a, b)| a * b).sum()
}

/// Running integral `F[i] = ∫_{x_0}^{x_i} f`, fourth order per cell.
pub fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4);
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let cell = if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out.push((0.5 * (1.0 - z), 0.5 * w));
    }
    out
}

/// `J[i] = ∫_{−∞}^{ρ_i} e^ρ g(ρ) dρ` on the uniform grid `ρ_i = ρ_0 + ih`,
/// for g smooth in e^ρ as ρ → −∞. Each cell integrates the local cubic
/// interpolant of g against e^ρ exactly; the part below the grid uses a cubic
/// in e^ρ through four nodes spread over the first doubling scales.
pub fn cumulative_exp(g: &[f64], rho0: f64, h: f64) -> Vec<f64> {
    let n = g.len();
    assert!(n >= 4);
    let gl = gauss_legendre(8);
    let cell = |offsets: [f64; 4]| -> [f64; 4] {
        let mut w = [0.0; 4];
        for &(u, a) in &gl {
            let l = fornberg(u, &offsets, 0);
            for k in 0..4 {
                w[k] += a * h * (h * u).exp() * l[0][k];
            }
        }
        w
    };
    let inner = cell([-1.0, 0.0, 1.0, 2.0]);
    let last = cell([-2.0, -1.0, 0.0, 1.0]);
    // nodes near x₀, 2x₀, 3x₀, 4x₀ keep the extrapolation weights bounded as h → 0
    let mut nodes = [0usize; 4];
    for k in 1..4 {
        nodes[k] = (((k + 1) as f64).ln() / h).round().max((nodes[k - 1] + 1) as f64) as usize;
    }
    assert!(nodes[3] < n, "grid too short for the near-origin tail");
    let us: Vec<f64> = nodes.iter().map(|&k| (k as f64 * h).exp()).collect();
    let mut tail = [0.0; 4];
    for &(u, a) in &gl {
        let l = fornberg(u, &us, 0);
        for k in 0..4 {
            tail[k] += a * l[0][k];
        }
    }
    // ghost below the first node, cubic in e^ρ, so the first cell is centered too
    let near: Vec<f64> = (0..4).map(|k| (k as f64 * h).exp()).collect();
    let ghost_w = fornberg((-h).exp(), &near, 0);
    let ghost: f64 = (0..4).map(|k| ghost_w[0][k] * g[k]).sum();
    let mut out = vec![0.0; n];
    out[0] = rho0.exp() * (0..4).map(|k| tail[k] * g[nodes[k]]).sum::<f64>();
    out[1] = out[0] + rho0.exp() * (inner[0] * ghost + (1..4).map(|k| inner[k] * g[k - 1]).sum::<f64>());
    for i in 1..n - 1 {
        let (w, lo) = if i == n - 2 {
            (last, n - 4)
        } else {
            (inner, i - 1)
        };
        let x = (rho0 + i as f64 * h).exp();
        out[i + 1] = out[i] + x * (0..4).map(|k| w[k] * g[lo + k]).sum::<f64>();
    }
    out
}

/// Inverse of a monotone increasing sampled function `y(x_i)` by cubic
/// Hermite interpolation, with slopes `dy`. Returns `None` outside the range.
pub fn invert_monotone(xs: &[f64], ys: &[f64], dy: &[f64], target: f64) -> Option<f64> {
    let n = ys.len();
    if target < ys[0] || target > ys[n - 1] {
        return None;
    }
    let k = match ys.partition_point(|&y| y <= target) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let (x0, x1) = (xs[k], xs[k + 1]);
    let hx = x1 - x0;
    let eval = |s: f64| {
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * ys[k] + h10 * hx * dy[k] + h01 * ys[k + 1] + h11 * hx * dy[k + 1]
    };
    // bisection keeps this robust when the Hermite cubic is not monotone
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(x0 + 0.5 * (lo + hi) * hx)
}

/// Cubic Hermite interpolant of `(xs, ys)` with slopes `dy`, evaluated at `x`
/// (clamped to the sampled range).
pub fn hermite_eval(xs: &[f64], ys: &[f64], dy: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    let hx = xs[k + 1] - xs[k];
    let s = ((x - xs[k]) / hx).clamp(0.0, 1.0);
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * ys[k] + h10 * hx * dy[k] + h01 * ys[k + 1] + h11 * hx * dy[k + 1]
}

/// Weights of y(t₀), y(t₁), y(t₂) in the second-order estimate of y′(t₁)
/// for spacings `a = t₁ − t₀`, `b = t₂ − t₁`.
pub fn three_point_slope(a: f64, b: f64) -> [f64; 3] {
    [-b / (a * (a + b)), (b - a) / (a * b), a / (b * (a + b))]
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factored in place
/// by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Adds `v` at `(i, j)`. Panics if the entry is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "singular banded matrix at column {k}"
                )));
            }
            self.pivots[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve before factor");
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_centered_stencils() {
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg(0.0, &nodes, 2);
        for k in 0..5 {
            assert!((w[1][k] - C1[k]).abs() < 1e-14);
            assert!((w[2][k] - C2[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_exact_on_quartics() {
        let n = 20;
        let h = 0.1;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.powi(4) - 2.0 * x.powi(3) + x).collect();
        let d = Diff::new(n, h).unwrap();
        let d1 = d.d1(&f);
        let d2 = d.d2(&f);
        for (i, x) in xs.iter().enumerate() {
            assert!((d1[i] - (4.0 * x.powi(3) - 6.0 * x * x + 1.0)).abs() < 1e-9, "d1 at {i}");
            assert!((d2[i] - (12.0 * x * x - 12.0 * x)).abs() < 1e-7, "d2 at {i}");
        }
    }

    #[test]
    fn derivatives_converge_at_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let d = Diff::new(n, h).unwrap().d2(&f);
            (0..n)
                .map(|i| (d[i] + (i as f64 * h).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn gregory_and_cumulative_agree() {
        let n = 33;
        let h = 1.0 / 32.0;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
        let exact = 1f64.exp() - 1.0;
        assert!((integrate(&f, h) - exact).abs() < 1e-7);
        let c = cumulative(&f, h);
        assert!((c[n - 1] - exact).abs() < 1e-7);
        assert!((c[16] - (0.5f64.exp() - 1.0)).abs() < 1e-7);
        let f2: Vec<f64> = (0..65).map(|i| (i as f64 * h / 2.0).exp()).collect();
        let ratio = (integrate(&f, h) - exact).abs() / (integrate(&f2, h / 2.0) - exact).abs();
        assert!(ratio > 14.0, "ratio {ratio}");
    }

    #[test]
    fn exponential_cumulative_is_accurate_near_the_origin() {
        let (rho0, h, n) = (-12.0, 0.25, 60);
        let ones = vec![1.0; n];
        for (i, v) in cumulative_exp(&ones, rho0, h).iter().enumerate() {
            let x = (rho0 + i as f64 * h).exp();
            assert!((v / x - 1.0).abs() < 1e-14);
        }
        // g = 1 + 2x − x² + 0.5x³ gives ∫ e^ρ g = x + x² − x³/3 + x⁴/8, and the
        // relative error must vanish like x at the origin

        let g: Vec<f64> = (0..n)
            .map(|i| {
                let x = (rho0 + i as f64 * h).exp();
                1.0 + 2.0 * x - x * x + 0.5 * x.powi(3)
            })
            .collect();
        let j = cumulative_exp(&g, rho0, h);
        for i in 0..20 {
            let x = (rho0 + i as f64 * h).exp();
            let exact = x + x * x - x.powi(3) / 3.0 + x.powi(4) / 8.0;
            assert!((j[i] / exact - 1.0).abs() < h.powi(4) * x + 1e-15, "node {i}: {} vs {exact}", j[i]);
        }
        let g: Vec<f64> = (0..n).map(|i| (0.3 * (rho0 + i as f64 * h)).sin()).collect();
        let j = cumulative_exp(&g, rho0, h);
        // ∫ e^ρ sin(aρ) = e^ρ (sin aρ − a cos aρ)/(1 + a²)
        let r = rho0 + (n - 1) as f64 * h;
        let exact = r.exp() * ((0.3 * r).sin() - 0.3 * (0.3 * r).cos()) / 1.09;
        assert!((j[n - 1] / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_degree_fifteen() {
        let q = gauss_legendre(8);
        let v: f64 = q.iter().map(|(u, w)| w * u.powi(15)).sum();
        assert!((v - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn inversion_recovers_abscissa() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + x).collect();
        let dy: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let x = invert_monotone(&xs, &ys, &dy, 2.0).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        assert!(invert_monotone(&xs, &ys, &dy, -1.0).is_none());
    }

    #[test]
    fn banded_solve_matches_dense() {
        use nalgebra::{DMatrix, DVector};
        let n = 12;
        let (kl, ku) = (2, 3);
        let mut b = Banded::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = if i == j { 0.1 } else { ((i * 7 + j * 3) % 5) as f64 - 1.5 };
                b.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        b.factor().unwrap();
        let x = b.solve(&rhs);
        let xd = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10);
        }
    }
}
