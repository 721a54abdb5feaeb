use krf_core::geometry::{
    phong_sturm_operator, CurvaturePointData, FarField, Grid, KahlerTensor, RadialKahlerState,
    Reference, ScalarField,
};
use krf_core::Error;

fn cigar_grid() -> Grid {
    Grid::new(-16.0, 16.0, 2048).unwrap()
}

#[test]
fn flat_c1_has_unit_eigenvalue_and_zero_log_det() {
    let s = RadialKahlerState::flat(1, Grid::new(-10.0, 10.0, 200).unwrap()).unwrap();
    for (lr, ld) in s.lambda_r().iter().zip(s.log_det()) {
        assert!((lr - 1.0).abs() < 1e-14);
        assert!(ld.abs() < 1e-14);
    }
}

#[test]
fn flat_c2_volume_growth_is_euclidean() {
    let s = RadialKahlerState::flat(2, Grid::new(-12.0, 3.0, 400).unwrap()).unwrap();
    for lt in s.lambda_t() {
        assert!((lt - 1.0).abs() < 1e-14);
    }
    // ball of radius r in ℂ² has volume π²r⁴/2
    let vol = s.ball_volume();
    for i in [100, 250, 399] {
        let x = s.x()[i];
        let exact = std::f64::consts::PI.powi(2) * x * x / 2.0;
        assert!((vol[i] / exact - 1.0).abs() < 1e-5, "node {i}");
    }
}

#[test]
fn cigar_eigenvalue_matches_conformal_factor() {
    let s = RadialKahlerState::cigar(cigar_grid()).unwrap();
    for (i, lr) in s.lambda_r().iter().enumerate() {
        let x = s.x()[i];
        assert!((lr * (1.0 + x) - 1.0).abs() < 1e-13);
    }
}

#[test]
fn cigar_ricci_potential_scalar_curvature_and_soliton_identity() {
    let s = RadialKahlerState::cigar(cigar_grid()).unwrap();
    let f = s.ricci_potential();
    let r = s.scalar_curvature();
    let g = s.grad_norm_sq(&f).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..s.len() {
        let x = s.x()[i];
        let f_exact = x.ln_1p() - s.x()[0].ln_1p();
        assert!((f.values[i] - f_exact).abs() < 1e-12);
        assert!((r.values[i] - 4.0 / (1.0 + x)).abs() < 1e-6, "R at {i}");
        assert!((g.values[i] - 4.0 * x / (1.0 + x)).abs() < 1e-6, "grad at {i}");
        worst = worst.max((r.values[i] + g.values[i] - 4.0).abs());
    }
    assert!(worst < 1e-6, "max |R + |∇f|² − 4| = {worst}");
    assert!((r.values[0] - 4.0).abs() < 1e-6);
}

#[test]
fn scalar_curvature_matches_independent_formula() {
    let grid = Grid::new(-8.0, 8.0, 300).unwrap();
    let x: Vec<f64> = grid.points().iter().map(|r| r.exp()).collect();
    let w = x.iter().map(|x| 0.2 * x * (-x * 0.3).exp()).collect();
    let s = RadialKahlerState::new(2, grid, Reference::blend(0.3), FarField::Euclidean, 0.1, w, 0.0).unwrap();
    // stencil derivatives of the sampled potential away from the edges
    let f = s.ricci_potential();
    let r = s.scalar_curvature();
    let f1 = s.d1(&f).unwrap();
    let f2 = s.d2(&f).unwrap();
    for i in 20..s.len() - 20 {
        let direct = 4.0 * (f1[i] / s.p1()[i] + f2[i] / s.p2()[i]);
        assert!((direct - r.values[i]).abs() <= 1e-5 * direct.abs().max(1.0), "node {i}");
    }
    // λ_t is the average of λ_r over the disc: (xλ_t)′ = xλ_r in ρ
    let lt: Vec<f64> = s.lambda_t().iter().zip(&x).map(|(l, x)| l * x).collect();
    let d = s.d1(&ScalarField::new(lt).unwrap()).unwrap();
    for i in 2..s.len() - 2 {
        let target = s.lambda_r()[i] * x[i];
        assert!((d[i] / target - 1.0).abs() < 1e-6, "node {i}");
    }
}

#[test]
fn laplacian_examples() {
    let grid = Grid::new(-6.0, 6.0, 400).unwrap();
    let s1 = RadialKahlerState::flat(1, grid).unwrap();
    let rho = ScalarField::new(grid.points()).unwrap();
    // roundoff is amplified by e^{-ρ} next to the origin
    let l = s1.laplacian(&rho).unwrap();
    assert!(l.values[50..].iter().all(|v| v.abs() < 1e-9));
    // |z|² in ℂ²: Euclidean Laplacian 4n = 8 in the Riemannian normalization
    let s2 = RadialKahlerState::flat(2, grid).unwrap();
    let x = ScalarField::new(s2.x().to_vec()).unwrap();
    for (i, v) in s2.laplacian(&x).unwrap().values.into_iter().enumerate() {
        assert!((v / 8.0 - 1.0).abs() < 1e-6, "{i} {v}");
    }
    let g = s1.grad_norm_sq(&ScalarField::new(s1.x().to_vec()).unwrap()).unwrap();
    for (v, x) in g.values.iter().zip(s1.x()) {
        assert!((v / (4.0 * x) - 1.0).abs() < 1e-6);
    }
    let c = ScalarField::new(vec![3.0; grid.len]).unwrap();
    assert!(s1.grad_norm_sq(&c).unwrap().max_abs() < 1e-20);
    let short = ScalarField::new(vec![0.0; 10]).unwrap();
    assert!(matches!(s1.laplacian(&short), Err(Error::GridMismatch { .. })));
}

#[test]
fn degenerate_potential_rejected() {
    let grid = Grid::new(-4.0, 4.0, 64).unwrap();
    let rho = grid.points();
    let p: Vec<f64> = rho.iter().map(|r| r.exp() - 0.2 * (2.0 * r).exp()).collect();
    let e = RadialKahlerState::from_potential(1, &rho, &p, FarField::Euclidean);
    assert!(matches!(e, Err(Error::MetricDegenerate { .. })));
    let q1: Vec<f64> = rho.iter().map(|r| -2.0 * r.exp()).collect();
    let e = RadialKahlerState::from_deviation_derivatives(1, grid, Reference::FLAT, FarField::Euclidean, &q1, &q1);
    assert!(matches!(e, Err(Error::MetricDegenerate { .. })));
    assert!(matches!(Grid::new(-4.0, 4.0, 15), Err(Error::GridTooCoarse { .. })));
}

#[test]
fn from_potential_matches_reference_construction() {
    let grid = Grid::new(-10.0, 5.0, 500).unwrap();
    let rho = grid.points();
    let p: Vec<f64> = rho.iter().map(|r| 2.0 * r.exp() + 0.1 * (2.0 * r).exp()).collect();
    let s = RadialKahlerState::from_potential(2, &rho, &p, FarField::Euclidean).unwrap();
    for (i, lr) in s.lambda_r().iter().enumerate() {
        let x = s.x()[i];
        // one-sided closure at the far edge is less accurate
        let tol = if i + 3 >= s.len() { 1e-4 } else { 1e-6 };
        assert!((lr / (2.0 + 0.4 * x) - 1.0).abs() < tol, "node {i}");
    }
}

#[test]
fn cigar_curvature_component_is_half_scalar() {
    let s = RadialKahlerState::cigar(cigar_grid()).unwrap();
    let r = s.scalar_curvature();
    for node in [1, 500, 1024, 2000] {
        let p = s.curvature_at(node).unwrap();
        let x = s.x()[node];
        assert!((p.tensor.get(0, 0, 0, 0).re - 2.0 / (1.0 + x)).abs() < 1e-6);
        assert!((p.scalar - r.values[node] / 2.0).abs() < 1e-6);
    }
    assert!(matches!(s.curvature_at(0), Err(Error::BoundaryNode { .. })));
    assert!(matches!(s.curvature_at(2047), Err(Error::BoundaryNode { .. })));
}

#[test]
fn flat_curvature_vanishes() {
    let s = RadialKahlerState::flat(3, Grid::new(-5.0, 5.0, 100).unwrap()).unwrap();
    for node in 1..99 {
        assert_eq!(s.curvature_at(node).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn ricci_trace_matches_potential_route() {
    let grid = Grid::new(-8.0, 6.0, 800).unwrap();
    let w: Vec<f64> = grid.points().iter().map(|r| 0.3 * r.exp() / (1.0 + r.exp() + (r - 1.0).powi(2))).collect();
    for n in [2, 3] {
        let s = RadialKahlerState::new(n, grid, Reference::blend(0.5), FarField::Euclidean, 0.0, w.clone(), 0.0)
            .unwrap();
        let (mr, mt) = s.ricci_eigenvalues();
        for node in (10..790).step_by(37) {
            let p = s.curvature_at(node).unwrap();
            assert!((2.0 * p.ricci[0].re - mr[node]).abs() < 1e-5 * mr[node].abs().max(1.0));
            assert!((2.0 * p.ricci[n + 1].re - mt[node]).abs() < 1e-5 * mt[node].abs().max(1.0));
            assert!(p.traceless_trace() < 1e-12);
            assert!(p.tensor.symmetry_defect() < 1e-15);
        }
    }
}

#[test]
fn space_form_bisectional_extremes() {
    let c = 0.7;
    let p = CurvaturePointData::from_tensor(KahlerTensor::space_form(3, c));
    assert!((p.bisectional_min - c).abs() < 1e-15);
    assert!((p.bisectional_max - 2.0 * c).abs() < 1e-15);
    for h in &p.holomorphic_sectional {
        assert!((h - 2.0 * c).abs() < 1e-15);
    }
}

#[test]
fn phong_sturm_on_zero_and_low_dimension() {
    let zero = CurvaturePointData::from_tensor(KahlerTensor::zeros(2));
    let ps = phong_sturm_operator(&zero).unwrap();
    assert_eq!(ps.matrix.norm(), 0.0);
    assert_eq!(ps.sum_two_lowest, 0.0);
    let one = CurvaturePointData::from_tensor(KahlerTensor::zeros(1));
    assert!(matches!(phong_sturm_operator(&one), Err(Error::DimensionTooSmall { n: 1 })));
}

#[test]
fn phong_sturm_on_space_form_is_multiple_of_identity() {
    let c = 1.3;
    for n in [2, 3] {
        let p = CurvaturePointData::from_tensor(KahlerTensor::space_form(n, c));
        let ps = phong_sturm_operator(&p).unwrap();
        let d = n * n - 1;
        for a in 0..d {
            for b in 0..d {
                let e = if a == b { c } else { 0.0 };
                assert!((ps.matrix[(a, b)] - e).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn phong_sturm_rejects_non_hermitian_input() {
    let mut t = KahlerTensor::zeros(2);
    t.set(0, 1, 1, 0, num_complex::Complex64::new(0.0, 1.0));
    let p = CurvaturePointData::from_tensor(t);
    assert!(matches!(phong_sturm_operator(&p), Err(Error::NonHermitian { .. })));
}


fn random_point(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> CurvaturePointData {
    use rand::Rng;
    let mut raw = KahlerTensor::zeros(n);
    for v in raw.data.iter_mut() {
        *v = num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    CurvaturePointData::from_tensor(KahlerTensor::symmetrize(&raw))
}

/// Direct index contraction, with Ricci and scalar rebuilt from the tensor.
fn brute_force_matrix(p: &CurvaturePointData) -> Vec<Vec<f64>> {
    use num_complex::Complex64;
    let n = p.n;
    let t = &p.tensor;
    let ric = |i: usize, j: usize| -> Complex64 { (0..n).map(|k| t.get(i, j, k, k)).sum() };
    let scalar: Complex64 = (0..n).map(|i| ric(i, i)).sum();
    let nf = n as f64;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let s = |i, j, k, l| {
        let tl = |a, b| ric(a, b) - scalar * delta(a, b) / nf;
        t.get(i, j, k, l) - tl(i, j) * delta(k, l) / nf - tl(k, l) * delta(i, j) / nf
            + scalar * delta(i, j) * delta(k, l) / (nf * nf)
    };
    let basis = krf_core::geometry::traceless_hermitian_basis(n);
    let d = basis.len();
    let mut m = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut v = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            v += basis[a][j * n + i] * s(i, j, k, l) * basis[b][l * n + k];
                        }
                    }
                }
            }
            assert!(v.im.abs() < 1e-12);
            m[a][b] = v.re;
        }
    }
    m
}

#[test]
fn phong_sturm_matches_brute_force_contraction() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let p = random_point(&mut rng, 2);
        assert!(p.tensor.symmetry_defect() < 1e-14);
        let ps = phong_sturm_operator(&p).unwrap();
        let m = brute_force_matrix(&p);
        for (a, row) in m.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert!((ps.matrix[(a, b)] - v).abs() < 1e-10);
            }
        }
    }
}

/// Metric `∂∂̄Φ(|z|²)` on ℂ² as a Riemannian metric on ℝ⁴ in the order
/// (x₁, x₂, y₁, y₂), with `Φ′ = ln(1+x)/x`, the U(2) positive preset.
fn ambient_metric(p: &[f64; 4]) -> nalgebra::Matrix4<f64> {
    let x = p.iter().map(|v| v * v).sum::<f64>();
    let (d1, d2) = if x < 1e-6 {
        (1.0 - x / 2.0 + x * x / 3.0, -0.5 + 2.0 * x / 3.0)
    } else {
        let l = x.ln_1p();
        (l / x, (x / (1.0 + x) - l) / (x * x))
    };
    let z = [num_complex::Complex64::new(p[0], p[2]), num_complex::Complex64::new(p[1], p[3])];
    let mut g = nalgebra::Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let h = z[i].conj() * z[j] * d2 + if i == j { d1 } else { 0.0 };
            g[(i, j)] = h.re;
            g[(i + 2, j + 2)] = h.re;
            g[(i, j + 2)] = h.im;
            g[(i + 2, j)] = -h.im;
        }
    }
    g
}

fn shift(p: &[f64; 4], a: usize, e: f64) -> [f64; 4] {
    let mut q = *p;
    q[a] += e;
    q
}

/// Fourth-order central difference.
fn fd<T>(f: impl Fn(f64) -> T, e: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    (f(-2.0 * e) - f(2.0 * e)) * (1.0 / (12.0 * e)) + (f(e) - f(-e)) * (8.0 / (12.0 * e))
}

#[test]
fn hessian20_matches_ambient_finite_differences() {
    use nalgebra::Matrix4;
    let s = RadialKahlerState::from_reference(2, Grid::new(-8.0, 4.0, 769).unwrap(), Reference::CIGAR).unwrap();
    // h = x/(1+x) with x = |z|²
    let hx = |x: f64| x / (1.0 + x);
    let rho = s.grid().points();
    let h1: Vec<f64> = rho.iter().map(|r| r.exp() / (1.0 + r.exp()).powi(2)).collect();
    let h2: Vec<f64> = rho.iter().map(|r| {
        let x = r.exp();
        x * (1.0 - x) / (1.0 + x).powi(3)
    }).collect();
    let ours = s.hessian20_norm_sq_from(&h1, &h2);
    let jmat = Matrix4::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    for i in (100..700).step_by(60) {
        let r = s.x()[i].sqrt();
        let p = [r * 0.6, r * 0.8, 0.0, 0.0];
        let e = 1e-3 * r.max(0.1);
        let h = |q: &[f64; 4]| hx(q.iter().map(|v| v * v).sum());
        let g = ambient_metric(&p);
        let ginv = g.try_inverse().unwrap();
        let dg: Vec<Matrix4<f64>> = (0..4).map(|a| fd(|t| ambient_metric(&shift(&p, a, t)), e)).collect();
        let dh: Vec<f64> = (0..4).map(|a| fd(|t| h(&shift(&p, a, t)), e)).collect();
        let mut hess = Matrix4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                let ddh = fd(|t| fd(|u| h(&shift(&shift(&p, a, t), b, u)), e), e);
                let mut gamma_dh = 0.0;
                for c in 0..4 {
                    let gam: f64 = (0..4)
                        .map(|d| 0.5 * ginv[(c, d)] * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]))
                        .sum();
                    gamma_dh += gam * dh[c];
                }
                hess[(a, b)] = ddh - gamma_dh;
            }
        }
        // J-anti-invariant part carries the (2,0) + (0,2) Hessian
        let anti = (hess - jmat.transpose() * hess * jmat) * 0.5;
        let norm = (ginv * anti * ginv * anti.transpose()).trace();
        let expect = 2.0 * norm;
        assert!((ours.values[i] - expect).abs() < 1e-6 * expect.max(1e-3), "node {i}: {} vs {expect}", ours.values[i]);
    }
}
