use std::f64::consts::PI;

use krf_core::entropy::{
    collapse_ratios, f_functional, inequality_probes, modified_flow_chain, mu_minimize, mu_series,
    sobolev_estimate, variation_residual, w_density, w_functional, Bump, ChainControls, MinimizerControls,
    Normalization, TauMode, TestDensity, VariationField, WarpedSurfaceState,
};
use krf_core::error::Error;
use krf_core::flow::{evolve, FlowControls};
use krf_core::geometry::{Grid, RadialKahlerState, ScalarField};
use krf_core::presets::Preset;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn preset(p: Preset, len: usize) -> RadialKahlerState {
    p.build(p.default_grid(len).unwrap()).unwrap()
}

fn distance_field(s: &RadialKahlerState, k: f64) -> ScalarField {
    ScalarField::new(s.radial_distance().iter().map(|d| k * d * d).collect()).unwrap()
}

fn flat1(len: usize) -> RadialKahlerState {
    preset(Preset::FlatC1, len)
}

#[test]
fn f_vanishes_for_flat_constant_potential() {
    let s = flat1(129);
    let f = ScalarField::new(vec![0.0; s.len()]).unwrap();
    assert_eq!(f_functional(&s, &f).unwrap(), 0.0);
}

#[test]
fn f_matches_the_gaussian_integral_on_flat_c1() {
    let s = flat1(513);
    for tau in [0.5, 1.0, 2.0] {
        let f = distance_field(&s, 0.25 / tau);
        let v = f_functional(&s, &f).unwrap();
        assert!((v / (4.0 * PI) - 1.0).abs() < 1e-4, "τ = {tau}: F = {v}");
    }
}

#[test]
fn f_rejects_non_decaying_integrands() {
    let s = preset(Preset::FlatC2, 129);
    let f = ScalarField::new(s.radial_distance().iter().map(|d| 0.5 * d.ln_1p()).collect()).unwrap();
    assert!(matches!(f_functional(&s, &f), Err(Error::NonIntegrable { .. })));
}

fn cigar_f(len: usize) -> f64 {
    let s = RadialKahlerState::cigar(Grid::new(-16.0, 24.0, len).unwrap()).unwrap();
    let f = s.ricci_potential();
    f_functional(&s, &f).unwrap()
}

#[test]
fn cigar_f_is_resolved_to_three_digits() {
    let (a, b) = (cigar_f(641), cigar_f(1281));
    assert!(a > 0.0 && a.is_finite());
    assert!(((a - b) / b).abs() < 5e-4, "{a} vs {b}");
    // R + |∇f|² is constant on the soliton and ∫e^{−f}dV is explicit
    assert!((b / (4.0 * PI) - 1.0).abs() < 1e-3, "{b}");
}

#[test]
fn gaussian_has_zero_entropy_on_flat_c1() {
    let s = flat1(513);
    for tau in [0.5, 1.0, 2.0] {
        let u = TestDensity::gaussian(&s, tau, 8.0 * tau.sqrt()).unwrap();
        let w = w_density(&s, &u, Normalization::Riemannian).unwrap();
        assert!(w.abs() < 5e-3, "τ = {tau}: W = {w}");
        let k = w_density(&s, &u, Normalization::Kahler).unwrap();
        assert!((w - k).abs() < 1e-12);
    }
}

#[test]
fn concentrated_densities_are_penalized() {
    let s = flat1(257);
    let centre = 128;
    let w_of = |half: usize| {
        let u: Vec<f64> = (0..s.len())
            .map(|i| {
                let t = (i as f64 - centre as f64) / half as f64;
                if t.abs() < 1.0 {
                    (1.0 - t * t).powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        let d = TestDensity::new(&s, 1.0, u, s.len() - 3).unwrap();
        w_density(&s, &d, Normalization::Riemannian).unwrap()
    };
    let ws: Vec<f64> = [16, 8, 4, 2].iter().map(|&k| w_of(k)).collect();
    assert!(ws[0] > 0.0);
    for p in ws.windows(2) {
        assert!(p[1] > p[0], "{ws:?}");
    }
}

#[test]
fn normalization_is_enforced() {
    let s = flat1(129);
    let mut u = TestDensity::gaussian(&s, 1.0, 8.0).unwrap();
    u.u.iter_mut().for_each(|v| *v *= 1.01);
    assert!(matches!(
        w_density(&s, &u, Normalization::Riemannian),
        Err(Error::NormalizationViolated { .. })
    ));
}

#[test]
fn u_and_f_forms_agree_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let presets = [Preset::Cigar, Preset::PerturbedCigar, Preset::Cusp, Preset::PositiveBump, Preset::FlatC2];
    for k in 0..20 {
        let p = presets[k % presets.len()];
        let s = preset(p, 257);
        let tau = rng.gen_range(0.3..2.0);
        let (a, b, c) = (rng.gen_range(1.0..2.0), rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0));
        let d = s.radial_distance();
        let mut f: Vec<f64> = d.iter().map(|x| a * x * x + b * (-x * x / c).exp()).collect();
        let weights = s.volume_weights();
        let mass: f64 = weights.iter().zip(&f).map(|(w, f)| w * (-f).exp()).sum::<f64>()
            * (4.0 * PI * tau).powi(-(s.n() as i32));
        f.iter_mut().for_each(|v| *v += mass.ln());
        let cutoff = s.len() - 3;
        assert!(f[cutoff] > 40.0, "{}: tail f = {}", p.name(), f[cutoff]);
        let field = ScalarField::new(f).unwrap();
        let u = TestDensity::from_potential(&s, tau, &field, cutoff).unwrap();
        for norm in [Normalization::Riemannian, Normalization::Kahler] {
            let wf = w_functional(&s, &field, tau, norm).unwrap();
            let wu = w_density(&s, &u, norm).unwrap();
            assert!((wf - wu).abs() < 1e-8 * wf.abs().max(1.0), "{} τ = {tau}: {wf} vs {wu}", p.name());
        }
    }
}

#[test]
fn mu_on_flat_c1_is_the_gaussian() {
    let s = flat1(257);
    let r = mu_minimize(&s, 1.0, &MinimizerControls::default()).unwrap();
    assert!(r.converged);
    assert!((-5e-3..=1e-2).contains(&r.mu), "μ = {}", r.mu);
    let g = TestDensity::gaussian(&s, 1.0, 10.0).unwrap();
    assert!(r.density.distance(&g, &s) < 1e-2);
    for w in r.history.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn mu_on_flat_space_does_not_depend_on_tau() {
    for p in [Preset::FlatC1, Preset::FlatC2] {
        let s = preset(p, 257);
        let mus: Vec<f64> =
            [0.5, 1.0, 2.0].iter().map(|&t| mu_minimize(&s, t, &MinimizerControls::default()).unwrap().mu).collect();
        let spread = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - mus.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-2, "{}: {mus:?}", p.name());
    }
}

#[test]
fn mu_is_an_infimum_on_the_cigar() {
    let s = RadialKahlerState::cigar(Grid::new(-16.0, 24.0, 641).unwrap()).unwrap();
    let controls = MinimizerControls { seed_scales: vec![1.0, 0.5, 2.0], ..MinimizerControls::default() };
    let r = mu_minimize(&s, 1.0, &controls).unwrap();
    assert!(r.converged);
    assert!(r.mu <= r.w_seed);
    assert!(r.mu <= r.min_evaluated + 1e-12);
    let g = TestDensity::gaussian(&s, 1.0, 10.0).unwrap();
    assert!(r.mu <= w_density(&s, &g, Normalization::Riemannian).unwrap());
}

#[test]
fn mu_requires_room_for_the_support() {
    let s = preset(Preset::PositiveBump, 129);
    assert!(matches!(mu_minimize(&s, 4.0, &MinimizerControls::default()), Err(Error::InvalidArgument(_))));
    assert!(mu_minimize(&s, -1.0, &MinimizerControls::default()).is_err());
}

#[test]
fn unconverged_minimization_reports_best_so_far() {
    let s = preset(Preset::Cusp, 257);
    let controls = MinimizerControls { max_iterations: 2, ..MinimizerControls::default() };
    let r = mu_minimize(&s, 1.0, &controls).unwrap();
    assert!(!r.converged);
    assert!(r.mu <= r.w_seed);
}

fn random_bumps(rng: &mut ChaCha8Rng) -> Vec<Bump> {
    (0..rng.gen_range(1..3))
        .map(|_| Bump {
            center: rng.gen_range(-2.0..2.0),
            width: rng.gen_range(1.0..2.0),
            amplitude: rng.gen_range(0.02..0.1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        })
        .collect()
}

#[test]
fn first_variations_match_difference_quotients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [Preset::Cigar, Preset::Cusp, Preset::PositiveBump] {
        let s = preset(p, 513);
        let f = distance_field(&s, 0.5);
        for _ in 0..10 {
            let v = VariationField::bumps(&s, &random_bumps(&mut rng)).unwrap();
            let tau = rng.gen_range(0.5..2.0);
            let r = variation_residual(&s, &f, &v, tau).unwrap();
            assert!(r.f_residual < 1e-4 && r.w_residual < 1e-4, "{}: {r:?}", p.name());
        }
    }
}

#[test]
fn zero_variation_has_zero_residual() {
    let s = preset(Preset::Cusp, 257);
    let f = distance_field(&s, 0.5);
    let r = variation_residual(&s, &f, &VariationField::zero(&s), 1.0).unwrap();
    assert_eq!((r.f_residual, r.w_residual), (0.0, 0.0));
    assert_eq!((r.df_numeric, r.dw_numeric), (0.0, 0.0));
}

#[test]
fn flat_variations_of_f_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = preset(Preset::FlatC2, 513);
    let f = distance_field(&s, 0.5);
    for _ in 0..5 {
        let v = VariationField::bumps(&s, &random_bumps(&mut rng)).unwrap();
        let r = variation_residual(&s, &f, &v, 1.0).unwrap();
        assert!(r.f_residual < 1e-4, "{r:?}");
    }
}

#[test]
fn gaussian_shrinker_is_critical_for_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [Preset::FlatC1, Preset::FlatC2] {
        let s = preset(p, 513);
        for tau in [0.5, 1.0] {
            let f = distance_field(&s, 0.25 / tau);
            for _ in 0..4 {
                let v = VariationField::bumps(&s, &random_bumps(&mut rng)).unwrap();
                let r = variation_residual(&s, &f, &v, tau).unwrap();
                assert!(r.dw_analytic.abs() < 1e-4 * r.w_scale, "{r:?}");
                assert!(r.dw_numeric.abs() < 1e-4 * r.w_scale, "{r:?}");
            }
        }
    }
}

#[test]
fn bumps_must_stay_inside_the_grid() {
    let s = preset(Preset::Cusp, 129);
    let b = Bump { center: 7.9, width: 1.0, amplitude: 0.1 };
    assert!(VariationField::bumps(&s, &[b]).is_err());
}

#[test]
fn collapse_ratio_of_the_plane_is_pi() {
    let s = flat1(1025);
    let c = collapse_ratios(&s, &[0.5, 1.0, 3.0]);
    for sample in &c {
        assert!((sample.kappa.unwrap() - PI).abs() < 1e-6, "{sample:?}");
        assert!(sample.admissible);
    }
}

#[test]
fn cigar_collapse_ratio_follows_the_closed_form() {
    let s = RadialKahlerState::cigar(Grid::new(-16.0, 36.0, 2049).unwrap()).unwrap();
    let radii: Vec<f64> = (0..11).map(|k| 0.25 * 1.5f64.powi(k)).collect();
    let c = collapse_ratios(&s, &radii);
    for w in c.windows(2) {
        assert!(w[1].kappa.unwrap() <= w[0].kappa.unwrap());
    }
    for sample in &c {
        let r = sample.radius;
        let exact = 2.0 * PI * r.cosh().ln() / (r * r);
        assert!((sample.kappa.unwrap() - exact).abs() < 1e-4, "{sample:?} vs {exact}");
        assert_eq!(sample.admissible, sample.sup_rm <= r.powi(-2));
    }
    assert!(c.last().unwrap().kappa.unwrap() < 0.15 * c[0].kappa.unwrap());
    assert!(c[0].admissible && !c.last().unwrap().admissible);
}

#[test]
fn radii_beyond_the_grid_have_no_ratio() {
    let s = flat1(65);
    let c = collapse_ratios(&s, &[1e9]);
    assert_eq!(c[0].kappa, None);
    assert!(!c[0].admissible);
}

#[test]
fn sobolev_probe_needs_two_complex_dimensions() {
    assert_eq!(sobolev_estimate(&flat1(129)).unwrap(), None);
    let flat = sobolev_estimate(&preset(Preset::FlatC2, 257)).unwrap().unwrap();
    let bump = inequality_probes(&preset(Preset::PositiveBump, 257), &[1.0]).unwrap();
    assert!(flat > 0.0 && flat.is_finite());
    assert!(bump.sobolev.unwrap() > 0.0);
    assert_eq!(bump.collapse.len(), 1);
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[test]
fn round_sphere_chain_is_a_homothety() {
    for len in [32, 64] {
        let s = WarpedSurfaceState::round_sphere(1.0, len).unwrap();
        let f = vec![0.0; len];
        let r = modified_flow_chain(&s, &f, 2.0, 0.1, ChainControls::default()).unwrap();
        let bound = 10.0 * (r.ds_max * r.ds_max + r.h * r.h) * r.scale;
        assert!(max(&r.rescaled_metric) < bound);
        assert!(r.max_metric_residual() < bound);
        assert!(r.max_w_defect() < 1e-6);
        // ḡ(t) = (1 + (1/τ − 2)t)·ḡ(0) on the unit sphere
        let last = r.times.last().unwrap();
        let k = 1.0 + (0.5 - 2.0) * last;
        let bar_area = 4.0 * PI * k;
        assert!(r.w_pulled_back.iter().all(|w| w.is_finite()));
        assert!(bar_area > 0.0);
    }
}

fn warped_chain(len: usize) -> krf_core::entropy::ChainReport {
    let s = WarpedSurfaceState::from_warp(PI, |x| x.sin() * (1.0 + 0.2 * x.sin().powi(2)), [true, true], len)
        .unwrap();
    let f: Vec<f64> = s.nodes().iter().map(|x| 0.3 * x.cos()).collect();
    modified_flow_chain(&s, &f, 2.0, 0.1, ChainControls::default()).unwrap()
}

#[test]
fn chain_residuals_converge_on_a_deformed_sphere() {
    let (a, b) = (warped_chain(32), warped_chain(64));
    let series = |r: &krf_core::entropy::ChainReport| {
        [
            max(&r.rescaled_metric),
            max(&r.rescaled_potential),
            max(&r.pulled_back_metric),
            max(&r.modified_metric),
            max(&r.modified_potential),
            r.max_w_defect(),
        ]
    };
    for (x, y) in series(&a).iter().zip(series(&b)) {
        assert!((x / y).log2() >= 1.5, "{x:e} -> {y:e}");
    }
    assert!(b.max_w_defect() < 1e-6);
    let bound = 10.0 * (b.ds_max * b.ds_max + b.h * b.h) * b.scale;
    assert!(max(&b.rescaled_metric) < bound);
}

#[test]
fn cylinder_chain_is_exact() {
    for len in [32, 64] {
        let s = WarpedSurfaceState::flat_cylinder(1.0, 4.0, len).unwrap();
        let r = modified_flow_chain(&s, &vec![0.0; len], 2.0, 0.1, ChainControls::default()).unwrap();
        assert!(r.max_metric_residual() < 1e-6 && r.max_potential_residual() < 1e-6);
        assert!(r.max_w_defect() < 1e-6);
    }
}

#[test]
fn chain_with_huge_tau_is_plain_ricci_flow() {
    let s = WarpedSurfaceState::round_sphere(1.0, 48).unwrap();
    let r = modified_flow_chain(&s, &vec![0.0; 48], 1e12, 0.1, ChainControls::default()).unwrap();
    for (t, s) in r.times.iter().zip(&r.s) {
        assert!((t - s).abs() < 1e-12);
    }
    assert!(max(&r.rescaled_metric) < 1e-6);
}

#[test]
fn chain_rejects_an_unbounded_horizon() {
    let s = WarpedSurfaceState::round_sphere(1.0, 32).unwrap();
    let err = modified_flow_chain(&s, &vec![0.0; 32], 1.0, f64::INFINITY, ChainControls::default());
    assert!(matches!(err, Err(Error::ChainDomainExceeded { .. })));
}

#[test]
fn strong_gradients_push_the_pullback_off_the_grid() {
    let s = WarpedSurfaceState::flat_cylinder(1.0, 2.0, 32).unwrap();
    let f: Vec<f64> = s.nodes().iter().map(|x| 40.0 * x).collect();
    let err = modified_flow_chain(&s, &f, 1.0, 0.5, ChainControls::default());
    assert!(matches!(err, Err(Error::PullbackFailure { .. }) | Err(Error::NonFinite { .. })), "{err:?}");
}

#[test]
fn regridding_leaves_f_and_w_unchanged() {
    let tau2 = 2.0 * PI;
    let map = |y: f64| (PI * (y + 0.1 * (tau2 * y).sin() / tau2), PI * (1.0 + 0.1 * (tau2 * y).cos()));
    for len in [32, 64] {
        let s = WarpedSurfaceState::from_warp(PI, |x| x.sin() * (1.0 + 0.1 * x.sin().powi(2)), [true, true], len)
            .unwrap();
        let f: Vec<f64> = s.nodes().iter().map(|x| 0.3 * x.cos()).collect();
        let t = s.reparametrize(0.0, 1.0, map).unwrap();
        let g: Vec<f64> = t.nodes().iter().map(|&y| 0.3 * map(y).0.cos()).collect();
        let h2 = s.h() * s.h();
        let (fa, fb) = (s.f_functional(&f), t.f_functional(&g));
        let (wa, wb) = (s.w_functional(&f, 1.0).unwrap(), t.w_functional(&g, 1.0).unwrap());
        assert!(((fa - fb) / fa).abs() < 10.0 * h2);
        assert!(((wa - wb) / wa).abs() < 10.0 * h2);
    }
}

#[test]
fn round_sphere_has_unit_curvature_and_full_area() {
    let s = WarpedSurfaceState::round_sphere(2.0, 64).unwrap();
    assert!(s.gauss_curvature().iter().all(|k| (k - 0.25).abs() < 1e-6));
    assert!((s.area() - 16.0 * PI).abs() < 1e-5);
    assert!(WarpedSurfaceState::from_warp(PI, |x| 2.0 * x.sin(), [true, true], 64).is_err());
}

#[test]
fn shifted_mu_increases_along_the_bump_flow() {
    let s = Preset::PositiveBump.build(Grid::new(-8.0, 6.0, 513).unwrap()).unwrap();
    let traj = evolve(&s, 1.0, FlowControls { speed: 2.0, ..FlowControls::default() }).unwrap();
    let series = mu_series(&traj, 1.5, TauMode::Shifted, 11, 1e-4, &MinimizerControls::default()).unwrap();
    assert!(series.non_decreasing, "{series:?}");
    assert!(series.converged.iter().all(|c| *c));
    assert!(series.values.last().unwrap() > &series.values[0]);
    assert!((series.taus[0] - 1.5).abs() < 1e-12 && (series.taus.last().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn mu_is_constant_along_flat_and_cigar_flows() {
    let flat = preset(Preset::FlatC1, 257);
    let traj = evolve(&flat, 0.5, FlowControls { speed: 2.0, ..FlowControls::default() }).unwrap();
    for mode in [TauMode::Fixed, TauMode::Shifted] {
        let s = mu_series(&traj, 1.0, mode, 5, 1e-4, &MinimizerControls::default()).unwrap();
        assert!(s.values.iter().all(|m| m.abs() < 1e-4), "{s:?}");
    }
    let cigar = RadialKahlerState::cigar(Grid::new(-16.0, 24.0, 641).unwrap()).unwrap();
    let traj = evolve(&cigar, 1.0, FlowControls { speed: 2.0, ..FlowControls::default() }).unwrap();
    let s = mu_series(&traj, 1.0, TauMode::Fixed, 11, 1e-4, &MinimizerControls::default()).unwrap();
    assert!(s.non_decreasing && s.worst_rate.abs() < 1e-4 * 10.0, "{s:?}");
    let spread = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - s.values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-4, "{:?}", s.values);
}

#[test]
fn shifted_mode_needs_tau_beyond_the_horizon() {
    let traj = evolve(&flat1(65), 1.0, FlowControls { speed: 2.0, ..FlowControls::default() }).unwrap();
    assert!(mu_series(&traj, 0.5, TauMode::Shifted, 3, 1e-4, &MinimizerControls::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// W(kg, f, kτ) = W(g, f, τ).
    #[test]
    fn w_is_invariant_under_parabolic_scaling(k in 0.3f64..3.0, tau in 0.3f64..2.0, a in 0.3f64..1.0) {
        let s = preset(Preset::Cusp, 129);
        let f = distance_field(&s, a);
        let w0 = w_functional(&s, &f, tau, Normalization::Riemannian).unwrap();
        let w1 = w_functional(&s.scaled(k).unwrap(), &f, k * tau, Normalization::Riemannian).unwrap();
        prop_assert!((w0 - w1).abs() < 1e-9 * w0.abs().max(1.0));
    }

    /// Gaussians of any width have W ≥ μ(flat) ≈ 0 (log-Sobolev).
    #[test]
    fn flat_gaussians_obey_log_sobolev(tau in 0.4f64..2.5, width in 0.5f64..2.0) {
        let s = flat1(257);
        let d = s.radial_distance();
        let u: Vec<f64> = d.iter().map(|x| (-x * x / (8.0 * tau * width)).exp()).collect();
        let cutoff = d.iter().position(|&x| x > 10.0 * (tau * width.max(1.0)).sqrt()).unwrap();
        let density = TestDensity::new(&s, tau, u, cutoff).unwrap();
        let w = w_density(&s, &density, Normalization::Riemannian).unwrap();
        prop_assert!(w > -1e-4, "W = {}", w);
    }

    /// Normalized densities stay normalized whatever their shape.
    #[test]
    fn densities_are_normalized(tau in 0.2f64..3.0, c in -1.0f64..1.0) {
        let s = preset(Preset::PositiveBump, 129);
        let d = s.radial_distance();
        let u: Vec<f64> = d.iter().map(|x| (-x * x).exp() * (1.0 + c * x)).collect();
        let density = TestDensity::new(&s, tau, u, s.len() - 3).unwrap();
        prop_assert!((density.normalization(&s) - 1.0).abs() < 1e-10);
    }
}
