use num_complex::Complex64;
use proptest::prelude::*;

use dispersive_lab::airy::{airy_flow, BandRegion, CutoffSpec};
use dispersive_lab::deform::{apply_deformation, extract_bubble, BubbleSearch, Deformation, DilationExponent};
use dispersive_lab::dyadic::{
    locate_whitney, overlap_count_scaled, region_contains, whitney_matches, BilinearRegion, EnlargedRegion, Family, FrequencyPoint,
};
use dispersive_lab::gkdv::{evolve, SolverConfig};
use dispersive_lab::morrey::{hat_morrey_norm, LatticeTruncation, MorreyParams};
use dispersive_lab::spectral::{
    fractional_derivative, inverse_transform, lebesgue_norm, mixed_spacetime_norm, transform, Exponent, GridFunction, MixedNormSpec,
    SpaceTimeField,
};

const N: usize = 256;
const L: f64 = 64.0;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn fin(p: f64) -> Exponent {
    Exponent::Finite(p)
}

/// Up to three complex Gaussian bumps centred well inside the box.
fn datum() -> impl Strategy<Value = GridFunction> {
    prop::collection::vec((-8.0..8.0f64, 0.7..2.0f64, -1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64), 1..4).prop_map(|bumps| {
        GridFunction::sample(N, L, move |x| {
            bumps
                .iter()
                .map(|&(c, w, re, im, k)| Complex64::new(re, im) * Complex64::from_polar((-((x - c) / w).powi(2)).exp(), k * x))
                .sum()
        })
        .unwrap()
    })
}

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn nonzero(f: &GridFunction) -> bool {
    f.max_abs() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plancherel(f in datum()) {
        let g = transform(&f);
        let lhs: f64 = f.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * f.dx();
        let rhs: f64 = g.coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dxi();
        prop_assume!(lhs > 1e-12);
        prop_assert!(rel(rhs, lhs) <= 1e-12);
        let back = inverse_transform(&g, false).unwrap();
        prop_assert!(max_diff(&back, &f) <= 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn fractional_derivative_inverts_off_the_mean(f in datum(), s in 0.01..2.0f64) {
        let mean: Complex64 = f.samples().iter().sum::<Complex64>() / f.len() as f64;
        let centred = f.with_samples(f.samples().iter().map(|z| z - mean).collect()).unwrap();
        let tol = 1e-10 * f.max_abs().max(1.0);
        let up_down = fractional_derivative(&fractional_derivative(&f, s).unwrap(), -s).unwrap();
        prop_assert!(max_diff(&up_down, &centred) <= tol);
        let down_up = fractional_derivative(&fractional_derivative(&centred, -s).unwrap(), s).unwrap();
        prop_assert!(max_diff(&down_up, &centred) <= tol);
        prop_assert!(fractional_derivative(&f, -s).is_err() || mean.norm() <= 1e-12);
    }

    #[test]
    fn lebesgue_norm_is_absolutely_homogeneous(f in datum(), re in -5.0..5.0f64, im in -5.0..5.0f64, p in 1.0..12.0f64) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3 && nonzero(&f));
        for e in [fin(p), Exponent::Infinite] {
            prop_assert!(rel(lebesgue_norm(&f.scale(c), e), c.norm() * lebesgue_norm(&f, e)) <= 1e-13);
        }
    }

    #[test]
    fn diagonal_mixed_norm_is_flat(vals in prop::collection::vec(-3.0..3.0f64, 8 * 16), p in 1.0..9.0f64) {
        let values: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let t_grid: Vec<f64> = (0..8).map(|i| 0.25 * i as f64).collect();
        let field = SpaceTimeField::new(values.clone(), t_grid, 16, 4.0).unwrap();
        let flat = (values.iter().map(|z| z.norm().powf(p)).sum::<f64>() * 0.25 * 0.25).powf(1.0 / p);
        let got = mixed_spacetime_norm(&field, &MixedNormSpec::diagonal(fin(p)));
        prop_assume!(flat > 1e-9);
        prop_assert!(rel(got, flat) <= 1e-12);
    }

    #[test]
    fn airy_flow_is_unitary_group_commuting_with_shifts(f in datum(), s in -0.5..0.5f64, t in -0.5..0.5f64, shift in -40i32..40) {
        prop_assume!(nonzero(&f));
        let l2 = |g: &GridFunction| lebesgue_norm(g, fin(2.0));
        prop_assert!(rel(l2(&airy_flow(&f, t)), l2(&f)) <= 1e-12);
        let twice = airy_flow(&airy_flow(&f, s), t);
        prop_assert!(max_diff(&twice, &airy_flow(&f, s + t)) <= 1e-12 * f.max_abs());
        let y = shift as f64 * f.dx();
        let a = airy_flow(&f.translate(y), t);
        let b = airy_flow(&f, t).translate(y);
        prop_assert!(max_diff(&a, &b) <= 1e-12 * f.max_abs());
        let (fa, fb) = (transform(&f), transform(&airy_flow(&f, t)));
        let dev = fa.coefficients.iter().zip(&fb.coefficients).map(|(x, y)| (x.norm() - y.norm()).abs()).fold(0.0, f64::max);
        prop_assert!(dev <= 1e-12 * fa.coefficients.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn hat_morrey_is_invariant_under_translation_and_flow(f in datum(), shift in -40i32..40, s in -0.05..0.05f64) {
        prop_assume!(nonzero(&f));
        let params = MorreyParams::hat(fin(25.0 / 14.0), fin(2.0), fin(50.0 / 21.0)).unwrap();
        let tr = LatticeTruncation::for_grid(&f);
        let base = hat_morrey_norm(&f, &params, &tr).unwrap().value;
        let moved = hat_morrey_norm(&f.translate(shift as f64 * f.dx()), &params, &tr).unwrap().value;
        let flowed = hat_morrey_norm(&airy_flow(&f, s), &params, &tr).unwrap().value;
        prop_assert!(rel(moved, base) <= 1e-10);
        prop_assert!(rel(flowed, base) <= 1e-10);
    }

    #[test]
    fn hat_morrey_is_monotone_in_delta(f in datum(), d1 in 2.5..6.0f64, extra in 0.0..10.0f64) {
        prop_assume!(nonzero(&f));
        let tr = LatticeTruncation::for_grid(&f);
        let norm = |d: Exponent| hat_morrey_norm(&f, &MorreyParams::hat(fin(1.8), fin(2.0), d).unwrap(), &tr).unwrap().value;
        let (a, b, c) = (norm(fin(d1)), norm(fin(d1 + extra)), norm(Exponent::Infinite));
        prop_assert!(b <= a * (1.0 + 1e-12));
        prop_assert!(c <= b * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn regions_contain_interior_and_exclude_exterior(
        fam in prop_oneof![Just(Family::A), Just(Family::B)],
        j in -3i32..4, k in 0i64..40, m in prop_oneof![Just(-3i64), Just(-2), Just(2), Just(3)],
        u in 0.0..=1.0f64, w in 0.0..=1.0f64,
    ) {
        prop_assume!(k + m >= 0);
        let base = BilinearRegion::new(fam, j, k, k + m).unwrap();
        let r = EnlargedRegion::unenlarged(base);
        let (a, b) = base.xi_window();
        let xi = a + u * (b - a);
        let (lo, hi) = base.band(xi);
        let inside = FrequencyPoint::from_offset(xi, lo + w * (hi - lo));
        prop_assert!(region_contains(&r, inside));
        let eps = 1e-9 * (hi - lo).abs().max(hi.abs()).max(1e-300);
        prop_assert!(!region_contains(&r, FrequencyPoint::from_offset(xi, hi + eps)));
        prop_assert!(!region_contains(&r, FrequencyPoint::from_offset(xi, lo - eps)));
        let xi_eps = 1e-9 * b.abs().max(1e-300);
        prop_assert!(!region_contains(&r, FrequencyPoint::from_offset(b + xi_eps, lo)));
    }

    #[test]
    fn overlap_is_monotone_in_margin(
        fam in prop_oneof![Just(Family::A), Just(Family::B)],
        lx in -8.0..8.0f64, lv in -12.0..12.0f64, sign in prop::bool::ANY, s1 in 0.0..5.0f64, ds in 0.0..5.0f64,
    ) {
        let v = if sign { lv.exp2() } else { -lv.exp2() };
        let p = FrequencyPoint::from_offset(lx.exp2(), v);
        let a = overlap_count_scaled(fam, p, s1);
        let b = overlap_count_scaled(fam, p, s1 + ds);
        prop_assert!(b.total >= a.total);
        for i in 0..4 {
            prop_assert!(b.per_m[i] >= a.per_m[i]);
        }
    }

    #[test]
    fn whitney_triple_is_unique(a in 0.0..10.0f64, b in 0.0..10.0f64, fa in 0.5..1.0f64, fb in 0.5..1.0f64) {
        let (xi, eta) = (a.exp2() * fa, b.exp2() * fb);
        prop_assume!(xi != eta);
        let found = whitney_matches(xi, eta);
        prop_assert_eq!(found.len(), 1);
        prop_assert_eq!(locate_whitney(xi, eta).unwrap(), found[0]);
    }

    #[test]
    fn cutoff_is_sandwiched(j in -2i32..3, k in 1i64..12, scale in 0.5..4.0f64, u in -0.2..1.2f64, w in -1.0..2.0f64) {
        let region = BilinearRegion::new(Family::A, j, k, k + 2).unwrap();
        let c = CutoffSpec::new(BandRegion::Bilinear { region }, scale * region.canonical_lambda()).unwrap();
        let (a, b) = c.region.xi_window();
        let xi = a + u * (b - a);
        let (lo, hi) = c.region.tau_section(xi.clamp(a, b)).unwrap();
        let tau = lo + w * (hi - lo);
        let psi = c.psi(tau, xi);
        prop_assert!((0.0..=1.0).contains(&psi));
        if c.region.contains(tau, xi) {
            prop_assert_eq!(psi, 1.0);
        }
        if !c.in_enlarged(tau, xi) {
            prop_assert_eq!(psi, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dyadic_dilation_relabels_the_lattice(m in -1i32..=1, width in 1.0..2.5f64, alpha in prop_oneof![Just(2.0f64), Just(3.0)]) {
        let g = GridFunction::sample_real(1024, 64.0, |x| (-(x / width).powi(2)).exp()).unwrap();
        let params = MorreyParams::hat(fin(alpha), fin(alpha + 1.0), fin(alpha + 1.0)).unwrap();
        let tr = LatticeTruncation::new(-8, 12).unwrap();
        let base = hat_morrey_norm(&g, &params, &tr).unwrap().value;
        let d = apply_deformation(&Deformation::new((m as f64).exp2(), 0.0, 0.0, alpha).unwrap(), &g).unwrap();
        let moved = LatticeTruncation::new(tr.j_min - m, tr.j_max - m).unwrap();
        prop_assert!(rel(hat_morrey_norm(&d, &params, &moved).unwrap().value, base) <= 1e-10);
    }

    #[test]
    fn linear_gkdv_is_the_airy_flow(f in datum(), t in 0.01..0.05f64) {
        let real = f.with_samples(f.samples().iter().map(|z| Complex64::new(z.re, 0.0)).collect()).unwrap();
        prop_assume!(nonzero(&real));
        let cfg = SolverConfig { cfl: 1e6, ..SolverConfig::new(1.0, 0.0, L, N, 1e-3) };
        let traj = evolve(&real, &cfg, (0.0, t)).unwrap();
        let exact = airy_flow(&real, *traj.times.last().unwrap());
        prop_assert!(max_diff(traj.last(), &exact) <= 1e-10 * real.max_abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bubble_amplitude_is_invariant_under_shifts(shift in -64i32..64) {
        let phi = GridFunction::sample_real(1024, 64.0, |x| (-x * x / 2.0).exp()).unwrap();
        let search = BubbleSearch { log2_n: (-2, 2), s_max: 0.5, s_steps: 16, pad: 8 };
        let base = extract_bubble(&phi, 2.0, DilationExponent::Scaling, &search).unwrap();
        let y = shift as f64 * phi.dx();
        let moved = extract_bubble(&phi.translate(y), 2.0, DilationExponent::Scaling, &search).unwrap();
        prop_assert!((moved.amplitude - base.amplitude).abs() <= 1e-8 * base.amplitude);
        prop_assert_eq!(moved.deformation.log2_n, base.deformation.log2_n);
        prop_assert!((moved.y - (base.y + y)).abs() <= 1e-9);
    }
}
