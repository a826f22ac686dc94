use num_complex::Complex64;

use dispersive_lab::dyadic::Family;
use dispersive_lab::exponents::{refined_exponents_t, RExp, Q};
use dispersive_lab::lab::{
    builtin_catalog, lacunary_gap, overlap_audit, ratio, sweep, Datum, DatumKind, Domain, Estimate, FamilyKind, InequalitySpec,
    OverlapAuditConfig, TestFamily,
};
use dispersive_lab::morrey::LatticeTruncation;
use dispersive_lab::spectral::GridSpectrum;
use dispersive_lab::LabError;

#[test]
fn ratios_are_invariant_under_grid_translation() {
    let f = TestFamily::new(FamilyKind::RandomBandLimited, 1, 21).members().unwrap().remove(0);
    let lattice = Some(LatticeTruncation::for_spectrum(&GridSpectrum::new(&f)).widen(1));
    let t_max = 0.5 * Domain::default().window(&f).unwrap().t_max.unwrap();
    let dom = Domain { lattice, t_max: Some(t_max), ..Domain::default() };
    let g = f.translate(17.0 * f.dx());
    for spec in [
        InequalitySpec::mixed(RExp::integer(8), RExp::integer(8)).unwrap(),
        InequalitySpec::refined_space(RExp::integer(6), RExp::integer(6), Q::new(1, 30)).unwrap(),
        InequalitySpec::refined_time(RExp::integer(8), RExp::integer(8), Q::new(1, 100)).unwrap(),
    ] {
        let a = ratio(&spec, Datum::Grid(&f), &dom).unwrap();
        let b = ratio(&spec, Datum::Grid(&g), &dom).unwrap();
        assert!((a - b).abs() <= 1e-8 * a, "{}: {a} vs {b}", spec.name);
    }
}

#[test]
fn ratios_are_scale_free() {
    let f = TestFamily::new(FamilyKind::ModulatedGaussian, 3, 0).members().unwrap().remove(2);
    for spec in Estimate::ALL.iter().filter_map(|e| e.standard_grid().into_iter().next()) {
        if spec.datum_kind() != DatumKind::Grid {
            continue;
        }
        let a = ratio(&spec, Datum::Grid(&f), &Domain::default()).unwrap();
        let b = ratio(&spec, Datum::Grid(&f.scale(Complex64::new(0.0, 3.5))), &Domain::default()).unwrap();
        assert!((a - b).abs() <= 1e-10 * a, "{}: {a} vs {b}", spec.name);
    }
}

#[test]
fn multiplier_point_is_stable_across_random_seeds() {
    let point = Estimate::ALL
        .iter()
        .find(|e| e.name() == "multiplier-space")
        .expect("multiplier estimate")
        .standard_grid()
        .remove(0);
    for seed in 0..10 {
        let fam = TestFamily::new(FamilyKind::RandomBandLimited, 2, 1000 + seed);
        let r = sweep(std::slice::from_ref(&point), &fam, &Domain::default()).unwrap().remove(0);
        assert!(r.ratios.iter().chain(&r.refined_ratios).all(|v| v.is_finite()));
        assert!(r.drift <= 0.05, "seed {seed}: drift {}", r.drift);
    }
}

#[test]
fn catalog_names_are_unique_and_routable() {
    let cat = builtin_catalog();
    let mut names: Vec<&str> = cat.iter().map(|s| s.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), cat.len());
    for e in Estimate::ALL {
        assert_eq!(e.name().parse::<Estimate>().unwrap(), e);
        assert_eq!(e.standard_grid().len(), 5);
    }
}

#[test]
fn grid_specs_reject_trajectory_sweeps() {
    let fam = TestFamily::new(FamilyKind::Gaussian, 1, 0);
    let small = builtin_catalog().into_iter().filter(|s| s.datum_kind() == DatumKind::Trajectory).collect::<Vec<_>>();
    assert!(!small.is_empty());
    assert!(matches!(sweep(&small, &fam, &Domain::default()), Err(LabError::Config(_))));
}

#[test]
fn lacunary_gap_is_increasing_for_small_loss() {
    let r = refined_exponents_t(RExp::integer(8), RExp::integer(8), Q::new(1, 100)).unwrap();
    let g = lacunary_gap(&r, 4, 64.0).unwrap();
    assert!(g.strictly_growing);
    assert_eq!(g.points.len(), 4);
    assert_eq!(g.points[0].growth, 1.0);
}

#[test]
fn overlap_audit_is_reproducible() {
    let cfg = OverlapAuditConfig {
        family: Family::B,
        samples: 3000,
        seed: 9,
        adversarial: 300,
        log_xi: (-12.0, 12.0),
        log_slope: (-20.0, 20.0),
    };
    let a = serde_json::to_string(&overlap_audit(&cfg)).unwrap();
    let b = serde_json::to_string(&overlap_audit(&cfg)).unwrap();
    assert_eq!(a, b);
    assert!(overlap_audit(&cfg).total_ok());
}
