mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormsift_core::geo::*;
use stormsift_core::ingest::GeoLocation;

fn loc(lat: f64, lon: f64) -> GeoLocation {
    GeoLocation { lat, lon }
}

#[test]
fn idw_matches_reference_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(2017);
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let stations: Vec<((f64, f64), f64)> = (0..n)
            .map(|_| ((rng.random_range(24.0..31.0), rng.random_range(-88.0..-79.0)), rng.random_range(0.0..120.0)))
            .collect();
        let p = (rng.random_range(24.0..31.0), rng.random_range(-88.0..-79.0));
        let readings: Vec<(GeoLocation, f64)> = stations.iter().map(|&((a, b), v)| (loc(a, b), v)).collect();
        let got = idw_interpolate(loc(p.0, p.1), &readings, 2.0).unwrap();
        let want = common::idw_reference(p, &stations, 2.0);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        let lo = stations.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let hi = stations.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        assert!(got >= lo && got <= hi);
    }
}

#[test]
fn idw_snaps_to_coincident_station() {
    let readings = vec![(loc(27.0, -82.0), 40.0), (loc(28.0, -81.0), 10.0)];
    assert_eq!(idw_interpolate(loc(27.0, -82.0), &readings, 2.0).unwrap(), 40.0);
    assert!(matches!(idw_interpolate(loc(27.0, -82.0), &[], 2.0), Err(GeoError::NoReadings)));
}

#[test]
fn eye_distance_is_clamped() {
    assert_eq!(distance_to_eye(loc(27.0, -82.0), loc(27.0, -82.0), 1.0), 1.0);
    let d = distance_to_eye(loc(27.0, -82.0), loc(28.0, -82.0), 1.0);
    assert!((d - 69.09).abs() < 0.01, "{d}");
}

proptest! {
    #[test]
    fn idw_is_bounded(
        stations in prop::collection::vec(((20.0..35.0f64, -95.0..-75.0f64), 0.0..200.0f64), 1..8),
        p in (20.0..35.0f64, -95.0..-75.0f64),
        k in 0.5..4.0f64,
    ) {
        let readings: Vec<(GeoLocation, f64)> = stations.iter().map(|&((a, b), v)| (loc(a, b), v)).collect();
        let got = idw_interpolate(loc(p.0, p.1), &readings, k).unwrap();
        let lo = stations.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let hi = stations.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(got >= lo && got <= hi);
    }

    #[test]
    fn idw_of_constant_field_is_constant(
        stations in prop::collection::vec((20.0..35.0f64, -95.0..-75.0f64), 1..8),
        p in (20.0..35.0f64, -95.0..-75.0f64),
        v in 0.0..100.0f64,
    ) {
        let readings: Vec<(GeoLocation, f64)> = stations.iter().map(|&(a, b)| (loc(a, b), v)).collect();
        let got = idw_interpolate(loc(p.0, p.1), &readings, 2.0).unwrap();
        prop_assert!((got - v).abs() <= 1e-9 * v.max(1.0));
    }

    #[test]
    fn minmax_lands_on_unit_interval(xs in prop::collection::vec(-1e6..1e6f64, 2..60)) {
        prop_assume!(xs.iter().any(|&x| x != xs[0]));
        let ys = transform_minmax(&xs).unwrap();
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(lo, 0.0);
        prop_assert_eq!(hi, 1.0);
    }

    #[test]
    fn shapiro_w_is_in_unit_interval_and_location_scale_free(
        xs in prop::collection::vec(-1e3..1e3f64, 3..80),
        a in -50.0..50.0f64,
        b in 0.1..20.0f64,
    ) {
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-6));
        let w = shapiro_wilk(&xs).unwrap();
        prop_assert!(w > 0.0 && w <= 1.0 + 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        prop_assert!((shapiro_wilk(&shifted).unwrap() - w).abs() < 1e-9);
    }
}

#[test]
fn shapiro_matches_reference_values() {
    for (dist, n, seed, want) in common::SHAPIRO_REFERENCE {
        let xs = common::sample(dist, n, seed);
        let got = shapiro_wilk(&xs).unwrap();
        assert!((got - want).abs() < 1e-3, "{dist:?} n={n}: {got} vs {want}");
    }
}

#[test]
fn shapiro_size_limits() {
    assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
    assert!(shapiro_wilk(&vec![1.0; 5001]).is_err());
}

#[test]
fn log_of_lognormal_is_more_normal() {
    let xs = common::lognormal(500, 0.0, 1.0, 77);
    let raw = shapiro_wilk(&xs).unwrap();
    let logged = shapiro_wilk(&transform_log10(&xs, DEFAULT_EPSILON)).unwrap();
    assert!(logged >= raw + 0.05, "{logged} vs {raw}");
}

#[test]
fn boxcox_lambda_agrees_with_grid_search() {
    let xs = common::lognormal(5000, 0.5, 0.8, 31);
    let fitted = fit_boxcox_lambda(&xs, DEFAULT_EPSILON).unwrap();
    let grid = common::boxcox_grid_lambda(&xs, -5.0, 5.0, 0.01);
    assert!(fitted.abs() <= 0.15, "{fitted}");
    assert!((fitted - grid).abs() <= 0.011, "{fitted} vs {grid}");
}

#[test]
fn boxcox_recovers_square_root() {
    let xs: Vec<f64> = common::sample(common::Dist::Normal, 3000, 12).iter().map(|z| (10.0 + z).powi(2)).collect();
    let grid = common::boxcox_grid_lambda(&xs, -5.0, 5.0, 0.01);
    let fitted = fit_boxcox_lambda(&xs, DEFAULT_EPSILON).unwrap();
    assert!((fitted - grid).abs() <= 0.011, "{fitted} vs {grid}");
    assert!((fitted - 0.5).abs() < 0.2, "{fitted}");
}

#[test]
fn boxcox_needs_twenty_samples() {
    assert!(fit_boxcox_lambda(&[1.0; 19], DEFAULT_EPSILON).is_err());
}

#[test]
fn selection_prefers_normalizing_transforms() {
    let samples = common::synthetic_storm(3000, 5);
    let products: Vec<f64> = samples.iter().map(|(g, _)| g.wind * g.rain).collect();
    let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi / lo >= 1e4, "span {lo}..{hi}");

    let sel = select_geo_model(&samples, &GeoParams::default()).unwrap();
    let worst_normalized = sel
        .candidates
        .iter()
        .filter(|c| c.transform != TransformKind::MinMax)
        .filter_map(|c| c.rank)
        .max()
        .unwrap();
    let best_raw = sel.candidates.iter().filter(|c| c.transform == TransformKind::MinMax).filter_map(|c| c.rank).min().unwrap();
    assert!(worst_normalized < best_raw, "{worst_normalized} vs {best_raw}");
    assert_ne!(sel.chosen().transform, TransformKind::MinMax);
    assert!(sel.chosen().rank.unwrap() <= TOP_K);

    let cal = GeoCalibration::from_text(&sel.calibration.to_text()).unwrap();
    for (g, _) in samples.iter().take(50) {
        assert_eq!(cal.score(g), sel.calibration.score(g));
    }
}
