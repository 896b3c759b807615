use nalgebra::DMatrix;
use proptest::prelude::*;
use rdv_core::behavior::{predict_position, regress, Anchor, BehaviorDataset, BehaviorPrior};
use rdv_core::path::{BasisIntegralTable, BasisSpec, RoadGeometry, VelocityProfile};

fn reference_table(degree: usize) -> BasisIntegralTable {
    BasisIntegralTable::closed_form(&VelocityProfile::reference(), BasisSpec::new(degree)).unwrap()
}

fn dataset(pairs: &[(f64, f64)]) -> BehaviorDataset {
    let (d, h): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    BehaviorDataset::from_pairs(d, h).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..15.0, 0.0f64..10.0), 1..60)
}

proptest! {
    #[test]
    fn psi_is_additive(degree in 0usize..4, a in 0.0f64..60.0, b in 0.0f64..60.0, c in 0.0f64..60.0) {
        let (a, b, c) = (a, a + b, a + b + c);
        let table = reference_table(degree);
        let whole = table.psi(a, c).unwrap();
        let parts = table.psi(a, b).unwrap() + table.psi(b, c).unwrap();
        for (w, p) in whole.iter().zip(parts.iter()) {
            prop_assert!((w - p).abs() <= 1e-9 * w.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_matches_quadrature(degree in 0usize..4, t0 in 0.0f64..150.0, len in 0.0f64..50.0) {
        let profile = VelocityProfile::reference();
        let basis = BasisSpec::new(degree);
        let exact = BasisIntegralTable::closed_form(&profile, basis).unwrap().psi(t0, t0 + len).unwrap();
        let quad = BasisIntegralTable::quadrature(&profile, basis, 1e-12).psi(t0, t0 + len).unwrap();
        for (e, q) in exact.iter().zip(quad.iter()) {
            prop_assert!((e - q).abs() <= 1e-8 * e.abs().max(1.0));
        }
    }

    #[test]
    fn posterior_ignores_sample_order(pairs in samples(), seed in any::<u64>()) {
        let prior = BehaviorPrior::isotropic(2, 1.0, 9.0).unwrap();
        let basis = BasisSpec::new(1);
        let mut shuffled = pairs.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize).wrapping_mul(31).wrapping_add(i * 17) % (i + 1));
        }
        let a = regress(&prior, &dataset(&pairs), basis).unwrap();
        let b = regress(&prior, &dataset(&shuffled), basis).unwrap();
        prop_assert!((a.mean() - b.mean()).amax() <= 1e-9);
        prop_assert!((a.cov() - b.cov()).amax() <= 1e-12);
    }

    #[test]
    fn rank_one_updates_match_batch(pairs in samples()) {
        let prior = BehaviorPrior::isotropic(2, 4.0, 4.0).unwrap();
        let basis = BasisSpec::new(1);
        let batch = regress(&prior, &dataset(&pairs), basis).unwrap();
        let mut online = regress(&prior, &BehaviorDataset::new(), basis).unwrap();
        for &(d, h) in &pairs {
            online = online.updated(d, h).unwrap();
        }
        prop_assert_eq!(online.sample_count(), pairs.len());
        prop_assert!((batch.mean() - online.mean()).amax() <= 1e-9 * batch.mean().amax().max(1.0));
        prop_assert!((batch.cov() - online.cov()).amax() <= 1e-12);
    }

    #[test]
    fn more_data_never_widens_the_posterior(pairs in samples(), extra in (0.0f64..15.0, 0.0f64..10.0)) {
        let prior = BehaviorPrior::isotropic(2, 1.0, 9.0).unwrap();
        let before = regress(&prior, &dataset(&pairs), BasisSpec::new(1)).unwrap();
        let after = before.updated(extra.0, extra.1).unwrap();
        // Σ_before − Σ_after is positive semi-definite
        let diff: DMatrix<f64> = before.cov() - after.cov();
        let eig = diff.symmetric_eigen();
        prop_assert!(eig.eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn prediction_is_anchor_plus_integral(gain in 0.5f64..1.5, t0 in 0.0f64..100.0, len in 0.0f64..40.0, theta0 in 0.0f64..200.0) {
        let profile = VelocityProfile::reference();
        let h: Vec<f64> = (0..100).map(|k| profile.value(k as f64)).collect();
        let d: Vec<f64> = h.iter().map(|v| gain * v).collect();
        let prior = BehaviorPrior::isotropic(2, 100.0, 1e-8).unwrap();
        let post = regress(&prior, &BehaviorDataset::from_pairs(d, h).unwrap(), BasisSpec::new(1)).unwrap();
        let pred = predict_position(&post, &reference_table(1), Anchor { time: t0, theta: theta0 }, t0 + len).unwrap();
        let exact = theta0 + gain * (10.0 * len - 0.025 * ((t0 + len).powi(2) - t0 * t0));
        prop_assert!((pred.mean - exact).abs() <= 1e-5 * exact.abs().max(1.0));
    }
}

#[test]
fn default_road_is_the_diagonal() {
    let road = RoadGeometry::diagonal();
    let p = road.position_at(123.0).unwrap();
    assert_eq!((p.x, p.y), (123.0, 123.0));
    assert!(road.position_at(road.domain().1 + 1.0).is_err());
}

#[test]
fn arc_length_road_has_unit_speed() {
    let road = RoadGeometry::arc_length_diagonal();
    let a = road.point(10.0);
    let b = road.point(20.0);
    assert!(((b - a).norm() - 10.0).abs() < 1e-12);
}

#[test]
fn zero_length_horizon_predicts_the_anchor() {
    let prior = BehaviorPrior::isotropic(2, 1.0, 9.0).unwrap();
    let post = regress(&prior, &dataset(&[(11.0, 10.0), (10.5, 9.9)]), BasisSpec::new(1)).unwrap();
    let anchor = Anchor { time: 5.0, theta: 42.0 };
    let pred = predict_position(&post, &reference_table(1), anchor, 5.0).unwrap();
    assert_eq!(pred.mean, 42.0);
    assert_eq!(pred.variance, 0.0);
}

#[test]
fn prediction_outside_profile_domain_fails() {
    let prior = BehaviorPrior::isotropic(2, 1.0, 9.0).unwrap();
    let post = regress(&prior, &BehaviorDataset::new(), BasisSpec::new(1)).unwrap();
    assert!(predict_position(&post, &reference_table(1), Anchor { time: 190.0, theta: 0.0 }, 250.0).is_err());
}
