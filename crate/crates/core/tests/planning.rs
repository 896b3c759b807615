use nalgebra::{DVector, Vector2};
use proptest::prelude::*;
use rdv_core::behavior::{regress, Anchor, BehaviorDataset, BehaviorPosterior, BehaviorPrior};
use rdv_core::energy::{min_energy_to_reach, segment_energy, step, EnergyParams, UasState};
use rdv_core::ocp::{solve, velocities_from_waypoints, waypoints_from_velocities, OcpInputs, SolveOutcome, SolverSettings};
use rdv_core::path::{BasisIntegralTable, BasisSpec, RoadGeometry, VelocityProfile};
use rdv_core::risk::{downside_potential, Decision};

fn vec2() -> impl Strategy<Value = Vector2<f64>> {
    (-500.0f64..500.0, -500.0f64..500.0).prop_map(|(x, y)| Vector2::new(x, y))
}

fn table() -> BasisIntegralTable {
    BasisIntegralTable::closed_form(&VelocityProfile::reference(), BasisSpec::new(1)).unwrap()
}

fn inputs<'a>(
    post: &'a BehaviorPosterior,
    table: &'a BasisIntegralTable,
    geometry: &'a RoadGeometry,
    clock: f64,
    theta: f64,
) -> OcpInputs<'a> {
    OcpInputs {
        x0: Vector2::new(500.0, 0.0),
        energy: 5000.0,
        clock,
        posterior: post,
        table,
        geometry,
        anchor: Anchor { time: clock, theta },
        landing: Vector2::new(500.0, 0.0),
        abort: Vector2::new(500.0, 0.0),
        horizon: 80.0 - clock,
        dwell: 3.0,
        params: EnergyParams::default(),
        variance_weight: 0.01,
        energy_reserve: 200.0,
    }
}

proptest! {
    #[test]
    fn steps_sum_to_segment_energy(v in (-10.0f64..10.0, -10.0f64..10.0), n in 1usize..50, dt in 0.05f64..2.0) {
        let params = EnergyParams::default();
        let v = Vector2::new(v.0, v.1);
        let mut s = UasState { position: Vector2::zeros(), energy: 1e6, clock: 0.0 };
        for _ in 0..n {
            s = step(&s, v, &params, dt).unwrap().state;
        }
        let used = 1e6 - s.energy;
        let expected = segment_energy(v, n as f64 * dt, &params).unwrap();
        prop_assert!((used - expected).abs() <= 1e-6 * expected.max(1.0));
        prop_assert!((s.position - v * (n as f64 * dt)).norm() <= 1e-9 * (1.0 + v.norm() * n as f64 * dt));
    }

    #[test]
    fn reach_energy_is_convex_in_the_target(from in vec2(), a in vec2(), b in vec2(), t in 40.0f64..100.0) {
        let params = EnergyParams::default();
        let f = |q: Vector2<f64>| min_energy_to_reach(from, q, t, &params).unwrap();
        let mid = (a + b) / 2.0;
        if let (Some(fa), Some(fb), Some(fm)) = (f(a), f(b), f(mid)) {
            prop_assert!(fm <= (fa + fb) / 2.0 + 1e-9);
        }
    }

    #[test]
    fn two_leg_energy_is_convex_along_a_line(x1 in vec2(), xl in vec2(), a in vec2(), b in vec2(), lam in 0.0f64..1.0) {
        let params = EnergyParams { v_max: 1e3, ..EnergyParams::default() };
        let legs = |q: Vector2<f64>| {
            min_energy_to_reach(x1, q, 20.0, &params).unwrap().unwrap()
                + min_energy_to_reach(q, xl, 30.0, &params).unwrap().unwrap()
        };
        let q = a * lam + b * (1.0 - lam);
        prop_assert!(legs(q) <= lam * legs(a) + (1.0 - lam) * legs(b) + 1e-6);
    }

    #[test]
    fn velocity_elimination_round_trips(x0 in vec2(), wp in prop::array::uniform4(vec2()), t in prop::array::uniform4(3.0f64..60.0)) {
        let v = velocities_from_waypoints(x0, &wp, &t, 3.0).unwrap();
        let back = waypoints_from_velocities(x0, &v, &t);
        for (a, b) in wp.iter().zip(&back) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
        }
        let again = velocities_from_waypoints(x0, &back, &t, 3.0).unwrap();
        for (a, b) in v.iter().zip(&again) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn downside_grows_with_confidence_width(scale in 0.1f64..3.0, g1 in 0.0f64..3.0, g2 in 0.0f64..3.0) {
        let prior = BehaviorPrior::isotropic(2, 1.0, 9.0).unwrap();
        let profile = VelocityProfile::reference();
        let h: Vec<f64> = (0..15).map(|k| profile.value(k as f64)).collect();
        let d: Vec<f64> = h.iter().enumerate().map(|(k, v)| 1.1 * v + if k % 2 == 0 { 2.0 } else { -2.0 }).collect();
        let post = regress(&prior, &BehaviorDataset::from_pairs(d, h).unwrap(), BasisSpec::new(1)).unwrap()
            .with_scaled_covariance(scale);
        let (table, geom) = (table(), RoadGeometry::diagonal());
        let inp = inputs(&post, &table, &geom, 15.0, 160.0);
        let SolveOutcome::Optimal { plan, .. } = solve(&inp, None, &SolverSettings::default()).unwrap() else {
            return Ok(());
        };
        let pred = rdv_core::behavior::predict_position(&post, &table, inp.anchor, plan.rendezvous_time).unwrap();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let r_lo = downside_potential(&plan, &pred, &geom, &inp.params, lo).unwrap().rho;
        let r_hi = downside_potential(&plan, &pred, &geom, &inp.params, hi).unwrap().rho;
        prop_assert!(r_lo <= r_hi + 1e-9);
    }
}

#[test]
fn elimination_examples() {
    let wp = [Vector2::new(10.0, 0.0), Vector2::new(10.0, 0.0), Vector2::new(10.0, 0.0), Vector2::new(10.0, 0.0)];
    let v = velocities_from_waypoints(Vector2::zeros(), &wp, &[2.0, 3.0, 3.0, 3.0], 2.0).unwrap();
    assert_eq!(v[0], Vector2::new(5.0, 0.0));
    assert_eq!(v[1], Vector2::zeros());
    assert!(velocities_from_waypoints(Vector2::zeros(), &wp, &[1.0, 3.0, 3.0, 3.0], 2.0).is_err());
}

#[test]
fn zero_variance_moving_driver_lands_on_the_road() {
    let post = BehaviorPosterior::deterministic(DVector::from_vec(vec![0.0, 1.0]), BasisSpec::new(1));
    let (table, geom) = (table(), RoadGeometry::diagonal());
    let inp = inputs(&post, &table, &geom, 10.0, 97.5);
    let outcome = solve(&inp, None, &SolverSettings::default()).unwrap();
    let plan = outcome.plan().expect("feasible");
    let expected = geom.point(rdv_core::behavior::predict_position(&post, &table, inp.anchor, plan.rendezvous_time).unwrap().mean);
    assert!((plan.waypoints[1] - expected).norm() <= 1e-4);
    assert!(plan.violations(&inp.budget()).is_empty());
}

#[test]
fn returned_plans_keep_the_abort_branch() {
    let post = BehaviorPosterior::deterministic(DVector::from_vec(vec![0.0, 1.2]), BasisSpec::new(1));
    let (table, geom) = (table(), RoadGeometry::diagonal());
    for clock in [0.0, 10.0, 20.0, 30.0] {
        let theta = 1.2 * (10.0 * clock - 0.025 * clock * clock);
        let inp = inputs(&post, &table, &geom, clock, theta);
        if let SolveOutcome::Optimal { plan, .. } = solve(&inp, None, &SolverSettings::default()).unwrap() {
            assert!(plan.abort_branch_ok(inp.energy, inp.horizon));
            assert!(plan.violations(&inp.budget()).is_empty(), "{:?}", plan.violations(&inp.budget()));
        }
    }
}

#[test]
fn decision_is_abort_for_infinite_downside() {
    assert_eq!(rdv_core::risk::commit_check(f64::INFINITY, 1e12), Decision::Abort);
}
